import pytest

from pwave_volume.errors import DomainError
from pwave_volume.refpairs import RefPairSpec, eval_pair, reference_potential, wronskian

SPECS = [
    RefPairSpec("BC2", 1),
    RefPairSpec("BC2", 3),
    RefPairSpec("BC2k", 1, k=0.5),
    RefPairSpec("BC23", 1, c3f=1.6),
    RefPairSpec("BC23", 3, c3f=0.4),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda spec: f"{spec.bc}-l{spec.ell}")
@pytest.mark.parametrize("x", [0.5, 3.0, 50.0])
def test_pair_wronskian(spec, x):
    p = eval_pair(spec, x)
    assert p.phi * p.dpsi - p.dphi * p.psi == pytest.approx(wronskian(spec), rel=1e-9)


def test_bc2_values():
    p = eval_pair(RefPairSpec("BC2", 1), 2.0)
    assert p == (4.0, 0.5, 4.0, -0.25)


def test_bc2k_threshold_limit():
    k = 1e-6
    spec = RefPairSpec("BC2k", 1, k=k)
    for x in (20.0, 80.0, 200.0):
        p = eval_pair(spec, x)
        assert p.phi * 3.0 / k**2 == pytest.approx(x**2, rel=1e-6)
        assert p.psi * k == pytest.approx(1.0 / x, rel=1e-6)


def test_bc23_tends_to_bc2():
    weak = eval_pair(RefPairSpec("BC23", 1, c3f=1e-6), 2.0)
    free = eval_pair(RefPairSpec("BC2", 1), 2.0)
    for a, b in zip(weak, free):
        assert a == pytest.approx(b, rel=1e-4)


def test_bc23_large_distance():
    p = eval_pair(RefPairSpec("BC23", 1, c3f=1.6), 1e4)
    assert p.phi / 1e8 == pytest.approx(1.0, rel=1e-3)
    assert p.psi * 1e4 == pytest.approx(1.0, rel=1e-3)


def test_reference_potential():
    assert reference_potential(RefPairSpec("BC23", 1, c3f=1.6), 2.0) == pytest.approx(
        2 / 4 - 1.6 / 8
    )
    assert reference_potential(RefPairSpec("BC2k", 1, k=0.3), 2.0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"bc": "BC2k", "ell": 1},
        {"bc": "BC23", "ell": 1},
        {"bc": "BC3", "ell": 1},
        {"bc": "BC2", "ell": -1},
        {"bc": "BC2", "ell": 1, "k": 0.1},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(DomainError):
        RefPairSpec(**kwargs)


def test_eval_pair_rejects_origin():
    with pytest.raises(DomainError):
        eval_pair(RefPairSpec("BC2", 1), 0.0)
