"""click command group of the pwave-volume front end"""

import json
import logging

import click
import numpy as np

from pwave_volume import levy_keller, potentials, scan, units, volfit
from pwave_volume.ccsolve import GridControl, NodalLine, SolveRequest, threshold_solution
from pwave_volume.cli import formats, repro
from pwave_volume.cli.cache import ResultCache, cache_directory, request_key
from pwave_volume.cli.config import config_hash, load_config

LOGGER = logging.getLogger(__name__)


def setup_logger(level):
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger().setLevel(getattr(logging, level))


def _config(ctx, **flags):
    overrides = dict(ctx.obj["overrides"])
    overrides.update(flags)
    config = load_config(ctx.obj["config_path"], overrides)
    setup_logger("DEBUG" if ctx.obj["verbose"] else config.log_level)
    return config


def _emit(ctx, text, path=None):
    path = path or (ctx.obj["out"] if ctx.obj else None)
    if path:
        with open(path, "w", encoding="utf8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _cached(config, command, compute, *extra):
    """Rendered payload from the cache, computed and stored on a miss"""
    if config.seedless:
        return compute()
    cache = ResultCache(cache_directory(config.cache_dir))
    key = request_key(command, config_hash(config), *extra)
    payload = cache.get(key)
    if payload is None:
        payload = compute()
        cache.put(key, command, payload)
    return payload


def _settings(config, n=None):
    return scan.ScanSettings(
        n=n or config.n,
        bc=config.bc,
        x_max_grid=tuple(
            volfit.default_x_max_grid(
                config.xmax_lo, config.xmax_hi, config.xmax_points
            ).tolist()
        ),
        grid=GridControl(rtol=config.rtol, mode=config.mode),
        workers=config.workers,
    )


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="flat key=value configuration file",
)
@click.option(
    "--format", "output_format", type=click.Choice(["csv", "json"]), default=None
)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--cache-dir", default=None, help="result cache directory")
@click.option("--seedless", is_flag=True, default=False, help="bypass the cache")
@click.option("--workers", type=int, default=None)
@click.option("--verbose", "-v", is_flag=True, default=False)
@click.pass_context
def cli(ctx, config_path, output_format, out, cache_dir, seedless, workers, verbose):
    """Generalized p-wave scattering volume in a dipolar field"""
    ctx.ensure_object(dict)
    ctx.obj.update(
        config_path=config_path,
        out=out,
        verbose=verbose,
        overrides={
            "format": output_format,
            "cache_dir": cache_dir,
            "seedless": True if seedless else None,
            "workers": workers,
        },
    )


@cli.command("units")
@click.option("--mu-amu", type=float, default=None, help="reduced mass (u)")
@click.option("--c6-au", type=float, default=None, help="C6 (Hartree bohr^6)")
@click.option("--alpha1-au", type=float, default=None, help="polarizability (bohr^3)")
@click.option("--alpha2-au", type=float, default=None, help="polarizability (bohr^3)")
@click.option("--intensity-si", type=float, default=None, help="laser intensity (W/m^2)")
@click.pass_context
def units_command(ctx, mu_amu, c6_au, alpha1_au, alpha2_au, intensity_si):
    """Reduced units sigma, epsilon, beta and the reduced intensity"""
    config = _config(
        ctx,
        mu_amu=mu_amu,
        c6_au=c6_au,
        alpha1_au=alpha1_au,
        alpha2_au=alpha2_au,
        intensity_si=intensity_si,
    )
    required = ("mu_amu", "c6_au", "alpha1_au", "alpha2_au")
    missing = [key for key in required if getattr(config, key) is None]
    if missing:
        msg = f"missing inputs: {', '.join(missing)}"
        raise click.UsageError(msg)

    u = units.unit_system_from_atomic(
        config.mu_amu, config.c6_au, config.alpha1_au, config.alpha2_au
    )
    pairs = [
        ("sigma_m", u.sigma),
        ("epsilon_J", u.epsilon),
        ("beta_W_per_m2", u.beta_intensity),
    ]
    if config.intensity_si is not None:
        pairs.append(("intensity_ru", units.intensity_to_ru(config.intensity_si, u)))
        pairs.append(("dipole_strength", units.dipole_strength(config.intensity_si, u)))
    _emit(ctx, formats.render_key_values(pairs))


@cli.command("coeffs")
@click.option("--model", type=click.Choice(potentials.MODELS), default=None)
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--oracle", is_flag=True, default=False, help="numerical series")
@click.pass_context
def coeffs_command(ctx, model, m, intensity, oracle):
    """Effective p-wave multipole coefficients"""
    config = _config(ctx, model=model, m=m, intensity=intensity)
    if oracle:
        if config.model == "diabatic":
            raise click.UsageError("the series oracle covers adiabatic models only")
        V = potentials.adiabatic_series_oracle(
            config.m,
            config.intensity,
            include_nonadiabatic=config.model == "nonadiabatic",
        )
    else:
        V = potentials.multipole_model(config.model, config.m, config.intensity)

    columns = ["model", "m", "intensity", "c2", "c3", "c4", "c5", "c6"]
    record = {
        "model": config.model,
        "m": config.m,
        "intensity": config.intensity,
        "c2": V.c2,
        "c3": V.c3,
        "c4": V.c4,
        "c5": V.c5,
        "c6": V.c6,
    }
    _emit(
        ctx,
        formats.render_records(
            [record], columns, config_hash(config), config.format
        ),
    )


@cli.command("lk")
@click.option("--model", type=click.Choice(potentials.MODELS), default=None)
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--bc", type=click.Choice(["BC2", "BC23"]), default=None)
@click.option("--c3f", type=float, default=None, help="BC23 coefficient, |c3| by default")
@click.option("--m0", type=float, default=0.0, help="volume entering the expansions")
@click.pass_context
def lk_command(ctx, model, m, intensity, bc, c3f, m0):
    """Analytic expansions of M, A and u"""
    config = _config(ctx, model=model, m=m, intensity=intensity, bc=bc, c3f=c3f)
    V = potentials.multipole_model(config.model, config.m, config.intensity)
    c3f = None
    if config.bc == "BC23":
        c3f = config.c3f if config.c3f is not None else abs(V.c3)

    records = []
    expansions = (
        ("M", levy_keller.m_expansion(V, config.bc, c3f, M0=m0)),
        ("A", levy_keller.a_expansion(V, config.bc, c3f)),
        ("u", levy_keller.u_expansion(V, config.bc, c3f, M0=m0)),
    )
    for name, expansion in expansions:
        for tag, value in expansion.terms:
            records.append({"quantity": name, "tag": tag, "value": value})

    alpha, beta = levy_keller.linear_relation_analytic(V)
    records.append({"quantity": "alpha_BC2", "tag": "", "value": alpha})
    records.append({"quantity": "beta_BC2", "tag": "", "value": beta})
    if c3f is not None:
        records.append(
            {
                "quantity": "delta_M0",
                "tag": "",
                "value": levy_keller.delta_m0(V.c3, V.c4, c3f),
            }
        )
    columns = ["quantity", "tag", "value"]
    _emit(
        ctx, formats.render_records(records, columns, config_hash(config), config.format)
    )


def _request(config):
    return SolveRequest(
        channels=potentials.ChannelSet(m=config.m, n=config.n),
        intensity=config.intensity,
        nodal=NodalLine(config.x00, config.gamma_E, config.gamma_L, config.gamma_I),
        bc=config.bc,
        x_max=config.x_max,
        grid=GridControl(rtol=config.rtol, mode=config.mode),
    )


@cli.command("solve")
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--x00", type=float, default=None)
@click.option("--n", type=int, default=None)
@click.option("--bc", type=click.Choice(["BC2", "BC23"]), default=None)
@click.option("--xmax", "x_max", type=float, default=None)
@click.option("--gammaE", "gamma_E", type=float, default=None)
@click.option("--gammaL", "gamma_L", type=float, default=None)
@click.option("--gammaI", "gamma_I", type=float, default=None)
@click.option("--mode", type=click.Choice(["fast", "faithful"]), default=None)
@click.pass_context
def solve_command(ctx, m, intensity, x00, n, bc, x_max, gamma_E, gamma_L, gamma_I, mode):
    """Coupled-channel threshold solution at one x_max (JSON)"""
    config = _config(
        ctx,
        m=m,
        intensity=intensity,
        x00=x00,
        n=n,
        bc=bc,
        x_max=x_max,
        gamma_E=gamma_E,
        gamma_L=gamma_L,
        gamma_I=gamma_I,
        mode=mode,
    )
    solution = threshold_solution(_request(config))
    data = solution.as_dict()
    data["config_hash"] = config_hash(config)
    _emit(ctx, formats.render_json(data))


@cli.command("fit")
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--x00", type=float, default=None)
@click.option("--n", type=int, default=None)
@click.option("--bc", type=click.Choice(["BC2", "BC23"]), default=None)
@click.option("--xmax-lo", type=float, default=None)
@click.option("--xmax-hi", type=float, default=None)
@click.option("--points", "xmax_points", type=int, default=None)
@click.option("--mode", type=click.Choice(["fast", "faithful"]), default=None)
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def fit_command(
    ctx, m, intensity, x00, n, bc, xmax_lo, xmax_hi, xmax_points, mode, trace_out
):
    """Fit M(x_max) and report v_m and eta_m (JSON); trace as CSV"""
    config = _config(
        ctx,
        m=m,
        intensity=intensity,
        x00=x00,
        n=n,
        bc=bc,
        xmax_lo=xmax_lo,
        xmax_hi=xmax_hi,
        xmax_points=xmax_points,
        mode=mode,
    )
    digest = config_hash(config)

    def compute():
        grid = volfit.default_x_max_grid(
            config.xmax_lo, config.xmax_hi, config.xmax_points
        )
        trace = volfit.m_trace(
            config.m,
            config.intensity,
            config.x00,
            n=config.n,
            bc=config.bc,
            x_max_grid=grid,
            grid=GridControl(rtol=config.rtol, mode=config.mode),
            nodal=NodalLine(config.x00, config.gamma_E, config.gamma_L, config.gamma_I),
            workers=config.workers,
        )
        fit = volfit.fit_expansion(trace, threshold=config.residual_threshold)
        data = fit.as_dict()
        data["config_hash"] = digest
        return json.dumps(
            {
                "main": formats.render_json(data),
                "trace": formats.render_csv(["x_max", "M"], trace.rows(), digest),
            }
        )

    bundle = json.loads(_cached(config, "fit", compute))
    _emit(ctx, bundle["main"])
    if trace_out:
        _emit(ctx, bundle["trace"], trace_out)


@cli.command("scan")
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--x00", type=float, default=None, help="fixed x00 of an intensity scan")
@click.option("--n", type=int, default=None)
@click.option("--bc", type=click.Choice(["BC2", "BC23"]), default=None)
@click.option("--x00-lo", type=float, default=None)
@click.option("--x00-hi", type=float, default=None)
@click.option("--points", type=int, default=None)
@click.option("--axis", type=click.Choice(["x00", "intensity"]), default="x00")
@click.option("--intensity-lo", type=float, default=None)
@click.option("--intensity-hi", type=float, default=None)
@click.option("--resonances-out", type=click.Path(dir_okay=False), default=None)
@click.option("--gnuplot-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def scan_command(
    ctx,
    m,
    intensity,
    x00,
    n,
    bc,
    x00_lo,
    x00_hi,
    points,
    axis,
    intensity_lo,
    intensity_hi,
    resonances_out,
    gnuplot_out,
):
    """Scan M0 over x00 (or intensity) and locate resonances"""
    config = _config(
        ctx,
        m=m,
        intensity=intensity,
        x00=x00,
        n=n,
        bc=bc,
        x00_lo=x00_lo,
        x00_hi=x00_hi,
        points=points,
        intensity_lo=intensity_lo,
        intensity_hi=intensity_hi,
    )
    digest = config_hash(config)

    def compute():
        settings = _settings(config)
        if axis == "x00":
            grid = scan.default_x00_grid(config.x00_lo, config.x00_hi, config.points)
            curve, resonances = scan.scan_x00(config.m, config.intensity, grid, settings)
        else:
            grid = np.linspace(config.intensity_lo, config.intensity_hi, config.points)
            curve, resonances = scan.scan_intensity(config.m, config.x00, grid, settings)

        records = formats.curve_records(curve, resonances)
        columns = [axis, "M0", "pole_flag", "bracket_lo", "bracket_hi"]
        for record in records:
            record[axis] = record.pop("axis")
        listing = [resonance.as_dict() for resonance in resonances]
        return json.dumps(
            {
                "main": formats.render_records(records, columns, digest, config.format),
                "resonances": formats.render_json(listing),
                "gnuplot": formats.render_gnuplot([axis, "M0"], curve.rows_xy()),
            }
        )

    bundle = json.loads(_cached(config, f"scan-{axis}", compute))
    _emit(ctx, bundle["main"])
    if resonances_out:
        _emit(ctx, bundle["resonances"], resonances_out)
    if gnuplot_out:
        _emit(ctx, bundle["gnuplot"], gnuplot_out)


@cli.group("repro")
def repro_group():
    """Regenerate the coefficient tables and the scan figures"""


@repro_group.command("table2")
@click.pass_context
def table2_command(ctx):
    config = _config(ctx)
    digest = config_hash(config)

    def compute():
        columns, records = repro.table2()
        return formats.render_records(records, columns, digest, config.format)

    _emit(ctx, _cached(config, "repro-table2", compute))


@repro_group.command("table3")
@click.option("--intensity", type=float, default=None)
@click.option("--m", type=int, default=None)
@click.option("--n", type=int, default=None)
@click.pass_context
def table3_command(ctx, intensity, m, n):
    config = _config(ctx, intensity=intensity, m=m, n=n)
    digest = config_hash(config)

    def compute():
        columns, records = repro.table3(
            config.intensity, m=config.m, settings=_settings(config)
        )
        return formats.render_records(records, columns, digest, config.format)

    _emit(ctx, _cached(config, "repro-table3", compute))


@repro_group.command("fig1")
@click.option("--points", type=int, default=None)
@click.pass_context
def fig1_command(ctx, points):
    config = _config(ctx, points=points)
    digest = config_hash(config)

    def compute():
        grid = scan.default_x00_grid(config.x00_lo, config.x00_hi, config.points)
        columns, records = repro.fig1(grid)
        return formats.render_records(records, columns, digest, config.format)

    _emit(ctx, _cached(config, "repro-fig1", compute))


@repro_group.command("fig2")
@click.option("--m", type=int, default=None)
@click.option("--intensity", type=float, default=None)
@click.option("--n-max", type=int, default=None)
@click.option("--points", type=int, default=None)
@click.option("--resonances-out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def fig2_command(ctx, m, intensity, n_max, points, resonances_out):
    config = _config(ctx, m=m, intensity=intensity, n_max=n_max, points=points)
    digest = config_hash(config)

    def compute():
        grid = scan.default_x00_grid(config.x00_lo, config.x00_hi, config.points)
        columns, records, resonances = repro.fig2(
            config.m,
            config.intensity,
            n_max=config.n_max,
            x00_values=grid,
            settings=_settings(config),
        )
        listing = [resonance.as_dict() for resonance in resonances]
        return json.dumps(
            {
                "main": formats.render_records(records, columns, digest, config.format),
                "resonances": formats.render_json(listing),
            }
        )

    bundle = json.loads(_cached(config, "repro-fig2", compute))
    _emit(ctx, bundle["main"])
    if resonances_out:
        _emit(ctx, bundle["resonances"], resonances_out)
