"""Exceptions raised by the scattering-volume library"""


class ScatteringVolumeError(Exception):
    """scattering volume generic error"""

    pass


class DomainError(ScatteringVolumeError, ValueError):
    """argument outside the physical domain"""

    pass


class UnsupportedError(ScatteringVolumeError):
    """order, model or option not supported"""

    pass


class ConfigError(ScatteringVolumeError):
    """configuration key or value error"""

    def __init__(self, msg, key=None):
        super().__init__(msg)
        self.key = key


class NumericalError(ScatteringVolumeError):
    """numerical failure generic error"""

    pass


class IntegrationError(NumericalError):
    """ODE integration failure"""

    def __init__(self, msg, location=None):
        super().__init__(msg)
        self.location = location


class PoleEvent(NumericalError):
    """
    divergence of the relative amplitude (resonance or Riccati pole)

    :param location: abscissa of the event (length or nodal parameter)
    :param bracket: (lower, upper) interval containing the pole
    :param condition: condition number of the failing linear system, if any
    """

    def __init__(self, msg, location=None, bracket=None, condition=None):
        super().__init__(msg)
        self.location = location
        self.bracket = bracket
        self.condition = condition


class IllConditionedError(NumericalError):
    """least-squares design matrix is ill-conditioned"""

    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


class DiagnosticsError(NumericalError):
    """internal consistency check failed"""

    pass


class RankError(NumericalError):
    """degenerate regression data"""

    pass
