"""Exception hierarchy.

Everything raised on purpose by this package derives from ElastoDtnError so
the CLI can map "our" failures to exit code 2 without catching unrelated bugs.
"""


class ElastoDtnError(Exception):
    """Base class for all errors raised by elastodtn."""


class ParameterError(ElastoDtnError):
    """Nonphysical material/frequency parameters."""


class GeometryError(ElastoDtnError):
    """Measured height or strip geometry is inconsistent."""


class CutoffError(ElastoDtnError):
    """Cutoff ramp cannot satisfy the strict slope margin."""


class MapSingularError(ElastoDtnError):
    """Domain map Jacobian is (or may be) singular: det J <= 0 somewhere."""


class SurfaceBoundError(ElastoDtnError):
    """A sampled surface escapes the declared envelope m < f < M."""


class SourceSupportError(ElastoDtnError):
    """Source disk is not strictly inside the band f_max < x2 < h."""


class SymbolSingularError(ElastoDtnError):
    """xi^2 + gamma_p*gamma_s vanished (never expected for real xi)."""


class MeshError(ElastoDtnError):
    """Degenerate mesh element or invalid mesh parameters."""


class SolveError(ElastoDtnError):
    """Singular factorization or unacceptable linear-system residual."""


class MmsError(ElastoDtnError):
    """Manufactured field violates the requirements (e.g. periodicity)."""


class SweepError(ElastoDtnError):
    """Frequency sweep is ill-posed (e.g. zero source norm)."""


class EnsembleError(ElastoDtnError):
    """One or more Monte Carlo samples failed; the ensemble is aborted."""


class ConfigError(ElastoDtnError):
    """Config file missing, unparsable, or failing validation."""


class InternalError(ElastoDtnError):
    """A supposedly impossible state was reached."""
