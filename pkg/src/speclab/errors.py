"""Exception types shared across speclab."""


class SpeclabError(Exception):
    """Base class for all speclab errors."""


class NonConvergence(SpeclabError):
    """An iterative eigensolver hit its iteration cap."""


class Singular(SpeclabError):
    """A matrix is singular to working precision."""


class DegenerateEigenvalues(SpeclabError):
    """Eigenvalues are too close for rank-one spectral projections to be trusted."""


# projection-norm routines reject flagged eigensystems with this name
DegenerateInput = DegenerateEigenvalues


class InsufficientData(SpeclabError):
    """Too few usable samples for the requested statistic."""


class DegenerateEllipse(SpeclabError):
    """The ellipse collapsed to a segment (p == q), so it has no interior."""


class RootConditionFailed(SpeclabError):
    """Characteristic roots do not satisfy the modulus conditions of the construction."""


class DegenerateRoots(SpeclabError):
    """The characteristic quadratic has a double root."""


class NotNormalized(SpeclabError):
    """A vector expected to have unit norm does not."""


class ConfigError(SpeclabError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key
