"""Exception types shared across the library."""


class ConfigurationError(ValueError):
    """Invalid dimensions, parameters, or configuration input."""


class NumericError(RuntimeError):
    """A numeric routine failed: non-convergence, divergence, overflow."""


class RankDeficiencyError(NumericError):
    """Input is numerically rank-deficient where full column rank is required."""


class FeasibilityError(NumericError):
    """An iterate violates the manifold constraint beyond tolerance."""


class ZeroGradient(Exception):
    """Signal raised by the LMO when its input is numerically zero.

    At zero every unit-ball element is optimal, so there is no canonical
    direction. Optimizers catch this and hold position (converged).
    """
