"""Exception types shared across the package.

Each class marks one contract violation so callers (and tests) can catch
the specific failure mode instead of pattern-matching on messages.
"""


class SymmetryError(ValueError):
    """A matrix that must be symmetric is not, beyond tolerance."""


class DefinitenessError(ValueError):
    """A matrix that must be (strictly) positive definite is not."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its cap before meeting its tolerance."""


class StabilizabilityError(ConvergenceError):
    """The Riccati iteration diverged, signalling a non-stabilizable pair."""


class NotSchurError(ValueError):
    """A matrix required to have spectral radius < 1 does not."""


class OracleError(ConvergenceError):
    """The high-accuracy QP solver failed to certify its residual."""


class CertificationError(ValueError):
    """A closed-form gain is undefined because its assumptions fail."""


class NotContractiveError(CertificationError):
    """An accelerated-solver gain was requested below its contraction onset."""
