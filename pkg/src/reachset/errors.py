"""Exception types raised across the package."""


class ReachsetError(Exception):
    """Base class for all package errors."""


class FrameMismatch(ReachsetError):
    """State frame tag inconsistent with the dynamical model."""


class NonUnitControl(ReachsetError):
    """Thrust steering vector is neither zero nor unit norm."""


class NonpositiveMass(ReachsetError):
    """Mass argument is zero or negative."""


class MassDepleted(ReachsetError):
    """Mass profile reaches zero inside the requested horizon."""


class SingularState(ReachsetError):
    """A gravitational distance fell below the configured floor."""


class StepFailure(ReachsetError):
    """Adaptive integrator step size underflowed or step budget exhausted."""


class DegeneratePrimer(ReachsetError):
    """Primer vector norm below the degeneracy floor; costate sample carries
    no control information."""


class DegenerateCostate(ReachsetError):
    """Costate block below the degeneracy floor in a boundary-shift solve."""


class ClassificationFailed(ReachsetError):
    """Monodromy spectrum has no real eigenvalue beyond the hyperbolicity
    threshold."""


class EmptySet(ReachsetError):
    """Reachable set contains no surviving samples."""


class DegenerateCloud(ReachsetError):
    """Terminal cloud is too low-dimensional for the requested geometry."""


class ConfigError(ReachsetError):
    """Scenario configuration invalid; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
