"""Exception hierarchy shared across the toolkit."""


class MaxcapError(Exception):
    """Base class for all toolkit errors."""


class FieldError(MaxcapError):
    """Invalid external-field datum."""


class SingularPoint(MaxcapError):
    """Evaluation requested too close to a singularity of the field."""


class BadEpsilon(MaxcapError):
    """Widened sectors overlap for the requested margin."""


class ResolutionTooCoarse(MaxcapError):
    """A level curve could not be classified at the grid resolution."""


class IndexOutOfRange(MaxcapError):
    """Malformed partition block indices."""


class InsufficientExtent(MaxcapError):
    """A component ends before the radius needed for the sector test."""


class EmptySet(MaxcapError):
    """Hausdorff distance of an empty sample set."""


class FoldDetected(MaxcapError):
    """A perturbation collapsed consecutive contour vertices."""


class NodeCollision(MaxcapError):
    """Cauchy transform requested at a measure node."""


class SingularNode(MaxcapError):
    """A measure node sits on a singularity of the field."""


class GrowthViolation(MaxcapError):
    """Contour rays violate the confinement growth condition."""


class NonConvergence(MaxcapError):
    """Inner equilibrium solve hit its iteration cap."""


class TestFunctionViolation(MaxcapError):
    """A bump field fails the dead-zone / fixed-point invariants."""


class TooFewProbes(MaxcapError):
    """Not enough interior probe points for the symmetry residual."""


class TooCloseToSupport(MaxcapError):
    """Spectral sampling point too close to the support or singularities."""


class IllConditioned(MaxcapError):
    """Least-squares system for the spectral fit is ill conditioned."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class InsufficientSamples(MaxcapError):
    """Too few sample points for the requested numerator degree."""


class BranchAmbiguity(MaxcapError):
    """Square-root branch selection failed (density changes sign)."""


class RootfindingFailure(MaxcapError):
    """Numerator rootfinding failed."""


class StepUnderflow(MaxcapError):
    """Trajectory tracer step size underflowed near an ill-conditioned point."""


class InitInvalid(MaxcapError):
    """Initial contour fails membership or touches the forbidden region."""


class StalledBelowTolerance(MaxcapError):
    """Ascent stalled before reaching the criticality tolerance."""


class ComponentCountMismatch(MaxcapError):
    """The strict-inequality region does not split into N tail components."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class Disconnected(MaxcapError):
    """A required pair of anchors has no path inside the corridor mask."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConfigError(MaxcapError):
    """Run configuration failed to parse or cross-validate."""
