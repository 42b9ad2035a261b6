"""Exception types shared across the library."""


class LimitLabError(Exception):
    """Base class for all library-specific errors."""


class NotLoxodromic(LimitLabError):
    """An operation requiring a loxodromic isometry got something else."""


class ConstructionFailed(LimitLabError):
    """A group builder produced matrices violating its own contract."""


class CirclesOverlap(LimitLabError):
    """Schottky builder: the four isometric circles are not disjoint."""


class DepthExceeded(LimitLabError):
    """Requested enumeration depth is over the configured or resource cap."""


class ToleranceCollision(LimitLabError):
    """Two retained group elements are suspiciously close: the dedup margin
    is unsafe and results cannot be trusted."""


class UnknownCharacter(LimitLabError):
    """A character name not carried by the marked group."""


class InsufficientData(LimitLabError):
    """Not enough points/radii/scales for a statistically meaningful fit."""


class EmptyCloud(LimitLabError):
    """A cloud operation received an empty point set."""


class ReductionStalled(LimitLabError):
    """Greedy domain reduction exceeded its iteration budget."""


class NotNormalSpec(LimitLabError):
    """A witness construction needs character-kernel (normal) subgroup specs."""


class WitnessTrivial(LimitLabError):
    """Both branches of the witness construction failed; signals a bug or
    invalid input rather than a mathematical outcome."""


class InvalidLength(LimitLabError):
    """Piecewise-geodesic segment length below the quasigeodesic threshold."""
