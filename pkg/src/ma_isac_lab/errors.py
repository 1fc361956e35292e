"""Exception types shared across the package."""


class ConfigError(Exception):
    """A scene constant, layout, or experiment setting is invalid."""


class SingularGeometryError(Exception):
    """Array geometry carries no information about one or both wavevector axes."""


class AmbiguousEstimateError(Exception):
    """The likelihood surface is flat; no meaningful wavevector estimate exists."""


class DegenerateLinearizationError(Exception):
    """Two antennas coincide, so a distance constraint cannot be linearized."""


class InvalidPairError(Exception):
    """Antenna pair indices are out of range or not strictly increasing."""


class InfeasibleRegionError(Exception):
    """No feasible placement exists (or none was found within the attempt cap)."""
