"""
Error hierarchy for the robust-potts toolkit
"""


class RobustPottsError(Exception):
    """Base class for every refusal raised by the toolkit"""


class InvalidParameterError(RobustPottsError, ValueError):
    """A numeric precondition was violated (negative coupling, NaN, epsilon out of range, ...)"""


class GeometryError(RobustPottsError, ValueError):
    """A lattice, cutset or annulus construction is impossible"""


class CapExceededError(RobustPottsError):
    """An exhaustive computation would exceed its enumeration cap"""

    def __init__(self, cap_name: str, cap: int, requested: int):
        self.cap_name = cap_name
        self.cap = cap
        self.requested = requested
        super().__init__(f"{cap_name} exceeded: requested {requested}, cap is {cap}")


class NonComparableBondsError(RobustPottsError, ValueError):
    """Two bond maps are not pointwise ordered"""


class ConfigError(RobustPottsError, ValueError):
    """A run configuration is malformed; the message names the key and the constraint"""

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")
