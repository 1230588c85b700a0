"""Exception types shared across the library."""


class SepsplitError(Exception):
    """Base class for all library errors."""


class ExtensionMismatchError(SepsplitError):
    """Arithmetic attempted between incompatible quadratic extensions."""


class TruncationError(SepsplitError):
    """An operation required series orders beyond the stored truncation."""


class DegenerateBifurcationError(SepsplitError):
    """The leading normal-form coefficients a, b are not both nonzero."""


class InterpolationError(SepsplitError):
    """Solvability failure while constructing the interpolating Hamiltonian."""


class WrongSideOfBifurcationError(SepsplitError):
    """The separatrix recursion base case has a non-positive radicand."""


class ConvergenceError(SepsplitError):
    """An iterative numerical routine failed to reach its tolerance."""


class PrecisionError(SepsplitError):
    """Requested quantity is below the reliable numerical floor."""
