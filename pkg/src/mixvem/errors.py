"""Exception hierarchy for the mixed VEM package."""


class MixVemError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(MixVemError):
    """Degenerate or non-simple polygonal geometry."""


class TopologyError(MixVemError):
    """Inconsistent mesh connectivity."""


class GenerationError(MixVemError):
    """A mesh generator could not produce a valid tessellation."""


class ContractError(MixVemError, ValueError):
    """Arguments violate a documented shape or length contract."""


class DegenerateElementError(MixVemError):
    """A local Gram matrix is singular for the given element."""


class AssemblyError(MixVemError):
    """A local matrix fails a structural property (e.g. SPD)."""


class SolveError(MixVemError):
    """The global saddle-point system could not be factorized."""


class IoError(MixVemError, OSError):
    """A report or mesh file could not be written or read."""
