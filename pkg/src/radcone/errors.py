class RadconeError(Exception):
    """Base class for library errors."""


class SceneError(RadconeError, ValueError):
    """Invalid scene, patch, luminaire or affine map."""


class SceneFormatError(SceneError):
    """Scene file could not be parsed."""


class KernelCapError(SceneError):
    """A kernel entry exceeds the configured cap (throat or curvature violation)."""


class OperatorNormError(SceneError):
    """Discretized transport operator does not satisfy the norm bound."""


class SingularSystemError(RadconeError, ArithmeticError):
    """Radiosity system is singular or too ill-conditioned to solve."""


class EigengapError(RadconeError, ValueError):
    """Eigenvalues at the requested rank are tied."""


class IterationLimitError(RadconeError, RuntimeError):
    """An iterative solver exceeded its iteration cap."""
