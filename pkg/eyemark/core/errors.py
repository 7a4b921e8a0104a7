"""Exception types shared by the eyemark modules.

Every error raised on purpose by the library derives from :class:`EyemarkError`,
so the command layer can report it as a one-line cause.
"""

from pathlib import Path
from typing import Optional, Sequence


class EyemarkError(Exception):
    """Base class of all eyemark errors."""


class ShapeError(EyemarkError, ValueError):
    """Raised when tensor shapes violate an operation contract."""

    def __init__(self, op : str, *shapes : Sequence[int], detail : str = ""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        described = " vs ".join(str(list(s)) for s in self.shapes)
        message = f"{op}: incompatible shapes {described}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class PtsFormatError(EyemarkError, ValueError):
    """Raised when a .pts annotation file is malformed.

    Attributes:
        lineno (int): 1-based line number of the offending line.
    """

    def __init__(self, path : Path, lineno : int, reason : str):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}")


class LandmarkOutOfFrameError(EyemarkError, ValueError):
    """Raised when a landmark leaves its image frame; the record is dropped."""


class DegenerateAnnotationError(EyemarkError, ValueError):
    """Raised when the inter-ocular distance of an annotation is zero."""


class ParamsMismatchError(EyemarkError, ValueError):
    """Raised when a parameter collection does not fit a model configuration."""


class NonFiniteGradientError(EyemarkError, ArithmeticError):
    """Raised when a gradient contains NaN or Inf.

    Attributes:
        name (str): Name of the parameter whose gradient is not finite.
    """

    def __init__(self, name : str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter '{name}'")


class TrainingDivergedError(EyemarkError, RuntimeError):
    """Raised when the training loss exceeds the divergence threshold.

    Attributes:
        checkpoint (Optional[Path]): Last good checkpoint written before halting.
    """

    def __init__(self, epoch : int, loss : float, checkpoint : Optional[Path], reason : str = ""):
        self.epoch = epoch
        self.loss = loss
        self.checkpoint = checkpoint
        self.reason = reason
        cause = f"; {reason}" if reason else ""
        super().__init__(
            f"training diverged at epoch {epoch} (loss={loss!r}{cause}); "
            f"last good checkpoint: {checkpoint}"
        )
