"""Exception hierarchy shared by all modules."""


class LqdimError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(LqdimError, ValueError):
    pass


class ResourceLimitError(LqdimError):
    """A configured work or depth cap would be exceeded."""


class DegenerateInputError(LqdimError, ValueError):
    """Input has zero-diameter support where positive diameter is required."""


class SpecInvalidError(LqdimError, ValueError):
    """A MeasureSpec violates one of its structural conditions.

    ``condition`` names the violated rule (``"M1"`` ... ``"M5"``,
    ``"weights"``, ``"schema"`` ...) and ``path`` locates it in the spec.
    """

    def __init__(self, message, condition=None, path=""):
        self.condition = condition
        self.path = path
        self.message = message
        prefix = f"[{condition}] " if condition else ""
        where = f"{path}: " if path else ""
        super().__init__(f"{prefix}{where}{message}")


class PreconditionUnmet(LqdimError):
    """An experiment's mathematical precondition does not hold.

    This is a reported outcome, not a failure of the software.
    """
