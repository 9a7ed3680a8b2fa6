"""Exception hierarchy shared by the solver modules and the CLI."""


class NearstableError(Exception):
    """Base class for all library errors."""


class InputError(NearstableError):
    """Malformed or invalid input data (parse errors, failed validation)."""


class ResourceLimitError(NearstableError):
    """A configured budget was exceeded (pivot cap, retry cap, size cap)."""


class PreconditionError(NearstableError):
    """A documented operation precondition does not hold for the arguments."""


class UnstableInputError(NearstableError):
    """A flow handed to the rounding pipeline is not stable.

    Carries the offending blocking walk as `witness`.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InternalError(NearstableError):
    """An invariant guaranteed by the underlying theory was violated.

    Raised when a state is reached that the termination arguments rule
    out; it always indicates a bug, never bad input.
    """
