"""Exception types raised by the transport-map routines."""


class TrimapError(Exception):
    """Base class; ``code`` is the short tag printed by the CLI."""

    code = "error"


class NonMonotoneAtPoint(TrimapError, ValueError):
    code = "non-monotone"

    def __init__(self, k, x, value=None):
        self.k = k
        self.x = x
        self.value = value
        super().__init__(f"d_{k} T^{k} = {value!r} <= 0 at x = {x!r}")


class BracketFailure(TrimapError, RuntimeError):
    code = "bracket-failure"

    def __init__(self, message, indices=None):
        self.indices = indices
        super().__init__(message)


class NonConvergence(TrimapError, RuntimeError):
    code = "non-convergence"


class CallbackFailure(TrimapError, RuntimeError):
    code = "callback-failure"


class FileFormatError(TrimapError, ValueError):
    code = "bad-file"
