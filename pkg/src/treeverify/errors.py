"""Exception types shared across the package."""


class TreeVerifyError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TreeVerifyError):
    """Input text could not be parsed (model JSON, question JSON, solver output)."""


class ValidationError(TreeVerifyError):
    """A structural invariant of a model, domain, box, or question was violated."""


class SolverUnavailable(TreeVerifyError):
    """The external solver process could not be started."""


class ProtocolError(TreeVerifyError):
    """The solver process produced output we could not interpret."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class TooLarge(TreeVerifyError):
    """A brute-force enumeration guard was exceeded."""


class UnsupportedQuestion(TreeVerifyError):
    """The reference oracle cannot decide questions outside its fragment."""
