"""Exception types raised across the package.

Argument and validation problems raise plain :class:`ValueError` (or the
:class:`FormatError` subclass for file parsing). Numerical breakdowns raise
:class:`NumericalError` and its subclasses.
"""


class NumericalError(RuntimeError):
    """A numerical routine failed (eigensolver, overflow, factorization)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class RankDeficiencyError(NumericalError):
    """The Gram matrix of an embedding could not be factored, even with jitter."""

    def __init__(self, message, smallest_eigenvalue):
        super().__init__(message, smallest_eigenvalue=smallest_eigenvalue)
        self.smallest_eigenvalue = smallest_eigenvalue


class TrainingError(NumericalError):
    """Training diverged (non-finite loss or parameters)."""

    def __init__(self, message, step):
        super().__init__(message, step=step)
        self.step = step


class FormatError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
