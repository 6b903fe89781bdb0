"""Exception hierarchy shared by all modules.

Input problems (bad files, bad arguments, vocabulary mismatches, context
budget violations) derive from :class:`InputError`; broken internal
invariants raise :class:`InvariantError`. The CLI maps the former to exit
code 1 and the latter to exit code 2.
"""


class NbceError(Exception):
    """Base class for package errors."""


class InputError(NbceError, ValueError):
    """Invalid user input: arguments, datasets, configs."""


class VocabularyError(InputError):
    """A token id does not belong to the vocabulary in use."""


class ContextWindowError(InputError):
    """A per-chunk context would exceed the model's context window."""

    def __init__(self, message: str, source_index: int | None = None):
        super().__init__(message)
        self.source_index = source_index


class DatasetError(InputError):
    """Malformed dataset file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantError(NbceError):
    """An internal invariant was violated (a bug, not bad input)."""
