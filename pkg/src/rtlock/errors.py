"""Exceptions shared by more than one subsystem."""


class RtlockError(Exception):
    """Base class for all library errors."""


class EmptyCorpusError(RtlockError):
    """An aggregation was asked to summarize zero modules/samples."""


class DomainError(RtlockError):
    """An argument fell outside its documented domain."""


class SchemaError(RtlockError):
    """A structured input file does not match the expected schema."""

    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line
