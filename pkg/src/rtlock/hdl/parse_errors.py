"""Error types raised by the Verilog front end."""

from __future__ import annotations

from ..errors import RtlockError


class ParseError(RtlockError):
    """Lex/parse/semantic failure.

    ``kind`` is one of "syntax", "unsupported", "semantic"; unsupported
    errors carry the offending construct's name so lock-compatibility
    reports can aggregate by reason.
    """

    def __init__(self, msg: str, kind: str = "syntax",
                 line: int = 0, col: int = 0, construct: str | None = None):
        loc = f"L{line}:{col}: " if line else ""
        tag = f" [{construct}]" if construct else ""
        super().__init__(f"{loc}{msg}{tag}")
        self.kind = kind
        self.line = line
        self.col = col
        self.construct = construct


class ExtractError(RtlockError):
    """No usable module could be pulled out of a model completion."""

    def __init__(self, msg: str, reason: str):
        super().__init__(msg)
        self.reason = reason  # "no_module_found" | "all_candidates_failed_parse"
