"""Tokenizer for the Verilog subset.

Tracks byte offsets alongside line/column so downstream fingerprinting can
use token positions directly.  Constructs outside the subset (four-state
literals, preprocessor directives, system tasks, ...) raise ParseError with
kind="unsupported" so that corpus accounting can tell them apart from plain
syntax errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

from .parse_errors import ParseError


class TokKind(Enum):
    KEYWORD = auto()
    IDENT = auto()
    NUMBER = auto()
    OP = auto()
    PUNCT = auto()
    EOF = auto()


@dataclass(frozen=True)
class Token:
    kind: TokKind
    text: str
    pos: int  # byte offset in source
    line: int
    col: int

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Token({self.kind.name}, {self.text!r}, L{self.line}:{self.col})"


KEYWORDS = {
    "module", "endmodule", "input", "output", "inout",
    "wire", "reg", "parameter", "localparam",
    "assign", "always", "begin", "end",
    "if", "else", "case", "endcase", "default",
    "posedge", "negedge", "or",
}

# Recognized but outside the subset; lexed as keywords so the parser can
# report the construct by name.
UNSUPPORTED_KEYWORDS = {
    "generate", "endgenerate", "genvar", "for", "while", "repeat", "forever",
    "function", "endfunction", "task", "endtask", "initial", "integer",
    "real", "time", "signed", "casex", "casez", "specify", "endspecify",
    "defparam", "fork", "join", "wait", "force", "release", "deassign",
    "event", "tri", "tri0", "tri1", "triand", "trior", "trireg",
    "wand", "wor", "supply0", "supply1", "primitive", "endprimitive",
    "table", "endtable", "scalared", "vectored", "small", "medium", "large",
    "highz0", "highz1", "pull0", "pull1", "pulldown", "pullup",
    "strong0", "strong1", "weak0", "weak1", "automatic", "cell", "config",
    "endconfig", "design", "disable", "edge", "ifnone", "incdir", "include",
    "instance", "liblist", "library", "macromodule", "noshowcancelled",
    "pulsestyle_onevent", "pulsestyle_ondetect", "rtran", "rtranif0",
    "rtranif1", "showcancelled", "specparam", "tran", "tranif0", "tranif1",
    "unsigned", "use", "uwire", "realtime",
    # gate primitives
    "and", "nand", "nor", "xor", "xnor", "buf", "not", "bufif0", "bufif1",
    "notif0", "notif1", "cmos", "rcmos", "nmos", "pmos", "rnmos", "rpmos",
}

# Multi-character operators first (maximal munch).
_OPERATORS = [
    "<<<", ">>>", "===", "!==",
    "<=", ">=", "==", "!=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~",
    "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "=", "?",
]

_PUNCT = "()[]{};,.:@#"

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789$")
_DIGITS = set("0123456789")

MAX_WIDTH = 1024  # sanity bound on literal/declaration widths

_BASES = {"b": 2, "o": 8, "d": 10, "h": 16}


def lex(source: str) -> list[Token]:
    """Tokenize ``source``; raises ParseError on anything outside the subset."""
    toks: list[Token] = []
    i = 0
    n = len(source)
    line = 1
    col = 1

    def err(msg: str, kind: str = "syntax", construct: str | None = None) -> ParseError:
        return ParseError(msg, kind=kind, line=line, col=col, construct=construct)

    def advance(text: str) -> None:
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        ch = source[i]

        if ch in " \t\r\n":
            advance(ch)
            i += 1
            continue

        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            advance(source[i:j])
            i = j
            continue

        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise err("unterminated block comment")
            advance(source[i : j + 2])
            i = j + 2
            continue

        if ch == "`":
            raise err("preprocessor directives are not supported",
                      kind="unsupported", construct="preprocessor directive")
        if ch == "$":
            raise err("system tasks/functions are not supported",
                      kind="unsupported", construct="system task")
        if ch == '"':
            raise err("string literals are not supported",
                      kind="unsupported", construct="string literal")
        if ch == "\\":
            raise err("escaped identifiers are not supported",
                      kind="unsupported", construct="escaped identifier")

        if ch in _IDENT_START:
            j = i + 1
            while j < n and source[j] in _IDENT_CONT:
                j += 1
            text = source[i:j]
            if text in UNSUPPORTED_KEYWORDS:
                raise err(f"'{text}' is outside the supported subset",
                          kind="unsupported", construct=text)
            kind = TokKind.KEYWORD if text in KEYWORDS else TokKind.IDENT
            toks.append(Token(kind, text, i, line, col))
            advance(text)
            i = j
            continue

        if ch in _DIGITS or (ch == "'" and i + 1 < n):
            tok_pos, tok_line, tok_col = i, line, col
            i2 = i
            size_digits = ""
            while i2 < n and (source[i2] in _DIGITS or source[i2] == "_"):
                size_digits += source[i2]
                i2 += 1
            # skip whitespace between size and base, as in "8 'h ff"
            k = i2
            while k < n and source[k] in " \t":
                k += 1
            if k < n and source[k] == "'":
                text, value, width, i_next = _lex_based(source, i, k, size_digits, err)
                toks.append(Token(TokKind.NUMBER, text, tok_pos, tok_line, tok_col))
                advance(source[i:i_next])
                i = i_next
                continue
            if not size_digits:
                raise err("stray quote")
            value = int(size_digits.replace("_", ""))
            if value >= 1 << 32:
                raise err("unsized literal exceeds 32 bits", kind="semantic")
            text = source[i:i2]
            toks.append(Token(TokKind.NUMBER, text, tok_pos, tok_line, tok_col))
            advance(text)
            i = i2
            continue

        matched = None
        for op in _OPERATORS:
            if source.startswith(op, i):
                matched = op
                break
        if matched is not None:
            if matched in ("<<<", ">>>"):
                raise err("arithmetic shifts require signed support",
                          kind="unsupported", construct=matched)
            if matched in ("===", "!=="):
                raise err("case equality requires four-state values",
                          kind="unsupported", construct=matched)
            toks.append(Token(TokKind.OP, matched, i, line, col))
            advance(matched)
            i += len(matched)
            continue

        if ch in _PUNCT:
            toks.append(Token(TokKind.PUNCT, ch, i, line, col))
            advance(ch)
            i += 1
            continue

        raise err(f"unexpected character {ch!r}")

    toks.append(Token(TokKind.EOF, "", n, line, col))
    return toks


def _lex_based(source, start, quote, size_digits, err):
    """Lex a based literal like ``8'hA5`` starting at ``start``; quote at ``quote``."""
    n = len(source)
    i = quote + 1
    if i < n and source[i] in "sS":
        raise err("signed literals are not supported",
                  kind="unsupported", construct="signed literal")
    if i >= n or source[i].lower() not in _BASES:
        raise err("malformed based literal")
    base_ch = source[i].lower()
    base = _BASES[base_ch]
    i += 1
    while i < n and source[i] in " \t":
        i += 1
    digits = ""
    valid = "0123456789abcdefABCDEF_xXzZ?"
    while i < n and source[i] in valid:
        digits += source[i]
        i += 1
    if any(c in "xXzZ?" for c in digits):
        raise err("four-state literal digits (x/z) are not supported",
                  kind="unsupported", construct="four-state literal")
    digits = digits.replace("_", "")
    if not digits:
        raise err("based literal has no digits")
    try:
        value = int(digits, base)
    except ValueError:
        raise err(f"invalid digits for base '{base_ch}'") from None
    width = int(size_digits.replace("_", "")) if size_digits else 32
    if width < 1:
        raise err("literal width must be at least 1", kind="semantic")
    if width > MAX_WIDTH:
        raise err(f"literal width {width} exceeds the {MAX_WIDTH}-bit bound",
                  kind="unsupported", construct="wide literal")
    if value >= 1 << width:
        raise err(f"value does not fit in {width} bits", kind="semantic")
    return source[start:i], value, width, i


def parse_literal(text: str) -> tuple[int, int, bool]:
    """Decode a lexed NUMBER token into (width, value, sized)."""
    if "'" in text:
        size_part, rest = text.split("'", 1)
        rest = rest.strip()
        base = _BASES[rest[0].lower()]
        value = int(rest[1:].replace("_", "").replace(" ", ""), base)
        width = int(size_part.replace("_", "").strip() or "32")
        return width, value, True
    return 32, int(text.replace("_", "")), False
