"""Pull a Verilog module out of a raw model completion.

Completions wrap code in prose and markdown fences; rather than parsing the
wrapping, every ``module ... endmodule`` span is tried in order and the
first one that parses wins.
"""

from __future__ import annotations

import re

from . import ast
from .parse_errors import ExtractError, ParseError
from .parser import parse_module

_MODULE_KW = re.compile(r"\bmodule\b")
_ENDMODULE_KW = re.compile(r"\bendmodule\b")


def extract_module_from_completion(raw: str) -> ast.AstModule:
    candidates = 0
    for m in _MODULE_KW.finditer(raw):
        end = _ENDMODULE_KW.search(raw, m.end())
        if end is None:
            continue
        candidates += 1
        span = raw[m.start():end.end()]
        try:
            return parse_module(span)
        except ParseError:
            continue
    if candidates == 0:
        raise ExtractError("completion contains no module ... endmodule span",
                           reason="no_module_found")
    raise ExtractError(
        f"none of the {candidates} module span(s) parsed",
        reason="all_candidates_failed_parse")
