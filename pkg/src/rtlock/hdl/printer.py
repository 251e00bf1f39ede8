"""Canonical pretty-printer: a pure function of the AST.

The output is the subset's normal form — ANSI header, one port per line,
two-space indent, every branch body in begin/end — so structurally equal
modules print byte-identically and re-parsing a printed module yields a
structurally equal AST.
"""

from __future__ import annotations

from . import ast

_IND = "  "

# Must mirror the parser's precedence table.
_BIN_PREC = {
    "||": 1, "&&": 2,
    "|": 3, "^": 4, "~^": 4, "^~": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}
_TERNARY_PREC = 0
_UNARY_PREC = 11
_PRIMARY_PREC = 12


def print_module(m: ast.AstModule) -> str:
    lines: list[str] = []
    header = f"module {m.name}"
    if m.params:
        public = [p for p in m.params if not p.local]
    else:
        public = []
    if public:
        lines.append(header + " #(")
        for i, p in enumerate(public):
            comma = "," if i + 1 < len(public) else ""
            lines.append(f"{_IND}parameter {p.name} = {_expr(p.value)[0]}{comma}")
        lines.append(") (")
    else:
        lines.append(header + " (")
    for i, port in enumerate(m.ports):
        comma = "," if i + 1 < len(m.ports) else ""
        lines.append(f"{_IND}{_port(port)}{comma}")
    lines.append(");")
    for p in m.params:
        if p.local:
            lines.append(f"{_IND}localparam {p.name} = {_expr(p.value)[0]};")
    for item in m.items:
        lines.extend(_item(item))
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _port(p: ast.Port) -> str:
    parts = [p.direction]
    if p.is_reg:
        parts.append("reg")
    rng = _range(p.width, p.ranged)
    if rng:
        parts.append(rng)
    parts.append(p.name)
    return " ".join(parts)


def _range(width: int, ranged: bool) -> str:
    if width > 1 or ranged:
        return f"[{width - 1}:0]"
    return ""


def _item(item: ast.Item) -> list[str]:
    if isinstance(item, ast.NetDecl):
        rng = _range(item.width, item.ranged)
        mid = f" {rng}" if rng else ""
        return [f"{_IND}{item.kind}{mid} {item.name};"]
    if isinstance(item, ast.ContAssign):
        return [f"{_IND}assign {_expr(item.target)[0]} = {_expr(item.rhs)[0]};"]
    if isinstance(item, ast.AlwaysBlock):
        sens = f"{item.edge} {item.clock}" if item.edge else "*"
        lines = [f"{_IND}always @({sens}) begin"]
        lines.extend(_stmts(item.body.stmts, 2))
        lines.append(f"{_IND}end")
        return lines
    if isinstance(item, ast.Instance):
        conns = ", ".join(
            f".{name}({_expr(e)[0]})" if name else _expr(e)[0]
            for name, e in item.conns
        )
        return [f"{_IND}{item.module} {item.name} ({conns});"]
    raise TypeError(f"unknown item {item!r}")


def _stmts(stmts: tuple[ast.Stmt, ...], depth: int) -> list[str]:
    out: list[str] = []
    for s in stmts:
        out.extend(_stmt(s, depth))
    return out


def _stmt(s: ast.Stmt, depth: int) -> list[str]:
    pad = _IND * depth
    if isinstance(s, ast.Assign):
        op = "=" if s.blocking else "<="
        return [f"{pad}{_expr(s.target)[0]} {op} {_expr(s.rhs)[0]};"]
    if isinstance(s, ast.If):
        lines = [f"{pad}if ({_expr(s.cond)[0]}) begin"]
        lines.extend(_stmts(s.then.stmts, depth + 1))
        if s.other is not None:
            lines.append(f"{pad}end else begin")
            lines.extend(_stmts(s.other.stmts, depth + 1))
        lines.append(f"{pad}end")
        return lines
    if isinstance(s, ast.Case):
        lines = [f"{pad}case ({_expr(s.subject)[0]})"]
        for arm in s.arms:
            labels = ", ".join(_expr(l)[0] for l in arm.labels)
            lines.append(f"{pad}{_IND}{labels}: begin")
            lines.extend(_stmts(arm.body.stmts, depth + 2))
            lines.append(f"{pad}{_IND}end")
        if s.default is not None:
            lines.append(f"{pad}{_IND}default: begin")
            lines.extend(_stmts(s.default.stmts, depth + 2))
            lines.append(f"{pad}{_IND}end")
        lines.append(f"{pad}endcase")
        return lines
    if isinstance(s, ast.Block):
        # Nested bare blocks flatten visually; the AST nesting is preserved
        # by the parser's normalization, so this only occurs for explicit
        # begin/end inside another block.
        lines = [f"{pad}begin"]
        lines.extend(_stmts(s.stmts, depth + 1))
        lines.append(f"{pad}end")
        return lines
    raise TypeError(f"unknown statement {s!r}")


def format_const(c: ast.Const) -> str:
    if not c.sized:
        return str(c.value)
    digits = (c.width + 3) // 4
    return f"{c.width}'h{c.value:0{digits}x}"


def _expr(e: ast.Expr) -> tuple[str, int]:
    """Render an expression; returns (text, precedence of the top node)."""
    if isinstance(e, ast.Const):
        return format_const(e), _PRIMARY_PREC
    if isinstance(e, ast.Ref):
        return e.name, _PRIMARY_PREC
    if isinstance(e, ast.Index):
        return f"{e.name}[{_expr(e.index)[0]}]", _PRIMARY_PREC
    if isinstance(e, ast.Slice):
        return f"{e.name}[{e.msb}:{e.lsb}]", _PRIMARY_PREC
    if isinstance(e, ast.Unary):
        text = _child(e.operand, _UNARY_PREC)
        # keep e.g. unary ^ applied to ~a from lexing as the ^~ operator
        sep = " " if text[0] in "~!&|^-+" else ""
        return f"{e.op}{sep}{text}", _UNARY_PREC
    if isinstance(e, ast.Binary):
        prec = _BIN_PREC[e.op]
        left = _child(e.left, prec)
        right = _child(e.right, prec + 1)
        return f"{left} {e.op} {right}", prec
    if isinstance(e, ast.Ternary):
        cond = _child(e.cond, _TERNARY_PREC + 1)
        then = _child(e.then, _TERNARY_PREC + 1)
        other = _child(e.other, _TERNARY_PREC)
        return f"{cond} ? {then} : {other}", _TERNARY_PREC
    if isinstance(e, ast.Concat):
        return "{" + ", ".join(_expr(p)[0] for p in e.parts) + "}", _PRIMARY_PREC
    if isinstance(e, ast.Repeat):
        return f"{{{e.count}{{{_expr(e.value)[0]}}}}}", _PRIMARY_PREC
    raise TypeError(f"unknown expression {e!r}")


def _child(e: ast.Expr, min_prec: int) -> str:
    text, prec = _expr(e)
    if prec < min_prec:
        return f"({text})"
    return text
