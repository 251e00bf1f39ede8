"""Self-determined width rules for the subset (Verilog-2005, two-state)."""

from __future__ import annotations

from . import ast

_CONTEXT_OPS = {"+", "-", "*", "/", "%", "&", "|", "^", "~^", "^~"}
_COMPARE_OPS = {"==", "!=", "<", "<=", ">", ">="}
_LOGICAL_OPS = {"&&", "||"}
_SHIFT_OPS = {"<<", ">>"}
_REDUCTIONS = {"&", "|", "^", "~&", "~|", "~^", "!"}


def decl_widths(m: ast.AstModule) -> dict[str, int]:
    """Map every declared name (ports, params, nets) to its bit width."""
    widths: dict[str, int] = {}
    for p in m.ports:
        widths[p.name] = p.width
    for p in m.params:
        widths[p.name] = p.value.width
    for item in m.items:
        if isinstance(item, ast.NetDecl):
            widths[item.name] = item.width
    return widths


def self_width(e: ast.Expr, widths: dict[str, int]) -> int:
    if isinstance(e, ast.Const):
        return e.width
    if isinstance(e, ast.Ref):
        return widths[e.name]
    if isinstance(e, ast.Index):
        return 1
    if isinstance(e, ast.Slice):
        return e.msb - e.lsb + 1
    if isinstance(e, ast.Unary):
        if e.op in _REDUCTIONS and e.op != "~":  # "~" alone is bitwise
            return 1
        if e.op == "~":
            return self_width(e.operand, widths)
        if e.op in ("-", "+"):
            return self_width(e.operand, widths)
        return 1
    if isinstance(e, ast.Binary):
        if e.op in _CONTEXT_OPS:
            return max(self_width(e.left, widths), self_width(e.right, widths))
        if e.op in _SHIFT_OPS:
            return self_width(e.left, widths)
        if e.op in _COMPARE_OPS or e.op in _LOGICAL_OPS:
            return 1
        raise ValueError(f"unknown binary operator {e.op!r}")
    if isinstance(e, ast.Ternary):
        return max(self_width(e.then, widths), self_width(e.other, widths))
    if isinstance(e, ast.Concat):
        return sum(self_width(p, widths) for p in e.parts)
    if isinstance(e, ast.Repeat):
        return e.count * self_width(e.value, widths)
    raise TypeError(f"unknown expression {e!r}")


def max_eval_width(m: ast.AstModule) -> int:
    """Largest width any evaluation context in the module can reach."""
    widths = decl_widths(m)
    best = max(widths.values(), default=1)

    def visit_expr(e: ast.Expr) -> None:
        nonlocal best
        best = max(best, self_width(e, widths))
        for child in _children(e):
            visit_expr(child)

    def visit_stmt(s: ast.Stmt) -> None:
        if isinstance(s, ast.Assign):
            visit_expr(s.rhs)
            if isinstance(s.target, ast.Index):
                visit_expr(s.target.index)
        elif isinstance(s, ast.If):
            visit_expr(s.cond)
            visit_stmt(s.then)
            if s.other is not None:
                visit_stmt(s.other)
        elif isinstance(s, ast.Case):
            visit_expr(s.subject)
            for arm in s.arms:
                for label in arm.labels:
                    visit_expr(label)
                visit_stmt(arm.body)
            if s.default is not None:
                visit_stmt(s.default)
        elif isinstance(s, ast.Block):
            for sub in s.stmts:
                visit_stmt(sub)

    for item in m.items:
        if isinstance(item, ast.ContAssign):
            visit_expr(item.rhs)
        elif isinstance(item, ast.AlwaysBlock):
            visit_stmt(item.body)
    return best


def _children(e: ast.Expr) -> tuple[ast.Expr, ...]:
    if isinstance(e, ast.Unary):
        return (e.operand,)
    if isinstance(e, ast.Binary):
        return (e.left, e.right)
    if isinstance(e, ast.Ternary):
        return (e.cond, e.then, e.other)
    if isinstance(e, ast.Concat):
        return e.parts
    if isinstance(e, ast.Repeat):
        return (e.value,)
    if isinstance(e, ast.Index):
        return (e.index,)
    return ()
