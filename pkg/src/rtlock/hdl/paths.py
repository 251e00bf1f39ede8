"""Structural node addressing and immutable rewriting.

A path is a tuple of (field, index) steps from the module root, with a
stable string form like ``items[2].rhs.right`` that is used in key files.
Rewrites rebuild the spine immutably and apply caller transforms bottom-up,
so transforms at nested paths compose.
"""

from __future__ import annotations

import dataclasses
import re
from typing import Callable

from . import ast

Path = tuple[tuple[str, int | None], ...]

_NODE_TYPES = (ast.Expr, ast.Stmt, ast.Item, ast.CaseArm, ast.Port, ast.Param)

_SEG = re.compile(r"^([a-z_]+)(?:\[(\d+)\])?$")


def format_path(path: Path) -> str:
    return ".".join(f"{f}[{i}]" if i is not None else f for f, i in path)


def parse_path(text: str) -> Path:
    steps: list[tuple[str, int | None]] = []
    for seg in text.split("."):
        m = _SEG.match(seg)
        if not m:
            raise ValueError(f"malformed path segment {seg!r}")
        steps.append((m.group(1), int(m.group(2)) if m.group(2) else None))
    return tuple(steps)


def get_at(root, path: Path):
    node = root
    for field, idx in path:
        node = getattr(node, field)
        if idx is not None:
            node = node[idx]
    return node


def replace_at(root, path: Path, new_node):
    """Return a copy of ``root`` with the node at ``path`` replaced."""
    if not path:
        return new_node
    (field, idx), rest = path[0], path[1:]
    child = getattr(root, field)
    if idx is not None:
        replaced = replace_at(child[idx], rest, new_node)
        child = child[:idx] + (replaced,) + child[idx + 1:]
    else:
        child = replace_at(child, rest, new_node)
    return dataclasses.replace(root, **{field: child})


def rewrite(root, transforms: dict[Path, Callable]) -> object:
    """Apply ``transforms`` bottom-up; each callable gets the node whose
    children have already been rewritten."""
    if not transforms:
        return root
    return _rewrite(root, (), transforms)


def _rewrite(node, path: Path, transforms):
    if dataclasses.is_dataclass(node):
        updates = {}
        for f in dataclasses.fields(node):
            value = getattr(node, f.name)
            new_value = _rewrite_field(value, path + ((f.name, None),), transforms)
            if new_value is not value:
                updates[f.name] = new_value
        if updates:
            node = dataclasses.replace(node, **updates)
    fn = transforms.get(path)
    if fn is not None:
        node = fn(node)
    return node


def _rewrite_field(value, path_base: Path, transforms):
    field, _ = path_base[-1]
    if isinstance(value, _NODE_TYPES):
        return _rewrite(value, path_base, transforms)
    if isinstance(value, tuple) and value and isinstance(value[0], _NODE_TYPES):
        out = tuple(
            _rewrite(v, path_base[:-1] + ((field, i),), transforms)
            for i, v in enumerate(value)
        )
        return value if out == value else out
    return value


def rename_identifiers(m: ast.AstModule, mapping: dict[str, str],
                       new_module_name: str | None = None) -> ast.AstModule:
    """Consistently rename declared identifiers throughout a module."""

    def nm(name: str) -> str:
        return mapping.get(name, name)

    def ex(e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Ref):
            return ast.Ref(nm(e.name))
        if isinstance(e, ast.Index):
            return ast.Index(nm(e.name), ex(e.index))
        if isinstance(e, ast.Slice):
            return ast.Slice(nm(e.name), e.msb, e.lsb)
        if isinstance(e, ast.Unary):
            return ast.Unary(e.op, ex(e.operand))
        if isinstance(e, ast.Binary):
            return ast.Binary(e.op, ex(e.left), ex(e.right))
        if isinstance(e, ast.Ternary):
            return ast.Ternary(ex(e.cond), ex(e.then), ex(e.other))
        if isinstance(e, ast.Concat):
            return ast.Concat(tuple(ex(p) for p in e.parts))
        if isinstance(e, ast.Repeat):
            return ast.Repeat(e.count, ex(e.value))
        return e

    def st(s: ast.Stmt) -> ast.Stmt:
        if isinstance(s, ast.Assign):
            return ast.Assign(ex(s.target), ex(s.rhs), s.blocking)
        if isinstance(s, ast.If):
            return ast.If(ex(s.cond), st(s.then),
                          st(s.other) if s.other is not None else None)
        if isinstance(s, ast.Case):
            return ast.Case(
                ex(s.subject),
                tuple(ast.CaseArm(tuple(ex(l) for l in a.labels), st(a.body))
                      for a in s.arms),
                st(s.default) if s.default is not None else None,
            )
        if isinstance(s, ast.Block):
            return ast.Block(tuple(st(x) for x in s.stmts))
        return s

    items: list[ast.Item] = []
    for item in m.items:
        if isinstance(item, ast.NetDecl):
            items.append(dataclasses.replace(item, name=nm(item.name)))
        elif isinstance(item, ast.ContAssign):
            items.append(ast.ContAssign(ex(item.target), ex(item.rhs)))
        elif isinstance(item, ast.AlwaysBlock):
            clock = nm(item.clock) if item.clock else None
            items.append(ast.AlwaysBlock(item.edge, clock, st(item.body)))
        elif isinstance(item, ast.Instance):
            items.append(ast.Instance(
                item.module, nm(item.name),
                tuple((p, ex(e)) for p, e in item.conns)))
        else:
            items.append(item)

    return ast.AstModule(
        new_module_name or m.name,
        tuple(dataclasses.replace(p, name=nm(p.name)) for p in m.ports),
        tuple(dataclasses.replace(p, name=nm(p.name)) for p in m.params),
        tuple(items),
    )


def declared_names(m: ast.AstModule) -> list[str]:
    """All declared identifiers in declaration order."""
    names = [p.name for p in m.ports]
    names.extend(p.name for p in m.params)
    for item in m.items:
        if isinstance(item, ast.NetDecl):
            names.append(item.name)
        elif isinstance(item, ast.Instance):
            names.append(item.name)
    return names
