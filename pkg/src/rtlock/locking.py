"""Key-based RTL locking of constants, branches, and operations.

Lock sites are found by a deterministic pre-order walk of the AST.  A
budgeted, seeded selection picks sites; each selected site is rewritten to
depend on a slice of a new key input port:

  - a constant of width c becomes a c-bit key slice whose correct value is
    the original constant;
  - a branch condition becomes ``cond ^ kbit`` (correct bit 0) or
    ``(!cond) ^ kbit`` (correct bit 1), chosen per site by the seeded RNG;
  - a two-operand operation becomes ``kbit ? (a op b) : (a dummy b)`` with
    correct bit 1, the dummy drawn from a fixed same-shape operator table.

Constants in elaboration-time positions (declaration ranges, part-select
bounds, replication counts, parameter values, case labels) are never sites:
key bits are runtime signals and cannot appear there.

The per-module RNG is seeded from (strategy seed, module name), so locking
a corpus in parallel cannot reorder the randomness.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path as FsPath

from . import hdl
from .errors import DomainError, RtlockError
from .hdl import ast
from .hdl.paths import Path, format_path, parse_path

DEFAULT_KEY_PORT = "lock_key"

# Same-shape replacement candidates; both directions of each documented pair.
_DUMMY_PAIRS = [("+", "-"), ("&", "|"), ("^", "&"), ("<<", ">>"),
                ("*", "+"), ("==", "!="), ("<", ">=")]
DUMMY_OPS: dict[str, tuple[str, ...]] = {}
for _a, _b in _DUMMY_PAIRS:
    DUMMY_OPS.setdefault(_a, ())
    DUMMY_OPS.setdefault(_b, ())
    DUMMY_OPS[_a] = DUMMY_OPS[_a] + (_b,)
    DUMMY_OPS[_b] = DUMMY_OPS[_b] + (_a,)


class LockError(RtlockError):
    """Internal inconsistency while locking; always a bug, never swallowed."""


class WidthMismatchError(RtlockError):
    """A key value does not fit the key port width."""


@dataclass(frozen=True)
class LockSite:
    id: int
    kind: str  # "constant" | "branch" | "operation"
    ast_path: Path
    bit_cost: int
    const_width: int | None = None  # set for constant sites


@dataclass(frozen=True)
class KeyBinding:
    site: LockSite
    bit_lo: int
    bit_hi: int  # inclusive


@dataclass(frozen=True)
class KeySpec:
    key_port_name: str
    width: int
    correct_value: int
    bindings: tuple[KeyBinding, ...]

    def correct_value_hex(self) -> str:
        return format_key_value(self.correct_value, self.width)


@dataclass(frozen=True)
class LockStrategy:
    scope: str  # "all" | "const_only"
    budget_pct: int
    seed: int = 0

    @property
    def tag(self) -> str:
        return f"{'all' if self.scope == 'all' else 'const'}-{self.budget_pct}"


#: The four strategies used in the experiments, by tag.
STRATEGY_TAGS = ("all-50", "all-100", "const-50", "const-100")


def strategy_from_tag(tag: str, seed: int = 0) -> LockStrategy:
    scope, _, pct = tag.partition("-")
    if scope not in ("all", "const") or not pct.isdigit():
        raise DomainError(f"unknown strategy tag {tag!r}")
    return LockStrategy("all" if scope == "all" else "const_only", int(pct), seed)


@dataclass(frozen=True)
class LockReport:
    module: str
    status: str  # "locked" | "fallback_original"
    sites_considered: int
    sites_locked: int
    key_width: int
    reason: str | None = None  # set for fallbacks


# ------------------------------------------------------------- site discovery


def enumerate_sites(m: ast.AstModule, scope: str = "all") -> list[LockSite]:
    """Pre-order walk collecting lockable sites; const_only keeps constants."""
    if scope not in ("all", "const_only"):
        raise DomainError(f"unknown scope {scope!r}")
    found: list[tuple[str, Path, int, int | None]] = []

    def walk_expr(e: ast.Expr, path: Path) -> None:
        if isinstance(e, ast.Const):
            found.append(("constant", path, e.width, e.width))
        elif isinstance(e, ast.Binary):
            if e.op in DUMMY_OPS:
                found.append(("operation", path, 1, None))
            walk_expr(e.left, path + (("left", None),))
            walk_expr(e.right, path + (("right", None),))
        elif isinstance(e, ast.Ternary):
            found.append(("branch", path, 1, None))
            walk_expr(e.cond, path + (("cond", None),))
            walk_expr(e.then, path + (("then", None),))
            walk_expr(e.other, path + (("other", None),))
        elif isinstance(e, ast.Unary):
            walk_expr(e.operand, path + (("operand", None),))
        elif isinstance(e, ast.Concat):
            for i, part in enumerate(e.parts):
                walk_expr(part, path + (("parts", i),))
        elif isinstance(e, ast.Repeat):
            walk_expr(e.value, path + (("value", None),))
        elif isinstance(e, ast.Index):
            walk_expr(e.index, path + (("index", None),))

    def walk_stmt(s: ast.Stmt, path: Path) -> None:
        if isinstance(s, ast.Assign):
            walk_expr(s.rhs, path + (("rhs", None),))
        elif isinstance(s, ast.If):
            found.append(("branch", path, 1, None))
            walk_expr(s.cond, path + (("cond", None),))
            walk_stmt(s.then, path + (("then", None),))
            if s.other is not None:
                walk_stmt(s.other, path + (("other", None),))
        elif isinstance(s, ast.Case):
            walk_expr(s.subject, path + (("subject", None),))
            for i, arm in enumerate(s.arms):
                # labels are elaboration-time constants: skipped
                walk_stmt(arm.body, path + (("arms", i), ("body", None)))
            if s.default is not None:
                walk_stmt(s.default, path + (("default", None),))
        elif isinstance(s, ast.Block):
            for i, sub in enumerate(s.stmts):
                walk_stmt(sub, path + (("stmts", i),))

    for i, item in enumerate(m.items):
        base: Path = (("items", i),)
        if isinstance(item, ast.ContAssign):
            walk_expr(item.rhs, base + (("rhs", None),))
        elif isinstance(item, ast.AlwaysBlock):
            walk_stmt(item.body, base + (("body", None),))

    sites: list[LockSite] = []
    for kind, path, cost, cwidth in found:
        if scope == "const_only" and kind != "constant":
            continue
        sites.append(LockSite(len(sites), kind, path, cost, cwidth))
    return sites


def max_key_size(sites: list[LockSite]) -> int:
    return sum(s.bit_cost for s in sites)


def select_sites(sites: list[LockSite], budget_pct: int,
                 seed: int | random.Random = 0) -> tuple[list[LockSite], int]:
    """Seeded shuffle, then greedy accept while a site's cost still fits."""
    if not 0 < budget_pct <= 100:
        raise DomainError(f"budget_pct must be in (0, 100], got {budget_pct}")
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    target = budget_pct * max_key_size(sites) // 100
    order = list(sites)
    rng.shuffle(order)
    selected: list[LockSite] = []
    consumed = 0
    for site in order:
        if consumed + site.bit_cost <= target:
            selected.append(site)
            consumed += site.bit_cost
    return selected, consumed


# ------------------------------------------------------------------ transform


def module_rng(seed: int, module_name: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{module_name}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _key_ref(key_name: str, lo: int, hi: int) -> ast.Expr:
    if hi == lo:
        return ast.Index(key_name, ast.Const(32, lo, sized=False))
    return ast.Slice(key_name, hi, lo)


def _unique_port_name(m: ast.AstModule, wanted: str) -> str:
    taken = set(hdl.declared_names(m))
    name = wanted
    n = 0
    while name in taken:
        name = f"{wanted}_{n}"
        n += 1
    return name


def lock_module(m: ast.AstModule, strategy: LockStrategy,
                key_port_name: str = DEFAULT_KEY_PORT,
                ) -> tuple[ast.AstModule, KeySpec, LockReport]:
    """Lock one module; falls back to the original when nothing can be locked."""
    rng = module_rng(strategy.seed, m.name)
    sites = enumerate_sites(m, strategy.scope)

    def fallback(reason: str) -> tuple[ast.AstModule, KeySpec, LockReport]:
        spec = KeySpec(key_port_name, 0, 0, ())
        report = LockReport(m.name, "fallback_original", len(sites), 0, 0, reason)
        return m, spec, report

    if not sites:
        return fallback("no lockable sites")
    selected, consumed = select_sites(sites, strategy.budget_pct, rng)
    if not selected:
        return fallback("budget below smallest site cost")

    key_name = _unique_port_name(m, key_port_name)
    transforms = {}
    bindings: list[KeyBinding] = []
    correct = 0
    cursor = 0
    for site in selected:
        lo, hi = cursor, cursor + site.bit_cost - 1
        cursor = hi + 1
        key_ref = _key_ref(key_name, lo, hi)
        if site.kind == "constant":
            original = hdl.get_at(m, site.ast_path)
            if not isinstance(original, ast.Const):
                raise LockError(f"site {site.id} does not address a constant")
            correct |= original.value << lo
            transforms[site.ast_path] = _const_transform(key_ref)
        elif site.kind == "branch":
            variant = rng.choice(("xor", "xnor"))
            if variant == "xnor":
                correct |= 1 << lo
            transforms[site.ast_path] = _branch_transform(key_ref, variant)
        elif site.kind == "operation":
            original = hdl.get_at(m, site.ast_path)
            if not isinstance(original, ast.Binary) or original.op not in DUMMY_OPS:
                raise LockError(f"site {site.id} does not address a lockable operation")
            cands = DUMMY_OPS[original.op]
            dummy = cands[rng.randrange(len(cands))]
            correct |= 1 << lo
            transforms[site.ast_path] = _operation_transform(key_ref, dummy)
        else:  # pragma: no cover - kinds are closed
            raise LockError(f"unknown site kind {site.kind!r}")
        bindings.append(KeyBinding(site, lo, hi))

    locked = hdl.rewrite(m, transforms)
    locked = ast.AstModule(
        locked.name,
        locked.ports + (ast.Port(key_name, "input", consumed, ranged=True),),
        locked.params,
        locked.items,
    )
    spec = KeySpec(key_name, consumed, correct, tuple(bindings))
    report = LockReport(m.name, "locked", len(sites), len(selected), consumed)
    return locked, spec, report


def _const_transform(key_ref: ast.Expr):
    def fn(node: ast.Expr) -> ast.Expr:
        return key_ref
    return fn


def _branch_transform(key_ref: ast.Expr, variant: str):
    def fn(node):
        cond = node.cond
        if variant == "xnor":
            cond = ast.Unary("!", cond)
        new_cond = ast.Binary("^", cond, key_ref)
        if isinstance(node, ast.If):
            return ast.If(new_cond, node.then, node.other)
        if isinstance(node, ast.Ternary):
            return ast.Ternary(new_cond, node.then, node.other)
        raise LockError("branch transform applied to a non-branch node")
    return fn


def _operation_transform(key_ref: ast.Expr, dummy_op: str):
    def fn(node):
        if not isinstance(node, ast.Binary):
            raise LockError("operation transform applied to a non-operation node")
        return ast.Ternary(key_ref, node,
                           ast.Binary(dummy_op, node.left, node.right))
    return fn


# ------------------------------------------------------------------ unlocking


def apply_key(locked: ast.AstModule, key: KeySpec,
              value: int | str) -> ast.AstModule:
    """Substitute a key value for every key-slice reference and drop the port."""
    bits = parse_key_value(value, key.width)
    if key.width == 0:
        return locked
    if locked.port(key.key_port_name) is None:
        raise LockError(f"module has no key port {key.key_port_name!r}")
    name = key.key_port_name

    def sub(e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Slice) and e.name == name:
            width = e.msb - e.lsb + 1
            return ast.Const(width, (bits >> e.lsb) & ((1 << width) - 1))
        if isinstance(e, ast.Index) and e.name == name:
            if not isinstance(e.index, ast.Const):
                raise LockError("key port indexed with a non-constant")
            return ast.Const(1, (bits >> e.index.value) & 1)
        if isinstance(e, ast.Ref) and e.name == name:
            raise LockError("unsliced key port reference")
        if isinstance(e, ast.Index):
            return ast.Index(e.name, sub(e.index))
        if isinstance(e, ast.Unary):
            return ast.Unary(e.op, sub(e.operand))
        if isinstance(e, ast.Binary):
            return ast.Binary(e.op, sub(e.left), sub(e.right))
        if isinstance(e, ast.Ternary):
            return ast.Ternary(sub(e.cond), sub(e.then), sub(e.other))
        if isinstance(e, ast.Concat):
            return ast.Concat(tuple(sub(p) for p in e.parts))
        if isinstance(e, ast.Repeat):
            return ast.Repeat(e.count, sub(e.value))
        return e

    def sub_stmt(s: ast.Stmt) -> ast.Stmt:
        if isinstance(s, ast.Assign):
            return ast.Assign(s.target, sub(s.rhs), s.blocking)
        if isinstance(s, ast.If):
            return ast.If(sub(s.cond), sub_stmt(s.then),
                          sub_stmt(s.other) if s.other is not None else None)
        if isinstance(s, ast.Case):
            return ast.Case(
                sub(s.subject),
                tuple(ast.CaseArm(a.labels, sub_stmt(a.body)) for a in s.arms),
                sub_stmt(s.default) if s.default is not None else None)
        if isinstance(s, ast.Block):
            return ast.Block(tuple(sub_stmt(x) for x in s.stmts))
        return s

    items = []
    for item in locked.items:
        if isinstance(item, ast.ContAssign):
            items.append(ast.ContAssign(item.target, sub(item.rhs)))
        elif isinstance(item, ast.AlwaysBlock):
            items.append(ast.AlwaysBlock(item.edge, item.clock, sub_stmt(item.body)))
        else:
            items.append(item)

    ports = tuple(p for p in locked.ports if p.name != name)
    return ast.AstModule(locked.name, ports, locked.params, tuple(items))


def parse_key_value(value: int | str, width: int) -> int:
    if isinstance(value, str):
        text = value.strip().lower()
        try:
            bits = int(text, 16) if text.startswith("0x") else int(text, 2)
        except ValueError:
            raise WidthMismatchError(f"cannot parse key value {value!r}") from None
    else:
        bits = value
    if bits < 0 or bits >= (1 << width):
        raise WidthMismatchError(
            f"key value {value!r} does not fit in {width} bits")
    return bits


def format_key_value(value: int, width: int) -> str:
    digits = max(1, (width + 3) // 4)
    return f"0x{value:0{digits}x}"


# ------------------------------------------------------------------- key files


def key_file_dict(report: LockReport, spec: KeySpec) -> dict:
    return {
        "module": report.module,
        "status": report.status,
        "reason": report.reason,
        "key_port_name": spec.key_port_name,
        "width": spec.width,
        "correct_value": spec.correct_value_hex(),
        "bindings": [
            {
                "site_kind": b.site.kind,
                "ast_path": format_path(b.site.ast_path),
                "bit_lo": b.bit_lo,
                "bit_hi": b.bit_hi,
            }
            for b in spec.bindings
        ],
        "sites_considered": report.sites_considered,
        "sites_locked": report.sites_locked,
    }


def write_key_file(path: FsPath, report: LockReport, spec: KeySpec) -> None:
    path.write_text(json.dumps(key_file_dict(report, spec), indent=2) + "\n",
                    encoding="utf-8")


def read_key_file(path: FsPath) -> tuple[LockReport, KeySpec]:
    data = json.loads(path.read_text(encoding="utf-8"))
    bindings = []
    for i, b in enumerate(data["bindings"]):
        width = b["bit_hi"] - b["bit_lo"] + 1
        site = LockSite(i, b["site_kind"], parse_path(b["ast_path"]),
                        width if b["site_kind"] == "constant" else 1,
                        width if b["site_kind"] == "constant" else None)
        bindings.append(KeyBinding(site, b["bit_lo"], b["bit_hi"]))
    spec = KeySpec(data["key_port_name"], data["width"],
                   int(data["correct_value"], 16), tuple(bindings))
    report = LockReport(data["module"], data["status"],
                        data.get("sites_considered", 0),
                        data.get("sites_locked", 0),
                        data["width"], data.get("reason"))
    return report, spec
