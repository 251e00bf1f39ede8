"""Two-state vectorized interpreter for supported modules.

Elaboration classifies every signal (input, clock, state element,
combinational net) and topologically orders the combinational units.
Evaluation then computes any output or register next-state function over
numpy arrays of input assignments, so exhaustive sweeps of a comparison
point's support are a handful of array operations rather than a Python
loop per vector.

Semantics are two-state (no x/z): undriven nets read 0, registers are free
inputs (next-state functions are compared combinationally), division by
zero yields 0, and out-of-range bit-selects read 0.  Signals whose value
the interpreter cannot stand behind (multiple drivers, combinational
cycles, nets touching an instance, clocks used as data, part-select
assignment targets) are tainted; cones that reach a tainted signal raise
ElaborationError so the caller can mark that point unsupported instead of
trusting a wrong value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RtlockError
from .hdl import ast
from .hdl.widths import decl_widths, max_eval_width, self_width

_UINT_LIMIT = 63  # switch to object arrays beyond this evaluation width


class ElaborationError(RtlockError):
    def __init__(self, msg: str, construct: str | None = None):
        super().__init__(msg)
        self.construct = construct


@dataclass(frozen=True)
class _Unit:
    kind: str  # "assign" | "comb"
    index: int
    writes: tuple[str, ...]
    reads: tuple[str, ...]
    item: ast.Item


class ModuleSim:
    """Elaborated module ready for vectorized evaluation."""

    def __init__(self, m: ast.AstModule):
        self.module = m
        self.widths = decl_widths(m)
        self.params = {p.name: p.value.value for p in m.params}
        self.inputs: dict[str, int] = {}
        self.outputs: dict[str, int] = {}
        self.clocks: set[str] = set()
        self.state: dict[str, int] = {}
        self.taint: dict[str, str] = {}
        self.use_object = max_eval_width(m) > _UINT_LIMIT
        self._units: list[_Unit] = []
        self._writer: dict[str, _Unit] = {}
        self._topo: list[_Unit] = []
        self._seq_blocks: list[tuple[ast.AlwaysBlock, tuple[str, ...], tuple[str, ...]]] = []
        self._reg_block: dict[str, ast.AlwaysBlock] = {}
        self._elaborate()

    # ------------------------------------------------------------ elaboration

    def _taint(self, name: str, reason: str) -> None:
        self.taint.setdefault(name, reason)

    def _elaborate(self) -> None:
        m = self.module
        for p in m.ports:
            if p.direction == "input":
                self.inputs[p.name] = p.width
            elif p.direction == "output":
                self.outputs[p.name] = p.width
            else:
                self._taint(p.name, "inout port")

        for item in m.items:
            if isinstance(item, ast.AlwaysBlock) and item.edge is not None:
                self.clocks.add(item.clock)

        unit_index = 0
        for item in m.items:
            if isinstance(item, ast.ContAssign):
                target = _target_name(item.target)
                if not isinstance(item.target, ast.Ref):
                    self._taint(target, "partial-select assignment target")
                reads = tuple(_expr_reads(item.rhs))
                self._add_unit(_Unit("assign", unit_index, (target,), reads, item))
                unit_index += 1
            elif isinstance(item, ast.AlwaysBlock):
                writes_b, writes_nb, reads, partial = _block_io(item.body)
                for name in partial:
                    self._taint(name, "partial-select assignment target")
                if item.edge is None:
                    for name in writes_nb:
                        self._taint(name, "non-blocking assignment outside an edge block")
                    self._add_unit(_Unit("comb", unit_index, tuple(writes_b),
                                         tuple(reads), item))
                    unit_index += 1
                else:
                    data_reads = tuple(r for r in reads if r != item.clock)
                    self._seq_blocks.append((item, tuple(writes_nb), data_reads))
                    for name in writes_nb:
                        if name in self._reg_block:
                            self._taint(name, "register driven by multiple edge blocks")
                        else:
                            self._reg_block[name] = item
                            self.state[name] = self.widths.get(name, 1)
                    for name in writes_b:
                        # block-local temporaries; unsafe to read elsewhere
                        self._taint(name, "blocking assignment inside an edge block")
            elif isinstance(item, ast.Instance):
                for _, expr in item.conns:
                    for name in _expr_reads(expr):
                        self._taint(name, "connected to an instance")

        for unit in self._units:
            for name in unit.writes:
                if name in self.inputs:
                    self._taint(name, "input port driven inside the module")
                if name in self.state:
                    self._taint(name, "register with both edge and combinational drivers")
            if set(unit.reads) & self.clocks:
                for name in unit.writes:
                    self._taint(name, "clock used as data")
        for _, regs, reads in self._seq_blocks:
            if set(reads) & self.clocks:
                for name in regs:
                    self._taint(name, "clock used as data")

        self._toposort()

    def _add_unit(self, unit: _Unit) -> None:
        self._units.append(unit)
        for name in unit.writes:
            if name in self._writer or name in self.params:
                self._taint(name, "multiple drivers")
            else:
                self._writer[name] = unit

    def _toposort(self) -> None:
        deps: dict[int, set[int]] = {}
        for unit in self._units:
            ds = set()
            for name in unit.reads:
                w = self._writer.get(name)
                if w is not None and w.index != unit.index:
                    ds.add(w.index)
            deps[unit.index] = ds
        by_index = {u.index: u for u in self._units}
        ready = sorted(i for i, ds in deps.items() if not ds)
        order: list[int] = []
        resolved: set[int] = set()
        while ready:
            i = ready.pop(0)
            order.append(i)
            resolved.add(i)
            newly = sorted(
                j for j, ds in deps.items()
                if j not in resolved and j not in ready and ds <= resolved
            )
            ready.extend(newly)
            ready.sort()
        for unit in self._units:
            if unit.index not in resolved:
                for name in unit.writes:
                    self._taint(name, "combinational cycle")
        self._topo = [by_index[i] for i in order]

    # ------------------------------------------------------------- inspection

    def comparison_roots(self) -> list[tuple[str, str, int]]:
        """(kind, name, width) for output ports then state elements."""
        roots = [("output", p.name, p.width)
                 for p in self.module.ports if p.direction == "output"]
        roots.extend(("seq", name, self.state[name]) for name in self.state)
        return roots

    def support(self, kind: str, name: str) -> tuple[tuple[str, int], ...]:
        """Leaf inputs/state the point's cone depends on, sorted by name.

        Raises ElaborationError when the cone reaches a tainted signal.
        """
        if kind == "seq":
            block = self._reg_block.get(name)
            if block is None:
                raise ElaborationError(f"no edge block drives {name!r}")
            roots = next(reads for blk, regs, reads in self._seq_blocks
                         if blk is block)
            roots = roots + (name,)  # hold semantics read the register itself
        else:
            roots = (name,)
        leaves: dict[str, int] = {}
        seen: set[str] = set()
        stack = list(roots)
        while stack:
            s = stack.pop()
            if s in seen:
                continue
            seen.add(s)
            if s in self.taint:
                raise ElaborationError(
                    f"cone of {name!r} reaches {s!r}: {self.taint[s]}",
                    construct=self.taint[s])
            if s in self.params or s in self.clocks:
                continue
            if s in self.inputs or s in self.state:
                leaves[s] = self.widths.get(s, 1)
                continue
            unit = self._writer.get(s)
            if unit is None:
                continue  # undriven: constant 0
            stack.extend(unit.reads)
        return tuple(sorted(leaves.items()))

    # ------------------------------------------------------------- evaluation

    def _scalar(self, v: int):
        return v if self.use_object else np.uint64(v)

    def _fill(self, v: int, n: int):
        dtype = object if self.use_object else np.uint64
        return np.full(n, v, dtype=dtype)

    def evaluate(self, kind: str, name: str, env: dict[str, np.ndarray],
                 n: int) -> np.ndarray:
        """Value array of an output port or register next-state function.

        ``env`` assigns arrays of length ``n`` to (a superset of) the point's
        support; unassigned inputs and state read 0.
        """
        with np.errstate(over="ignore"):
            return self._evaluate(kind, name, env, n)

    def _evaluate(self, kind: str, name: str, env: dict[str, np.ndarray],
                  n: int) -> np.ndarray:
        values: dict[str, object] = {}
        for pname, pvalue in self.params.items():
            values[pname] = self._scalar(pvalue)
        for sig, width in list(self.inputs.items()) + list(self.state.items()):
            if sig in env:
                arr = env[sig]
                if self.use_object and arr.dtype != object:
                    arr = arr.astype(object)
                values[sig] = arr & self._scalar(_mask(width))
            else:
                values[sig] = self._scalar(0)
        for unit in self._topo:
            self._run_unit(unit, values, n)
        if kind == "output":
            return self._as_array(values.get(name, self._scalar(0)), n)
        if kind == "seq":
            block = self._reg_block[name]
            local = dict(values)
            guard = np.full(n, True)
            nba: dict[str, object] = {}
            self._exec(block.body.stmts, local, guard, nba, n)
            return self._as_array(nba.get(name, values[name]), n)
        raise ValueError(f"unknown point kind {kind!r}")

    def _as_array(self, v, n: int) -> np.ndarray:
        if isinstance(v, np.ndarray) and v.shape == (n,):
            return v
        return self._fill(int(v), n) if not isinstance(v, np.ndarray) \
            else np.broadcast_to(v, (n,)).copy()

    def _run_unit(self, unit: _Unit, values: dict, n: int) -> None:
        if unit.kind == "assign":
            item = unit.item
            target = _target_name(item.target)
            w = self.widths.get(target, 1)
            ctx = max(w, self_width(item.rhs, self.widths))
            v = self._eval(item.rhs, ctx, values)
            values[target] = v & self._scalar(_mask(w))
        else:  # comb block: targets restart at 0 every evaluation
            for name in unit.writes:
                values[name] = self._scalar(0)
            guard = np.full(n, True)
            self._exec(unit.item.body.stmts, values, guard, None, n)

    def _exec(self, stmts, values: dict, guard, nba, n: int) -> None:
        for s in stmts:
            if isinstance(s, ast.Assign):
                target = _target_name(s.target)
                w = self.widths.get(target, 1)
                ctx = max(w, self_width(s.rhs, self.widths))
                v = self._eval(s.rhs, ctx, values) & self._scalar(_mask(w))
                store = nba if (nba is not None and not s.blocking) else values
                old = store.get(target, values.get(target, self._scalar(0)))
                store[target] = np.where(guard, v, old)
            elif isinstance(s, ast.If):
                c = self._truthy(self._eval(s.cond, self_width(s.cond, self.widths),
                                            values))
                self._exec(s.then.stmts, values, np.logical_and(guard, c), nba, n)
                if s.other is not None:
                    self._exec(s.other.stmts, values,
                               np.logical_and(guard, np.logical_not(c)), nba, n)
            elif isinstance(s, ast.Case):
                cw = self_width(s.subject, self.widths)
                for arm in s.arms:
                    for label in arm.labels:
                        cw = max(cw, self_width(label, self.widths))
                subj = self._eval(s.subject, cw, values)
                remaining = guard
                for arm in s.arms:
                    hit = np.full(n, False)
                    for label in arm.labels:
                        lv = self._eval(label, cw, values)
                        hit = np.logical_or(hit, _bools(subj == lv))
                    self._exec(arm.body.stmts, values,
                               np.logical_and(remaining, hit), nba, n)
                    remaining = np.logical_and(remaining, np.logical_not(hit))
                if s.default is not None:
                    self._exec(s.default.stmts, values, remaining, nba, n)
            elif isinstance(s, ast.Block):
                self._exec(s.stmts, values, guard, nba, n)
            else:  # pragma: no cover - statement kinds are closed
                raise ElaborationError(f"unknown statement {s!r}")

    def _truthy(self, v):
        return _bools(v != self._scalar(0))

    def _b2i(self, c):
        return np.where(_bools(c), self._scalar(1), self._scalar(0))

    def _eval(self, e: ast.Expr, ctx: int, values: dict):
        c = self._scalar
        if isinstance(e, ast.Const):
            return c(e.value)
        if isinstance(e, ast.Ref):
            return values[e.name]
        if isinstance(e, ast.Index):
            base = values[e.name]
            w = self.widths.get(e.name, 1)
            idx = self._eval(e.index, self_width(e.index, self.widths), values)
            shift = np.minimum(idx, c(w))
            bit = (base >> shift) & c(1)
            return np.where(idx < c(w), bit, c(0))
        if isinstance(e, ast.Slice):
            base = values[e.name]
            return (base >> c(e.lsb)) & c(_mask(e.msb - e.lsb + 1))
        if isinstance(e, ast.Unary):
            return self._eval_unary(e, ctx, values)
        if isinstance(e, ast.Binary):
            return self._eval_binary(e, ctx, values)
        if isinstance(e, ast.Ternary):
            cond = self._truthy(
                self._eval(e.cond, self_width(e.cond, self.widths), values))
            then = self._eval(e.then, ctx, values)
            other = self._eval(e.other, ctx, values)
            return np.where(cond, then, other)
        if isinstance(e, ast.Concat):
            acc = c(0)
            for part in e.parts:
                pw = self_width(part, self.widths)
                pv = self._eval(part, pw, values)
                acc = (acc << c(pw)) | pv
            return acc & c(_mask(ctx))
        if isinstance(e, ast.Repeat):
            pw = self_width(e.value, self.widths)
            pv = self._eval(e.value, pw, values)
            acc = c(0)
            for _ in range(e.count):
                acc = (acc << c(pw)) | pv
            return acc & c(_mask(ctx))
        raise ElaborationError(f"unknown expression {e!r}")

    def _eval_unary(self, e: ast.Unary, ctx: int, values: dict):
        c = self._scalar
        opw = self_width(e.operand, self.widths)
        if e.op == "~":
            return self._eval(e.operand, ctx, values) ^ c(_mask(ctx))
        if e.op == "-":
            v = self._eval(e.operand, ctx, values)
            return (c(_mask(ctx)) - v + c(1)) & c(_mask(ctx))
        if e.op == "+":
            return self._eval(e.operand, ctx, values)
        v = self._eval(e.operand, opw, values)
        if e.op == "!":
            return self._b2i(v == c(0))
        if e.op == "&":
            return self._b2i(v == c(_mask(opw)))
        if e.op == "~&":
            return self._b2i(v != c(_mask(opw)))
        if e.op == "|":
            return self._b2i(v != c(0))
        if e.op == "~|":
            return self._b2i(v == c(0))
        if e.op in ("^", "~^"):
            par = self._parity(v)
            return par if e.op == "^" else par ^ c(1)
        raise ElaborationError(f"unknown unary operator {e.op!r}")

    def _parity(self, v):
        c = self._scalar
        if self.use_object:
            pop = np.frompyfunc(lambda x: bin(int(x)).count("1") & 1, 1, 1)
            out = pop(v)
            return out if isinstance(out, np.ndarray) else int(out)
        x = v if isinstance(v, np.ndarray) else np.uint64(v)
        for s in (32, 16, 8, 4, 2, 1):
            x = x ^ (x >> np.uint64(s))
        return x & c(1)

    def _eval_binary(self, e: ast.Binary, ctx: int, values: dict):
        c = self._scalar
        op = e.op
        if op in ("&&", "||"):
            l = self._truthy(self._eval(e.left, self_width(e.left, self.widths), values))
            r = self._truthy(self._eval(e.right, self_width(e.right, self.widths), values))
            combined = np.logical_and(l, r) if op == "&&" else np.logical_or(l, r)
            return self._b2i(combined)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            wc = max(self_width(e.left, self.widths), self_width(e.right, self.widths))
            l = self._eval(e.left, wc, values)
            r = self._eval(e.right, wc, values)
            res = {"==": lambda: l == r, "!=": lambda: l != r,
                   "<": lambda: l < r, "<=": lambda: l <= r,
                   ">": lambda: l > r, ">=": lambda: l >= r}[op]()
            return self._b2i(res)
        if op in ("<<", ">>"):
            l = self._eval(e.left, ctx, values)
            amt = self._eval(e.right, self_width(e.right, self.widths), values)
            amt = np.minimum(amt, c(ctx))
            if op == "<<":
                return (l << amt) & c(_mask(ctx))
            return l >> amt
        l = self._eval(e.left, ctx, values)
        r = self._eval(e.right, ctx, values)
        mask = c(_mask(ctx))
        if op == "+":
            return (l + r) & mask
        if op == "-":
            # uint64 wraps mod 2^64 and python ints mask two's-complement;
            # both reduce to mod 2^ctx under the mask
            return (l - r) & mask
        if op == "*":
            return (l * r) & mask
        if op == "/":
            zero = r == c(0)
            safe = np.where(zero, c(1), r)
            return np.where(zero, c(0), l // safe)
        if op == "%":
            zero = r == c(0)
            safe = np.where(zero, c(1), r)
            return np.where(zero, c(0), l % safe)
        if op == "&":
            return l & r
        if op == "|":
            return l | r
        if op == "^":
            return l ^ r
        if op in ("~^", "^~"):
            return (l ^ r) ^ mask
        raise ElaborationError(f"unknown binary operator {op!r}")


def _mask(width: int) -> int:
    return (1 << width) - 1


def _bools(x):
    if isinstance(x, np.ndarray) and x.dtype != np.bool_:
        return x.astype(bool)
    return x


def _target_name(e: ast.Expr) -> str:
    if isinstance(e, (ast.Ref, ast.Index, ast.Slice)):
        return e.name
    raise ElaborationError(f"unsupported assignment target {e!r}")


def _expr_reads(e: ast.Expr) -> list[str]:
    out: list[str] = []

    def walk(x: ast.Expr) -> None:
        if isinstance(x, ast.Ref):
            out.append(x.name)
        elif isinstance(x, ast.Index):
            out.append(x.name)
            walk(x.index)
        elif isinstance(x, ast.Slice):
            out.append(x.name)
        elif isinstance(x, ast.Unary):
            walk(x.operand)
        elif isinstance(x, ast.Binary):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, ast.Ternary):
            walk(x.cond)
            walk(x.then)
            walk(x.other)
        elif isinstance(x, ast.Concat):
            for p in x.parts:
                walk(p)
        elif isinstance(x, ast.Repeat):
            walk(x.value)

    walk(e)
    return out


def _block_io(block: ast.Block) -> tuple[set[str], set[str], set[str], set[str]]:
    """(blocking writes, non-blocking writes, reads, partial-select targets)."""
    wb: set[str] = set()
    wnb: set[str] = set()
    reads: set[str] = set()
    partial: set[str] = set()

    def stmt(s: ast.Stmt) -> None:
        if isinstance(s, ast.Assign):
            name = _target_name(s.target)
            (wb if s.blocking else wnb).add(name)
            if not isinstance(s.target, ast.Ref):
                partial.add(name)
                if isinstance(s.target, ast.Index):
                    reads.update(_expr_reads(s.target.index))
            reads.update(_expr_reads(s.rhs))
        elif isinstance(s, ast.If):
            reads.update(_expr_reads(s.cond))
            stmt(s.then)
            if s.other is not None:
                stmt(s.other)
        elif isinstance(s, ast.Case):
            reads.update(_expr_reads(s.subject))
            for arm in s.arms:
                for label in arm.labels:
                    reads.update(_expr_reads(label))
                stmt(arm.body)
            if s.default is not None:
                stmt(s.default)
        elif isinstance(s, ast.Block):
            for sub in s.stmts:
                stmt(sub)

    for s in block.stmts:
        stmt(s)
    return wb, wnb, reads, partial
