"""Desk-scale functional equivalence via comparison points.

Comparison points cover output ports and all sequential elements.  Points
pair by (kind, name) across the two designs, the joint support of the pair
is enumerated exhaustively when it fits the bit budget and sampled with a
seeded RNG otherwise, and the equivalence ratio is the percentage of
matching points.  Points that exist only in the golden design count as
unmatched; points whose cone the interpreter cannot stand behind count as
unsupported.  Both are non-matching.

Sampled verdicts are one-sided: truly equivalent points always match, so
sampling can only over-estimate the ratio, never under-estimate it; every
report discloses the per-point mode.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyCorpusError
from .hdl import ast
from .simulate import ElaborationError, ModuleSim

DEFAULT_BUDGET_BITS = 20
DEFAULT_VECTORS = 10000


@dataclass(frozen=True)
class ComparisonPoint:
    """An output port or sequential element with an evaluable cone."""

    name: str
    kind: str  # "output" | "seq"
    width: int
    support: tuple[tuple[str, int], ...] | None
    error: str | None = None  # set when the cone is unsupported

    @property
    def support_bits(self) -> int:
        return sum(w for _, w in self.support) if self.support else 0


@dataclass(frozen=True)
class PointResult:
    name: str
    kind: str
    verdict: str  # "match" | "mismatch" | "unmatched" | "unsupported"
    exhaustive: bool = False
    support_bits: int = 0
    counterexample: dict | None = None
    reason: str | None = None


@dataclass(frozen=True)
class EquivReport:
    points: tuple[PointResult, ...]
    eq: float
    mode: str  # "exhaustive" | "sampled"
    n_vectors: int
    seed: int

    def counterexamples(self) -> list[dict]:
        return [p.counterexample for p in self.points if p.counterexample]


def elaborate_points(m: ast.AstModule) -> list[ComparisonPoint]:
    """One point per output port and per non-blocking-assigned register."""
    sim = ModuleSim(m)
    return _points_of(sim)


def _points_of(sim: ModuleSim) -> list[ComparisonPoint]:
    points = []
    for kind, name, width in sim.comparison_roots():
        try:
            support = sim.support(kind, name)
            points.append(ComparisonPoint(name, kind, width, support))
        except ElaborationError as exc:
            points.append(ComparisonPoint(name, kind, width, None, str(exc)))
    return points


def check_equivalence(gen: ast.AstModule, gold: ast.AstModule,
                      budget_bits: int = DEFAULT_BUDGET_BITS,
                      n_vectors: int = DEFAULT_VECTORS,
                      seed: int = 0) -> EquivReport:
    """Compare ``gen`` against golden ``gold`` point by point."""
    if budget_bits < 0 or n_vectors < 1:
        raise DomainError("budget_bits must be >= 0 and n_vectors >= 1")
    gold_sim = ModuleSim(gold)
    gen_sim = ModuleSim(gen)
    gold_points = _points_of(gold_sim)
    gen_points = {(p.kind, p.name): p for p in _points_of(gen_sim)}

    results: list[PointResult] = []
    any_sampled = False
    for gp in gold_points:
        peer = gen_points.get((gp.kind, gp.name))
        if peer is None:
            results.append(PointResult(gp.name, gp.kind, "unmatched"))
            continue
        if gp.error is not None or peer.error is not None:
            results.append(PointResult(gp.name, gp.kind, "unsupported",
                                       reason=gp.error or peer.error))
            continue
        joint: dict[str, int] = {}
        for name, width in gp.support + peer.support:
            joint[name] = max(joint.get(name, 0), width)
        names = sorted(joint)
        total_bits = sum(joint.values())
        exhaustive = total_bits <= budget_bits
        env, n = _assignments(names, joint, exhaustive, n_vectors,
                              _point_seed(seed, gold.name, gp.kind, gp.name))
        any_sampled = any_sampled or not exhaustive
        gold_vals = gold_sim.evaluate(gp.kind, gp.name, env, n)
        gen_vals = gen_sim.evaluate(gp.kind, gp.name, env, n)
        diff = np.asarray(gold_vals != gen_vals)
        if diff.dtype != np.bool_:
            diff = diff.astype(bool)
        if not diff.any():
            results.append(PointResult(gp.name, gp.kind, "match",
                                       exhaustive, total_bits))
            continue
        i = int(np.argmax(diff))
        cex = {
            "inputs": {name: int(env[name][i]) for name in names},
            "golden": int(gold_vals[i]),
            "generated": int(gen_vals[i]),
        }
        results.append(PointResult(gp.name, gp.kind, "mismatch",
                                   exhaustive, total_bits, cex))

    matches = sum(1 for r in results if r.verdict == "match")
    eq = 100.0 * matches / len(results) if results else 100.0
    return EquivReport(tuple(results), eq,
                       "sampled" if any_sampled else "exhaustive",
                       n_vectors, seed)


def _point_seed(seed: int, module: str, kind: str, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{module}:{kind}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _assignments(names: list[str], widths: dict[str, int], exhaustive: bool,
                 n_vectors: int, seed: int) -> tuple[dict[str, np.ndarray], int]:
    if exhaustive:
        total = sum(widths[n] for n in names)
        n = 1 << total
        idx = np.arange(n, dtype=np.uint64)
        env = {}
        offset = 0
        for name in names:
            w = widths[name]
            env[name] = (idx >> np.uint64(offset)) & np.uint64((1 << w) - 1)
            offset += w
        return env, n
    rng = np.random.default_rng(seed)
    env = {}
    for name in names:
        w = widths[name]
        if w <= 63:
            env[name] = rng.integers(0, 1 << w, size=n_vectors, dtype=np.uint64)
        else:
            arr = np.empty(n_vectors, dtype=object)
            for i in range(n_vectors):
                arr[i] = int.from_bytes(rng.bytes((w + 7) // 8), "big") & ((1 << w) - 1)
            env[name] = arr
    return env, n_vectors


def eq_aggregate(per_module: dict[str, list[float]],
                 reduction: str = "mean") -> float:
    """Reduce per-sample eq values per module, then average over modules."""
    if reduction not in ("mean", "max"):
        raise DomainError(f"unknown reduction {reduction!r}")
    if not per_module:
        raise EmptyCorpusError("no modules to aggregate")
    per_values = []
    for name, values in per_module.items():
        if not values:
            raise EmptyCorpusError(f"module {name!r} has no samples")
        per_values.append(max(values) if reduction == "max"
                          else sum(values) / len(values))
    return sum(per_values) / len(per_values)
