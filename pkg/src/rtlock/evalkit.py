"""Quality and leakage metrics over per-sample evaluation records.

The quality estimator is the unbiased pass@k form 1 - C(n-c, k)/C(n, k)
(with C(a, b) = 0 when a < b), evaluated in exact rational arithmetic and
only converted to float for reporting.  A generated sample passes when its
equivalence ratio meets the pass threshold (default 80%); it is leaky when
its similarity score meets the leak threshold (default 0.6).  Corpus-level
numbers are unweighted means over modules.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from math import comb
from pathlib import Path

from .equiv import eq_aggregate
from .errors import DomainError, EmptyCorpusError, RtlockError
from .similarity import ast_pass_rate

PASS_EQ_THRESHOLD = 80.0
LEAK_SS_THRESHOLD = 0.6
DEFAULT_K_LIST = (1, 2, 5, 10)
DEFAULT_N_SAMPLES = 10


class RaggedCorpusError(RtlockError):
    """Modules disagree on the number of samples within one strategy."""


@dataclass(frozen=True)
class EvalRecord:
    module: str
    strategy: str
    sample_id: int
    ss: float
    eq: float
    passed: bool
    leaky: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    @staticmethod
    def from_dict(d: dict) -> "EvalRecord":
        return EvalRecord(d["module"], d["strategy"], d["sample_id"],
                          d["ss"], d["eq"], d.get("pass", d.get("passed")),
                          d["leaky"])


def make_record(module: str, strategy: str, sample_id: int, ss: float,
                eq: float, pass_threshold: float = PASS_EQ_THRESHOLD,
                leak_threshold: float = LEAK_SS_THRESHOLD) -> EvalRecord:
    return EvalRecord(module, strategy, sample_id, ss, eq,
                      passed=eq >= pass_threshold, leaky=ss >= leak_threshold)


@dataclass(frozen=True)
class PassAtK:
    k: int
    n: int
    c: int
    value: float


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k samples (drawn from n, c passing)
    passes: 1 - C(n-c, k)/C(n, k), evaluated exactly."""
    if not (0 <= c <= n) or not (1 <= k <= n):
        raise DomainError(f"need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")
    value = 1 - Fraction(comb(n - c, k), comb(n, k))
    return float(value)


def quality_table(records: list[EvalRecord],
                  k_list: tuple[int, ...] = DEFAULT_K_LIST,
                  ) -> dict[str, dict[int, float]]:
    """Per strategy and k: mean over modules of pass@k, as a percentage."""
    if not records:
        raise EmptyCorpusError("no evaluation records")
    grouped: dict[str, dict[str, list[EvalRecord]]] = {}
    for r in records:
        grouped.setdefault(r.strategy, {}).setdefault(r.module, []).append(r)
    table: dict[str, dict[int, float]] = {}
    for strategy, modules in sorted(grouped.items()):
        counts = {len(rs) for rs in modules.values()}
        if len(counts) != 1:
            raise RaggedCorpusError(
                f"strategy {strategy!r} has uneven sample counts {sorted(counts)}")
        n = counts.pop()
        for k in k_list:
            if k > n:
                raise DomainError(f"k={k} exceeds n={n} samples")
        table[strategy] = {}
        for k in k_list:
            values = [pass_at_k(n, sum(1 for r in rs if r.passed), k)
                      for rs in modules.values()]
            table[strategy][k] = 100.0 * sum(values) / len(values)
    return table


def leakage_table(records: list[EvalRecord]) -> dict[str, dict[str, float]]:
    """Per strategy: mean/max equivalence ratio and the AST pass rate."""
    if not records:
        raise EmptyCorpusError("no evaluation records")
    grouped: dict[str, dict[str, list[EvalRecord]]] = {}
    for r in records:
        grouped.setdefault(r.strategy, {}).setdefault(r.module, []).append(r)
    table: dict[str, dict[str, float]] = {}
    for strategy, modules in sorted(grouped.items()):
        eqs = {m: [r.eq for r in rs] for m, rs in modules.items()}
        flags = {m: [r.leaky for r in rs] for m, rs in modules.items()}
        table[strategy] = {
            "eq_mean": eq_aggregate(eqs, "mean"),
            "eq_max": eq_aggregate(eqs, "max"),
            "ast_pass_rate": ast_pass_rate(flags),
        }
    return table


def delta_pp(a: float, b: float) -> float:
    """Difference of two percentages, in percentage points."""
    return a - b


# ----------------------------------------------------------------- record IO


def write_records(path: Path, records: list[EvalRecord]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_records(path: Path) -> list[EvalRecord]:
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EvalRecord.from_dict(json.loads(line)))
    return records


# ---------------------------------------------------------------- CSV output
#
# CSV schemas (documented here, stable):
#   quality.csv:  strategy,k,pass_at_k      (pass_at_k in %, 2 decimals)
#   leakage.csv:  strategy,eq_mean,eq_max,ast_pass_rate   (%, 2 decimals)
#   matrix CSVs:  first column = row label, remaining columns = col labels


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def write_quality_csv(path: Path, table: dict[str, dict[int, float]]) -> None:
    lines = ["strategy,k,pass_at_k"]
    for strategy in sorted(table):
        for k in sorted(table[strategy]):
            lines.append(f"{strategy},{k},{_fmt(table[strategy][k])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_leakage_csv(path: Path, table: dict[str, dict[str, float]]) -> None:
    lines = ["strategy,eq_mean,eq_max,ast_pass_rate"]
    for strategy in sorted(table):
        row = table[strategy]
        lines.append(f"{strategy},{_fmt(row['eq_mean'])},{_fmt(row['eq_max'])},"
                     f"{_fmt(row['ast_pass_rate'])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_matrix_csv(path: Path, matrix: dict[str, dict[str, float]],
                     row_header: str) -> None:
    """Paper-style layout: one row per strategy, one column per variant."""
    cols: list[str] = []
    for row in matrix.values():
        for col in row:
            if col not in cols:
                cols.append(col)
    lines = [",".join([row_header] + cols)]
    for label in matrix:
        cells = [label]
        for col in cols:
            value = matrix[label].get(col)
            cells.append(_fmt(value) if value is not None else "")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv_table(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------- SVG output


def render_bar_svg(path: Path, title: str, data: list[tuple[str, float]],
                   y_max: float = 100.0) -> None:
    """Minimal deterministic bar chart; values are percentages."""
    bar_w, gap, height, base = 56, 18, 220, 40
    width = gap + len(data) * (bar_w + gap)
    plot_h = height - 2 * base
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{max(width, 320)}" '
        f'height="{height}">',
        f'<text x="10" y="20" font-size="14" font-family="sans-serif">'
        f'{title}</text>',
    ]
    x = gap
    for label, value in data:
        frac = 0.0 if y_max <= 0 else max(0.0, min(1.0, value / y_max))
        bh = round(plot_h * frac)
        y = height - base - bh
        parts.append(f'<rect x="{x}" y="{y}" width="{bar_w}" height="{bh}" '
                     f'fill="#4878a8"/>')
        parts.append(f'<text x="{x + bar_w // 2}" y="{y - 4}" font-size="10" '
                     f'text-anchor="middle" font-family="sans-serif">'
                     f'{_fmt(value)}</text>')
        parts.append(f'<text x="{x + bar_w // 2}" y="{height - base + 14}" '
                     f'font-size="10" text-anchor="middle" '
                     f'font-family="sans-serif">{label}</text>')
        x += bar_w + gap
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
