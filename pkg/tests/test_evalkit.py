from __future__ import annotations

from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np
import pytest

from rtlock.errors import DomainError, EmptyCorpusError
from rtlock.evalkit import (
    EvalRecord, RaggedCorpusError, delta_pp, leakage_table, make_record,
    pass_at_k, quality_table, read_csv_table, read_records, render_bar_svg,
    write_leakage_csv, write_quality_csv, write_records,
)


def test_pass_at_k_edges():
    assert pass_at_k(10, 0, 1) == 0.0
    assert pass_at_k(10, 0, 10) == 0.0
    assert pass_at_k(10, 10, 1) == 1.0
    assert pass_at_k(10, 5, 1) == 0.5


def test_pass_at_k_closed_form():
    # 1 - C(5,2)/C(10,2) = 1 - 10/45
    assert pass_at_k(10, 5, 2) == pytest.approx(1 - 10 / 45, abs=1e-12)
    # exact rational evaluation across a grid, vs an independent Fraction oracle
    for n in (3, 10, 50):
        for c in range(n + 1):
            for k in (1, 2, min(5, n), n):
                expected = 1 - Fraction(comb(n - c, k), comb(n, k))
                assert pass_at_k(n, c, k) == float(expected)


def test_pass_at_k_domain():
    for n, c, k in [(10, 11, 1), (10, -1, 1), (10, 5, 0), (10, 5, 11)]:
        with pytest.raises(DomainError):
            pass_at_k(n, c, k)


def test_pass_at_k_monotone():
    for c in range(11):
        values = [pass_at_k(10, c, k) for k in range(1, 11)]
        assert values == sorted(values)
    for k in (1, 2, 5, 10):
        values = [pass_at_k(10, c, k) for c in range(11)]
        assert values == sorted(values)
    # pass@n is 1 exactly when at least one sample passes
    assert pass_at_k(10, 0, 10) == 0.0
    for c in range(1, 11):
        assert pass_at_k(10, c, 10) == 1.0
    # k=1 equals c/n exactly
    for c in range(11):
        assert pass_at_k(10, c, 1) == c / 10


def test_pass_at_k_matches_hypergeometric_sampler():
    rng = np.random.default_rng(12345)
    trials = 200_000
    for c in (0, 3, 7, 10):
        for k in (1, 2, 5, 10):
            p = pass_at_k(10, c, k)
            hits = rng.hypergeometric(c, 10 - c, k, size=trials) > 0
            p_hat = hits.mean()
            sigma = (p * (1 - p) / trials) ** 0.5
            assert abs(p_hat - p) <= max(3 * sigma, 1e-12), (c, k)


def _records(module, strategy, outcomes):
    return [make_record(module, strategy, i, 0.0, 100.0 if ok else 0.0)
            for i, ok in enumerate(outcomes)]


def test_quality_table_extremes():
    records = []
    for mod in ("m1", "m2"):
        records += _records(mod, "s", [True] * 10)
    table = quality_table(records, (1, 2, 5, 10))
    assert all(v == 100.0 for v in table["s"].values())

    records = []
    for mod in ("m1", "m2"):
        records += _records(mod, "s", [False] * 10)
    table = quality_table(records, (1, 2, 5, 10))
    assert all(v == 0.0 for v in table["s"].values())


def test_quality_table_mixed_fixture():
    """Three modules with c = 3, 5, 10 of n = 10: spreadsheet-style oracle."""
    records = []
    for mod, c in (("m1", 3), ("m2", 5), ("m3", 10)):
        records += _records(mod, "s", [True] * c + [False] * (10 - c))
    table = quality_table(records, (1, 2, 5, 10))

    def oracle(k):
        values = [1 - Fraction(comb(10 - c, k), comb(10, k)) for c in (3, 5, 10)]
        return float(100 * sum(values) / 3)

    for k in (1, 2, 5, 10):
        assert table["s"][k] == pytest.approx(oracle(k), abs=1e-9)
    # the k=1 cell, written out: mean(0.3, 0.5, 1.0) = 60%
    assert table["s"][1] == pytest.approx(60.0)


def test_quality_table_ragged():
    records = _records("m1", "s", [True] * 10) + _records("m2", "s", [True] * 9)
    with pytest.raises(RaggedCorpusError):
        quality_table(records)


def test_quality_table_k_exceeds_n():
    records = _records("m1", "s", [True] * 5)
    with pytest.raises(DomainError):
        quality_table(records, (10,))


def test_quality_table_order_invariant():
    records = []
    for mod, c in (("m1", 4), ("m2", 9)):
        records += _records(mod, "s", [True] * c + [False] * (10 - c))
    table_fwd = quality_table(records, (1, 5))
    table_rev = quality_table(list(reversed(records)), (1, 5))
    assert table_fwd == table_rev


def test_leakage_table_delegation():
    records = []
    for i in range(4):
        records.append(make_record("m1", "s", i, ss=0.9, eq=80.0))
        records.append(make_record("m2", "s", i, ss=0.1, eq=40.0))
    table = leakage_table(records)
    assert table["s"]["eq_mean"] == pytest.approx(60.0)
    assert table["s"]["eq_max"] == pytest.approx(60.0)  # per-module max, averaged
    assert table["s"]["ast_pass_rate"] == pytest.approx(50.0)
    with pytest.raises(EmptyCorpusError):
        leakage_table([])


def test_record_flags_and_thresholds():
    assert make_record("m", "s", 0, 0.6, 80.0).passed
    assert make_record("m", "s", 0, 0.6, 80.0).leaky
    assert not make_record("m", "s", 0, 0.59, 79.9).passed
    assert not make_record("m", "s", 0, 0.59, 79.9).leaky
    # raising the pass threshold never turns a fail into a pass
    for eq in (0.0, 50.0, 79.9, 80.0, 93.0, 100.0):
        lo = make_record("m", "s", 0, 0.0, eq, pass_threshold=80.0).passed
        hi = make_record("m", "s", 0, 0.0, eq, pass_threshold=90.0).passed
        assert not (hi and not lo)


def test_delta_pp():
    assert round(delta_pp(40.03, 28.75), 2) == 11.28
    assert delta_pp(55.5, 55.5) == 0.0
    assert delta_pp(0.0, 100.0) == -100.0


def test_record_io_roundtrip(tmp_path):
    records = [make_record("m", "s", i, 0.5, 50.0) for i in range(3)]
    path = tmp_path / "records.jsonl"
    write_records(path, records)
    assert read_records(path) == records
    # the serialized field is named "pass" per the record schema
    assert '"pass"' in path.read_text()


def test_csv_and_svg_outputs(tmp_path):
    table = {"s": {1: 50.0, 2: 75.0}}
    write_quality_csv(tmp_path / "q.csv", table)
    header, rows = read_csv_table(tmp_path / "q.csv")
    assert header == ["strategy", "k", "pass_at_k"]
    assert rows == [["s", "1", "50.00"], ["s", "2", "75.00"]]

    write_leakage_csv(tmp_path / "l.csv",
                      {"s": {"eq_mean": 10.0, "eq_max": 20.0,
                             "ast_pass_rate": 30.0}})
    header, rows = read_csv_table(tmp_path / "l.csv")
    assert header == ["strategy", "eq_mean", "eq_max", "ast_pass_rate"]

    render_bar_svg(tmp_path / "b.svg", "title", [("a", 10.0), ("b", 90.0)])
    svg = (tmp_path / "b.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<rect") == 2
    # deterministic bytes
    render_bar_svg(tmp_path / "b2.svg", "title", [("a", 10.0), ("b", 90.0)])
    assert (tmp_path / "b2.svg").read_text() == svg
