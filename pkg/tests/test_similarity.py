from __future__ import annotations

import random

import pytest

from rtlock.errors import EmptyCorpusError
from rtlock.hdl import parse_module, rename_identifiers
from rtlock.similarity import (
    FingerprintSet, ParamMismatchError, SimilarityResult, TokenStream,
    ast_pass_rate, classify_leak, fingerprint, kgram_hashes, score, tokenize,
)

INV = "module inv(input a, output y); assign y = ~a; endmodule"


def test_tokenize_raw_keeps_lexemes():
    ts = tokenize(parse_module(INV), "raw")
    texts = [t[1] for t in ts.tokens]
    assert "inv" in texts and "a" in texts and "y" in texts
    positions = [t[2] for t in ts.tokens]
    assert positions == sorted(positions) and len(set(positions)) == len(positions)


def test_ident_normalization_equates_renamings():
    m = parse_module(INV)
    renamed = rename_identifiers(m, {"a": "din", "y": "dout"}, "flip")
    assert tokenize(m, "ident").tokens == tokenize(renamed, "ident").tokens
    assert tokenize(m, "raw").tokens != tokenize(renamed, "raw").tokens


def test_empty_body_tokenizes_to_header_only():
    ts = tokenize(parse_module("module stub(input a, output y); endmodule"))
    assert any(t[1] == "endmodule" for t in ts.tokens)


def _stream(texts) -> TokenStream:
    return TokenStream(tuple(("IDENT", t, i) for i, t in enumerate(texts)),
                       "raw")


def test_fingerprint_identical_streams():
    ts = _stream(list("abcdefghijklmnop"))
    assert fingerprint(ts, 4, 3) == fingerprint(ts, 4, 3)


def test_short_stream_yields_empty_set():
    assert fingerprint(_stream(["a", "b"]), 4, 3).prints == frozenset()


def test_stream_shorter_than_window_still_fingerprints():
    # reflexivity needs at least one print whenever len >= k
    ts = _stream(["a", "b", "c", "d", "e"])
    fp = fingerprint(ts, 4, 13)
    assert len(fp.prints) == 1


def test_winnowing_guarantee_small():
    rng = random.Random(7)
    alphabet = [f"t{i}" for i in range(12)]
    for _ in range(300):
        k = rng.randrange(2, 6)
        w = rng.randrange(1, 6)
        run = [rng.choice(alphabet) for _ in range(k + w - 1)]
        a = [rng.choice(alphabet) for _ in range(rng.randrange(0, 15))] + run \
            + [rng.choice(alphabet) for _ in range(rng.randrange(0, 15))]
        b = [rng.choice(alphabet) for _ in range(rng.randrange(0, 15))] + run \
            + [rng.choice(alphabet) for _ in range(rng.randrange(0, 15))]
        fa = fingerprint(_stream(a), k, w)
        fb = fingerprint(_stream(b), k, w)
        assert fa.hashes & fb.hashes, (k, w, run)
        # winnowed prints come from the full k-gram hash population
        assert fa.hashes <= set(kgram_hashes(_stream(a), k))


def test_score_reflexive_and_disjoint():
    fa = fingerprint(_stream(list("abcdefghij")), 3, 2)
    assert score(fa, fa).ss == 1.0
    fb = fingerprint(_stream(list("qrstuvwxyz")), 3, 2)
    r = score(fa, fb)
    assert r.ss == 0.0 and r.shared == 0


def test_prefix_stream_is_fully_covered():
    """gen = ref stream + appended tokens: every ref window recurs in gen,
    so every ref fingerprint is shared and ss = 1.0 (provable case)."""
    rng = random.Random(3)
    alphabet = [f"t{i}" for i in range(9)]
    for _ in range(50):
        k, w = rng.randrange(2, 6), rng.randrange(1, 5)
        ref_toks = [rng.choice(alphabet) for _ in range(k + w - 1 +
                                                        rng.randrange(0, 20))]
        gen_toks = ref_toks + [rng.choice(alphabet)
                               for _ in range(rng.randrange(1, 20))]
        ref = fingerprint(_stream(ref_toks), k, w)
        gen = fingerprint(_stream(gen_toks), k, w)
        assert score(gen, ref).ss == 1.0


def test_score_reference_coverage():
    """A generation copying the reference plus appended items scores 1.0."""
    base = ("module m(input [3:0] a, input [3:0] b, output [3:0] y);"
            " wire [3:0] mixed;"
            " assign mixed = (a ^ b) + 4'h9;"
            " assign y = mixed & (a | b);"
            " endmodule")
    extended = ("module m(input [3:0] a, input [3:0] b, output [3:0] y);"
                " wire [3:0] mixed;"
                " assign mixed = (a ^ b) + 4'h9;"
                " assign y = mixed & (a | b);"
                " wire [3:0] spare;"
                " assign spare = {b[1:0], a[3:2]} - 4'h5;"
                " endmodule")
    k, w = 5, 4
    ref = fingerprint(tokenize(parse_module(base), "ident"), k, w)
    gen = fingerprint(tokenize(parse_module(extended), "ident"), k, w)
    result = score(gen, ref)
    # brute-force oracle over the winnowed sets
    shared = len({h for h, _ in gen.prints} & {h for h, _ in ref.prints})
    assert result.shared == shared
    assert result.ss == 1.0
    # the reverse direction is < 1 (the generation has unmatched content)
    assert score(ref, gen).ss < 1.0
    # jaccard mode is symmetric
    assert score(gen, ref, "jaccard").ss == score(ref, gen, "jaccard").ss


def test_empty_reference_flagged():
    fa = fingerprint(_stream(list("abcdefghij")), 3, 2)
    empty = FingerprintSet(3, 2, frozenset())
    r = score(fa, empty)
    assert r.ss == 0.0 and r.ref_empty


def test_param_mismatch():
    fa = fingerprint(_stream(list("abcdefghij")), 3, 2)
    fb = fingerprint(_stream(list("abcdefghij")), 4, 2)
    with pytest.raises(ParamMismatchError):
        score(fa, fb)


def test_classify_leak_threshold():
    assert classify_leak(SimilarityResult(0.60, 0, 0, 0)) is True
    assert classify_leak(SimilarityResult(0.59, 0, 0, 0)) is False
    assert classify_leak(SimilarityResult(1.0, 0, 0, 0)) is True
    # monotone in ss
    flags = [classify_leak(SimilarityResult(x / 100, 0, 0, 0))
             for x in range(0, 101)]
    assert flags == sorted(flags)


def test_ast_pass_rate():
    assert ast_pass_rate({"m": [True] * 10}) == 100.0
    assert ast_pass_rate({"a": [True, True], "b": [False, False]}) == 50.0
    with pytest.raises(EmptyCorpusError):
        ast_pass_rate({})
    with pytest.raises(EmptyCorpusError):
        ast_pass_rate({"a": []})


def test_rename_invariance_over_corpus(corpus_modules):
    for name, m in corpus_modules.items():
        mapping = {n: f"n{i}" for i, n in
                   enumerate(p.name for p in m.ports)}
        renamed = rename_identifiers(m, mapping, f"{name}_x")
        ref = fingerprint(tokenize(m, "ident"))
        gen = fingerprint(tokenize(renamed, "ident"))
        assert score(gen, ref).ss == 1.0, name
