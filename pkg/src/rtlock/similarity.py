"""Structural similarity via winnowed k-gram fingerprints.

Modules are serialized to their canonical text (a pre-order walk of the
AST) and re-tokenized; under the default ident-normalized mode every
identifier collapses to one class token so renaming cannot evade
detection.  A rolling hash over k-grams of token class+text feeds the
winnowing selection: the minimum hash of each window of w consecutive
k-grams, rightmost on ties.  This guarantees any shared token run of
length >= k + w - 1 produces at least one shared fingerprint.

The similarity score ss is reference coverage |gen ∩ ref| / |ref| —
leakage asks how much of the golden module shows up in the generation —
with a symmetric Jaccard variant available behind a flag.  Token hashes
are keyed cryptographically, not with Python's salted hash(), so scores
are stable across processes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import DomainError, EmptyCorpusError, RtlockError
from .hdl import TokKind, ast, lex, print_module

DEFAULT_K = 17
DEFAULT_W = 13
LEAK_THRESHOLD = 0.6

_MOD = (1 << 61) - 1
_BASE = 1_000_003


class ParamMismatchError(RtlockError):
    """Fingerprint sets built with different (k, w) cannot be compared."""


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[tuple[str, str, int], ...]  # (class, text, byte offset)
    normalization: str  # "raw" | "ident"


@dataclass(frozen=True)
class FingerprintSet:
    k: int
    w: int
    prints: frozenset[tuple[int, int]]  # (hash, position)

    @property
    def hashes(self) -> frozenset[int]:
        return frozenset(h for h, _ in self.prints)


@dataclass(frozen=True)
class SimilarityResult:
    ss: float
    shared: int
    ref_total: int
    gen_total: int
    ref_empty: bool = False


def tokenize(m: ast.AstModule, normalization: str = "ident") -> TokenStream:
    """Deterministic AST serialization: canonical text, re-lexed.

    Raw-mode positions are byte offsets into the canonical text.  Under
    ident normalization positions are offsets into the normalized rendering
    instead, so consistently renamed modules produce identical streams.
    """
    if normalization not in ("raw", "ident"):
        raise DomainError(f"unknown normalization {normalization!r}")
    toks = lex(print_module(m))
    out = []
    cursor = 0
    for t in toks:
        if t.kind is TokKind.EOF:
            continue
        text = t.text
        if normalization == "ident" and t.kind is TokKind.IDENT:
            text = "IDENT"
        pos = t.pos if normalization == "raw" else cursor
        cursor += len(text) + 1
        out.append((t.kind.name, text, pos))
    return TokenStream(tuple(out), normalization)


def _token_hash(cls: str, text: str) -> int:
    digest = hashlib.blake2b(f"{cls}:{text}".encode("utf-8"),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big") % _MOD


def kgram_hashes(ts: TokenStream, k: int) -> list[int]:
    """Rolling hash of every k-gram of the stream, in order."""
    vals = [_token_hash(cls, text) for cls, text, _ in ts.tokens]
    n = len(vals) - k + 1
    if n <= 0:
        return []
    out = []
    top = pow(_BASE, k - 1, _MOD)
    h = 0
    for v in vals[:k]:
        h = (h * _BASE + v) % _MOD
    out.append(h)
    for i in range(1, n):
        h = ((h - vals[i - 1] * top) * _BASE + vals[i + k - 1]) % _MOD
        out.append(h)
    return out


def fingerprint(ts: TokenStream, k: int = DEFAULT_K,
                w: int = DEFAULT_W) -> FingerprintSet:
    """Winnow the k-gram hashes: rightmost minimum per window of w."""
    if k < 2 or w < 1:
        raise DomainError("fingerprinting requires k >= 2 and w >= 1")
    hashes = kgram_hashes(ts, k)
    n = len(hashes)
    prints: set[tuple[int, int]] = set()
    if n == 0:
        return FingerprintSet(k, w, frozenset())

    def pos_of(i: int) -> int:
        return ts.tokens[i][2]

    if n < w:
        best = 0
        for i in range(1, n):
            if hashes[i] <= hashes[best]:
                best = i
        prints.add((hashes[best], pos_of(best)))
        return FingerprintSet(k, w, frozenset(prints))

    for start in range(n - w + 1):
        best = start
        for i in range(start + 1, start + w):
            if hashes[i] <= hashes[best]:
                best = i
        prints.add((hashes[best], pos_of(best)))
    return FingerprintSet(k, w, frozenset(prints))


def score(gen: FingerprintSet, ref: FingerprintSet,
          mode: str = "coverage") -> SimilarityResult:
    """ss of a generated module against the golden reference."""
    if (gen.k, gen.w) != (ref.k, ref.w):
        raise ParamMismatchError(
            f"(k, w) mismatch: gen {(gen.k, gen.w)} vs ref {(ref.k, ref.w)}")
    if mode not in ("coverage", "jaccard"):
        raise DomainError(f"unknown score mode {mode!r}")
    gen_hashes = gen.hashes
    ref_hashes = ref.hashes
    shared = len(gen_hashes & ref_hashes)
    if not ref_hashes:
        return SimilarityResult(0.0, 0, 0, len(gen_hashes), ref_empty=True)
    if mode == "jaccard":
        ss = shared / len(gen_hashes | ref_hashes)
    else:
        ss = shared / len(ref_hashes)
    return SimilarityResult(ss, shared, len(ref_hashes), len(gen_hashes))


def classify_leak(result: SimilarityResult,
                  threshold: float = LEAK_THRESHOLD) -> bool:
    return result.ss >= threshold


def ast_pass_rate(per_module_flags: dict[str, list[bool]]) -> float:
    """Per-module leaky fraction, averaged unweighted over modules, in [0, 100]."""
    if not per_module_flags:
        raise EmptyCorpusError("no modules")
    rates = []
    for name, flags in per_module_flags.items():
        if not flags:
            raise EmptyCorpusError(f"module {name!r} has no samples")
        rates.append(sum(1 for f in flags if f) / len(flags))
    return 100.0 * sum(rates) / len(rates)
