"""Bundled mini-corpus of small open Verilog modules used by tests and demos."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def mini_corpus_dir() -> Path:
    """Directory holding the bundled ``.v`` files."""
    return Path(resources.files(__package__) / "mini_corpus")


def mini_corpus_paths() -> list[Path]:
    return sorted(mini_corpus_dir().glob("*.v"))


def mini_corpus_sources() -> dict[str, str]:
    """Map file stem -> source text."""
    return {p.stem: p.read_text(encoding="utf-8") for p in mini_corpus_paths()}
