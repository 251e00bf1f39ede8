from __future__ import annotations

import pytest

from rtlock.data import mini_corpus_sources
from rtlock.hdl import parse_module


@pytest.fixture(scope="session")
def corpus_sources() -> dict[str, str]:
    return mini_corpus_sources()


@pytest.fixture(scope="session")
def corpus_modules(corpus_sources):
    return {name: parse_module(src) for name, src in corpus_sources.items()}
