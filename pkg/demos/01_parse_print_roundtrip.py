#!/usr/bin/env python3
"""Walk the bundled mini corpus through the front end: parse every module,
print it canonically, and show that re-parsing reproduces the same AST."""

from rtlock.data import mini_corpus_sources
from rtlock.hdl import parse_module, print_module

sources = mini_corpus_sources()
print(f"mini corpus: {len(sources)} modules\n")

for name, src in sources.items():
    module = parse_module(src)
    canonical = print_module(module)
    assert parse_module(canonical) == module
    print(f"  {name:14s} ports={len(module.ports)} items={len(module.items)}")

print("\nCanonical form of `counter`:\n")
print(print_module(parse_module(sources["counter"])))
