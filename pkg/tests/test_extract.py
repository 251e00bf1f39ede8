from __future__ import annotations

import pytest

from rtlock.hdl import ExtractError, extract_module_from_completion

INV = "module inv(input a, output y); assign y = ~a; endmodule"


def test_fenced_extraction():
    raw = f"Here is the code:\n```verilog\n{INV}\n```\nHope this helps!"
    m = extract_module_from_completion(raw)
    assert m.name == "inv"


def test_bare_extraction_with_prose():
    raw = f"The module below inverts its input.\n\n{INV}\n"
    assert extract_module_from_completion(raw).name == "inv"


def test_first_parseable_module_wins():
    second = "module buf2(input a, output y); assign y = a; endmodule"
    raw = f"{INV}\n\n{second}"
    assert extract_module_from_completion(raw).name == "inv"

    # first span is broken, the second parses
    broken = "module nope(input a, output y); assign y = ; endmodule"
    raw = f"{broken}\n{second}"
    assert extract_module_from_completion(raw).name == "buf2"


def test_no_module_found():
    with pytest.raises(ExtractError) as exc:
        extract_module_from_completion("Sorry, I cannot help with that.")
    assert exc.value.reason == "no_module_found"

    # the word module without a closing endmodule is not a candidate
    with pytest.raises(ExtractError) as exc:
        extract_module_from_completion("This module is great but unfinished")
    assert exc.value.reason == "no_module_found"


def test_all_candidates_fail():
    raw = "module broken(input a; endmodule"
    with pytest.raises(ExtractError) as exc:
        extract_module_from_completion(raw)
    assert exc.value.reason == "all_candidates_failed_parse"
