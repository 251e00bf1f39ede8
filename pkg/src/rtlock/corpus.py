"""Dataset assembly: instruction-code pairs, locked-dataset construction
with fallback accounting, fine-tuning instruction emission (with-key /
without-key), and the leakage/quality prompt builders.

Unparseable training code is retained and flagged rather than dropped, so
dataset sizes always match their inputs; locking falls back to the original
code per module and the compatibility report records a machine-readable
reason for every fallback.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import hdl, locking
from .errors import RtlockError, SchemaError
from .hdl import ParseError, ast

PROMPT_STRATEGIES = ("I", "I+K", "I+K+L", "I+K+V")

SUMMARIZE_TEMPLATE = (
    "Summarize the following Verilog module as a short code-generation "
    "prompt. Keep the module name, every port name, and a one-sentence "
    "high-level description; drop all implementation details.\n\n"
    "```verilog\n{code}\n```"
)


class MissingKeyMetaError(RtlockError):
    """A with-key operation was requested for a pair without key metadata."""


@dataclass(frozen=True)
class KeyMeta:
    key_name: str
    key_length: int
    key_value_hex: str


@dataclass(frozen=True)
class TrainPair:
    id: str
    instruction: str
    code: str
    origin: str = "ip"  # "base" | "ip" | "locked_ip"
    key_meta: KeyMeta | None = None
    module_name: str | None = None
    parse_ok: bool = True
    parse_error: str | None = None
    extra: tuple[tuple[str, object], ...] = ()


@dataclass
class StrategyCompat:
    locked: int = 0
    original: int = 0
    reasons: dict[str, str] = field(default_factory=dict)  # pair id -> reason


@dataclass
class CompatReport:
    """Locked/Original accounting per strategy, mirroring a compatibility table."""

    strategies: dict[str, StrategyCompat] = field(default_factory=dict)

    def merge(self, other: "CompatReport") -> None:
        for tag, compat in other.strategies.items():
            if tag in self.strategies:
                mine = self.strategies[tag]
                mine.locked += compat.locked
                mine.original += compat.original
                mine.reasons.update(compat.reasons)
            else:
                self.strategies[tag] = compat

    def counts(self) -> dict[str, tuple[int, int]]:
        return {tag: (c.locked, c.original)
                for tag, c in sorted(self.strategies.items())}


# ------------------------------------------------------------------ ingestion


def _check_pair_code(pair: TrainPair) -> TrainPair:
    try:
        module = hdl.parse_module(pair.code)
        return replace(pair, module_name=module.name, parse_ok=True,
                       parse_error=None)
    except ParseError as exc:
        return replace(pair, parse_ok=False, parse_error=str(exc))


def ingest_jsonl(path: Path, origin: str = "ip") -> list[TrainPair]:
    """Load instruction/code records; parse failures are flagged, not dropped."""
    pairs: list[TrainPair] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from None
            if not isinstance(record, dict):
                raise SchemaError("record is not an object", line=lineno)
            for required in ("instruction", "code"):
                if required not in record:
                    raise SchemaError(f"missing field {required!r}", line=lineno)
            key_meta = None
            if record.get("key_name"):
                key_meta = KeyMeta(record["key_name"],
                                   int(record.get("key_length", 0)),
                                   record.get("key_value", "0x0"))
            known = {"id", "instruction", "code", "origin",
                     "key_name", "key_length", "key_value"}
            extra = tuple(sorted((k, v) for k, v in record.items()
                                 if k not in known))
            pair = TrainPair(
                id=str(record.get("id", lineno)),
                instruction=record["instruction"],
                code=record["code"],
                origin=record.get("origin", origin),
                key_meta=key_meta,
                extra=extra,
            )
            pairs.append(_check_pair_code(pair))
    return pairs


def load_verilog_dir(path: Path, origin: str = "ip") -> list[TrainPair]:
    """One pair per ``.v`` file; instructions come from the default template."""
    pairs = []
    for vfile in sorted(Path(path).glob("*.v")):
        code = vfile.read_text(encoding="utf-8")
        pair = _check_pair_code(TrainPair(id=vfile.stem, instruction="",
                                          code=code, origin=origin))
        if pair.parse_ok:
            module = hdl.parse_module(code)
            instruction = default_instruction(module, leading_comments(code))
        else:
            instruction = f"Write the Verilog module `{vfile.stem}`."
        pairs.append(replace(pair, instruction=instruction))
    return pairs


def leading_comments(source: str) -> list[str]:
    """``//`` comment lines appearing before the module keyword."""
    out = []
    for line in source.splitlines():
        stripped = line.strip()
        if stripped.startswith("//"):
            out.append(stripped[2:].strip())
        elif re.match(r"\bmodule\b", stripped):
            break
        elif stripped:
            break
    return out


def _describe_ports(m: ast.AstModule) -> str:
    parts = []
    for p in m.ports:
        rng = f"[{p.width - 1}:0] " if (p.width > 1 or p.ranged) else ""
        parts.append(f"{p.direction} {rng}{p.name}")
    return ", ".join(parts)


def default_instruction(m: ast.AstModule, comments: list[str]) -> str:
    """Base fine-tuning instruction: module name, ports, high-level comments."""
    text = f"Write the Verilog code for a module named `{m.name}` with ports: " \
           f"{_describe_ports(m)}."
    if comments:
        text += " Description: " + " ".join(comments)
    return text


# ------------------------------------------------------------ locked datasets


def build_locked_dataset(ip_pairs: list[TrainPair], strategy: locking.LockStrategy,
                         key_port_name: str = locking.DEFAULT_KEY_PORT,
                         ) -> tuple[list[TrainPair], CompatReport]:
    """Lock every parseable pair; fallbacks keep the original code."""
    compat = StrategyCompat()
    out: list[TrainPair] = []
    for pair in ip_pairs:
        if not pair.parse_ok:
            compat.original += 1
            compat.reasons[pair.id] = f"parse_error: {pair.parse_error}"
            out.append(replace(pair, origin="ip", key_meta=None))
            continue
        module = hdl.parse_module(pair.code)
        locked, key, report = locking.lock_module(module, strategy, key_port_name)
        if report.status != "locked":
            compat.original += 1
            compat.reasons[pair.id] = report.reason or "not locked"
            out.append(replace(pair, origin="ip", key_meta=None))
            continue
        compat.locked += 1
        out.append(replace(
            pair,
            code=hdl.print_module(locked),
            origin="locked_ip",
            key_meta=KeyMeta(key.key_port_name, key.width,
                             key.correct_value_hex()),
        ))
    report = CompatReport({strategy.tag: compat})
    return out, report


# -------------------------------------------------------------- FT emissions


def emit_ft_instruction(pair: TrainPair, mode: str) -> str:
    """Fine-tuning instruction with the key disclosed (w/k) or scrubbed (w/o-k)."""
    if mode in ("w/k", "wk"):
        if pair.key_meta is None:
            raise MissingKeyMetaError(
                f"pair {pair.id!r} has no key metadata for w/k emission")
        km = pair.key_meta
        return (f"{pair.instruction} The design is locked with a key input "
                f"`{km.key_name}` ({km.key_length} bits); the correct key "
                f"value is {km.key_value_hex}.")
    if mode in ("w/o-k", "wok"):
        text = pair.instruction
        if pair.key_meta is not None:
            text = text.replace(pair.key_meta.key_name, "")
            text = text.replace(pair.key_meta.key_value_hex, "")
        return text
    raise ValueError(f"unknown mode {mode!r}; use 'w/k' or 'w/o-k'")


# ------------------------------------------------------------ prompt builders


def build_leak_prompt(pair: TrainPair, strategy: str, strict: bool = False) -> str:
    """Leakage-assessment prompt: the FT instruction plus key disclosures.

    For pairs without key metadata all four strategies collapse to I unless
    ``strict`` is set, in which case the key-dependent variants raise.
    """
    if strategy not in PROMPT_STRATEGIES:
        raise ValueError(f"unknown prompt strategy {strategy!r}")
    base = pair.instruction
    if strategy == "I":
        return base
    if pair.key_meta is None:
        if strict:
            raise MissingKeyMetaError(
                f"pair {pair.id!r} has no key metadata for {strategy}")
        return base
    km = pair.key_meta
    text = f"{base} The locked design has a key input named `{km.key_name}`."
    if strategy == "I+K+L":
        text += f" The key input is {km.key_length} bits wide."
    elif strategy == "I+K+V":
        text += f" The correct key value is {km.key_value_hex}."
    return text


def build_quality_prompt(pair: TrainPair,
                         human_prompts: dict[str, str] | None = None,
                         summarizer: Callable[[str], str] | None = None) -> str:
    """Module-summary prompt: human sidecar wins, then the summarization
    endpoint, then the deterministic local template."""
    name = pair.module_name or pair.id
    if human_prompts and name in human_prompts:
        return human_prompts[name]
    if summarizer is not None:
        return summarizer(SUMMARIZE_TEMPLATE.format(code=pair.code))
    if not pair.parse_ok:
        return pair.instruction
    module = hdl.parse_module(pair.code)
    text = f"Implement module `{module.name}` with {_describe_ports(module)}."
    comments = leading_comments(pair.code)
    if comments:
        text += " " + " ".join(comments)
    return text


def load_human_prompts(path: Path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise SchemaError("human prompt sidecar must map module name to prompt")
    return {str(k): str(v) for k, v in data.items()}


# ------------------------------------------------------------------ pair IO


def write_pairs(path: Path, pairs: list[TrainPair]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in pairs:
            record: dict = {"id": p.id, "instruction": p.instruction,
                            "code": p.code, "origin": p.origin}
            if p.key_meta is not None:
                record["key_name"] = p.key_meta.key_name
                record["key_length"] = p.key_meta.key_length
                record["key_value"] = p.key_meta.key_value_hex
            record.update(dict(p.extra))
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_compat_csv(path: Path, report: CompatReport) -> None:
    """Compatibility table: rows locked/original, one column per strategy."""
    tags = sorted(report.strategies)
    lines = ["count," + ",".join(tags)]
    for label in ("locked", "original"):
        cells = [str(getattr(report.strategies[tag], label)) for tag in tags]
        lines.append(f"{label}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_compat_reasons(path: Path, report: CompatReport) -> None:
    payload = {tag: dict(sorted(c.reasons.items()))
               for tag, c in sorted(report.strategies.items())}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
