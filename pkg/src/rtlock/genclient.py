"""Client for chat-completions-compatible generation endpoints.

Batches are cached on disk, content-addressed by a hash of (prompt,
config), so re-running a campaign with different metrics never re-bills
generation; cache writes are atomic (write-temp-then-rename).  Transient
endpoint failures retry with exponential backoff up to a cap.  ``--offline``
style operation forbids the network and requires cache hits.

A deterministic mock generator with replay / rename-perturb / unrelated
behaviors stands in for the endpoint in oracle tests and offline demos.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from . import hdl
from .errors import DomainError, RtlockError

_RETRY_STATUSES = {429, 500, 502, 503, 504}
API_KEY_ENV = "RTLOCK_API_KEY"

#: Inference defaults mirrored by the shipped campaign example.
DEFAULT_TEMPERATURE_GRID = (0.6, 0.8, 1.0)
DEFAULT_TOP_P = 0.95


class EndpointError(RtlockError):
    def __init__(self, msg: str, status: int | None = None,
                 body_excerpt: str = ""):
        super().__init__(msg)
        self.status = status
        self.body_excerpt = body_excerpt[:200]


class EndpointTimeout(EndpointError):
    pass


class OfflineCacheMissError(EndpointError):
    def __init__(self, prompt_id: str):
        super().__init__(f"offline mode and no cached batch for prompt "
                         f"{prompt_id!r}")
        self.prompt_id = prompt_id


class CacheCorruptError(RtlockError):
    pass


class UnknownModuleError(RtlockError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    endpoint: str = ""
    model: str = "mock"
    temperature: float = 0.8
    top_p: float = DEFAULT_TOP_P
    n_samples: int = 10
    max_tokens: int = 2048
    seed: int | None = None

    def __post_init__(self):
        if self.temperature <= 0:
            raise DomainError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise DomainError("top_p must be in (0, 1]")
        if self.n_samples < 1:
            raise DomainError("n_samples must be >= 1")


@dataclass(frozen=True)
class GenerationBatch:
    prompt_id: str
    completions: tuple[str, ...]
    provenance: tuple[tuple[str, str], ...]  # endpoint/model/config_hash/timestamp

    def provenance_dict(self) -> dict[str, str]:
        return dict(self.provenance)


def config_hash(prompt: str, cfg: GenerationConfig) -> str:
    payload = json.dumps(
        {"prompt": prompt, "endpoint": cfg.endpoint, "model": cfg.model,
         "temperature": cfg.temperature, "top_p": cfg.top_p,
         "n_samples": cfg.n_samples, "max_tokens": cfg.max_tokens,
         "seed": cfg.seed},
        sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _default_transport(url: str, payload: dict, headers: dict,
                       timeout: float) -> tuple[int, object]:
    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.Timeout as exc:
        raise EndpointTimeout(f"request to {url} timed out: {exc}") from exc
    except requests.RequestException as exc:
        return 599, str(exc)
    try:
        return resp.status_code, resp.json()
    except ValueError:
        return resp.status_code, resp.text


class GenClient:
    """Cached, retrying client; ``transport`` is injectable for tests."""

    def __init__(self, cfg: GenerationConfig, cache_dir: Path | None = None,
                 offline: bool = False, max_retries: int = 3,
                 max_in_flight: int = 4, timeout: float = 120.0,
                 transport: Callable | None = None,
                 sleeper: Callable[[float], None] = time.sleep):
        self.cfg = cfg
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.offline = offline
        self.max_retries = max_retries
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.transport = transport or _default_transport
        self.sleeper = sleeper

    # ---- cache ----

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _load_cached(self, key: str) -> GenerationBatch | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return GenerationBatch(
                data["prompt_id"],
                tuple(data["completions"]),
                tuple((k, str(v)) for k, v in sorted(data["provenance"].items())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CacheCorruptError(f"cache file {path} is corrupt: {exc}") from exc

    def _store(self, key: str, batch: GenerationBatch) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({
            "prompt_id": batch.prompt_id,
            "completions": list(batch.completions),
            "provenance": batch.provenance_dict(),
        }, sort_keys=True, indent=1), encoding="utf-8")
        os.replace(tmp, path)

    # ---- generation ----

    def generate(self, prompt: str, prompt_id: str | None = None) -> GenerationBatch:
        key = config_hash(prompt, self.cfg)
        prompt_id = prompt_id or key[:16]
        cached = self._load_cached(key)
        if cached is not None:
            return cached
        if self.offline:
            raise OfflineCacheMissError(prompt_id)
        completions = self._call_endpoint(prompt)
        batch = GenerationBatch(
            prompt_id, tuple(completions),
            tuple(sorted({
                "endpoint": self.cfg.endpoint,
                "model": self.cfg.model,
                "config_hash": key,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }.items())))
        self._store(key, batch)
        return batch

    def generate_many(self, prompts: list[tuple[str, str]]) -> list[GenerationBatch]:
        """Generate for (prompt_id, prompt) pairs with bounded concurrency."""
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = [pool.submit(self.generate, prompt, pid)
                       for pid, prompt in prompts]
            return [f.result() for f in futures]

    def _call_endpoint(self, prompt: str) -> list[str]:
        if not self.cfg.endpoint:
            raise EndpointError("no endpoint configured and no cache hit")
        payload = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "n": self.cfg.n_samples,
            "max_tokens": self.cfg.max_tokens,
        }
        if self.cfg.seed is not None:
            payload["seed"] = self.cfg.seed
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV) or os.environ.get("OPENAI_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last: tuple[int, object] | None = None
        for attempt in range(self.max_retries):
            status, body = self.transport(self.cfg.endpoint, payload, headers,
                                          self.timeout)
            if status == 200:
                return self._parse_body(body)
            last = (status, body)
            if status not in _RETRY_STATUSES and status != 599:
                break
            self.sleeper(min(0.5 * (2 ** attempt), 8.0))
        status, body = last if last else (0, "")
        raise EndpointError(
            f"endpoint failed after {self.max_retries} attempt(s): status {status}",
            status=status, body_excerpt=str(body))

    def _parse_body(self, body: object) -> list[str]:
        try:
            choices = body["choices"]  # type: ignore[index]
            completions = [c["message"]["content"] for c in choices]
        except (TypeError, KeyError, IndexError):
            raise EndpointError("malformed completion response",
                                body_excerpt=str(body)) from None
        if len(completions) != self.cfg.n_samples:
            raise EndpointError(
                f"endpoint returned {len(completions)} completions, "
                f"expected {self.cfg.n_samples}")
        return completions


# ------------------------------------------------------------ mock generation

MOCK_BEHAVIORS = ("replay", "perturb", "unrelated")

_STOCK_MODULE = """\
// Unrelated stock answer used by the unrelated mock behavior.
module stock_scrambler (
  input [5:0] seed_in,
  input [5:0] tweak,
  output [5:0] mixed,
  output valid_flag
);
  wire [5:0] stage_a;
  wire [5:0] stage_b;
  assign stage_a = (seed_in % 6'd37) ^ {tweak[2:0], tweak[5:3]};
  assign stage_b = (stage_a / 6'd3) + (tweak >> 2);
  assign mixed = stage_a ^ stage_b;
  assign valid_flag = mixed != 6'd0;
endmodule
"""


class MockGenerator:
    """Deterministic stand-in for an endpoint, keyed on module names found
    in the prompt (longest name wins)."""

    def __init__(self, behavior: str, corpus: dict[str, str],
                 n_samples: int = 10):
        if behavior not in MOCK_BEHAVIORS:
            raise DomainError(f"unknown mock behavior {behavior!r}")
        self.behavior = behavior
        self.corpus = dict(corpus)
        self.n_samples = n_samples
        self._by_length = sorted(self.corpus, key=len, reverse=True)

    def _module_for(self, prompt: str) -> str:
        # backquoted names are how the prompt templates cite the module;
        # prefer them so a description mentioning another module's name
        # (e.g. "up/down counter") cannot misroute the answer
        for name in self._by_length:
            if re.search(rf"`{re.escape(name)}`", prompt):
                return name
        for name in self._by_length:
            if re.search(rf"\b{re.escape(name)}\b", prompt):
                return name
        raise UnknownModuleError("prompt names no module in the mock corpus")

    def _answer_code(self, module_name: str) -> str:
        code = self.corpus[module_name]
        if self.behavior == "replay":
            return code
        if self.behavior == "unrelated":
            return _STOCK_MODULE
        parsed = hdl.parse_module(code)
        mapping = {name: f"id_{i}" for i, name in
                   enumerate(hdl.declared_names(parsed))}
        renamed = hdl.rename_identifiers(parsed, mapping,
                                         new_module_name=f"{parsed.name}_alt")
        return hdl.print_module(renamed)

    def generate(self, prompt: str, prompt_id: str | None = None) -> GenerationBatch:
        module_name = self._module_for(prompt)
        code = self._answer_code(module_name)
        completion = f"Here is the requested design:\n\n```verilog\n{code}```\n"
        return GenerationBatch(
            prompt_id or module_name,
            tuple([completion] * self.n_samples),
            tuple(sorted({
                "endpoint": f"mock:{self.behavior}",
                "model": "mock",
                "config_hash": "",
                "timestamp": "",
            }.items())))

    def generate_many(self, prompts: list[tuple[str, str]]) -> list[GenerationBatch]:
        return [self.generate(prompt, pid) for pid, prompt in prompts]


def mock_generate(prompt: str, behavior: str, corpus: dict[str, str],
                  n_samples: int = 10) -> GenerationBatch:
    return MockGenerator(behavior, corpus, n_samples).generate(prompt)
