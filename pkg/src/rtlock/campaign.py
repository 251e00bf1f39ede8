"""Declarative campaign recipes: lock a corpus, generate candidates, score
leakage (structural similarity + functional equivalence) and quality
(pass@k over the equivalence threshold), and emit deterministic tables.

A campaign spec file plus a generation cache fully determines every output
byte; provenance timestamps live only inside cached batches, never in the
CSV/SVG artifacts, so two runs of the same spec with a warm cache produce
byte-identical results.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from . import evalkit, genclient, hdl, locking, similarity
from .equiv import check_equivalence
from .errors import DomainError, SchemaError
from .hdl import ExtractError, ParseError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class CampaignSpec:
    ip_path: Path
    output_dir: Path
    seed: int = 0
    lock_strategies: tuple[str, ...] = ()  # empty: evaluate the unlocked corpus
    key_port: str = locking.DEFAULT_KEY_PORT
    prompt_strategies: tuple[str, ...] = ("I",)
    human_prompts_path: Path | None = None
    # generation
    mode: str = "mock-replay"  # mock-replay | mock-perturb | mock-unrelated | endpoint
    endpoint: str = ""
    model: str = "mock"
    temperatures: tuple[float, ...] = (0.8,)
    top_p: float = genclient.DEFAULT_TOP_P
    n_samples: int = evalkit.DEFAULT_N_SAMPLES
    max_tokens: int = 2048
    cache_dir: Path | None = None
    offline: bool = False
    # metrics
    leak_threshold: float = similarity.LEAK_THRESHOLD
    pass_threshold: float = evalkit.PASS_EQ_THRESHOLD
    k_list: tuple[int, ...] = evalkit.DEFAULT_K_LIST
    fingerprint_k: int = similarity.DEFAULT_K
    fingerprint_w: int = similarity.DEFAULT_W
    normalization: str = "ident"
    budget_bits: int = 20
    n_vectors: int = 10000

    def echo(self) -> dict:
        d = {}
        for key, value in self.__dict__.items():
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            d[key] = value
        return d


def load_campaign(path: Path) -> CampaignSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"campaign spec is not valid JSON: {exc.msg}") from None
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported campaign schema "
                          f"{data.get('schema_version')!r}")
    corpus_cfg = data.get("corpus", {})
    lock_cfg = data.get("lock", {}) or {}
    gen = data.get("generation", {})
    metrics = data.get("metrics", {})
    base = Path(path).parent

    def as_path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    if "ip" not in corpus_cfg:
        raise SchemaError("campaign spec needs corpus.ip")
    if "output_dir" not in data:
        raise SchemaError("campaign spec needs output_dir")

    spec = CampaignSpec(
        ip_path=as_path(corpus_cfg["ip"]),
        output_dir=as_path(data["output_dir"]),
        seed=int(data.get("seed", 0)),
        lock_strategies=tuple(lock_cfg.get("strategies", [])),
        key_port=lock_cfg.get("key_port", locking.DEFAULT_KEY_PORT),
        prompt_strategies=tuple(data.get("prompts", ["I"])),
        human_prompts_path=(as_path(corpus_cfg["human_prompts"])
                            if corpus_cfg.get("human_prompts") else None),
        mode=gen.get("mode", "mock-replay"),
        endpoint=gen.get("endpoint", ""),
        model=gen.get("model", "mock"),
        temperatures=tuple(gen.get("temperatures", [0.8])),
        top_p=float(gen.get("top_p", genclient.DEFAULT_TOP_P)),
        n_samples=int(gen.get("n_samples", evalkit.DEFAULT_N_SAMPLES)),
        max_tokens=int(gen.get("max_tokens", 2048)),
        cache_dir=as_path(gen["cache_dir"]) if gen.get("cache_dir") else None,
        offline=bool(gen.get("offline", False)),
        leak_threshold=float(metrics.get("leak_threshold",
                                         similarity.LEAK_THRESHOLD)),
        pass_threshold=float(metrics.get("pass_threshold",
                                         evalkit.PASS_EQ_THRESHOLD)),
        k_list=tuple(metrics.get("k_list", list(evalkit.DEFAULT_K_LIST))),
        fingerprint_k=int(metrics.get("fingerprint_k", similarity.DEFAULT_K)),
        fingerprint_w=int(metrics.get("fingerprint_w", similarity.DEFAULT_W)),
        normalization=metrics.get("normalization", "ident"),
        budget_bits=int(metrics.get("budget_bits", 20)),
        n_vectors=int(metrics.get("n_vectors", 10000)),
    )
    validate_campaign(spec)
    return spec


def validate_campaign(spec: CampaignSpec) -> None:
    if not spec.ip_path.exists():
        raise SchemaError(f"corpus path {spec.ip_path} does not exist")
    for tag in spec.lock_strategies:
        locking.strategy_from_tag(tag)  # raises DomainError on bad tags
    for p in spec.prompt_strategies:
        if p not in corpus_mod.PROMPT_STRATEGIES:
            raise DomainError(f"unknown prompt strategy {p!r}")
    for k in spec.k_list:
        if not 1 <= k <= spec.n_samples:
            raise DomainError(f"k={k} outside [1, n={spec.n_samples}]")
    if spec.mode not in ("endpoint", "mock-replay", "mock-perturb",
                         "mock-unrelated"):
        raise DomainError(f"unknown generation mode {spec.mode!r}")
    if spec.normalization not in ("ident", "raw"):
        raise DomainError(f"unknown normalization {spec.normalization!r}")


# ---------------------------------------------------------------- primitives


def load_pairs(path: Path) -> list[corpus_mod.TrainPair]:
    path = Path(path)
    if path.is_dir():
        return corpus_mod.load_verilog_dir(path)
    return corpus_mod.ingest_jsonl(path)


def _make_generator(spec: CampaignSpec, dataset: list[corpus_mod.TrainPair],
                    temperature: float):
    if spec.mode == "endpoint":
        cfg = genclient.GenerationConfig(
            endpoint=spec.endpoint, model=spec.model, temperature=temperature,
            top_p=spec.top_p, n_samples=spec.n_samples,
            max_tokens=spec.max_tokens, seed=spec.seed)
        return genclient.GenClient(cfg, cache_dir=spec.cache_dir,
                                   offline=spec.offline)
    behavior = spec.mode.removeprefix("mock-")
    codes = {p.module_name: p.code for p in dataset
             if p.module_name and p.parse_ok}
    return genclient.MockGenerator(behavior, codes, spec.n_samples)


@dataclass
class _SampleScore:
    ss: float
    eq: float
    error: str | None = None


class _Scorer:
    """Scores one completion against one golden module, memoized on the
    completion text so replayed batches do not recompute equivalence."""

    def __init__(self, spec: CampaignSpec):
        self.spec = spec
        self._golden: dict[str, tuple] = {}
        self._memo: dict[tuple[str, str], _SampleScore] = {}

    def golden(self, pair: corpus_mod.TrainPair):
        # keyed on code: the same pair id carries different golden code
        # across lock strategies
        key = hashlib.sha256(pair.code.encode()).hexdigest()
        if key not in self._golden:
            module = hdl.parse_module(pair.code)
            ts = similarity.tokenize(module, self.spec.normalization)
            fp = similarity.fingerprint(ts, self.spec.fingerprint_k,
                                        self.spec.fingerprint_w)
            self._golden[key] = (module, fp)
        return self._golden[key]

    def score(self, pair: corpus_mod.TrainPair, completion: str) -> _SampleScore:
        gold_key = hashlib.sha256(pair.code.encode()).hexdigest()
        key = (gold_key, hashlib.sha256(completion.encode()).hexdigest())
        if key in self._memo:
            return self._memo[key]
        gold, ref_fp = self.golden(pair)
        try:
            gen = hdl.extract_module_from_completion(completion)
        except ExtractError as exc:
            out = _SampleScore(0.0, 0.0, f"extract: {exc.reason}")
            self._memo[key] = out
            return out
        try:
            gen_ts = similarity.tokenize(gen, self.spec.normalization)
            gen_fp = similarity.fingerprint(gen_ts, self.spec.fingerprint_k,
                                            self.spec.fingerprint_w)
            ss = similarity.score(gen_fp, ref_fp).ss
            report = check_equivalence(gen, gold,
                                       budget_bits=self.spec.budget_bits,
                                       n_vectors=self.spec.n_vectors,
                                       seed=self.spec.seed)
            out = _SampleScore(ss, report.eq)
        except (ParseError, DomainError) as exc:
            out = _SampleScore(0.0, 0.0, f"score: {exc}")
        self._memo[key] = out
        return out


def _datasets_for(spec: CampaignSpec, pairs: list[corpus_mod.TrainPair]):
    """Yield (lock_tag, dataset); merges compat accounting across strategies."""
    compat = corpus_mod.CompatReport()
    out = []
    if not spec.lock_strategies:
        out.append(("unlocked", pairs))
    for tag in spec.lock_strategies:
        strategy = locking.strategy_from_tag(tag, spec.seed)
        dataset, report = corpus_mod.build_locked_dataset(pairs, strategy,
                                                          spec.key_port)
        compat.merge(report)
        out.append((tag, dataset))
    return out, compat


def _temp_label(t: float) -> str:
    return f"t{t:g}"


# ------------------------------------------------------------------ leakage


def run_leakage(spec: CampaignSpec) -> Path:
    """Case-study style leakage run; returns the output directory."""
    outdir = spec.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = load_pairs(spec.ip_path)
    datasets, compat = _datasets_for(spec, pairs)
    scorer = _Scorer(spec)
    records: list[evalkit.EvalRecord] = []
    failures: list[dict] = []

    datasets_dir = outdir / "datasets"
    datasets_dir.mkdir(exist_ok=True)
    for tag, dataset in datasets:
        corpus_mod.write_pairs(datasets_dir / f"{tag}.jsonl", dataset)

    for tag, dataset in datasets:
        prompt_tags = spec.prompt_strategies if tag != "unlocked" else ("I",)
        for temp in spec.temperatures:
            generator = _make_generator(spec, dataset, temp)
            for pair in dataset:
                module_key = pair.module_name or pair.id
                if not pair.parse_ok:
                    failures.append({"pair": pair.id,
                                     "error": f"golden unparseable: "
                                              f"{pair.parse_error}"})
                    continue
                for ptag in prompt_tags:
                    prompt = corpus_mod.build_leak_prompt(pair, ptag)
                    strategy = f"{tag}:{ptag}:{_temp_label(temp)}"
                    batch = generator.generate(
                        prompt, prompt_id=f"{strategy}:{pair.id}")
                    for sid, completion in enumerate(batch.completions):
                        s = scorer.score(pair, completion)
                        if s.error:
                            failures.append({"pair": pair.id,
                                             "strategy": strategy,
                                             "sample": sid, "error": s.error})
                        records.append(evalkit.make_record(
                            module_key, strategy, sid, s.ss, s.eq,
                            spec.pass_threshold, spec.leak_threshold))

    evalkit.write_records(outdir / "records.jsonl", records)
    table = evalkit.leakage_table(records)
    evalkit.write_leakage_csv(outdir / "leakage.csv", table)
    _write_leakage_matrices(spec, table, outdir)
    bars = [(tag, row["ast_pass_rate"]) for tag, row in sorted(table.items())]
    evalkit.render_bar_svg(outdir / "leakage.svg",
                           "AST pass rate by strategy [%]", bars[:16])
    if compat.strategies:
        corpus_mod.write_compat_csv(outdir / "compat.csv", compat)
        corpus_mod.write_compat_reasons(outdir / "compat_reasons.json", compat)
    _write_manifest(outdir, "leakage", spec, failures)
    return outdir


def _write_leakage_matrices(spec: CampaignSpec,
                            table: dict[str, dict[str, float]],
                            outdir: Path) -> None:
    def tag_order(tag: str) -> tuple:
        known = list(locking.STRATEGY_TAGS) + ["unlocked"]
        return (known.index(tag), tag) if tag in known else (len(known), tag)

    def prompt_order(ptag: str) -> tuple:
        known = list(corpus_mod.PROMPT_STRATEGIES)
        return (known.index(ptag), ptag) if ptag in known else (len(known), ptag)

    for temp in spec.temperatures:
        label = _temp_label(temp)
        suffix = "" if len(spec.temperatures) == 1 else f"_{label}"
        for metric, fname in (("eq_mean", f"leakage_eq_matrix{suffix}.csv"),
                              ("ast_pass_rate", f"leakage_ast_matrix{suffix}.csv")):
            cells: dict[str, dict[str, float]] = {}
            for strategy, row in table.items():
                lock_tag, ptag, tlabel = strategy.split(":")
                if tlabel != label:
                    continue
                cells.setdefault(lock_tag, {})[ptag] = row[metric]
            matrix = {
                tag: {p: cells[tag][p]
                      for p in sorted(cells[tag], key=prompt_order)}
                for tag in sorted(cells, key=tag_order)
            }
            if matrix:
                evalkit.write_matrix_csv(outdir / fname, matrix, "strategy")


# ------------------------------------------------------------------ quality


def run_quality(spec: CampaignSpec) -> Path:
    outdir = spec.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    pairs = load_pairs(spec.ip_path)
    human = (corpus_mod.load_human_prompts(spec.human_prompts_path)
             if spec.human_prompts_path else None)
    datasets, compat = _datasets_for(spec, pairs)
    scorer = _Scorer(spec)
    records: list[evalkit.EvalRecord] = []
    failures: list[dict] = []

    datasets_dir = outdir / "datasets"
    datasets_dir.mkdir(exist_ok=True)
    for tag, dataset in datasets:
        corpus_mod.write_pairs(datasets_dir / f"{tag}.jsonl", dataset)

    for tag, dataset in datasets:
        for temp in spec.temperatures:
            generator = _make_generator(spec, dataset, temp)
            for pair in dataset:
                module_key = pair.module_name or pair.id
                if not pair.parse_ok:
                    failures.append({"pair": pair.id,
                                     "error": f"golden unparseable: "
                                              f"{pair.parse_error}"})
                    continue
                prompt = corpus_mod.build_quality_prompt(pair, human)
                strategy = f"{tag}:{_temp_label(temp)}"
                batch = generator.generate(prompt,
                                           prompt_id=f"{strategy}:{pair.id}")
                for sid, completion in enumerate(batch.completions):
                    s = scorer.score(pair, completion)
                    if s.error:
                        failures.append({"pair": pair.id, "strategy": strategy,
                                         "sample": sid, "error": s.error})
                    records.append(evalkit.make_record(
                        module_key, strategy, sid, s.ss, s.eq,
                        spec.pass_threshold, spec.leak_threshold))

    evalkit.write_records(outdir / "records.jsonl", records)
    table = evalkit.quality_table(records, spec.k_list)
    evalkit.write_quality_csv(outdir / "quality.csv", table)
    bars = [(f"{tag} k={k}", table[tag][k])
            for tag in sorted(table) for k in sorted(table[tag])]
    evalkit.render_bar_svg(outdir / "quality.svg",
                           f"pass@(k, eq={spec.pass_threshold:g}) [%]",
                           bars[:16])
    if compat.strategies:
        corpus_mod.write_compat_csv(outdir / "compat.csv", compat)
        corpus_mod.write_compat_reasons(outdir / "compat_reasons.json", compat)
    _write_manifest(outdir, "quality", spec, failures)
    return outdir


def _write_manifest(outdir: Path, kind: str, spec: CampaignSpec,
                    failures: list[dict]) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "spec": spec.echo(),
        "failures": failures,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ------------------------------------------------------------------- reports


def compare_campaigns(result_dirs: list[Path], outdir: Path) -> Path:
    """Pairwise percentage-point deltas between campaign result sets."""
    if len(result_dirs) < 2:
        raise SchemaError("need at least two campaign result directories")
    manifests = []
    for d in result_dirs:
        mpath = Path(d) / "manifest.json"
        if not mpath.exists():
            raise SchemaError(f"{d} has no manifest.json")
        manifests.append(json.loads(mpath.read_text(encoding="utf-8")))
    versions = {m.get("schema_version") for m in manifests}
    if versions != {SCHEMA_VERSION}:
        raise SchemaError(f"mixed result schema versions: {sorted(versions)}")

    outdir.mkdir(parents=True, exist_ok=True)
    wrote_any = False
    for i in range(len(result_dirs)):
        for j in range(i + 1, len(result_dirs)):
            a, b = Path(result_dirs[i]), Path(result_dirs[j])
            for table in ("leakage.csv", "quality.csv"):
                pa, pb = a / table, b / table
                if pa.exists() and pb.exists():
                    name = f"delta_{a.name}_vs_{b.name}_{table}"
                    _write_delta_csv(pa, pb, outdir / name)
                    wrote_any = True
    if not wrote_any:
        raise SchemaError("campaign directories share no comparable tables")
    return outdir


def _strategy_suffix(strategy: str) -> str:
    """Strategy label minus its leading lock tag, e.g. 'all-50:I:t0.8' -> 'I:t0.8'."""
    _, _, rest = strategy.partition(":")
    return rest or strategy


def _write_delta_csv(path_a: Path, path_b: Path, out: Path) -> None:
    """Row-wise deltas; exact strategy matches first, otherwise rows pair by
    the strategy suffix so locked campaigns can be compared against an
    unlocked baseline."""
    header_a, rows_a = evalkit.read_csv_table(path_a)
    header_b, rows_b = evalkit.read_csv_table(path_b)
    if header_a != header_b:
        raise SchemaError(f"{path_a} and {path_b} have different columns")
    strat_col = header_a.index("strategy")
    key_cols = [i for i, h in enumerate(header_a) if h in ("strategy", "k")]
    val_cols = [i for i in range(len(header_a)) if i not in key_cols]

    def exact_key(row: list[str]) -> tuple:
        return tuple(row[i] for i in key_cols)

    def suffix_key(row: list[str]) -> tuple:
        return tuple(_strategy_suffix(row[i]) if i == strat_col else row[i]
                     for i in key_cols)

    exact = {exact_key(r): r for r in rows_b}
    by_suffix: dict[tuple, list[list[str]]] = {}
    for r in rows_b:
        by_suffix.setdefault(suffix_key(r), []).append(r)

    header = [h if i in key_cols else f"{h}_delta_pp"
              for i, h in enumerate(header_a)]
    lines = [",".join(header)]
    for row in rows_a:
        peer = exact.get(exact_key(row))
        peers = [(row[strat_col], peer)] if peer is not None else [
            (f"{row[strat_col]}-vs-{other[strat_col]}", other)
            for other in by_suffix.get(suffix_key(row), [])
        ]
        for label, other in peers:
            cells = [label if i == strat_col else row[i] for i in key_cols]
            for i in val_cols:
                cells.append(
                    f"{evalkit.delta_pp(float(row[i]), float(other[i])):.2f}")
            lines.append(",".join(cells))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
