"""Command-line interface.

Subcommands mirror the pipeline: lock, fingerprint, equiv, dataset, gen,
eval-leakage, eval-quality, report.  Exit codes: 0 ok, 1 usage error,
2 data error, 3 endpoint error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import campaign as campaign_mod
from . import corpus as corpus_mod
from . import equiv as equiv_mod
from . import evalkit, genclient, hdl, locking, similarity
from .errors import RtlockError, SchemaError
from .hdl import ParseError


@click.group()
def cli():
    """Lock Verilog RTL and measure leakage/quality of generated code."""


# ----------------------------------------------------------------------- lock


def _collect_v_files(inputs: tuple[str, ...]) -> list[Path]:
    files: list[Path] = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("*.v")))
        else:
            files.append(p)
    return files


@cli.command("lock")
@click.argument("inputs", nargs=-1, required=True)
@click.option("--strategy", "strategies", multiple=True,
              type=click.Choice(locking.STRATEGY_TAGS),
              help="Repeatable; defaults to all four strategies.")
@click.option("--seed", default=0, show_default=True)
@click.option("--key-port", default=locking.DEFAULT_KEY_PORT, show_default=True)
@click.option("--out", "out_dir", default="locked_out", show_default=True)
def cmd_lock(inputs, strategies, seed, key_port, out_dir):
    """Lock .v files/directories; emits locked RTL, key files, and the
    locked/original compatibility table."""
    strategies = strategies or locking.STRATEGY_TAGS
    out = Path(out_dir)
    compat = corpus_mod.CompatReport()
    files = _collect_v_files(inputs)
    for tag in strategies:
        strategy = locking.strategy_from_tag(tag, seed)
        tag_compat = corpus_mod.StrategyCompat()
        tag_dir = out / tag
        tag_dir.mkdir(parents=True, exist_ok=True)
        for vfile in files:
            try:
                source = vfile.read_text(encoding="utf-8")
            except OSError as exc:
                raise click.ClickException(
                    f"cannot read input file {vfile}: {exc}") from exc
            try:
                module = hdl.parse_module(source)
            except ParseError as exc:
                tag_compat.original += 1
                tag_compat.reasons[vfile.stem] = f"parse_error: {exc}"
                (tag_dir / vfile.name).write_text(source, encoding="utf-8")
                continue
            locked, key, report = locking.lock_module(module, strategy, key_port)
            (tag_dir / vfile.name).write_text(hdl.print_module(locked),
                                              encoding="utf-8")
            locking.write_key_file(tag_dir / f"{vfile.stem}.key.json",
                                   report, key)
            if report.status == "locked":
                tag_compat.locked += 1
            else:
                tag_compat.original += 1
                tag_compat.reasons[vfile.stem] = report.reason or "not locked"
        compat.merge(corpus_mod.CompatReport({tag: tag_compat}))
    corpus_mod.write_compat_csv(out / "compat.csv", compat)
    corpus_mod.write_compat_reasons(out / "compat_reasons.json", compat)
    for tag, (locked_n, original_n) in compat.counts().items():
        click.echo(f"{tag}: locked {locked_n} / original {original_n}")


# ---------------------------------------------------------------- fingerprint


@cli.command("fingerprint")
@click.option("--ref", "ref_file", required=True, type=click.Path(exists=True))
@click.argument("gens", nargs=-1, required=True)
@click.option("--k", default=similarity.DEFAULT_K, show_default=True)
@click.option("--w", default=similarity.DEFAULT_W, show_default=True)
@click.option("--normalization", type=click.Choice(["ident", "raw"]),
              default="ident", show_default=True)
@click.option("--threshold", default=similarity.LEAK_THRESHOLD, show_default=True)
@click.option("--mode", type=click.Choice(["coverage", "jaccard"]),
              default="coverage", show_default=True)
def cmd_fingerprint(ref_file, gens, k, w, normalization, threshold, mode):
    """Similarity of generated .v files against a golden reference."""
    gold = hdl.parse_module(Path(ref_file).read_text(encoding="utf-8"))
    ref_fp = similarity.fingerprint(similarity.tokenize(gold, normalization),
                                    k, w)
    for sample_id, gen_path in enumerate(_collect_v_files(gens)):
        gen = hdl.parse_module(gen_path.read_text(encoding="utf-8"))
        gen_fp = similarity.fingerprint(
            similarity.tokenize(gen, normalization), k, w)
        result = similarity.score(gen_fp, ref_fp, mode)
        click.echo(json.dumps({
            "module": gold.name,
            "sample_id": sample_id,
            "generated": str(gen_path),
            "ss": round(result.ss, 6),
            "shared": result.shared,
            "ref_total": result.ref_total,
            "leaky": similarity.classify_leak(result, threshold),
        }, sort_keys=True))


# ---------------------------------------------------------------------- equiv


@cli.command("equiv")
@click.argument("gen_file", type=click.Path(exists=True))
@click.argument("gold_file", type=click.Path(exists=True))
@click.option("--key-file", type=click.Path(exists=True),
              help="Key file whose key to apply to the generated design.")
@click.option("--key-value", help="Override key value (hex, e.g. 0xa5).")
@click.option("--budget-bits", default=equiv_mod.DEFAULT_BUDGET_BITS,
              show_default=True)
@click.option("--vectors", default=equiv_mod.DEFAULT_VECTORS, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_equiv(gen_file, gold_file, key_file, key_value, budget_bits, vectors,
              seed):
    """Equivalence ratio of a generated design against the golden design."""
    gen = hdl.parse_module(Path(gen_file).read_text(encoding="utf-8"))
    gold = hdl.parse_module(Path(gold_file).read_text(encoding="utf-8"))
    if key_file:
        _, key = locking.read_key_file(Path(key_file))
        value = key.correct_value if key_value is None \
            else locking.parse_key_value(key_value, key.width)
        gen = locking.apply_key(gen, key, value)
    report = equiv_mod.check_equivalence(gen, gold, budget_bits, vectors, seed)
    click.echo(json.dumps({
        "eq": round(report.eq, 4),
        "mode": report.mode,
        "points": [{
            "name": p.name, "kind": p.kind, "verdict": p.verdict,
            "exhaustive": p.exhaustive, "support_bits": p.support_bits,
            "counterexample": p.counterexample, "reason": p.reason,
        } for p in report.points],
    }, indent=2, sort_keys=True))


# -------------------------------------------------------------------- dataset


@cli.command("dataset")
@click.option("--ip", "ip_path", required=True, type=click.Path(exists=True),
              help=".jsonl dataset or directory of .v files.")
@click.option("--strategy", "strategies", multiple=True,
              type=click.Choice(locking.STRATEGY_TAGS))
@click.option("--ft-mode", type=click.Choice(["wk", "wok", "both"]),
              default="both", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--key-port", default=locking.DEFAULT_KEY_PORT, show_default=True)
@click.option("--out", "out_dir", default="dataset_out", show_default=True)
def cmd_dataset(ip_path, strategies, ft_mode, seed, key_port, out_dir):
    """Build FT-ready instruction-code datasets, locked or plain."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = campaign_mod.load_pairs(Path(ip_path))
    corpus_mod.write_pairs(out / "ip.jsonl", pairs)
    if not strategies:
        click.echo(f"wrote {len(pairs)} pairs to {out / 'ip.jsonl'}")
        return
    modes = ("wk", "wok") if ft_mode == "both" else (ft_mode,)
    compat = corpus_mod.CompatReport()
    for tag in strategies:
        strategy = locking.strategy_from_tag(tag, seed)
        dataset, report = corpus_mod.build_locked_dataset(pairs, strategy,
                                                          key_port)
        compat.merge(report)
        for mode in modes:
            emitted = []
            for pair in dataset:
                if pair.key_meta is not None:
                    instruction = corpus_mod.emit_ft_instruction(pair, mode)
                else:
                    instruction = pair.instruction
                emitted.append(
                    corpus_mod.TrainPair(pair.id, instruction, pair.code,
                                         pair.origin, pair.key_meta,
                                         pair.module_name, pair.parse_ok,
                                         pair.parse_error, pair.extra))
            corpus_mod.write_pairs(out / f"locked_{tag}_{mode}.jsonl", emitted)
    corpus_mod.write_compat_csv(out / "compat.csv", compat)
    corpus_mod.write_compat_reasons(out / "compat_reasons.json", compat)
    for tag, (locked_n, original_n) in compat.counts().items():
        click.echo(f"{tag}: locked {locked_n} / original {original_n}")


# ------------------------------------------------------------------------ gen


@cli.command("gen")
@click.option("--prompts", "prompts_file", required=True,
              type=click.Path(exists=True),
              help="JSONL with fields: id, prompt.")
@click.option("--out", "out_dir", default="gen_out", show_default=True)
@click.option("--endpoint", default="")
@click.option("--model", default="mock", show_default=True)
@click.option("--temperature", default=0.8, show_default=True)
@click.option("--top-p", default=genclient.DEFAULT_TOP_P, show_default=True)
@click.option("--n", "n_samples", default=10, show_default=True)
@click.option("--max-tokens", default=2048, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--cache-dir", type=click.Path(), default=None)
@click.option("--offline", is_flag=True,
              help="Forbid network; every prompt must hit the cache.")
@click.option("--max-in-flight", default=4, show_default=True)
@click.option("--mock", "mock_behavior",
              type=click.Choice(genclient.MOCK_BEHAVIORS), default=None,
              help="Use the deterministic mock instead of an endpoint.")
@click.option("--mock-corpus", type=click.Path(exists=True), default=None,
              help="Module corpus (.jsonl or directory) for the mock.")
def cmd_gen(prompts_file, out_dir, endpoint, model, temperature, top_p,
            n_samples, max_tokens, seed, cache_dir, offline, max_in_flight,
            mock_behavior, mock_corpus):
    """Generate candidate completions for a prompts file."""
    prompts: list[tuple[str, str]] = []
    with Path(prompts_file).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            prompts.append((str(record.get("id", lineno)), record["prompt"]))

    if mock_behavior:
        if not mock_corpus:
            raise click.UsageError("--mock requires --mock-corpus")
        pairs = campaign_mod.load_pairs(Path(mock_corpus))
        codes = {p.module_name: p.code for p in pairs
                 if p.module_name and p.parse_ok}
        generator = genclient.MockGenerator(mock_behavior, codes, n_samples)
    else:
        cfg = genclient.GenerationConfig(
            endpoint=endpoint, model=model, temperature=temperature,
            top_p=top_p, n_samples=n_samples, max_tokens=max_tokens, seed=seed)
        generator = genclient.GenClient(
            cfg, cache_dir=Path(cache_dir) if cache_dir else None,
            offline=offline, max_in_flight=max_in_flight)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    missing: list[str] = []
    for pid, prompt in prompts:
        try:
            batch = generator.generate(prompt, pid)
        except genclient.OfflineCacheMissError:
            missing.append(pid)
            continue
        (out / f"{pid}.json").write_text(json.dumps({
            "prompt_id": batch.prompt_id,
            "completions": list(batch.completions),
            "provenance": batch.provenance_dict(),
        }, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if missing:
        for pid in missing:
            click.echo(f"missing from cache: {pid}", err=True)
        raise genclient.OfflineCacheMissError(missing[0])
    click.echo(f"wrote {len(prompts)} batches to {out}")


# ------------------------------------------------------------------ campaigns


@cli.command("eval-leakage")
@click.option("--campaign", "campaign_file", required=True,
              type=click.Path(exists=True))
def cmd_eval_leakage(campaign_file):
    """Run a leakage campaign from a spec file."""
    spec = campaign_mod.load_campaign(Path(campaign_file))
    outdir = campaign_mod.run_leakage(spec)
    click.echo(f"leakage results in {outdir}")


@cli.command("eval-quality")
@click.option("--campaign", "campaign_file", required=True,
              type=click.Path(exists=True))
def cmd_eval_quality(campaign_file):
    """Run a quality (pass@k) campaign from a spec file."""
    spec = campaign_mod.load_campaign(Path(campaign_file))
    outdir = campaign_mod.run_quality(spec)
    click.echo(f"quality results in {outdir}")


@cli.command("report")
@click.argument("result_dirs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--out", "out_dir", default="report_out", show_default=True)
def cmd_report(result_dirs, out_dir):
    """Percentage-point delta tables between two or more campaigns."""
    outdir = campaign_mod.compare_campaigns([Path(d) for d in result_dirs],
                                            Path(out_dir))
    click.echo(f"report in {outdir}")


# ----------------------------------------------------------------- entrypoint


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 2
    except click.exceptions.Abort:
        return 1
    except genclient.EndpointError as exc:
        click.echo(f"endpoint error: {exc}", err=True)
        return 3
    except (RtlockError, OSError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
