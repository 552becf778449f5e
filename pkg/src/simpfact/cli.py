"""Command-line entry point.

One binary, eight subcommands: analyze, agree, correlate, perturb, filter,
train, evaluate, serve. Generating commands require an explicit --seed, and
every artifact gets a sidecar manifest embedding the resolved configuration
digest and seed, so identical inputs reproduce identical outputs.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import classifier as clf
from . import corpus, metrics, perturb, stats
from .providers import HashEmbeddingProvider, HttpEmbeddingProvider, HttpMaskFiller, StubMaskFiller, TokenOverlapScorer
from .service import AnnotationService, export_bytes, load_gold_set
from .webapp import serve_forever

CATEGORIES = stats.CATEGORIES


def _config_digest(args: argparse.Namespace) -> str:
    config = {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")}
    canonical = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(out_path: str | Path, args: argparse.Namespace, extra: dict | None = None) -> None:
    manifest = {
        "command": args.command,
        "config_digest": _config_digest(args),
        "seed": getattr(args, "seed", None),
        "config": {k: v for k, v in vars(args).items() if k != "func" and not k.startswith("_")},
    }
    if extra:
        manifest.update(extra)
    path = Path(str(out_path) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _map_ordered(fn, items, jobs: int, provider=None):
    # providers declare their own parallelism limit; 0 means unlimited
    limit = getattr(provider, "max_concurrency", 0) if provider is not None else 0
    if limit:
        jobs = min(jobs, limit)
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_input_pairs(args: argparse.Namespace) -> list[corpus.SentencePair]:
    if args.pairs:
        return corpus.load_pairs(args.pairs)
    if args.complex and args.simple:
        origin = corpus.Origin(kind=args.origin_kind, name=args.origin_name)
        return corpus.load_parallel_corpus(args.complex, args.simple, origin, split=args.split)
    raise ValueError("supply --pairs or both --complex and --simple")


def _add_pair_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pairs", help="sentence pairs, JSON-lines")
    parser.add_argument("--complex", help="complex side, one sentence per line")
    parser.add_argument("--simple", help="simple side, one sentence per line")
    parser.add_argument("--origin-kind", default="reference", choices=corpus.VALID_ORIGIN_KINDS)
    parser.add_argument("--origin-name", default="corpus")
    parser.add_argument("--split", default="unsplit", choices=corpus.VALID_SPLITS)


def _embedding_provider(args: argparse.Namespace):
    endpoint = getattr(args, "embed_endpoint", None) or os.environ.get("EMBED_ENDPOINT")
    if endpoint:
        return HttpEmbeddingProvider(
            endpoint, dimension=args.embed_dim, name=args.embed_name, timeout=args.timeout
        )
    if getattr(args, "stub_embed", False):
        return HashEmbeddingProvider()
    return None


def _load_references(paths: list[str], n_pairs: int) -> list[list[str]]:
    columns = []
    for path in paths:
        lines = corpus._read_lines(path)
        if len(lines) != n_pairs:
            raise corpus.AlignmentError(
                f"reference file {path} has {len(lines)} lines for {n_pairs} pairs"
            )
        columns.append(lines)
    return [[col[i] for col in columns] for i in range(n_pairs)]


# ----------------------------------------------------------------- subcommands


def cmd_analyze(args: argparse.Namespace) -> int:
    pairs = _load_input_pairs(args)
    references = _load_references(args.references, len(pairs)) if args.references else None
    provider = _embedding_provider(args)

    def one(indexed):
        index, pair = indexed
        refs = references[index] if references else None
        return metrics.compute_metrics(pair, references=refs, provider=provider, edit_unit=args.edit_unit)

    vectors = _map_ordered(one, list(enumerate(pairs)), args.jobs, provider=provider)
    if args.format == "tsv":
        metrics.write_metrics_tsv(vectors, args.out)
    else:
        metrics.write_metrics_jsonl(vectors, args.out)
    extra: dict = {"n_pairs": len(pairs)}
    if references:
        extra["corpus_sari"] = sum(v.sari for v in vectors) / len(vectors)

    if args.labels:
        labels = _load_aggregated(args.labels)
        strat = _stratified_tables(vectors, labels)
        strat_out = args.stratified_out or str(args.out) + ".stratified.json"
        with open(strat_out, "w", encoding="utf-8") as fh:
            json.dump(strat, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
        extra["stratified_out"] = str(strat_out)
    _write_manifest(args.out, args, extra)
    print(f"analyze: wrote {len(vectors)} metric vectors to {args.out}", file=sys.stderr)
    return 0


_STRATIFIED_METRICS = ("length_change_pct", "norm_edit_distance", "jaccard")


def _stratified_tables(vectors, labels: list[stats.AggregatedLabel]) -> dict:
    """Mean +/- std of each metric, grouped by severity level per category."""
    by_pair = {v.pair_id: v for v in vectors}
    tables: dict = {}
    for category in CATEGORIES:
        tables[category] = {}
        for metric_name in _STRATIFIED_METRICS:
            groups: dict[int, list[float]] = {}
            for label in labels:
                outcome = label.outcome(category)
                vector = by_pair.get(label.pair_id)
                if outcome is None or outcome == -1 or vector is None:
                    continue
                groups.setdefault(outcome, []).append(getattr(vector, metric_name))
            tables[category][metric_name] = {
                str(level): stat.to_record()
                for level, stat in stats.stratified_stat(groups).items()
            }
    return tables


def _load_aggregated(path: str | Path) -> list[stats.AggregatedLabel]:
    labels = []
    for line_no, record in corpus._iter_records(path):
        def parse(value):
            return None if value == "undefined" else value
        try:
            labels.append(
                stats.AggregatedLabel(
                    pair_id=record["pair_id"],
                    insertion=parse(record["insertion"]),
                    deletion=parse(record["deletion"]),
                    substitution=parse(record["substitution"]),
                )
            )
        except KeyError as exc:
            raise corpus.RecordError(path, line_no, f"missing field {exc}") from exc
    return labels


def _save_aggregated(labels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(json.dumps(label.to_record(), ensure_ascii=False) + "\n")


def cmd_agree(args: argparse.Namespace) -> int:
    votes = corpus.load_votes(args.votes)
    aggregated = stats.aggregate_votes(votes)
    agreement = stats.agreement_report(votes)
    distributions = {
        category: stats.distribution_report(label.outcome(category) for label in aggregated)
        for category in CATEGORIES
    }
    payload = {
        "agreement": {c: r.to_record() for c, r in agreement.items()},
        "distributions": {c: r.to_record() for c, r in distributions.items()},
    }
    if args.format == "tsv":
        _write_agree_tsv(payload, args.out)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    if args.aggregated_out:
        _save_aggregated(aggregated, args.aggregated_out)
    _write_manifest(args.out, args, {"n_votes": len(votes), "n_pairs": len(aggregated)})
    print(f"agree: {len(aggregated)} pairs, report at {args.out}", file=sys.stderr)
    return 0


def _round1(value):
    return None if value is None else round(value, 1)


def _write_agree_tsv(payload: dict, path: str | Path) -> None:
    lines = ["table\tcategory\tcolumn\tvalue"]
    for category in CATEGORIES:
        record = payload["agreement"][category]
        lines.append(f"agreement\t{category}\tpct_majority\t{_round1(record['pct_majority'])}")
        lines.append(
            f"agreement\t{category}\tpct_majority_nonzero\t{_round1(record['pct_majority_nonzero'])}"
        )
        alpha = record["kripp_alpha"]
        alpha_text = "undefined" if alpha is None else f"{alpha:.3f}"
        lines.append(f"agreement\t{category}\tkripp_alpha\t{alpha_text}")
    for category in CATEGORIES:
        for level in ("0", "1", "2", "-1"):
            value = payload["distributions"][category]["percentages"][level]
            lines.append(f"distribution\t{category}\t{level}\t{_round1(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_correlate(args: argparse.Namespace) -> int:
    pairs = _load_input_pairs(args)
    if args.labels:
        labels = _load_aggregated(args.labels)
    elif args.votes:
        labels = stats.aggregate_votes(corpus.load_votes(args.votes))
    else:
        raise ValueError("supply --labels or --votes")
    references = _load_references(args.references, len(pairs)) if args.references else None
    provider = _embedding_provider(args)

    def one(indexed):
        index, pair = indexed
        refs = references[index] if references else None
        return metrics.compute_metrics(pair, references=refs, provider=provider, edit_unit=args.edit_unit)

    vectors = _map_ordered(one, list(enumerate(pairs)), args.jobs, provider=provider)
    by_pair = {v.pair_id: v for v in vectors}

    metric_names = ["norm_edit_distance", "length_change_pct", "jaccard"]
    if references:
        metric_names.insert(0, "sari")
    if provider is not None:
        metric_names.append("embed_similarity")

    cells: dict = {m: {} for m in metric_names}
    for metric_name in metric_names:
        for category in CATEGORIES:
            xs, ys = [], []
            for label in labels:
                vector = by_pair.get(label.pair_id)
                outcome = label.outcome(category)
                if vector is None or outcome is None:
                    continue
                if outcome == -1 and args.exclude_gibberish:
                    continue
                value = getattr(vector, metric_name)
                if value is None:
                    continue
                xs.append(value)
                ys.append(corpus.ordinal_rank(outcome))
            cell: dict = {"n": len(xs)}
            try:
                cell["rho"] = stats.spearman(xs, ys)
            except (stats.UndefinedCorrelationError, ValueError) as exc:
                cell["rho"] = None
                cell["note"] = str(exc)
            cells[metric_name][category] = cell

    payload = {"metrics": metric_names, "categories": list(CATEGORIES), "cells": cells}
    if args.format == "tsv":
        lines = ["metric\t" + "\t".join(CATEGORIES)]
        for metric_name in metric_names:
            row = [metric_name]
            for category in CATEGORIES:
                rho = cells[metric_name][category]["rho"]
                row.append("undefined" if rho is None else f"{rho:.3f}")
            lines.append("\t".join(row))
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    _write_manifest(args.out, args, {"n_pairs": len(pairs)})
    print(f"correlate: matrix at {args.out}", file=sys.stderr)
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    pairs = _load_input_pairs(args)
    kept = corpus.noise_filter(
        pairs,
        single_sentence_threshold=args.single_threshold,
        multi_sentence_threshold=args.multi_threshold,
        lowercase=not args.no_lowercase,
    )
    corpus.save_pairs(kept, args.out)
    _write_manifest(args.out, args, {"n_input": len(pairs), "n_kept": len(kept)})
    print(f"filter: kept {len(kept)}/{len(pairs)} pairs -> {args.out}", file=sys.stderr)
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    if args.pairs:
        pairs = corpus.load_pairs(args.pairs)
        sources = [(p.id, p.complex_text) for p in pairs]
        clean_pairs = pairs
    elif args.sentences:
        lines = corpus._read_lines(args.sentences)
        sources = [(f"sent:{i}", line) for i, line in enumerate(lines, start=1) if line.strip()]
        clean_pairs = []
    else:
        raise ValueError("supply --pairs or --sentences")

    masklm_endpoint = args.masklm_endpoint or os.environ.get("MASKLM_ENDPOINT")
    mask_provider = (
        HttpMaskFiller(masklm_endpoint, timeout=args.timeout) if masklm_endpoint else StubMaskFiller()
    )
    similarity_provider = TokenOverlapScorer()

    generators = args.generators.split(",") if args.generators else list(perturb.GENERATORS)
    examples = perturb.generate_examples(
        sources,
        seed=args.seed,
        similarity_provider=similarity_provider,
        mask_provider=mask_provider,
        generators=generators,
        exclude_punct=not args.mask_punct,
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for category in ("insertion", "substitution"):
        selected = [ex for ex in examples if ex.category == category]
        if not selected and not clean_pairs:
            continue
        records, manifest = perturb.assemble_synthetic_dataset(
            category, selected, clean_pairs, seed=args.seed
        )
        manifest["config_digest"] = _config_digest(args)
        examples_path = out_dir / f"{category}.jsonl"
        manifest_path = out_dir / f"{category}.manifest.json"
        perturb.write_dataset(records, manifest, examples_path, manifest_path)
        written[category] = manifest["total"]
    print(f"perturb: wrote {written} to {out_dir}", file=sys.stderr)
    return 0


def _records_from_labels(pairs, labels, category: str) -> tuple[list[dict], dict]:
    by_pair = {p.id: p for p in pairs}
    records = []
    excluded = {"undefined": 0, "gibberish": 0, "missing_pair": 0}
    for label in labels:
        outcome = label.outcome(category)
        pair = by_pair.get(label.pair_id)
        if pair is None:
            excluded["missing_pair"] += 1
            continue
        if outcome is None:
            excluded["undefined"] += 1
            continue
        if outcome == -1:
            excluded["gibberish"] += 1
            continue
        records.append(
            {
                "source_text": pair.complex_text,
                "target_text": pair.simple_text,
                "severity": outcome,
            }
        )
    return records, excluded


def _load_perturbed_records(path: str | Path) -> list[dict]:
    records = []
    for _, record in corpus._iter_records(path):
        records.append(record)
    return records


def cmd_train(args: argparse.Namespace) -> int:
    config = clf.TrainConfig(step_size=args.step_size, epochs=args.epochs, seed=args.seed)
    excluded: dict = {}
    if args.dataset:
        real = clf.dataset_from_records(_load_perturbed_records(args.dataset))
    elif args.pairs and args.labels:
        pairs = _load_input_pairs(args)
        labels = _load_aggregated(args.labels)
        records, excluded = _records_from_labels(pairs, labels, args.category)
        real = clf.dataset_from_records(records)
    else:
        raise ValueError("supply --dataset, or --pairs with --labels")

    if args.pretrain:
        synthetic = clf.dataset_from_records(_load_perturbed_records(args.pretrain))
        pre_config = clf.TrainConfig(
            step_size=args.step_size, epochs=args.pretrain_epochs, seed=args.seed
        )
        result = clf.pipeline_pretrain_then_finetune(
            synthetic, real, pre_config, config, category=args.category
        )
        model = result.model
        log = {"pretrain": result.pretrain.log, "finetune": result.finetune.log,
               "stage2_start_loss": result.stage2_start_loss,
               "best_epoch": {"pretrain": result.pretrain.best_epoch, "finetune": result.finetune.best_epoch}}
    else:
        result = clf.train(real, config, category=args.category)
        model = result.model
        log = {"train": result.log, "best_epoch": result.best_epoch,
               "initial_loss": result.initial_loss, "final_loss": result.final_loss}

    manifest = {
        "category": args.category,
        "seed": args.seed,
        "hyperparameters": {"step_size": args.step_size, "epochs": args.epochs},
        "data_digest": real.digest(),
        "config_digest": _config_digest(args),
        "excluded": excluded,
    }
    clf.save_model(model, args.model_out, manifest=manifest)
    if args.log_out:
        with open(args.log_out, "w", encoding="utf-8") as fh:
            json.dump(log, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    _write_manifest(args.model_out, args, {"n_examples": len(real)})
    print(f"train: model at {args.model_out}", file=sys.stderr)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = clf.load_model(args.model)
    excluded: dict = {}
    if args.dataset:
        dataset = clf.dataset_from_records(_load_perturbed_records(args.dataset))
    elif args.pairs and args.labels:
        pairs = _load_input_pairs(args)
        labels = _load_aggregated(args.labels)
        records, excluded = _records_from_labels(pairs, labels, args.category)
        dataset = clf.dataset_from_records(records)
    else:
        raise ValueError("supply --dataset, or --pairs with --labels")
    report = clf.evaluate(model, dataset, n_excluded=sum(excluded.values()))
    record = report.to_record()
    record["excluded"] = excluded
    if args.format == "tsv":
        lines = ["class\tn_gold\tn_predicted\tprecision\trecall\tf1"]
        for cls in (0, 1, 2):
            r = record["per_class"][str(cls)]
            cells = [str(cls)] + [
                "" if r[k] is None else (str(r[k]) if isinstance(r[k], int) else f"{r[k]:.3f}")
                for k in ("n_gold", "n_predicted", "precision", "recall", "f1")
            ]
            lines.append("\t".join(cells))
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(record, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
    _write_manifest(args.out, args, {"n_examples": report.n_examples})
    print(f"evaluate: report at {args.out}", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    pairs = _load_input_pairs(args)
    gold = load_gold_set(args.gold)
    service = AnnotationService(
        pairs, gold, data_dir=args.data_dir, snapshot_every=args.snapshot_every
    )
    if args.export_only:
        payload = service.export_results()
        if args.export_dir:
            paths = service.export_files(args.export_dir)
            print(f"serve: exported {sorted(p.name for p in paths.values())} to {args.export_dir}",
                  file=sys.stderr)
        sys.stdout.buffer.write(export_bytes(payload))
        service.close()
        return 0
    print(f"serve: listening on port {args.port}, data in {args.data_dir}", file=sys.stderr)
    serve_forever(service, args.port, host=args.host)
    return 0


# ----------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simpfact", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="per-pair metric vectors (+ optional stratified stats)")
    _add_pair_inputs(p)
    p.add_argument("--references", nargs="*", default=[], help="line-aligned reference files for SARI")
    p.add_argument("--labels", help="aggregated labels JSONL for stratified stats")
    p.add_argument("--stratified-out")
    p.add_argument("--edit-unit", default="token", choices=("token", "char"))
    p.add_argument("--embed-endpoint")
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--embed-name", default="http-embed")
    p.add_argument("--stub-embed", action="store_true", help="use the deterministic embedding stub")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", default="json", choices=("json", "tsv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("agree", help="agreement + distribution reports from votes")
    p.add_argument("--votes", required=True)
    p.add_argument("--aggregated-out", help="also save aggregated labels JSONL")
    p.add_argument("--format", default="json", choices=("json", "tsv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("correlate", help="Spearman matrix of metrics x error categories")
    _add_pair_inputs(p)
    p.add_argument("--votes")
    p.add_argument("--labels", help="aggregated labels JSONL (alternative to --votes)")
    p.add_argument("--references", nargs="*", default=[])
    p.add_argument("--edit-unit", default="token", choices=("token", "char"))
    p.add_argument("--embed-endpoint")
    p.add_argument("--embed-dim", type=int, default=32)
    p.add_argument("--embed-name", default="http-embed")
    p.add_argument("--stub-embed", action="store_true")
    p.add_argument("--exclude-gibberish", action="store_true",
                   help="drop -1 outcomes instead of ranking them as 3")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", default="json", choices=("json", "tsv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("filter", help="drop noisy alignments by Jaccard thresholds")
    _add_pair_inputs(p)
    p.add_argument("--single-threshold", type=float, default=0.4)
    p.add_argument("--multi-threshold", type=float, default=0.2)
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("perturb", help="generate synthetic insertion/substitution datasets")
    p.add_argument("--pairs")
    p.add_argument("--sentences", help="raw sentences, one per line (no level-0 originals)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--generators", help="comma-separated subset of: " + ",".join(perturb.GENERATORS))
    p.add_argument("--masklm-endpoint")
    p.add_argument("--mask-punct", action="store_true", help="allow masking punctuation tokens")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("train", help="train a severity classifier")
    _add_pair_inputs(p)
    p.add_argument("--labels")
    p.add_argument("--dataset", help="perturbed-example JSONL to train on")
    p.add_argument("--pretrain", help="synthetic JSONL for two-stage training")
    p.add_argument("--category", required=True, choices=CATEGORIES)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--step-size", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--pretrain-epochs", type=int, default=300)
    p.add_argument("--model-out", required=True)
    p.add_argument("--log-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="per-class F1 report for a trained model")
    _add_pair_inputs(p)
    p.add_argument("--labels")
    p.add_argument("--dataset")
    p.add_argument("--category", required=True, choices=CATEGORIES)
    p.add_argument("--model", required=True)
    p.add_argument("--format", default="json", choices=("json", "tsv"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the annotation service")
    _add_pair_inputs(p)
    p.add_argument("--gold", required=True, help="qualification gold set JSON")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--snapshot-every", type=int, default=200)
    p.add_argument("--export-only", action="store_true", help="print export JSON and exit")
    p.add_argument("--export-dir", help="also write votes.jsonl, aggregated.jsonl, agreement.json")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, clf.TrainingDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
