"""Command-line harness.

Subcommands: aggregate | evaluate | synth | metrics | bench | fetch.
Exit codes: 0 ok, 1 method error (e.g. a binary-only method on multi-class
data), 2 input/validation error, 3 bench grid with failed cells. Nothing
touches the network except the explicit ``fetch`` subcommand.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, io, synth
from .bench import BenchConfig, build_method, method_modality, run_bench, write_report
from .catalog import fetch_dataset, sha256_file
from .categorical import DawidSkene
from .errors import (
    CrowdAggError,
    MissingPrediction,
    NoCoincidences,
    NoOverlap,
    NotBinary,
    ValidationError,
)
from .metrics import accuracy, corpus_wer, mean_iou, spearman_rho
from .quality import agreement_with_aggregate, ds_posterior_quality, krippendorff_alpha, uncertainty

METHOD_CHOICES = (
    "mv", "wawa", "ds", "glad", "mace", "kos", "mmsr",
    "bt", "noisybt",
    "rover", "rasa", "hrrasa",
    "seg-mv", "seg-em", "seg-rasa",
)


def _parse_kv(pairs):
    params = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValidationError(f"expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        for cast in (int, float):
            try:
                value = cast(value)
                break
            except ValueError:
                continue
        params[key.replace("-", "_")] = value
    return params


def _parse_skill(text):
    if ":" in text:
        kind, args = text.split(":", 1)
        values = tuple(float(x) for x in args.split(","))
        return (kind, *values)
    return ("fixed", float(text))


def _cmd_aggregate(args) -> int:
    params = _parse_kv(args.params)
    if args.n_iter is not None:
        params["k_iter" if args.method == "kos" else "n_iter"] = args.n_iter
    modality = method_modality(args.method)
    estimator = build_method(args.method, params, seed=args.seed)
    if modality == "categorical":
        data = io.ingest_categorical(args.input)
    elif modality == "pairwise":
        data = io.ingest_pairwise(args.input)
    elif modality == "sequence":
        data = io.ingest_sequence(args.input)
    else:
        data = io.ingest_masks(args.input)
    result = estimator.fit_predict(data)
    if modality == "pairwise":
        io.write_scores_csv(args.output, result)
        if args.skills and result.worker_params:
            io.write_skills_csv(args.skills, {w: p[0] for w, p in result.worker_params.items()})
    elif modality == "segmentation":
        io.write_mask_sets(args.output, result.labels)
    elif modality == "sequence":
        io.write_sequence_labels_csv(args.output, result.labels)
        if args.skills and result.skills:
            io.write_skills_csv(args.skills, result.skills)
    else:
        io.write_labels_csv(args.output, result.labels)
        if args.posteriors and result.posteriors is not None:
            io.write_posteriors_csv(args.posteriors, result.posteriors, data.label_set)
        if args.skills and result.skills:
            io.write_skills_csv(args.skills, result.skills)
    trace = getattr(result, "trace", None)
    if trace is not None:
        print(f"{args.method}: {trace.summary()}")
    else:
        print(f"{args.method}: done")
    return 0


def _read_mask_map(path):
    """Accept either a (task, mask_file) or (task, worker, mask_file) index;
    each task must resolve to exactly one mask."""
    path = Path(path)
    try:
        rows = [(t, f) for t, f in io._read_columns(path, ("task", "mask_file"))]
    except CrowdAggError:
        rows = [(t, f) for t, _, f in io._read_columns(path, ("task", "worker", "mask_file"))]
    masks = {}
    for task, rel in rows:
        if task in masks:
            raise ValidationError(f"task {task!r} has more than one mask in {path}")
        masks[task] = io.read_pbm(path.parent / rel)
    return masks


def _cmd_evaluate(args) -> int:
    if args.metric == "accuracy":
        value = accuracy(io.read_labels_csv(args.pred), io.read_labels_csv(args.truth))
    elif args.metric == "spearman":
        value = spearman_rho(io.read_scores_csv(args.pred), io.read_scores_csv(args.truth))
    elif args.metric == "wer":
        value = corpus_wer(io.read_sequences_csv(args.pred), io.read_sequences_csv(args.truth))
    else:
        value = mean_iou(_read_mask_map(args.pred), _read_mask_map(args.truth))
    print(f"{args.metric},{value!r}")
    if args.output:
        io._write_csv(args.output, ("metric", "value"), [(args.metric, repr(value))])
    return 0


def _cmd_metrics(args) -> int:
    table = io.ingest_categorical(args.input)
    skills = None
    if args.skills:
        rows = io._read_columns(args.skills, ("worker", "skill"))
        skills = {w: float(s) for w, s in rows}
    values = []
    try:
        values.append(("krippendorff_alpha", krippendorff_alpha(table)))
    except NoCoincidences as exc:
        print(f"alpha skipped: {exc}", file=sys.stderr)
    values.append(("agreement_with_aggregate", agreement_with_aggregate(table)))
    unc = uncertainty(table, skills)
    values.append(("mean_uncertainty", unc.mean))
    ds_result = DawidSkene().fit_predict(table)
    values.append(("ds_posterior_quality", ds_posterior_quality(ds_result)))
    out_dir = Path(args.output)
    io._write_csv(out_dir / "metrics.csv", ("metric", "value"), [(k, repr(v)) for k, v in values])
    io._write_csv(
        out_dir / "uncertainty.csv",
        ("task", "entropy"),
        [(t, repr(unc.per_task[t])) for t in sorted(unc.per_task)],
    )
    for key, value in values:
        print(f"{key},{value!r}")
    return 0


def _cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.modality == "categorical":
        table, truth, skills = synth.gen_categorical(
            args.n_tasks, args.n_workers, args.per_task, args.n_labels,
            skill_dist=_parse_skill(args.skill), model=args.model, seed=args.seed,
        )
        io.write_categorical_csv(out / "annotations.csv", table)
        io.write_labels_csv(out / "truth.csv", truth)
        io.write_skills_csv(out / "true_skills.csv", skills)
        written = ["annotations.csv", "truth.csv", "true_skills.csv"]
    elif args.modality == "pairwise":
        table, truth = synth.gen_pairwise(
            args.n_items, args.n_workers, args.n_comparisons,
            worker_noise=args.noise, seed=args.seed,
        )
        io.write_pairwise_csv(out / "comparisons.csv", table)
        io.write_truth_scores(out / "truth.csv", truth)
        written = ["comparisons.csv", "truth.csv"]
    elif args.modality == "sequence":
        table, truth = synth.gen_sequence(
            args.n_tasks, args.n_workers, args.error_rate, seed=args.seed,
        )
        io.write_sequence_csv(out / "responses.csv", table)
        io.write_sequence_labels_csv(out / "truth.csv", truth)
        written = ["responses.csv", "truth.csv"]
    else:
        try:
            height, width = (int(x) for x in args.grid.lower().split("x"))
        except ValueError as exc:
            raise ValidationError(f"bad grid spec {args.grid!r}, expected HxW") from exc
        mask_sets, truth = synth.gen_segmentation(
            args.n_tasks, args.n_workers, shape=args.shape, flip_rate=args.flip,
            morph_noise=args.morph, grid=(height, width), seed=args.seed,
        )
        by_task = {ms.task_id: list(zip(ms.workers, ms.masks)) for ms in mask_sets}
        io.write_mask_sets(out, by_task)
        rows = []
        for i, task in enumerate(sorted(truth)):
            name = f"truth_{i:05d}.pbm"
            io.write_pbm(out / name, truth[task])
            rows.append((task, name))
        io._write_csv(out / "truth_index.csv", ("task", "mask_file"), rows)
        written = ["index.csv", "truth_index.csv"]
    for name in written:
        print(f"{name},{sha256_file(out / name)}")
    return 0


def _cmd_bench(args) -> int:
    config = BenchConfig.from_json(args.config)
    report = run_bench(config)
    paths = write_report(report, config.output)
    print(f"report written to {paths['markdown']}")
    for cell in report.cells:
        if cell["status"] != "ok":
            print(
                f"cell {cell['method']}/{cell['dataset']}: {cell['status']} ({cell['reason']})",
                file=sys.stderr,
            )
    return 3 if report.has_errors else 0


def _cmd_fetch(args) -> int:
    written = fetch_dataset(args.name, args.local_dir, catalog_path=args.catalog)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdagg", description="Crowdsourced-annotation aggregation toolkit"
    )
    parser.add_argument("--version", action="version", version=f"crowdagg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="aggregate one annotation file")
    p.add_argument("--method", required=True, choices=METHOD_CHOICES)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--n-iter", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", nargs="*", metavar="K=V")
    p.add_argument("--posteriors", help="optional posterior CSV path")
    p.add_argument("--skills", help="optional worker skill CSV path")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--metric", required=True, choices=("accuracy", "spearman", "wer", "iou"))
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("metrics", help="annotation-quality metrics for one table")
    p.add_argument("--input", required=True)
    p.add_argument("--skills", help="optional worker skill CSV to weight uncertainty")
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--modality", required=True,
                   choices=("categorical", "pairwise", "sequence", "segmentation"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-tasks", type=int, default=100)
    p.add_argument("--n-workers", type=int, default=10)
    p.add_argument("--per-task", type=int, default=5)
    p.add_argument("--n-labels", type=int, default=2)
    p.add_argument("--skill", default="beta:4,1")
    p.add_argument("--model", default="one-coin", choices=("one-coin", "confusion"))
    p.add_argument("--n-items", type=int, default=50)
    p.add_argument("--n-comparisons", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--error-rate", type=float, default=0.1)
    p.add_argument("--shape", default="ellipse", choices=("ellipse", "rect"))
    p.add_argument("--flip", type=float, default=0.1)
    p.add_argument("--morph", type=int, default=1)
    p.add_argument("--grid", default="64x64")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="run a benchmark grid from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("fetch", help="download a catalog dataset's remote files")
    p.add_argument("--name", required=True)
    p.add_argument("--local-dir", required=True)
    p.add_argument("--catalog")
    p.set_defaults(func=_cmd_fetch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NotBinary, NoOverlap) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, MissingPrediction, FileNotFoundError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CrowdAggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
