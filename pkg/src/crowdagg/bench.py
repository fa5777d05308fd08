"""Benchmark harness: run a (method x dataset) grid deterministically.

Per-cell seeds derive from a stable hash of (config seed, method name,
dataset name), so neither execution order nor the parallelism level can
change any value in the report. Wall-clock timings are written to their own
file and are the only output exempt from byte-level reproducibility.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .catalog import load_catalog_dataset, dataset_modality
from .categorical import DawidSkene, Glad, Kos, Mace, MajorityVote, MMsr, Wawa
from .errors import CrowdAggError, NoOverlap, NotBinary, ValidationError
from .metrics import accuracy, corpus_wer, mean_iou, spearman_rho
from .pairwise import BradleyTerry, NoisyBradleyTerry, RandomBaseline
from .segmentation import SegmentationEM, SegmentationMajorityVote, SegmentationRasa
from .sequence import Hrrasa, Rasa, Rover
from . import synth

SEEDED = frozenset({"mace", "kos", "mmsr", "noisybt", "random"})

METHODS = {
    "mv": ("categorical", MajorityVote),
    "wawa": ("categorical", Wawa),
    "ds": ("categorical", DawidSkene),
    "glad": ("categorical", Glad),
    "mace": ("categorical", Mace),
    "kos": ("categorical", Kos),
    "mmsr": ("categorical", MMsr),
    "bt": ("pairwise", BradleyTerry),
    "noisybt": ("pairwise", NoisyBradleyTerry),
    "random": ("pairwise", RandomBaseline),
    "rover": ("sequence", Rover),
    "rasa": ("sequence", Rasa),
    "hrrasa": ("sequence", Hrrasa),
    "seg-mv": ("segmentation", SegmentationMajorityVote),
    "seg-em": ("segmentation", SegmentationEM),
    "seg-rasa": ("segmentation", SegmentationRasa),
}

GENERATORS = {
    "categorical": synth.gen_categorical,
    "pairwise": synth.gen_pairwise,
    "sequence": synth.gen_sequence,
    "segmentation": synth.gen_segmentation,
}


def method_modality(name: str) -> str:
    if name not in METHODS:
        raise ValidationError(f"unknown method {name!r}; known: {', '.join(sorted(METHODS))}")
    return METHODS[name][0]


def build_method(name: str, params=None, seed=None):
    """Instantiate a registry method, passing ``seed`` only where it exists."""
    modality, cls = METHODS[name]
    params = dict(params or {})
    if seed is not None and name in SEEDED:
        params.setdefault("seed", seed)
    return cls(**params)


def _score(metric, method_result, truth):
    if metric == "accuracy":
        return accuracy(method_result.labels, truth)
    if metric == "spearman":
        return spearman_rho(method_result.scores, truth)
    if metric == "wer":
        return corpus_wer(method_result.labels, truth)
    if metric == "iou":
        return mean_iou(method_result.labels, truth)
    raise ValidationError(f"unknown metric {metric!r}")


METRIC_MODALITY = {
    "accuracy": "categorical",
    "spearman": "pairwise",
    "wer": "sequence",
    "iou": "segmentation",
}


def cell_seed(global_seed: int, method: str, dataset: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{method}:{dataset}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class BenchConfig:
    seed: int
    datasets: list
    methods: list
    metrics: list
    output: str
    parallelism: int = 1
    local_dir: str | None = None

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        try:
            return cls(
                seed=int(raw["seed"]),
                datasets=list(raw["datasets"]),
                methods=[
                    {"name": m["name"], "params": dict(m.get("params", {}))}
                    for m in raw["methods"]
                ],
                metrics=list(raw["metrics"]),
                output=str(raw["output"]),
                parallelism=int(raw.get("parallelism", 1)),
                local_dir=raw.get("local_dir"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed bench config: {exc}") from exc

    def canonical(self) -> str:
        payload = {
            "seed": self.seed,
            "datasets": self.datasets,
            "methods": self.methods,
            "metrics": self.metrics,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _dataset_name(spec) -> str:
    if "name" not in spec:
        raise ValidationError("dataset spec needs a 'name'")
    return str(spec["name"])


def _dataset_modality(spec, config) -> str:
    if "generator" in spec:
        kind = spec["generator"]
        if kind not in GENERATORS:
            raise ValidationError(f"unknown generator {kind!r}")
        return kind
    return dataset_modality(_dataset_name(spec))


def validate_config(config: BenchConfig) -> dict:
    """Check every method and metric against every dataset's modality.

    Returns {dataset name: modality}. Raises before anything runs.
    """
    if not config.methods or not config.datasets or not config.metrics:
        raise ValidationError("bench config needs methods, datasets, and metrics")
    modalities = {}
    for spec in config.datasets:
        name = _dataset_name(spec)
        if name in modalities:
            raise ValidationError(f"duplicate dataset name {name!r}")
        modalities[name] = _dataset_modality(spec, config)
    for m in config.methods:
        mod = method_modality(m["name"])
        for name, dmod in modalities.items():
            if mod != dmod:
                raise ValidationError(
                    f"method {m['name']!r} ({mod}) is incompatible with dataset "
                    f"{name!r} ({dmod})"
                )
    for metric in config.metrics:
        if metric not in METRIC_MODALITY:
            raise ValidationError(f"unknown metric {metric!r}")
        for name, dmod in modalities.items():
            if METRIC_MODALITY[metric] != dmod:
                raise ValidationError(
                    f"metric {metric!r} is incompatible with dataset {name!r} ({dmod})"
                )
    return modalities


def _materialize_dataset(spec, config):
    """Load or generate one dataset; returns (data, truth)."""
    if "generator" in spec:
        generator = GENERATORS[spec["generator"]]
        params = dict(spec.get("params", {}))
        if "skill_dist" in params and isinstance(params["skill_dist"], list):
            params["skill_dist"] = tuple(params["skill_dist"])
        out = generator(**params)
        return out[0], out[1]
    return load_catalog_dataset(_dataset_name(spec), local_dir=config.local_dir)


def _execute_cell(cell):
    """Run one (method, dataset) cell; always returns a record, never raises."""
    start = time.perf_counter()
    record = {
        "method": cell["method"],
        "dataset": cell["dataset"],
        "seed": cell["seed"],
        "status": "ok",
        "reason": "",
        "values": {},
    }
    try:
        estimator = build_method(cell["method"], cell["params"], seed=cell["seed"])
        result = estimator.fit_predict(cell["data"])
        record["values"] = {
            metric: _score(metric, result, cell["truth"]) for metric in cell["metrics"]
        }
    except (NotBinary, NoOverlap) as exc:
        record["status"] = "skipped"
        record["reason"] = str(exc)
    except Exception as exc:  # cell failures must not kill the grid
        record["status"] = "error"
        record["reason"] = f"{type(exc).__name__}: {exc}"
    record["seconds"] = time.perf_counter() - start
    return record


@dataclass
class BenchReport:
    config_hash: str
    seed: int
    metrics: list
    methods: list
    datasets: list
    cells: list = field(default_factory=list)

    @property
    def has_errors(self) -> bool:
        return any(c["status"] == "error" for c in self.cells)

    def _cell(self, method, dataset):
        for c in self.cells:
            if c["method"] == method and c["dataset"] == dataset:
                return c
        raise KeyError((method, dataset))

    def to_csv(self) -> str:
        lines = ["method,dataset,metric,value,seed,status,reason"]
        for c in self.cells:
            for metric in self.metrics:
                value = c["values"].get(metric)
                value_str = repr(value) if value is not None else ""
                reason = c["reason"].replace(",", ";")
                lines.append(
                    f"{c['method']},{c['dataset']},{metric},{value_str},{c['seed']},{c['status']},{reason}"
                )
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        out = [
            f"# Benchmark report",
            "",
            f"- version: {__version__}",
            f"- config hash: `{self.config_hash}`",
            f"- seed: {self.seed}",
            "",
        ]
        for metric in self.metrics:
            out.append(f"## {metric}")
            out.append("")
            header = "| Method | " + " | ".join(self.datasets) + " |"
            rule = "|---" * (len(self.datasets) + 1) + "|"
            out.extend([header, rule])
            for method in self.methods:
                row = [method]
                for dataset in self.datasets:
                    c = self._cell(method, dataset)
                    if c["status"] == "ok":
                        row.append(f"{c['values'][metric]:.3f}")
                    else:
                        row.append("—")
                out.append("| " + " | ".join(row) + " |")
            out.append("")
        return "\n".join(out)

    def timings_csv(self) -> str:
        lines = ["method,dataset,seconds"]
        for c in self.cells:
            lines.append(f"{c['method']},{c['dataset']},{c['seconds']:.6f}")
        return "\n".join(lines) + "\n"

    def meta(self) -> dict:
        return {
            "version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "cells": {
                f"{c['method']}/{c['dataset']}": c["status"] for c in self.cells
            },
        }


def run_bench(config: BenchConfig) -> BenchReport:
    validate_config(config)
    dataset_names = [_dataset_name(spec) for spec in config.datasets]
    method_names = [m["name"] for m in config.methods]
    loaded = {}
    load_errors = {}
    for spec in config.datasets:
        name = _dataset_name(spec)
        try:
            loaded[name] = _materialize_dataset(spec, config)
        except Exception as exc:
            load_errors[name] = f"{type(exc).__name__}: {exc}"
    cells = []
    for m in config.methods:
        for name in dataset_names:
            cell = {
                "method": m["name"],
                "params": m["params"],
                "dataset": name,
                "seed": cell_seed(config.seed, m["name"], name),
                "metrics": config.metrics,
            }
            if name in loaded:
                cell["data"], cell["truth"] = loaded[name]
            cells.append(cell)
    runnable = [c for c in cells if "data" in c]
    if config.parallelism > 1 and len(runnable) > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(_execute_cell, runnable))
    else:
        results = [_execute_cell(c) for c in runnable]
    by_key = {(r["method"], r["dataset"]): r for r in results}
    report = BenchReport(
        config_hash=config.config_hash(),
        seed=config.seed,
        metrics=list(config.metrics),
        methods=method_names,
        datasets=dataset_names,
    )
    for c in cells:
        key = (c["method"], c["dataset"])
        if key in by_key:
            report.cells.append(by_key[key])
        else:
            report.cells.append(
                {
                    "method": c["method"],
                    "dataset": c["dataset"],
                    "seed": c["seed"],
                    "status": "error",
                    "reason": load_errors[c["dataset"]],
                    "values": {},
                    "seconds": 0.0,
                }
            )
    return report


def write_report(report: BenchReport, output_dir) -> dict:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": output_dir / "report.csv",
        "markdown": output_dir / "report.md",
        "meta": output_dir / "meta.json",
        "timings": output_dir / "timings.csv",
    }
    paths["csv"].write_text(report.to_csv(), encoding="utf-8")
    paths["markdown"].write_text(report.to_markdown(), encoding="utf-8")
    paths["meta"].write_text(
        json.dumps(report.meta(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    paths["timings"].write_text(report.timings_csv(), encoding="utf-8")
    return paths
