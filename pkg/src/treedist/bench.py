"""Experiment harness: declarative configs in, plot-ready CSV/JSON out.

Five experiment kinds are supported:

``accuracy_vs_trainsize``  test accuracy and tree size against train-set size
``size_vs_minimal``        learned size against the size of a generating tree
``noise_pruning``          per-step train/test curves on label-noised data
``glocal_compare``         the same curves on clean data
``redundant_table``        efficient/redundant first splits on two toy datasets

Run ``r`` at sweep value ``v`` always uses
``stable_seed(master_seed, kind, v, r)``, so results do not depend on the
order of the sweep or on how repetitions are distributed over workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .clustering import LabeledDataset
from .errors import DataError, DiscardRateError, SpecError
from .learner import LearnerConfig, fit, replay
from .measures import TABLE_MEASURES, Measure
from .data import (RandomTreeSpec, SplitSpec, gen_blobs, gen_random_tree, inject_label_noise,
                   load_builtin, load_csv, split_train_test, stable_seed)
from .tree import detect_redundant_splits, predict_many, size

KINDS = ("accuracy_vs_trainsize", "size_vs_minimal", "noise_pruning",
         "glocal_compare", "redundant_table")

DEFAULT_REPS = {"accuracy_vs_trainsize": 50, "size_vs_minimal": 20, "noise_pruning": 100,
                "glocal_compare": 100, "redundant_table": 1}

STAT_COLUMNS = ("experiment", "learner_id", "sweep_value", "metric", "mean", "std", "ci95", "count")

DISCARD_WINDOW = 50
DISCARD_LIMIT = 0.9


# -- statistics ---------------------------------------------------------------

@dataclass(frozen=True)
class StatRow:
    experiment: str
    learner_id: str
    sweep_value: float
    metric: str
    mean: float
    std: float
    ci95: float
    count: int


def aggregate_stats(samples) -> tuple[float, float, float, int]:
    """(mean, population std, 1.96 * std / sqrt(n), n)."""
    a = np.asarray(list(samples), dtype=float)
    if a.size == 0:
        raise ValueError("cannot aggregate an empty sample")
    mean = float(a.mean())
    std = float(a.std())
    hw = 1.96 * std / math.sqrt(a.size) if a.size > 1 else 0.0
    return mean, std, hw, int(a.size)


def stat_row(experiment, learner_id, sweep_value, metric, samples) -> StatRow:
    return StatRow(experiment, learner_id, sweep_value, metric, *aggregate_stats(samples))


# -- configuration --------------------------------------------------------------

@dataclass
class LearnerSpec:
    id: str
    config: LearnerConfig


def _learner_specs(raw) -> list[LearnerSpec]:
    specs = []
    for item in raw:
        if not isinstance(item, dict):
            raise SpecError(f"learner entry must be a mapping, got {item!r}")
        cfg = LearnerConfig.from_dict({k: v for k, v in item.items()})
        specs.append(LearnerSpec(str(item.get("id", cfg.learner_id)), cfg))
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise SpecError(f"learner ids must be unique: {ids}")
    return specs


_DEFAULT_LEARNERS = {
    "accuracy_vs_trainsize": [{"measure": "gini", "mode": "local"},
                              {"measure": "gini", "mode": "global"}],
    "size_vs_minimal": [{"measure": m, "mode": mode}
                        for m in ("gain", "gini", "nvi") for mode in ("local", "global")],
    "noise_pruning": [{"measure": "gini", "mode": "local"}, {"measure": "gini", "mode": "global"}],
    "glocal_compare": [{"measure": "jaccard", "mode": mode}
                       for mode in ("local", "global", "glocal")],
    "redundant_table": [],
}


@dataclass
class ExperimentConfig:
    kind: str
    dataset: Any = None
    learners: list[LearnerSpec] = field(default_factory=list)
    repetitions: int = 1
    seed: int = 0
    sweep: Optional[list] = None
    test_fraction: float = 0.1
    noise: float = 0.5
    generator: dict = field(default_factory=dict)
    name: str = ""
    record_time: bool = False

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise SpecError("experiment description must be a mapping")
        known = {"kind", "dataset", "learners", "repetitions", "seed", "sweep",
                 "test_fraction", "noise", "generator", "name", "output"}
        unknown = set(doc) - known
        if unknown:
            raise SpecError(f"unknown experiment keys: {sorted(unknown)}")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise SpecError(f"experiment kind must be one of {KINDS}, got {kind!r}")
        learners = _learner_specs(doc.get("learners") or _DEFAULT_LEARNERS[kind])
        cfg = cls(kind=kind, dataset=doc.get("dataset"), learners=learners,
                  repetitions=int(doc.get("repetitions", DEFAULT_REPS[kind])),
                  seed=int(doc.get("seed", 0)), sweep=doc.get("sweep"),
                  test_fraction=float(doc.get("test_fraction", 0.1)),
                  noise=float(doc.get("noise", 0.5 if kind == "noise_pruning" else 0.0)),
                  generator=dict(doc.get("generator") or {}),
                  name=str(doc.get("name", kind)))
        cfg.validate()
        return cfg

    def validate(self):
        if self.repetitions < 1:
            raise SpecError("repetitions must be >= 1")
        if self.sweep is not None:
            vals = list(self.sweep)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise SpecError("sweep values must be strictly increasing")
        if self.kind != "redundant_table" and not self.learners:
            raise SpecError("at least one learner is required")


def load_experiments(path) -> list[ExperimentConfig]:
    """Read a JSON or YAML file holding one experiment or ``{"experiments": [...]}``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if str(path).endswith((".yaml", ".yml")):
            import yaml
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise SpecError(f"cannot parse config {path}: {exc}") from None
    items = doc["experiments"] if isinstance(doc, dict) and "experiments" in doc else [doc]
    return [ExperimentConfig.from_dict(item) for item in items]


def resolve_dataset(spec) -> LabeledDataset:
    if spec is None:
        raise SpecError("this experiment needs a dataset")
    if isinstance(spec, str):
        spec = {"builtin": spec} if not spec.endswith(".csv") else {"path": spec}
    if "builtin" in spec:
        return load_builtin(spec["builtin"])
    if "path" in spec:
        return load_csv(spec["path"])
    if "blobs" in spec:
        b = spec["blobs"]
        return gen_blobs(int(b.get("samples", 2000)), int(b.get("features", 3)),
                         int(b.get("classes", 3)), float(b.get("stddev", 1.0)),
                         int(b.get("seed", 0)))
    raise SpecError(f"unrecognised dataset description {spec!r}")


# -- results ------------------------------------------------------------------

@dataclass
class ExperimentResult:
    name: str
    kind: str
    stats: list[StatRow] = field(default_factory=list)
    curves: list[StatRow] = field(default_factory=list)
    table: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    timings: list[StatRow] = field(default_factory=list)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def stats_to_csv(rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(STAT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in STAT_COLUMNS])
    return out.getvalue()


def read_stats_csv(path) -> list[StatRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != STAT_COLUMNS:
            raise DataError(f"{path}: unexpected columns {reader.fieldnames}")
        return [StatRow(r["experiment"], r["learner_id"], float(r["sweep_value"]), r["metric"],
                        float(r["mean"]), float(r["std"]), float(r["ci95"]), int(r["count"]))
                for r in reader]


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def emit_results(rows, path, fmt: str = "csv"):
    """Write stat rows as CSV or as a JSON list of objects."""
    rows = list(rows)
    if fmt == "csv":
        _write(path, stats_to_csv(rows))
    elif fmt == "json":
        _write(path, json.dumps([asdict(r) for r in rows], indent=1) + "\n")
    else:
        raise SpecError(f"unknown output format {fmt!r}")


def write_result(result: ExperimentResult, outdir) -> list[Path]:
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {outdir}: {exc.strerror}") from None
    base = outdir / result.name
    written = []
    if result.kind != "redundant_table":
        emit_results(result.stats, f"{base}.csv", "csv")
        emit_results(result.stats, f"{base}.json", "json")
        written += [Path(f"{base}.csv"), Path(f"{base}.json")]
    if result.curves:
        emit_results(result.curves, f"{base}_curves.csv", "csv")
        written.append(Path(f"{base}_curves.csv"))
    if result.table:
        out = io.StringIO()
        cols = list(result.table[0])
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        for row in result.table:
            w.writerow([_fmt(row[c]) for c in cols])
        _write(f"{base}.csv", out.getvalue())
        written.append(Path(f"{base}.csv"))
    if result.timings:
        emit_results(result.timings, f"{base}_timings.csv", "csv")
        written.append(Path(f"{base}_timings.csv"))
    _write(f"{base}_meta.json", json.dumps(result.meta, indent=1, sort_keys=True) + "\n")
    written.append(Path(f"{base}_meta.json"))
    return written


# -- jobs (top level so they can be shipped to worker processes) ----------------

def _map(fn, jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _accuracy(t, d, rows, labels=None) -> float:
    if len(rows) == 0:
        return float("nan")
    labels = d.labels if labels is None else labels
    return float(np.mean(predict_many(t, d.features[rows]) == labels[rows]))


def _accuracy_job(job):
    d, learners, test_fraction, train_size, seed = job
    train, test = split_train_test(d, SplitSpec(test_fraction, train_size, seed))
    out = {}
    for spec in learners:
        t0 = time.perf_counter()
        t, _ = fit(d, train, spec.config)
        out[spec.id] = {"test_accuracy": _accuracy(t, d, test),
                        "train_accuracy": _accuracy(t, d, train),
                        "tree_size": size(t),
                        "redundant_splits": len(detect_redundant_splits(t)),
                        "wall_time": time.perf_counter() - t0}
    return out


def _size_job(job):
    target, gen, learners, seed_parts = job
    attempts = discards = 0
    while True:
        if attempts >= DISCARD_WINDOW and discards / attempts > DISCARD_LIMIT:
            raise DiscardRateError(
                f"target size {target}: {discards} of {attempts} generated trees were not "
                f"minimal for their sample; increase samples or lower the target size")
        seed = stable_seed(*seed_parts, attempts)
        attempts += 1
        original, d = gen_random_tree(RandomTreeSpec(target, int(gen.get("features", 6)),
                                                     int(gen.get("classes", 4)),
                                                     int(gen.get("samples", 500)), seed))
        out = {}
        smaller = False
        for spec in learners:
            t0 = time.perf_counter()
            t, _ = fit(d, None, spec.config)
            consistent = _accuracy(t, d, d.all_rows()) == 1.0
            smaller |= consistent and size(t) < target
            out[spec.id] = {"tree_size": size(t), "train_accuracy": _accuracy(t, d, d.all_rows()),
                            "size_ratio": size(t) / target,
                            "redundant_splits": len(detect_redundant_splits(t)),
                            "wall_time": time.perf_counter() - t0}
        if smaller:
            discards += 1
            continue
        return out, attempts, discards


def _curve_job(job):
    d, learners, test_fraction, noise, seed = job
    train, test = split_train_test(d, SplitSpec(test_fraction, None, seed))
    noisy = inject_label_noise(d, noise, stable_seed(seed, "noise"), rows=train) if noise else d
    out = {}
    for spec in learners:
        t0 = time.perf_counter()
        cfg = spec.config if spec.config.record_trace else \
            LearnerConfig.from_dict(dict(spec.config.to_dict(), record_trace=True))
        t, trace = fit(noisy, train, cfg)
        elapsed = time.perf_counter() - t0
        test_curve = [_accuracy(tt, d, test) for tt in replay(trace)]
        train_curve = [trace.initial_train_accuracy] + [s.train_accuracy for s in trace.steps]
        out[spec.id] = {"test": test_curve, "train": train_curve, "size": size(t),
                        "redundant_splits": len(detect_redundant_splits(t)),
                        "policies": [s.policy for s in trace.steps], "wall_time": elapsed,
                        "glocal_global_ok": all(s.distance_after < s.distance_before
                                                for s in trace.steps if s.policy == "global")}
    return out


# -- experiments ----------------------------------------------------------------

def default_train_sizes(available: int, points: int = 6, smallest: int = 10) -> list[int]:
    lo = min(smallest, available)
    vals = np.unique(np.round(np.geomspace(lo, available, points)).astype(int))
    return [int(v) for v in vals]


def _metric_rows(kind, sweep_value, learners, samples, metrics):
    rows = []
    for spec in learners:
        for metric in metrics:
            vals = [s[spec.id][metric] for s in samples]
            rows.append(stat_row(kind, spec.id, sweep_value, metric, vals))
    return rows


def run_accuracy_vs_trainsize(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    d = resolve_dataset(cfg.dataset)
    n_test = int(math.floor(cfg.test_fraction * d.n))
    available = d.n - n_test
    sweep = list(cfg.sweep) if cfg.sweep is not None else default_train_sizes(available)
    if max(sweep) > available:
        raise SpecError(f"train size {max(sweep)} exceeds the {available} rows left after "
                        f"holding out {n_test} test rows")
    res = ExperimentResult(cfg.name, cfg.kind,
                           meta={"kind": cfg.kind, "sweep": sweep, "n": d.n, "m": d.m, "k": d.k,
                                 "test_rows": n_test, "repetitions": cfg.repetitions,
                                 "seed": cfg.seed,
                                 "learners": {s.id: s.config.to_dict() for s in cfg.learners}})
    metrics = ("test_accuracy", "train_accuracy", "tree_size", "redundant_splits")
    for v in sweep:
        jobs = [(d, cfg.learners, cfg.test_fraction, int(v),
                 stable_seed(cfg.seed, cfg.kind, v, r)) for r in range(cfg.repetitions)]
        samples = _map(_accuracy_job, jobs, workers)
        res.stats += _metric_rows(cfg.kind, v, cfg.learners, samples, metrics)
        if cfg.record_time:
            res.timings += _metric_rows(cfg.kind, v, cfg.learners, samples, ("wall_time",))
    return res


def run_size_vs_minimal(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    gen = {"features": 6, "classes": 4, "samples": 500, **cfg.generator}
    sweep = list(cfg.sweep) if cfg.sweep is not None else [3, 5, 7, 9, 11, 13]
    res = ExperimentResult(cfg.name, cfg.kind,
                           meta={"kind": cfg.kind, "sweep": sweep, "generator": gen,
                                 "repetitions": cfg.repetitions, "seed": cfg.seed,
                                 "learners": {s.id: s.config.to_dict() for s in cfg.learners},
                                 "discards": {}})
    metrics = ("tree_size", "size_ratio", "train_accuracy", "redundant_splits")
    for v in sweep:
        jobs = [(int(v), gen, cfg.learners, (cfg.seed, cfg.kind, v, r))
                for r in range(cfg.repetitions)]
        outcomes = _map(_size_job, jobs, workers)
        samples = [o[0] for o in outcomes]
        attempts = sum(o[1] for o in outcomes)
        discards = sum(o[2] for o in outcomes)
        if attempts >= DISCARD_WINDOW and discards / attempts > DISCARD_LIMIT:
            raise DiscardRateError(f"target size {v}: discard rate {discards}/{attempts}")
        res.meta["discards"][str(v)] = {"attempts": attempts, "discarded": discards}
        res.stats += _metric_rows(cfg.kind, v, cfg.learners, samples, metrics)
        res.stats.append(stat_row(cfg.kind, "original", v, "tree_size", [v] * len(samples)))
        res.stats.append(stat_row(cfg.kind, "all", v, "discard_rate", [discards / attempts]))
        if cfg.record_time:
            res.timings += _metric_rows(cfg.kind, v, cfg.learners, samples, ("wall_time",))
    return res


def _pad(curve, length):
    return list(curve) + [curve[-1]] * (length - len(curve))


def _run_curves(cfg: ExperimentConfig, noise: float, workers: int) -> ExperimentResult:
    d = resolve_dataset(cfg.dataset)
    res = ExperimentResult(cfg.name, cfg.kind,
                           meta={"kind": cfg.kind, "noise": noise, "n": d.n, "m": d.m, "k": d.k,
                                 "test_fraction": cfg.test_fraction,
                                 "repetitions": cfg.repetitions, "seed": cfg.seed,
                                 "learners": {s.id: s.config.to_dict() for s in cfg.learners}})
    jobs = [(d, cfg.learners, cfg.test_fraction, noise, stable_seed(cfg.seed, cfg.kind, noise, r))
            for r in range(cfg.repetitions)]
    samples = _map(_curve_job, jobs, workers)
    glocal_ok = {}
    for spec in cfg.learners:
        runs = [s[spec.id] for s in samples]
        length = max(len(r["test"]) for r in runs)
        test = np.array([_pad(r["test"], length) for r in runs])
        train = np.array([_pad(r["train"], length) for r in runs])
        steps_done = np.array([len(r["test"]) - 1 for r in runs])
        for step in range(length):
            res.curves.append(stat_row(cfg.kind, spec.id, step, "train_accuracy", train[:, step]))
            res.curves.append(stat_row(cfg.kind, spec.id, step, "test_accuracy", test[:, step]))
            res.curves.append(stat_row(cfg.kind, spec.id, step, "unfinished_fraction",
                                       (steps_done > step).astype(float)))
        res.stats.append(stat_row(cfg.kind, spec.id, noise, "test_accuracy", test[:, -1]))
        res.stats.append(stat_row(cfg.kind, spec.id, noise, "train_accuracy", train[:, -1]))
        res.stats.append(stat_row(cfg.kind, spec.id, noise, "tree_size", [r["size"] for r in runs]))
        res.stats.append(stat_row(cfg.kind, spec.id, noise, "redundant_splits",
                                  [r["redundant_splits"] for r in runs]))
        res.stats.append(stat_row(cfg.kind, spec.id, noise, "peak_test_accuracy",
                                  [float(test.mean(axis=0).max())]))
        if spec.config.mode == "glocal":
            res.stats.append(stat_row(cfg.kind, spec.id, noise, "global_step_fraction",
                                      [np.mean([p == "global" for p in r["policies"]])
                                       if r["policies"] else 0.0 for r in runs]))
            glocal_ok[spec.id] = all(r["glocal_global_ok"] for r in runs)
        if cfg.record_time:
            res.timings.append(stat_row(cfg.kind, spec.id, noise, "wall_time",
                                        [r["wall_time"] for r in runs]))
    if glocal_ok:
        res.meta["glocal_global_steps_decrease"] = glocal_ok
    return res


def run_noise_pruning(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _run_curves(cfg, cfg.noise, workers)


def run_glocal_compare(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if not any(s.config.mode == "glocal" for s in cfg.learners):
        raise SpecError("glocal_compare needs at least one learner with mode=glocal")
    res = _run_curves(cfg, cfg.noise, workers)
    finals = {r.learner_id: r.mean for r in res.stats if r.metric == "test_accuracy"}
    res.meta["final_test_accuracy"] = finals
    return res


# -- redundant split table ------------------------------------------------------

def line_dataset() -> LabeledDataset:
    """Seven points at 0.5 .. 6.5 on one feature; only the fourth is blue (class 1)."""
    X = (np.arange(7) + 0.5).reshape(-1, 1)
    y = np.array([0, 0, 0, 1, 0, 0, 0])
    return LabeledDataset(X, y, 2, ("x1",), ("red", "blue"))


def grid_dataset() -> LabeledDataset:
    """7 x 7 grid at (i - 0.5, j - 0.5) with an L-shaped blue region."""
    pts, ys = [], []
    for i in range(1, 8):
        for j in range(1, 8):
            blue = (i == 4 and j == 1) or (i > 4 and j > 1) or (i > 3 and j > 4)
            pts.append((i - 0.5, j - 0.5))
            ys.append(int(blue))
    return LabeledDataset(np.array(pts), np.array(ys), 2, ("x1", "x2"), ("red", "blue"))


#: Efficient (True) / redundant (False) first splits reported for each measure.
PAPER_TABLE = {
    ("gain", "L"): True, ("gain-ratio", "L"): True, ("nvi", "L"): True, ("gini", "L"): True,
    ("jaccard", "L"): False, ("accuracy", "L"): False,
    **{(m.value, "G"): False for m in TABLE_MEASURES},
}

EFFICIENT_THRESHOLDS = (3.0, 4.0)


def run_redundant_table(cfg: ExperimentConfig | None = None, workers: int = 1) -> ExperimentResult:
    name = cfg.name if cfg else "redundant_table"
    res = ExperimentResult(name, "redundant_table", meta={"kind": "redundant_table"})
    line, grid = line_dataset(), grid_dataset()
    for m in TABLE_MEASURES:
        t, trace = fit(line, None, LearnerConfig(measure=m, mode="local"))
        thr = trace.steps[0].threshold
        efficient = thr in EFFICIENT_THRESHOLDS
        res.table.append({"measure": m.value, "setting": "L",
                          "verdict": "efficient" if efficient else "redundant",
                          "expected": "efficient" if PAPER_TABLE[(m.value, "L")] else "redundant",
                          "match": efficient == PAPER_TABLE[(m.value, "L")],
                          "detail": f"first threshold {thr:g}"})
    for m in TABLE_MEASURES:
        t, _ = fit(grid, None, LearnerConfig(measure=m, mode="global"))
        found = detect_redundant_splits(t)
        efficient = not found
        res.table.append({"measure": m.value, "setting": "G",
                          "verdict": "efficient" if efficient else "redundant",
                          "expected": "efficient" if PAPER_TABLE[(m.value, "G")] else "redundant",
                          "match": efficient == PAPER_TABLE[(m.value, "G")],
                          "detail": f"{len(found)} redundant splits, size {size(t)}"})
    return res


RUNNERS = {
    "accuracy_vs_trainsize": run_accuracy_vs_trainsize,
    "size_vs_minimal": run_size_vs_minimal,
    "noise_pruning": run_noise_pruning,
    "glocal_compare": run_glocal_compare,
    "redundant_table": run_redundant_table,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg, workers=workers)


def run_config_file(path, outdir, reps: Optional[int] = None, workers: int = 1,
                    timings: bool = False) -> list[Path]:
    written = []
    for cfg in load_experiments(path):
        if reps is not None:
            if reps < 1:
                raise SpecError("--reps must be >= 1")
            cfg.repetitions = reps
        cfg.record_time = timings
        written += write_result(run_experiment(cfg, workers=workers), outdir)
    return written


def cpu_workers() -> int:
    return max(1, (os.cpu_count() or 1))
