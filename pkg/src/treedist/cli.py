"""Command-line entry point: ``treedist <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 budget error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import bench
from .clustering import LabeledDataset
from .data import (RandomTreeSpec, gen_blobs, gen_random_tree, inject_label_noise, load_csv,
                   parse_csv, save_csv)
from .errors import BudgetError, DataError, SpecError
from .learner import LearnerConfig, fit
from .measures import Measure
from .tree import (detect_redundant_splits, dump_tree, load_tree, merge_redundant_splits,
                   n_features_used, predict_many, size)

EXIT_OK, EXIT_SPEC, EXIT_DATA, EXIT_BUDGET = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_SPEC)


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="treedist", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gsub = gen.add_subparsers(dest="generator", required=True, parser_class=_Parser)
    blobs = gsub.add_parser("blobs", help="isotropic Gaussian blobs")
    blobs.add_argument("--samples", type=_positive, required=True)
    blobs.add_argument("--features", type=_positive, required=True)
    blobs.add_argument("--classes", type=_positive, required=True)
    blobs.add_argument("--stddev", type=float, default=1.0)
    blobs.add_argument("--seed", type=int, default=0)
    blobs.add_argument("-o", "--output", required=True)
    tree = gsub.add_parser("tree", help="random tree plus a sample labeled by it")
    tree.add_argument("--size", type=_positive, required=True)
    tree.add_argument("--samples", type=int, required=True)
    tree.add_argument("--features", type=_positive, required=True)
    tree.add_argument("--classes", type=_positive, required=True)
    tree.add_argument("--seed", type=int, default=0)
    tree.add_argument("-o", "--output", required=True)
    tree.add_argument("--tree-out")

    noise = sub.add_parser("noise", help="resample a fraction of the labels")
    noise.add_argument("--data", required=True)
    noise.add_argument("--fraction", type=float, required=True)
    noise.add_argument("--seed", type=int, default=0)
    noise.add_argument("-o", "--output", required=True)

    train = sub.add_parser("train", help="grow a tree on a CSV dataset")
    train.add_argument("--data", required=True)
    train.add_argument("--measure", choices=[m.value for m in Measure], default="gini")
    train.add_argument("--mode", choices=["local", "global", "glocal"], default="local")
    train.add_argument("--global-labels", choices=["exhaustive", "majority"], default="majority")
    train.add_argument("--max-nodes", type=_positive)
    train.add_argument("--min-branch", type=_positive)
    train.add_argument("--stop-on-no-decay", action="store_true")
    train.add_argument("--oracle-budget", type=_positive, default=24)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("-o", "--output", required=True)
    train.add_argument("--trace")

    pred = sub.add_parser("predict", help="classify the rows of a CSV file")
    pred.add_argument("--tree", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("-o", "--output", required=True)

    simp = sub.add_parser("simplify", help="merge redundant splits")
    simp.add_argument("--tree", required=True)
    simp.add_argument("-o", "--output", required=True)

    b = sub.add_parser("bench", help="run experiments from a JSON/YAML config")
    b.add_argument("--config", required=True)
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--reps", type=_positive)
    b.add_argument("--workers", type=_positive, default=1)
    b.add_argument("--timings", action="store_true",
                   help="also write wall-time statistics (not reproducible)")
    return p


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def _save(d: LabeledDataset, path):
    try:
        save_csv(d, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def cmd_gen(args):
    if args.generator == "blobs":
        d = gen_blobs(args.samples, args.features, args.classes, args.stddev, args.seed)
        _save(d, args.output)
        print(f"wrote {d.n} rows to {args.output}")
        return
    t, d = gen_random_tree(RandomTreeSpec(args.size, args.features, args.classes,
                                          args.samples, args.seed))
    _save(d, args.output)
    if args.tree_out:
        try:
            dump_tree(t, args.tree_out, d.class_names, d.feature_names)
        except OSError as exc:
            raise DataError(f"cannot write {args.tree_out}: {exc.strerror}") from None
    print(f"wrote {d.n} rows to {args.output} (tree size {size(t)})")


def cmd_noise(args):
    d = load_csv(args.data)
    noisy = inject_label_noise(d, args.fraction, args.seed)
    _save(noisy, args.output)
    changed = int(np.sum(noisy.labels != d.labels))
    print(f"wrote {noisy.n} rows to {args.output} ({changed} labels changed)")


def cmd_train(args):
    d = load_csv(args.data)
    cfg = LearnerConfig(measure=args.measure, mode=args.mode,
                        global_label_rule=args.global_labels, max_nodes=args.max_nodes,
                        min_branch_instances=args.min_branch,
                        stop_on_no_decay=args.stop_on_no_decay,
                        oracle_budget=args.oracle_budget, seed=args.seed)
    t, trace = fit(d, None, cfg)
    try:
        dump_tree(t, args.output, d.class_names, d.feature_names)
    except OSError as exc:
        raise DataError(f"cannot write {args.output}: {exc.strerror}") from None
    if args.trace:
        doc = {"config": cfg.to_dict(), "learner_id": cfg.learner_id, **trace.to_dict()}
        _write_text(args.trace, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    acc = float(np.mean(predict_many(t, d.features) == d.labels)) if d.n else 1.0
    print(f"{cfg.learner_id}: size {size(t)}, train accuracy {acc:.4f}, "
          f"stopped: {trace.stop_reason}")


def _read_prediction_input(path, n_tree_features):
    """Rows to classify; the trailing label column is optional.

    A file with exactly ``n_tree_features`` columns is taken as unlabeled.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    header = next(csv.reader(io.StringIO(text)), None)
    if header is None:
        raise DataError(f"{path}: empty file")
    if n_tree_features is not None and len(header) == n_tree_features:
        padded = "".join(line + ",_\n" for line in text.splitlines() if line.strip())
        d = parse_csv(padded, str(path))
        return d.features, None
    d = parse_csv(text, str(path))
    return d.features, [d.class_names[i] for i in d.labels]


def cmd_predict(args):
    t, meta = load_tree(args.tree)
    feats = meta.get("features")
    X, truth = _read_prediction_input(args.data, len(feats) if feats else None)
    if X.shape[0] and X.shape[1] < n_features_used(t):
        raise DataError(f"{args.data}: tree uses {n_features_used(t)} features, "
                        f"file has {X.shape[1]}")
    pred = predict_many(t, X) if X.shape[0] else np.zeros(0, dtype=np.int64)
    classes = meta.get("classes")
    names = [classes[i] if classes and i < len(classes) else str(i) for i in pred]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["row", "prediction"] + (["label"] if truth is not None else []))
    for r, name in enumerate(names):
        w.writerow([r, name] + ([truth[r]] if truth is not None else []))
    _write_text(args.output, out.getvalue())
    msg = f"wrote {len(names)} predictions to {args.output}"
    if truth is not None and names:
        msg += f" (accuracy {np.mean([a == b for a, b in zip(names, truth)]):.4f})"
    print(msg)


def cmd_simplify(args):
    t, meta = load_tree(args.tree)
    found = len(detect_redundant_splits(t))
    merged = merge_redundant_splits(t)
    try:
        dump_tree(merged, args.output, meta.get("classes"), meta.get("features"))
    except OSError as exc:
        raise DataError(f"cannot write {args.output}: {exc.strerror}") from None
    print(f"size {size(t)} -> {size(merged)} ({found} redundant splits found)")


def cmd_bench(args):
    written = bench.run_config_file(args.config, args.output, reps=args.reps,
                                    workers=args.workers, timings=args.timings)
    for path in written:
        print(path)


COMMANDS = {"gen": cmd_gen, "noise": cmd_noise, "train": cmd_train, "predict": cmd_predict,
            "simplify": cmd_simplify, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
