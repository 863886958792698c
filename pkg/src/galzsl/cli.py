"""Command-line entry point: ``galzsl <command> ...``.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 invalid input
or shape, 4 malformed file, 5 invalid state, 6 numerical failure, 7 I/O
failure.
"""

import argparse
import os
from pathlib import Path
import sys

EXIT_USAGE = 2
EXIT_IO = 7
EXIT_UNEXPECTED = 1


def _global_flags(suppress):
    p = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="master seed (overrides config)")
    p.add_argument(
        "--deterministic",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="single worker and single-threaded BLAS",
    )
    p.add_argument("--workers", type=int, default=default, help="parallel sweep workers")
    return p


def _config_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    return p


def build_parser():
    glob = _global_flags(suppress=True)
    cfg = _config_flags()
    parser = argparse.ArgumentParser(prog="galzsl", description="Grouped adversarial zero-shot learning toolkit.", parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[glob], help="correlation-shift summary of a dataset split")
    p.add_argument("dataset")
    p.add_argument("--splits", help="alternative splits file")
    p.add_argument("--name", help="dataset label in the CSV (default: directory name)")
    p.add_argument("--matrix", help="also write the full shift matrix as CSV")

    p = sub.add_parser("group", parents=[glob], help="spectral co-clustering of attributes into groups")
    p.add_argument("dataset")
    p.add_argument("--n-groups", type=int, required=True)
    p.add_argument("--splits")
    p.add_argument("--out", help="grouping file (default: stdout)")

    p = sub.add_parser("cs-split", parents=[glob], help="greedy class split maximising correlation shift")
    p.add_argument("dataset")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-val", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--no-refine", action="store_true", help="skip the swap refinement pass")
    p.add_argument("--out", help="splits file (default: stdout)")

    p = sub.add_parser("audit", parents=[glob], help="shift statistics of one or more splits")
    p.add_argument("dataset")
    p.add_argument("--splits", action="append", default=[], help="extra splits files to audit")

    p = sub.add_parser("train", parents=[glob, cfg], help="train one gAL model")
    p.add_argument("dataset")
    p.add_argument("--splits")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--checkpoint", help="checkpoint path (default: <out>/model.galm)")
    p.add_argument("--no-svg", action="store_true")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("sweep", parents=[glob, cfg], help="grid search selected by validation accuracy")
    p.add_argument("dataset")
    p.add_argument("--splits")
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...", help="one sweep axis")
    p.add_argument("--common-seed", action="store_true", help="train every point with the master seed")
    p.add_argument("--out", required=True)
    p.add_argument("--no-svg", action="store_true")

    p = sub.add_parser("eval", parents=[glob], help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--splits")
    p.add_argument("--which", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("synth", parents=[glob, cfg], help="two-label synthetic correlation-shift experiment")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true", help="also write an accuracy-vs-correlation chart")

    p = sub.add_parser("fixture", parents=[glob], help="write a small constructed dataset directory")
    p.add_argument("kind", choices=("shift", "separable"))
    p.add_argument("out")
    return parser


# ------------------------------------------------------------------ helpers


def _overrides(items):
    from .config import parse_pairs

    return parse_pairs(items, source="--set")


def _settings(args):
    from .config import read_config

    pairs = read_config(args.config) if getattr(args, "config", None) else {}
    pairs.update(_overrides(getattr(args, "set", [])))
    return pairs


def _load(args):
    from .data import load_dataset

    return load_dataset(args.dataset, splits_file=getattr(args, "splits", None))


def _seed(args, fallback=0):
    return fallback if args.seed is None else args.seed


def _workers(args):
    if args.deterministic:
        return 1
    return max(1, args.workers or 1)


def _gal_config(args, dataset, allow_extra=False):
    from .config import coerce_config, split_harness_keys
    from .model import GalConfig

    values = coerce_config(_settings(args), allow_extra=allow_extra)
    cfg_kw, extra = split_harness_keys(values)
    cfg_kw.setdefault("input_dim", dataset.features.shape[1])
    if args.seed is not None:
        cfg_kw["seed"] = args.seed
    return GalConfig(**cfg_kw), extra


def _parse_grid(items):
    from .config import coerce_config

    space = {}
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not values.strip():
            raise _usage(f"--grid expects KEY=V1,V2,...; got {item!r}")
        raw = [v.strip() for v in values.split(",") if v.strip()]
        converted = [coerce_config({key.strip(): v}, allow_extra=True) for v in raw]
        names = {next(iter(c)) for c in converted}
        if len(names) != 1:
            raise _usage(f"--grid axis {key!r} expands to several config fields")
        name = names.pop()
        space[name] = [c[name] for c in converted]
    return space


class _UsageError(Exception):
    pass


def _usage(msg):
    return _UsageError(msg)


def _print_csv(header, rows):
    from .harness import csv_text

    sys.stdout.write(csv_text(header, rows))


# ----------------------------------------------------------------- commands


def cmd_analyze(args):
    from .harness import csv_text, dataset_shift
    from .shift import summarize

    ds = _load(args)
    delta = dataset_shift(ds)
    stats = summarize(delta)
    name = args.name or Path(args.dataset).resolve().name
    _print_csv(("dataset", "mean", "mean_at_top_50pct"), [(name, stats["mean"], stats["mean_at_top_50pct"])])
    if args.matrix:
        header = [f"attr_{k}" for k in range(delta.shape[1])]
        Path(args.matrix).write_text(csv_text(header, delta.tolist()))
    return 0


def cmd_group(args):
    from .grouping import format_grouping, group_by_shift
    from .harness import dataset_shift

    ds = _load(args)
    grouping = group_by_shift(dataset_shift(ds), args.n_groups, seed=_seed(args))
    text = format_grouping(grouping)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cs_split(args):
    from .data import cs_split_greedy, format_splits, load_dataset

    ds = load_dataset(args.dataset)
    sizes = [args.n_train, args.n_val, args.n_test]
    current = [len(ds.split.train_classes), len(ds.split.val_classes), len(ds.split.test_classes)]
    n_train, n_val, n_test = (c if s is None else s for s, c in zip(sizes, current))
    split = cs_split_greedy(ds.attributes, n_train, n_val, n_test, seed=_seed(args), refine=not args.no_refine)
    text = format_splits(split)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_audit(args):
    from .data import load_dataset, read_splits, split_audit

    ds = load_dataset(args.dataset)
    entries = [("splits.txt", ds.split)] + [(Path(p).name, read_splits(p)) for p in args.splits]
    rows = []
    for label, split in entries:
        split.validate(ds.n_classes)
        a = split_audit(ds, split)
        n = a["instances"]
        rows.append((label, a["mean"], a["mean_at_top_50pct"], n["train"], n["val"], n["test"]))
    _print_csv(("split", "mean", "mean_at_top_50pct", "train_instances", "val_instances", "test_instances"), rows)
    return 0


def cmd_train(args):
    from .harness import prepare_grouping, report_emit, train

    ds = _load(args)
    config, extra = _gal_config(args, ds, allow_extra=True)
    grouping, gshift, _ = prepare_grouping(
        ds,
        n_groups=extra.get("n_groups"),
        grouping=extra.get("grouping"),
        seed=extra.get("group_seed", config.seed),
    )
    out = Path(args.out)
    checkpoint = args.checkpoint or out / "model.galm"
    out.mkdir(parents=True, exist_ok=True)

    def log(row):
        if not args.quiet:
            print(f"epoch {row['epoch']:4d}  loss {row['train_loss']:.5f}  val {row['val_accuracy']:.4f}", file=sys.stderr)

    report, _ = train(ds, grouping, gshift, config, checkpoint=checkpoint, log=log)
    report_emit(report, out, svg=not args.no_svg)
    print(f"best_epoch={report.best_epoch} val={report.best_val_accuracy:.4f} test={report.test_accuracy:.4f}")
    return 0


def cmd_sweep(args):
    from .harness import sweep, sweep_emit

    ds = _load(args)
    config, extra = _gal_config(args, ds, allow_extra=True)
    space = _parse_grid(args.grid)
    result = sweep(ds, space, config, workers=_workers(args), extra_defaults=extra or None, common_seed=args.common_seed)
    sweep_emit(result, args.out, svg=not args.no_svg)
    best = ", ".join(f"{k}={v}" for k, v in sorted(result.best_point.items()))
    r = result.best_report
    print(f"best: {best or '(single point)'} val={r.best_val_accuracy:.4f} test={r.test_accuracy:.4f}")
    return 0


def cmd_eval(args):
    from .harness import evaluate
    from .model import load_checkpoint

    net = load_checkpoint(args.checkpoint)
    ds = _load(args)
    acc, per_class = evaluate(net, ds, args.which)
    print(f"{args.which}_accuracy={acc!r}")
    for c, a in sorted(per_class.items()):
        print(f"class {c}: {a!r}")
    return 0


def _synth_config(args):
    from dataclasses import fields

    from .config import _convert
    from .synth import SynthConfig

    types = {f.name: f.type for f in fields(SynthConfig)}
    kw = {}
    for key, value in _settings(args).items():
        if key not in types:
            raise _usage(f"unknown synth config key {key!r}")
        if key in ("test_rhos", "lambdas"):
            kw[key] = tuple(float(v) for v in value.split(",") if v.strip())
        else:
            kw[key] = _convert(key, value, types[key])
    if args.seed is not None:
        kw["seed"] = args.seed
    return SynthConfig(**kw)


def cmd_synth(args):
    from .harness import _write, csv_text, line_chart_svg
    from .synth import run_two_label_suite

    config = _synth_config(args)
    result = run_two_label_suite(config)
    out = Path(args.out)

    def label(model, lam):
        return model if lam is None else f"{model}-{lam:g}"

    _write(out / "synth_accuracy.csv", csv_text(("model", "lambda", "test_rho", "accuracy"), result["accuracy"]))
    _write(
        out / "synth_weights.csv",
        csv_text(("model", "feature_index", "weight"), [(label(m, lam), k, w) for m, lam, k, w in result["weights"]]),
    )
    if args.svg:
        series = {}
        for m, lam, rho, acc in result["accuracy"]:
            xs, ys = series.setdefault(label(m, lam), ([], []))
            xs.append(rho)
            ys.append(acc)
        chart = line_chart_svg(series, title="accuracy vs test correlation", xlabel="test correlation", ylabel="accuracy")
        _write(out / "synth_accuracy.svg", chart)
    print(f"bayes_accuracy={result['bayes']:.4f}")
    return 0


def cmd_fixture(args):
    from .data import write_dataset
    from .fixtures import make_separable_fixture, make_shift_fixture

    seed = _seed(args)
    ds = make_shift_fixture(seed) if args.kind == "shift" else make_separable_fixture(seed)
    write_dataset(args.out, ds)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "group": cmd_group,
    "cs-split": cmd_cs_split,
    "audit": cmd_audit,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "fixture": cmd_fixture,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.deterministic:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
    from .errors import GalError

    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"galzsl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GalError as exc:
        print(f"galzsl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"galzsl: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
