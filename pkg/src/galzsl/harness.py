"""Training loop with validation-based selection, grid sweeps and report emission."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import itertools
import math
from pathlib import Path
import time
from xml.sax.saxutils import escape

import numpy as np

from .data import binarize_attributes
from .errors import DimensionError, InputError
from .grouping import Grouping, group_by_shift, load_grouping
from .model import GalConfig, build, make_batch, predict_class, save_checkpoint, training_step
from .shift import group_delta, shift_matrices


def per_class_top1(predictions, labels, class_set=None):
    """Mean over classes of per-class accuracy; classes with no instances are skipped."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InputError("empty evaluation set")
    if predictions.shape != labels.shape:
        raise InputError("predictions and labels differ in length")
    classes = np.unique(labels) if class_set is None else np.asarray(sorted(class_set))
    if class_set is not None and not np.isin(labels, classes).all():
        raise InputError("a label is outside the evaluated class set")
    accs = [np.mean(predictions[labels == c] == c) for c in classes if np.any(labels == c)]
    return float(np.mean(accs))


def per_class_accuracies(predictions, labels):
    return {int(c): float(np.mean(predictions[labels == c] == c)) for c in np.unique(labels)}


@dataclass
class TrainReport:
    config: dict
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = float("nan")
    test_accuracy: float = float("nan")
    per_class: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    extra: dict = field(default_factory=dict)

    def comparable(self):
        """Everything except wall-clock time, for determinism checks."""
        return (self.config, self.epochs, self.best_epoch, self.best_val_accuracy, self.test_accuracy, self.per_class, self.extra)


# ---------------------------------------------------------------- grouping


def dataset_shift(dataset):
    bits = binarize_attributes(dataset.attributes).astype(np.float64)
    _, _, delta = shift_matrices(bits, dataset.labels, dataset.split.train_classes, dataset.split.test_classes)
    return delta


def prepare_grouping(dataset, n_groups=None, grouping=None, seed=0, delta=None):
    """Grouping plus group-level shift weights for a dataset and its split.

    ``grouping`` may be a :class:`Grouping` or the path of a grouping file;
    otherwise ``n_groups > 1`` clusters the attributes and anything else
    gives a single group.
    """
    delta = dataset_shift(dataset) if delta is None else delta
    D = dataset.n_attributes
    if isinstance(grouping, Grouping):
        if grouping.n_attributes != D:
            raise InputError(f"grouping covers {grouping.n_attributes} attributes, dataset has {D}")
    elif grouping:
        grouping = load_grouping(grouping, D)
    elif n_groups and n_groups > 1:
        grouping = group_by_shift(delta, int(n_groups), seed=seed)
    else:
        grouping = Grouping.single(D)
    return grouping, group_delta(delta, grouping), delta


# ---------------------------------------------------------------- training


def _eval(net, X, y, attributes, classes):
    pred = predict_class(net, X, attributes, classes)
    return per_class_top1(pred, y, classes), pred


def train(dataset, grouping, group_shift, config, checkpoint=None, log=None):
    """Shuffled mini-batch training; keeps the best-validation network.

    Returns ``(report, best_net)``. Test data is touched once, after
    training, with the selected network.
    """
    t0 = time.perf_counter()
    attrs = dataset.attributes
    bits = binarize_attributes(attrs)
    split = dataset.split
    seen = np.asarray(split.train_classes, dtype=np.int64)
    seen_attrs = attrs[seen]
    Xtr, ytr = dataset.subset(seen)
    Xva, yva = dataset.subset(split.val_classes)
    Xte, yte = dataset.subset(split.test_classes)
    if len(ytr) == 0 or len(yva) == 0:
        raise InputError("training and validation sets must be non-empty")
    if config.input_dim != Xtr.shape[1]:
        raise DimensionError(f"config input_dim = {config.input_dim} but features have d = {Xtr.shape[1]}")
    net = build(config, grouping, group_shift)
    rng = np.random.default_rng([config.seed, 1])
    report = TrainReport(config=config.to_dict())
    best_net, best_val = net.copy(), -1.0
    if config.epochs == 0:
        best_val, _ = _eval(net, Xva, yva, attrs, split.val_classes)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(ytr))
        sums = np.zeros(3)
        steps = 0
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            m = training_step(net, make_batch(Xtr[idx], ytr[idx], bits), seen_attrs, seen, rng)
            sums += (m["objective"], m["zsl_loss"], sum(m["adv_loss"].values()))
            steps += 1
        val_acc, _ = _eval(net, Xva, yva, attrs, split.val_classes)
        row = {
            "epoch": epoch,
            "train_loss": sums[0] / steps,
            "zsl_loss": sums[1] / steps,
            "adv_loss": sums[2] / steps,
            "val_accuracy": val_acc,
        }
        report.epochs.append(row)
        if log is not None:
            log(row)
        if val_acc > best_val:
            best_val, best_net = val_acc, net.copy()
            report.best_epoch = epoch
    report.best_val_accuracy = float(best_val)
    if len(yte):
        report.test_accuracy, pred = _eval(best_net, Xte, yte, attrs, split.test_classes)
        report.per_class = per_class_accuracies(pred, yte)
    report.extra = {"n_groups": grouping.n_groups, "group_sizes": grouping.sizes().tolist()}
    report.wall_clock = time.perf_counter() - t0
    if checkpoint is not None:
        save_checkpoint(best_net, checkpoint)
    return report, best_net


def evaluate(net, dataset, which="test"):
    classes = getattr(dataset.split, f"{which}_classes")
    X, y = dataset.subset(classes)
    acc, pred = _eval(net, X, y, dataset.attributes, classes)
    return acc, per_class_accuracies(pred, y)


# ------------------------------------------------------------------ sweep


def expand_grid(space):
    """Cartesian product of ``{key: [values]}`` in sorted-key order."""
    if not space:
        return [{}]
    keys = sorted(space)
    for k in keys:
        if len(space[k]) == 0:
            raise InputError(f"sweep axis {k!r} is empty")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]


def _point_key(point):
    def text(v):
        return " ".join(map(str, v.assignment)) if isinstance(v, Grouping) else repr(v)

    return (point.get("adv_weight", 0.0), tuple(sorted((k, text(v)) for k, v in point.items())))


def _run_point(args):
    dataset, base, point, delta = args
    cfg_kw = {k: v for k, v in point.items() if k not in ("n_groups", "grouping", "group_seed")}
    config = base.with_(**cfg_kw)
    grouping, gshift, _ = prepare_grouping(
        dataset,
        n_groups=point.get("n_groups"),
        grouping=point.get("grouping"),
        seed=point.get("group_seed", config.seed),
        delta=delta,
    )
    report, _ = train(dataset, grouping, gshift, config)
    return report


@dataclass
class SweepResult:
    best_point: dict
    best_report: TrainReport
    points: list
    reports: list

    def rows(self):
        out = []
        for p, r in zip(self.points, self.reports):
            row = dict(p)
            row.setdefault("seed", r.config["seed"])
            row.update(
                best_epoch=r.best_epoch,
                val_accuracy=r.best_val_accuracy,
                test_accuracy=r.test_accuracy,
            )
            out.append(row)
        return out


def point_seed(master, index):
    """Seed of grid point ``index``, derived from the master seed."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0] & 0x7FFFFFFF)


def sweep(dataset, space, base_config, workers=1, extra_defaults=None, common_seed=False):
    """Train every grid point and select by validation accuracy.

    Each point trains with its own seed derived from ``base_config.seed`` and
    its grid index, unless the grid fixes ``seed`` itself or ``common_seed``
    is set (paired comparisons). Ties go to the lower adversarial weight,
    then to the lexicographically smaller configuration.
    """
    points = expand_grid(space)
    if extra_defaults:
        points = [{**extra_defaults, **p} for p in points]
    delta = dataset_shift(dataset)
    jobs = []
    for i, p in enumerate(points):
        base = base_config if common_seed or "seed" in p else base_config.with_(seed=point_seed(base_config.seed, i))
        jobs.append((dataset, base, p, delta))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_point, jobs))
    else:
        reports = [_run_point(j) for j in jobs]
    best = min(
        range(len(points)),
        key=lambda i: (-reports[i].best_val_accuracy, _point_key({**{"adv_weight": base_config.adv_weight}, **points[i]})),
    )
    return SweepResult(points[best], reports[best], points, reports)


# ---------------------------------------------------------------- emission


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Grouping):
        return " ".join(str(int(a)) for a in v.assignment)
    return str(v)


def report_text(report):
    lines = [f"config.{k} = {_fmt(v)}" for k, v in sorted(report.config.items())]
    lines += [f"extra.{k} = {_fmt(v)}" for k, v in sorted(report.extra.items())]
    lines += [
        f"epochs = {len(report.epochs)}",
        f"best_epoch = {report.best_epoch}",
        f"best_val_accuracy = {_fmt(report.best_val_accuracy)}",
        f"test_accuracy = {_fmt(report.test_accuracy)}",
        f"wall_clock_seconds = {report.wall_clock:.3f}",
    ]
    lines += [f"per_class.{c} = {_fmt(a)}" for c, a in sorted(report.per_class.items())]
    return "\n".join(lines) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else _fmt(v) for v in row])
    return buf.getvalue()


EPOCH_COLUMNS = ("epoch", "train_loss", "zsl_loss", "adv_loss", "val_accuracy")


def line_chart_svg(series, title="", xlabel="", ylabel="", width=640, height=400):
    """Minimal SVG line chart. ``series`` maps a label to ``(xs, ys)``."""
    pad_l, pad_r, pad_t, pad_b = 60, 150, 30, 45
    xs_all = [float(x) for xs, _ in series.values() for x in xs]
    ys_all = [float(y) for _, ys in series.values() for y in ys if math.isfinite(float(y))]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y0, y1 = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (float(x) - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + (1.0 - (float(y) - y0) / (y1 - y0)) * ph

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + ph}" x2="{pad_l + pw}" y2="{pad_t + ph}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + ph}" stroke="black"/>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{pad_t + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for v, anchor, x, y in ((x0, "start", pad_l, pad_t + ph + 15), (x1, "end", pad_l + pw, pad_t + ph + 15)):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3g}</text>')
    for v, y in ((y0, pad_t + ph), (y1, pad_t + 10)):
        out.append(f'<text x="{pad_l - 4}" y="{y:.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for k, (label, (xs, ys)) in enumerate(series.items()):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(float(y)))
        color = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = pad_t + 14 * k + 10
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly}" x2="{pad_l + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 34}" y="{ly + 4}" font-size="11">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def report_emit(report, out_dir, prefix="train", svg=True):
    """Write ``<prefix>_report.txt``, ``<prefix>_epochs.csv``, ``<prefix>_per_class.csv`` and optionally an SVG."""
    out_dir = Path(out_dir)
    written = [
        _write(out_dir / f"{prefix}_report.txt", report_text(report)),
        _write(
            out_dir / f"{prefix}_epochs.csv",
            csv_text(EPOCH_COLUMNS, [[row[c] for c in EPOCH_COLUMNS] for row in report.epochs]),
        ),
        _write(
            out_dir / f"{prefix}_per_class.csv",
            csv_text(("class", "accuracy"), sorted(report.per_class.items())),
        ),
    ]
    if svg:
        ep = [r["epoch"] for r in report.epochs]
        chart = line_chart_svg(
            {"val accuracy": (ep, [r["val_accuracy"] for r in report.epochs])},
            title="validation accuracy",
            xlabel="epoch",
            ylabel="class-averaged top-1",
        )
        written.append(_write(out_dir / f"{prefix}_val.svg", chart))
    return written


def sweep_emit(result, out_dir, svg=True):
    out_dir = Path(out_dir)
    rows = result.rows()
    header = sorted({k for r in rows for k in r}, key=lambda k: (k in ("best_epoch", "val_accuracy", "test_accuracy"), k))
    written = [_write(out_dir / "sweep_grid.csv", csv_text(header, [[r.get(k) for k in header] for r in rows]))]
    lam_rows = sorted(
        ((r.get("adv_weight"), r["val_accuracy"], r["test_accuracy"]) for r in rows if "adv_weight" in r),
        key=lambda t: t[0],
    )
    if lam_rows:
        written.append(_write(out_dir / "sweep_lambda.csv", csv_text(("lambda", "val_accuracy", "test_accuracy"), lam_rows)))
        if svg:
            xs = [t[0] for t in lam_rows]
            written.append(
                _write(
                    out_dir / "sweep_lambda.svg",
                    line_chart_svg(
                        {"val": (xs, [t[1] for t in lam_rows]), "test": (xs, [t[2] for t in lam_rows])},
                        title="accuracy vs adversarial weight",
                        xlabel="lambda",
                        ylabel="class-averaged top-1",
                    ),
                )
            )
    written += report_emit(result.best_report, out_dir, prefix="best", svg=svg)
    return written
