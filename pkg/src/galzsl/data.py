"""Dataset directory I/O, attribute binarisation and correlation-shift splits.

Directory layout::

    features.bin     "GALF", u32 version, u64 N, u64 d, N*d float32 (little-endian)
    labels.txt       one 0-based class id per line
    attributes.csv   header attr_0,...,attr_{D-1}; one row of D reals per class
    splits.txt       train: ids / val: ids / test: ids
"""

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
import struct

import numpy as np

from .errors import FormatError, InputError
from .shift import corr_classes, corr_seen, corr_unseen, delta_corr_matrix, summarize

FEATURES_MAGIC = b"GALF"
FEATURES_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class SplitDef:
    train_classes: tuple
    val_classes: tuple
    test_classes: tuple

    def __post_init__(self):
        for name in ("train_classes", "val_classes", "test_classes"):
            object.__setattr__(self, name, tuple(sorted(int(c) for c in getattr(self, name))))
        tr, va, te = map(set, (self.train_classes, self.val_classes, self.test_classes))
        if tr & va or tr & te or va & te:
            raise InputError("split class sets overlap")

    def validate(self, n_classes, require_nonempty=True):
        for name in ("train_classes", "val_classes", "test_classes"):
            ids = getattr(self, name)
            if require_nonempty and not ids:
                raise InputError(f"{name} is empty")
            if ids and (ids[0] < 0 or ids[-1] >= n_classes):
                raise InputError(f"{name} contains ids outside 0..{n_classes - 1}")


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float32
    labels: np.ndarray  # (N,) int64
    attributes: np.ndarray  # (C, D) float64, raw
    split: SplitDef

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.attributes = np.asarray(self.attributes, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise InputError(
                f"features {self.features.shape} and labels ({self.labels.size}) disagree on N"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            bad = self.labels[(self.labels < 0) | (self.labels >= self.n_classes)][0]
            raise InputError(f"label {bad} out of range for C = {self.n_classes}")
        if not np.all(np.isfinite(self.attributes)):
            raise InputError("attribute matrix contains non-finite values")
        self.split.validate(self.n_classes)

    @property
    def n_classes(self):
        return self.attributes.shape[0]

    @property
    def n_attributes(self):
        return self.attributes.shape[1]

    @property
    def binary_attributes(self):
        return binarize_attributes(self.attributes)

    def subset(self, classes):
        mask = np.isin(self.labels, np.asarray(classes, dtype=np.int64))
        return self.features[mask].astype(np.float64), self.labels[mask]

    def with_split(self, split):
        return Dataset(self.features, self.labels, self.attributes, split)


def binarize_attributes(attrs):
    """1 where a value exceeds its attribute's mean over all classes; 0/1 input passes through."""
    attrs = np.asarray(attrs, dtype=np.float64)
    if np.all((attrs == 0.0) | (attrs == 1.0)):
        return attrs.astype(np.int8)
    return (attrs > attrs.mean(axis=0)).astype(np.int8)


# --------------------------------------------------------------------- I/O


def write_features(path, features):
    features = np.ascontiguousarray(features, dtype="<f4")
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURES_MAGIC, FEATURES_VERSION, n, d))
        fh.write(features.tobytes())


def read_features(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("file shorter than header", path=path, offset=len(data))
    magic, version, n, d = _HEADER.unpack_from(data)
    if magic != FEATURES_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FEATURES_MAGIC!r}", path=path, offset=0)
    if version != FEATURES_VERSION:
        raise FormatError(f"unsupported version {version}", path=path, offset=4)
    expected = _HEADER.size + 4 * n * d
    if len(data) != expected:
        what = "truncated" if len(data) < expected else "trailing bytes"
        raise FormatError(
            f"{what}: header declares {n}x{d} float32 ({expected} bytes total), file has {len(data)}",
            path=path,
            offset=min(len(data), expected),
        )
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, d).astype(np.float32)


def read_labels(path):
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise FormatError(f"not an integer class id: {line!r}", path=path, line=lineno) from None
    return np.asarray(out, dtype=np.int64)


def write_labels(path, labels):
    Path(path).write_text("".join(f"{int(l)}\n" for l in labels))


def read_attributes(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError("empty attribute file", path=path)
    header = lines[0].split(",")
    D = len(header)
    if header != [f"attr_{i}" for i in range(D)]:
        raise FormatError("header must be attr_0,...,attr_{D-1}", path=path, line=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != D:
            raise FormatError(f"expected {D} values, got {len(cells)}", path=path, line=lineno)
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise FormatError("non-numeric value", path=path, line=lineno) from None
    if not rows:
        raise FormatError("no class rows", path=path)
    return np.asarray(rows, dtype=np.float64)


def write_attributes(path, attrs):
    attrs = np.asarray(attrs, dtype=np.float64)
    header = ",".join(f"attr_{i}" for i in range(attrs.shape[1]))
    body = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in attrs)
    Path(path).write_text(header + "\n" + body)


def read_splits(path):
    found = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, body = line.partition(":")
        key = key.strip()
        if not sep or key not in ("train", "val", "test"):
            raise FormatError("expected 'train:', 'val:' or 'test:'", path=path, line=lineno)
        if key in found:
            raise FormatError(f"{key} listed twice", path=path, line=lineno)
        try:
            found[key] = [int(t) for t in body.split()]
        except ValueError:
            raise FormatError("non-integer class id", path=path, line=lineno) from None
    missing = {"train", "val", "test"} - set(found)
    if missing:
        raise FormatError(f"missing lines: {sorted(missing)}", path=path)
    return SplitDef(found["train"], found["val"], found["test"])


def format_splits(split):
    return "".join(
        f"{key}: {' '.join(str(c) for c in ids)}\n"
        for key, ids in (("train", split.train_classes), ("val", split.val_classes), ("test", split.test_classes))
    )


def write_splits(path, split):
    Path(path).write_text(format_splits(split))


def load_dataset(directory, splits_file=None):
    directory = Path(directory)
    for name in ("features.bin", "labels.txt", "attributes.csv", "splits.txt"):
        if name == "splits.txt" and splits_file is not None:
            continue
        if not (directory / name).is_file():
            raise FormatError(f"missing {name}", path=directory)
    features = read_features(directory / "features.bin")
    labels = read_labels(directory / "labels.txt")
    if labels.size != features.shape[0]:
        raise FormatError(
            f"labels.txt has {labels.size} entries, features.bin has N = {features.shape[0]}",
            path=directory / "labels.txt",
        )
    attrs = read_attributes(directory / "attributes.csv")
    if labels.size and labels.max() >= attrs.shape[0]:
        raise FormatError(
            f"label {labels.max()} out of range, attributes.csv has C = {attrs.shape[0]}",
            path=directory / "labels.txt",
        )
    if labels.size and labels.min() < 0:
        raise FormatError("negative label", path=directory / "labels.txt")
    split = read_splits(splits_file or directory / "splits.txt")
    return Dataset(features, labels, attrs, split)


def write_dataset(directory, dataset):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_features(directory / "features.bin", dataset.features)
    write_labels(directory / "labels.txt", dataset.labels)
    write_attributes(directory / "attributes.csv", dataset.attributes)
    write_splits(directory / "splits.txt", dataset.split)


# ------------------------------------------------------------ CS split


def split_shift(bits, train_side, test_side):
    """Mean upper-triangle shift between class-level correlations of two class sets."""
    rs = corr_classes(bits[list(train_side)]) if len(train_side) >= 2 else np.zeros((bits.shape[1],) * 2)
    ru = corr_classes(bits[list(test_side)]) if len(test_side) >= 2 else np.zeros((bits.shape[1],) * 2)
    return summarize(delta_corr_matrix(rs, ru))["mean"]


def _greedy_pick(bits, pool, fixed_rest, size, rng, refine, start=None):
    """Grow a set of ``size`` classes from ``pool`` maximising the shift against the rest."""
    chosen = [] if start is None else [start]
    pool = list(pool)

    def score(sel):
        sel_set = set(sel)
        other = [c for c in pool if c not in sel_set] + list(fixed_rest)
        return split_shift(bits, other, sel)

    while len(chosen) < size:
        order = [pool[i] for i in rng.permutation(len(pool))]
        best, best_v = None, -np.inf
        for c in order:
            if c in chosen:
                continue
            v = score(chosen + [c])
            if v > best_v:
                best, best_v = c, v
        chosen.append(best)
    if refine and 0 < size < len(pool):
        current = score(chosen)
        improved = True
        while improved:
            improved = False
            outside = [c for c in pool if c not in chosen]
            best_swap, best_v = None, current
            for a in chosen:
                for b in outside:
                    cand = [b if c == a else c for c in chosen]
                    v = score(cand)
                    if v > best_v + 1e-12:
                        best_swap, best_v = (a, b), v
            if best_swap is not None:
                a, b = best_swap
                chosen = [b if c == a else c for c in chosen]
                current = best_v
                improved = True
    return sorted(chosen)


def _multi_start_pick(bits, pool, fixed_rest, size, rng, refine, n_starts):
    """Best of a plain greedy run and runs seeded from ``n_starts`` different classes."""
    pool = list(pool)

    def score(sel):
        other = [c for c in pool if c not in set(sel)] + list(fixed_rest)
        return split_shift(bits, other, sel)

    best = _greedy_pick(bits, pool, fixed_rest, size, rng, refine)
    best_v = score(best)
    if size == 0 or n_starts <= 0:
        return best
    starts = pool if n_starts >= len(pool) else [pool[i] for i in np.sort(rng.choice(len(pool), n_starts, replace=False))]
    for c in starts:
        cand = _greedy_pick(bits, pool, fixed_rest, size, rng, refine, start=c)
        v = score(cand)
        if v > best_v + 1e-12:
            best, best_v = cand, v
    return best


def cs_split_greedy(attrs, n_train, n_val, n_test, seed=0, refine=True, n_starts=16):
    """Class split that greedily maximises mean correlation shift.

    Test classes are grown one at a time, each step adding the class that
    maximises the mean shift between the remaining classes and the test set.
    With ``refine`` a best-improvement swap pass follows. The search is
    repeated from ``n_starts`` forced first classes (every class when the
    pool is smaller) and the best result kept; ``n_starts=0`` gives the
    single greedy run. Validation classes are then grown the same way from
    what is left, against the training classes.
    """
    bits = binarize_attributes(attrs).astype(np.float64)
    C = bits.shape[0]
    if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test != C:
        raise InputError(f"split sizes {n_train}+{n_val}+{n_test} do not sum to C = {C}")
    if n_train < 1 or n_test < 1:
        raise InputError("need at least one train and one test class")
    rng = np.random.default_rng(seed)
    test = _multi_start_pick(bits, range(C), [], n_test, rng, refine, n_starts)
    rest = [c for c in range(C) if c not in set(test)]
    val = _multi_start_pick(bits, rest, [], n_val, rng, refine, n_starts) if n_val else []
    train = [c for c in rest if c not in set(val)]
    return SplitDef(train, val, test)


def exhaustive_best_shift(attrs, n_test):
    """Best mean shift over every choice of ``n_test`` test classes (toy sizes only)."""
    bits = binarize_attributes(attrs).astype(np.float64)
    C = bits.shape[0]
    best = -np.inf
    for test in combinations(range(C), n_test):
        rest = [c for c in range(C) if c not in test]
        best = max(best, split_shift(bits, rest, list(test)))
    return best


def random_split(C, n_train, n_val, n_test, rng):
    perm = rng.permutation(C)
    return SplitDef(perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])


def split_audit(dataset, split=None):
    split = split or dataset.split
    bits = dataset.binary_attributes.astype(np.float64)
    rs = corr_seen(bits, dataset.labels, split.train_classes)
    ru = corr_unseen(bits[list(split.test_classes)])
    stats = summarize(delta_corr_matrix(rs, ru))
    counts = {
        name: int(np.isin(dataset.labels, list(ids)).sum())
        for name, ids in (("train", split.train_classes), ("val", split.val_classes), ("test", split.test_classes))
    }
    return {"mean": stats["mean"], "mean_at_top_50pct": stats["mean_at_top_50pct"], "instances": counts}
