"""Attribute grouping: spectral co-clustering over a shift-derived affinity."""

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import FormatError, InputError


@dataclass(frozen=True, eq=False)
class Grouping:
    """Partition of attribute indices ``0..D-1`` into ``L`` non-empty groups."""

    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64).copy()
        if a.ndim != 1 or a.size == 0:
            raise InputError("assignment must be a non-empty 1-D array")
        if a.min() < 0:
            raise InputError("group ids must be non-negative")
        used = np.unique(a)
        if not np.array_equal(used, np.arange(used.size)):
            raise InputError(f"group ids must be 0..L-1 with no empty group, got {used.tolist()}")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n_groups(self):
        return int(self.assignment.max()) + 1

    @property
    def n_attributes(self):
        return int(self.assignment.size)

    def members(self, g):
        return np.flatnonzero(self.assignment == g)

    def groups(self):
        return [self.members(g) for g in range(self.n_groups)]

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.n_groups)

    def order(self):
        """Attribute indices in concatenated group order (group 0 first)."""
        return np.concatenate(self.groups())

    def __eq__(self, other):
        return isinstance(other, Grouping) and np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return hash(self.assignment.tobytes())

    @classmethod
    def from_groups(cls, groups, n_attributes=None):
        n = n_attributes if n_attributes is not None else sum(len(g) for g in groups)
        a = np.full(n, -1, dtype=np.int64)
        for gid, members in enumerate(groups):
            for m in members:
                if not 0 <= m < n:
                    raise InputError(f"attribute {m} out of range 0..{n - 1}")
                if a[m] >= 0:
                    raise InputError(f"attribute {m} assigned twice")
                a[m] = gid
        if (a < 0).any():
            raise InputError(f"attributes {np.flatnonzero(a < 0).tolist()} not assigned")
        return cls(a)

    @classmethod
    def single(cls, n_attributes):
        return cls(np.zeros(n_attributes, dtype=np.int64))


def canonical(labels):
    """Relabel so group ids appear in order of their first attribute."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, l in enumerate(labels):
        out[i] = mapping.setdefault(int(l), len(mapping))
    return out


def affinity_from_delta(delta, eps=1e-6):
    delta = np.asarray(delta, dtype=np.float64)
    dmax = float(delta.max()) if delta.size else 0.0
    A = (dmax - delta) + eps
    np.fill_diagonal(A, dmax + eps)
    return A


def _kmeans_pp(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    chosen = [first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest)) if rest.size else int(rng.integers(n))
        chosen.append(idx)
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(points, labels, dist, k):
    # move the point farthest from its centre into each empty cluster
    for j in range(k):
        if np.any(labels == j):
            continue
        counts = np.bincount(labels, minlength=k)
        movable = counts[labels] > 1
        cand = np.flatnonzero(movable)
        far = cand[np.argmax(dist[cand])]
        labels[far] = j
        dist[far] = 0.0
    return labels


def _lloyd(points, k, rng, max_iter):
    centers = _kmeans_pp(points, k, rng)
    labels = None
    for _ in range(max_iter):
        new, dist = _kernels.nearest_center(points, centers)
        new = _repair_empty(points, new.copy(), dist.copy(), k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, inertia


def kmeans(points, k, seed=0, max_iter=300, n_init=10):
    """Lloyd's algorithm from k-means++ starts; returns labels of the lowest-inertia run."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if not 1 <= k <= n:
        raise InputError(f"k must lie in 1..{n}, got {k}")
    if k == n:
        return np.arange(n, dtype=np.int64)
    best, best_inertia = None, np.inf
    for rng in (np.random.default_rng([seed, r]) for r in range(n_init)):
        labels, inertia = _lloyd(points, k, rng, max_iter)
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    return best


def spectral_cocluster(A, n_groups, seed=0):
    """Bipartite spectral co-clustering of a non-negative affinity matrix.

    Normalises ``A`` by row and column sums, embeds the rows with the
    ``ceil(log2 L)`` singular vectors following the leading one, and
    clusters the embedding with k-means.
    """
    A = np.asarray(A, dtype=np.float64)
    D = A.shape[0]
    if A.ndim != 2 or A.shape[1] != D:
        raise InputError(f"affinity must be square, got {A.shape}")
    if (A < 0).any():
        raise InputError("affinity must be non-negative")
    if not 1 <= n_groups <= D:
        raise InputError(f"number of groups must lie in 1..{D}, got {n_groups}")
    if n_groups == 1:
        return Grouping.single(D)
    if n_groups == D:
        return Grouping(np.arange(D))
    r1 = A.sum(axis=1)
    c1 = A.sum(axis=0)
    if (r1 <= 0).any() or (c1 <= 0).any():
        raise InputError("affinity has an all-zero row or column")
    dr = 1.0 / np.sqrt(r1)
    dc = 1.0 / np.sqrt(c1)
    An = dr[:, None] * A * dc[None, :]
    U, _, _ = np.linalg.svd(An)
    n_vec = math.ceil(math.log2(n_groups))
    emb = dr[:, None] * U[:, 1 : 1 + n_vec]
    labels = kmeans(emb, n_groups, seed=seed)
    return Grouping(canonical(labels))


def group_by_shift(delta, n_groups, seed=0):
    return spectral_cocluster(affinity_from_delta(delta), n_groups, seed=seed)


def load_grouping(path, n_attributes=None):
    """Read ``<group_id>: <attr> <attr> ...`` lines (``#`` starts a comment)."""
    path = Path(path)
    groups = {}
    seen = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise FormatError("expected '<group_id>: <attr> ...'", path=path, line=lineno)
        try:
            gid = int(head)
            members = [int(t) for t in body.split()]
        except ValueError:
            raise FormatError("non-integer token", path=path, line=lineno) from None
        if gid in groups:
            raise FormatError(f"group {gid} listed twice", path=path, line=lineno)
        if not members:
            raise FormatError(f"group {gid} is empty", path=path, line=lineno)
        for m in members:
            if m < 0 or (n_attributes is not None and m >= n_attributes):
                raise FormatError(f"attribute {m} out of range", path=path, line=lineno)
            if m in seen:
                raise FormatError(
                    f"attribute {m} already listed on line {seen[m]}", path=path, line=lineno
                )
            seen[m] = lineno
        groups[gid] = members
    if not groups:
        raise FormatError("no groups found", path=path)
    if sorted(groups) != list(range(len(groups))):
        raise FormatError(f"group ids must be 0..L-1, got {sorted(groups)}", path=path)
    n = n_attributes if n_attributes is not None else max(seen) + 1
    missing = sorted(set(range(n)) - set(seen))
    if missing:
        raise FormatError(f"attributes not assigned to any group: {missing}", path=path)
    return Grouping.from_groups([groups[g] for g in range(len(groups))], n)


def format_grouping(grouping):
    return "".join(
        f"{g}: {' '.join(str(int(m)) for m in grouping.members(g))}\n" for g in range(grouping.n_groups)
    )


def write_grouping(grouping, path):
    Path(path).write_text(format_grouping(grouping))
