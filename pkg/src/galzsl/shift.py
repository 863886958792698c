"""Attribute correlation shift between seen and unseen classes."""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError


@dataclass(frozen=True)
class CorrMatrix:
    values: np.ndarray
    source: str  # "seen-instances" | "unseen-classes"

    @property
    def n_attributes(self):
        return self.values.shape[0]


def pearson_binary(a, b):
    """Phi coefficient of two binary vectors; 0 when either is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"vectors must be 1-D of equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise InputError("need at least two samples for a correlation")
    return float(_kernels.weighted_phi(np.stack([a, b], axis=1), np.ones(a.size))[0, 1])


def _phi(bits, weights):
    bits = np.ascontiguousarray(bits, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _kernels.weighted_phi(bits, weights)


def corr_seen(binary_attributes, labels, train_classes):
    """Instance-weighted phi matrix over the labelled training set.

    Each training instance carries its class's binary attribute row, so this
    is the class-level correlation weighted by class frequency.
    """
    labels = np.asarray(labels)
    train_classes = np.asarray(sorted(set(int(c) for c in train_classes)), dtype=np.int64)
    mask = np.isin(labels, train_classes)
    if not mask.any():
        raise InputError("training set is empty")
    if labels[mask].max() >= binary_attributes.shape[0]:
        raise InputError("a training label has no attribute row")
    counts = np.bincount(labels[mask], minlength=binary_attributes.shape[0])
    present = np.flatnonzero(counts)
    return CorrMatrix(_phi(binary_attributes[present], counts[present]), "seen-instances")


def corr_classes(binary_rows):
    """Phi matrix treating every class row as one equally weighted sample."""
    binary_rows = np.asarray(binary_rows)
    return _phi(binary_rows, np.ones(binary_rows.shape[0]))


def corr_unseen(unseen_rows):
    unseen_rows = np.asarray(unseen_rows)
    if unseen_rows.ndim != 2 or unseen_rows.shape[0] < 2:
        raise InputError("need at least two unseen classes")
    return CorrMatrix(corr_classes(unseen_rows), "unseen-classes")


def delta_corr(rho_s, rho_u):
    """``max(sgn(rho_s) * (rho_s - rho_u), 0)`` for a single attribute pair."""
    if rho_s == 0:
        return 0.0
    return max(math.copysign(1.0, rho_s) * (rho_s - rho_u), 0.0)


def delta_corr_matrix(seen, unseen):
    rs = seen.values if isinstance(seen, CorrMatrix) else np.asarray(seen, dtype=np.float64)
    ru = unseen.values if isinstance(unseen, CorrMatrix) else np.asarray(unseen, dtype=np.float64)
    if rs.shape != ru.shape or rs.ndim != 2 or rs.shape[0] != rs.shape[1]:
        raise DimensionError(f"correlation matrices differ in shape: {rs.shape} vs {ru.shape}")
    return _kernels.delta_corr_matrix(np.ascontiguousarray(rs), np.ascontiguousarray(ru))


def summarize(delta):
    """Mean of the upper triangle and mean of its largest ceil(half)."""
    delta = np.asarray(delta, dtype=np.float64)
    d = delta.shape[0]
    if d < 2:
        raise InputError("need at least two attributes")
    upper = delta[np.triu_indices(d, k=1)]
    k = math.ceil(upper.size / 2)
    top = np.sort(upper)[::-1][:k]
    return {"mean": float(upper.mean()), "mean_at_top_50pct": float(top.mean())}


def group_delta(delta, grouping):
    """Largest pairwise shift between members of each pair of groups."""
    from .grouping import Grouping

    if not isinstance(grouping, Grouping):
        grouping = Grouping(np.asarray(grouping))
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (grouping.n_attributes, grouping.n_attributes):
        raise DimensionError(
            f"delta is {delta.shape} but grouping covers {grouping.n_attributes} attributes"
        )
    return _kernels.group_max(np.ascontiguousarray(delta), grouping.assignment, grouping.n_groups)


def shift_matrices(binary_attributes, labels, train_classes, test_classes):
    """Seen/unseen correlation matrices and their shift for one split."""
    rs = corr_seen(binary_attributes, labels, train_classes)
    ru = corr_unseen(binary_attributes[np.asarray(sorted(test_classes), dtype=np.int64)])
    return rs, ru, delta_corr_matrix(rs, ru)
