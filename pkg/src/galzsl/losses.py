"""Class-prediction losses over compatibility scores and the balanced BCE adversary loss.

Single-sample functions take a 1-D score vector and a true index and return
``(loss, grad)``. The ``batch_*`` variants take an ``(n, C)`` score matrix
and return the mean loss with its gradient.
"""

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError
from .nn import softmax_rows

HINGE_KINDS = {"devise": 0, "sje": 1, "ale": 2}
LOSS_KINDS = ("ale", "devise", "sje", "softmax")
BCE_CLAMP = 1e-7


def class_scores(attr_scores, class_attributes):
    """Compatibility ``s . phi_c`` for every class row; works row-wise on batches."""
    attr_scores = np.asarray(attr_scores, dtype=np.float64)
    class_attributes = np.asarray(class_attributes, dtype=np.float64)
    if attr_scores.shape[-1] != class_attributes.shape[1]:
        raise DimensionError(
            f"attribute scores have length {attr_scores.shape[-1]}, "
            f"class matrix has {class_attributes.shape[1]} attributes"
        )
    return attr_scores @ class_attributes.T


def class_scores_for(attr_scores, attributes, class_set):
    class_set = np.asarray(class_set, dtype=np.int64)
    if class_set.size and (class_set.min() < 0 or class_set.max() >= attributes.shape[0]):
        raise InputError(f"class ids outside 0..{attributes.shape[0] - 1}")
    return class_scores(attr_scores, attributes[class_set])


def _hinge(kind, scores, y, margin):
    if margin <= 0:
        raise InputError(f"margin must be > 0, got {margin}")
    scores = np.ascontiguousarray(np.atleast_2d(scores), dtype=np.float64)
    y = np.ascontiguousarray(np.atleast_1d(y), dtype=np.int64)
    return _kernels.rank_hinge(scores, y, float(margin), HINGE_KINDS[kind])


def _single(kind, scores, y, margin):
    losses, grad = _hinge(kind, scores, y, margin)
    return float(losses[0]), grad[0]


def loss_devise(scores, y, margin=1.0):
    """Sum of hinge violations ``max(0, margin - s_y + s_c)`` over ``c != y``."""
    return _single("devise", scores, y, margin)


def loss_sje(scores, y, margin=1.0):
    """Hinge on the single worst violator; first index wins ties."""
    return _single("sje", scores, y, margin)


def loss_ale(scores, y, margin=1.0):
    """Violations summed and weighted by ``H(r)/r``, ``r`` the violator count.

    ``H(r)`` is the r-th harmonic number, so a sample with many violators is
    penalised more heavily than its per-violator average.
    """
    return _single("ale", scores, y, margin)


def loss_softmax_ce(scores, y):
    scores = np.asarray(scores, dtype=np.float64)
    z = scores - scores.max()
    logp = z - np.log(np.exp(z).sum())
    grad = np.exp(logp)
    grad[y] -= 1.0
    return float(-logp[y]), grad


def batch_zsl_loss(kind, scores, y, margin=1.0):
    """Mean loss over the batch and its gradient w.r.t. the ``(n, C)`` scores."""
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    y = np.asarray(y, dtype=np.int64)
    if kind == "softmax":
        z = scores - scores.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        grad = softmax_rows(scores)
        grad[np.arange(n), y] -= 1.0
        return float(-logp[np.arange(n), y].mean()), grad / n
    if kind not in HINGE_KINDS:
        raise InputError(f"unknown loss {kind!r}; expected one of {LOSS_KINDS}")
    losses, grad = _hinge(kind, scores, y, margin)
    return float(losses.mean()), grad / n


def loss_balanced_bce(probs, targets):
    """Balanced binary cross-entropy.

    Positives and negatives are each averaged separately and weighted one
    half. A side with no samples contributes zero. For 2-D input the
    balancing is done per column and the column losses are averaged.
    Returns ``(loss, d loss / d probs)``; the gradient is zero where the
    clamp to ``[1e-7, 1 - 1e-7]`` is active.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    if probs.shape != targets.shape:
        raise DimensionError(f"probs {probs.shape} and targets {targets.shape} differ")
    flat = probs.ndim == 1
    P = probs[:, None] if flat else probs
    T = (targets[:, None] if flat else targets).astype(bool)
    Pc = np.clip(P, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n_pos = T.sum(axis=0)
    n_neg = T.shape[0] - n_pos
    w_pos = np.where(n_pos > 0, 0.5 / np.maximum(n_pos, 1), 0.0)
    w_neg = np.where(n_neg > 0, 0.5 / np.maximum(n_neg, 1), 0.0)
    cols = -(w_pos * np.where(T, np.log(Pc), 0.0).sum(axis=0)) - (
        w_neg * np.where(T, 0.0, np.log1p(-Pc)).sum(axis=0)
    )
    n_cols = P.shape[1]
    inside = (P > BCE_CLAMP) & (P < 1.0 - BCE_CLAMP)
    grad = np.where(T, -w_pos / Pc, w_neg / (1.0 - Pc)) * inside / n_cols
    loss = float(cols.mean())
    return loss, (grad[:, 0] if flat else grad)
