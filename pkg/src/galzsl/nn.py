"""Small dense-network engine with hand-derived gradients.

Layers cache what they need on ``forward`` and return parameter gradients
from ``backward``. Everything is float64 and seeded through explicit
``numpy.random.Generator`` objects.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NumericalError, StateError


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    nesterov: bool = True

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise InputError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise InputError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not self.weight_decay >= 0:
            raise InputError(f"weight_decay must be >= 0, got {self.weight_decay}")


def layer_rng(seed, *key):
    """Generator for one layer, keyed so that layer identity (not build order) fixes its init."""
    return np.random.default_rng([int(seed), *(int(k) for k in key)])


class Dense:
    """Affine map ``Y = X @ W + b``.

    Weights start uniform in ``[-1/sqrt(d_in), 1/sqrt(d_in)]``; bias at zero.
    ``weight_decay`` marks layers that receive L2 shrinkage in the optimizer.
    """

    def __init__(self, d_in, d_out, rng=None, weight_decay=False, name=""):
        if d_in < 1 or d_out < 1:
            raise InputError(f"layer widths must be >= 1, got {d_in}x{d_out}")
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(d_in)
        self.W = rng.uniform(-bound, bound, size=(d_in, d_out))
        self.b = np.zeros(d_out)
        self.vW = np.zeros_like(self.W)
        self.vb = np.zeros_like(self.b)
        self.weight_decay = weight_decay
        self.name = name
        self._x = None

    @property
    def shape(self):
        return self.W.shape

    def forward(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.W.shape[0]:
            raise DimensionError(
                f"{self.name or 'dense'}: input has shape {X.shape}, expected (n, {self.W.shape[0]})"
            )
        self._x = X
        return X @ self.W + self.b

    def backward(self, dY):
        if self._x is None:
            raise StateError(f"{self.name or 'dense'}: backward called before forward")
        if dY.shape != (self._x.shape[0], self.W.shape[1]):
            raise DimensionError(f"{self.name or 'dense'}: gradient shape {dY.shape} does not match output")
        return dY @ self.W.T, self._x.T @ dY, dY.sum(axis=0)

    def params(self):
        return [self.W, self.b]

    def copy_params_from(self, other):
        self.W[...] = other.W
        self.b[...] = other.b
        self.vW[...] = other.vW
        self.vb[...] = other.vb


def dense_apply(layer, X):
    return layer.forward(X)


def dense_backward(layer, dY):
    return layer.backward(dY)


def grad_reverse(dY, scale):
    """Backward rule of the gradient reversal layer (its forward is the identity)."""
    return -scale * np.asarray(dY, dtype=np.float64)


class GradReverse:
    def __init__(self, scale=1.0):
        self.scale = float(scale)

    def forward(self, X):
        return X

    def backward(self, dY):
        return grad_reverse(dY, self.scale)


def sigmoid(X):
    X = np.asarray(X, dtype=np.float64)
    out = np.empty_like(X)
    pos = X >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-X[pos]))
    ez = np.exp(X[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_backward(out, dY):
    return dY * out * (1.0 - out)


def softmax_rows(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = X - X.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(out, dY):
    # Jacobian-vector product of row-wise softmax
    return out * (dY - (dY * out).sum(axis=1, keepdims=True))


def dropout_mask(shape, p, rng, train):
    """Multiplicative inverted-dropout mask; ``None`` means identity."""
    if not 0.0 <= p <= 0.9:
        raise InputError(f"dropout probability must lie in [0, 0.9], got {p}")
    if not train or p == 0.0:
        return None
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def dropout(X, p, rng, train):
    mask = dropout_mask(X.shape, p, rng, train)
    return (X if mask is None else X * mask), mask


def dropout_backward(mask, dY):
    return dY if mask is None else dY * mask


def sgd_nesterov_step(layer, dW, db, cfg):
    """One momentum step, in place.

    ``g' = g + wd*w`` (weights only, and only for layers flagged with
    ``weight_decay``), ``v <- mu*v + g'``, then ``w <- w - lr*(g' + mu*v)``
    for Nesterov or ``w <- w - lr*v`` otherwise.
    """
    if dW.shape != layer.W.shape or db.shape != layer.b.shape:
        raise DimensionError(f"{layer.name or 'dense'}: gradient shapes do not match parameters")
    if not (np.all(np.isfinite(dW)) and np.all(np.isfinite(db))):
        raise NumericalError(
            f"{layer.name or 'dense'}: non-finite gradient "
            f"(|dW|max={np.nanmax(np.abs(dW)):.3g}, |db|max={np.nanmax(np.abs(db)):.3g})"
        )
    gW = dW + cfg.weight_decay * layer.W if layer.weight_decay else dW
    mu, lr = cfg.momentum, cfg.learning_rate
    for p, g, v in ((layer.W, gW, layer.vW), (layer.b, db, layer.vb)):
        v *= mu
        v += g
        if cfg.nesterov:
            p -= lr * (g + mu * v)
        else:
            p -= lr * v
    return layer


def finite_diff_check(fn, params, grads, eps=1e-5, floor=1e-6):
    """Worst relative error between analytic ``grads`` and central differences of ``fn``.

    ``fn`` is a zero-argument closure returning a scalar that reads the
    arrays in ``params`` (perturbed in place and restored). Relative error is
    ``|a - n| / max(|a|, |n|, floor)`` per entry.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise InputError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn()
            flat[i] = orig - eps
            down = fn()
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            denom = max(abs(num), abs(gflat[i]), floor)
            worst = max(worst, abs(num - gflat[i]) / denom)
    return worst
