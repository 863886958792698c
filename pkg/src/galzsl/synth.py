"""Two-label target-shift laboratory.

Labels ``(y_p, y_a)`` are drawn with a chosen correlation; features are two
5-d identity-covariance Gaussian blocks, the first driven by ``y_p`` and the
second by ``y_a``. Three linear models (logistic baseline, a two-label
sharing net and an adversarial net with gradient reversal) are trained at one
correlation and evaluated across a grid of test correlations.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InputError
from .nn import Dense, OptimizerConfig, grad_reverse, layer_rng, sgd_nesterov_step, sigmoid

BLOCK = 5


@dataclass(frozen=True)
class SynthConfig:
    separation: float = 1.5
    train_rho: float = 0.6
    test_rhos: tuple = tuple(np.round(np.linspace(-1.0, 1.0, 11), 10))
    n_train: int = 1000
    n_test: int = 50000
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.0
    hidden: int = 2
    seed: int = 0
    lambdas: tuple = (0.5, 1.0, 2.0)

    def __post_init__(self):
        if self.separation <= 0:
            raise InputError("separation must be > 0")
        for r in (self.train_rho, *self.test_rhos):
            if not -1.0 <= r <= 1.0:
                raise InputError(f"correlation {r} outside [-1, 1]")


def label_joint(rho):
    """Cell probabilities ``{(y_p, y_a): p}`` with both marginals 0.5 and correlation ``rho``."""
    if not -1.0 <= rho <= 1.0:
        raise InputError(f"correlation {rho} outside [-1, 1]")
    same, diff = (1.0 + rho) / 4.0, (1.0 - rho) / 4.0
    return {(1, 1): same, (0, 0): same, (1, 0): diff, (0, 1): diff}


def sample_labels(rho, n, rng):
    joint = label_joint(rho)
    cells = [(1, 1), (0, 0), (1, 0), (0, 1)]
    idx = rng.choice(4, size=n, p=[joint[c] for c in cells])
    pairs = np.asarray(cells, dtype=np.int64)[idx]
    return pairs[:, 0], pairs[:, 1]


def class_mean(separation):
    """Mean of the positive block; the negative block is centred at zero."""
    return np.full(BLOCK, separation / math.sqrt(BLOCK))


def gen_features(y_p, y_a, separation, rng):
    if separation <= 0:
        raise InputError("separation must be > 0")
    n = len(y_p)
    mu = class_mean(separation)
    X = rng.standard_normal((n, 2 * BLOCK))
    X[:, :BLOCK] += np.asarray(y_p)[:, None] * mu
    X[:, BLOCK:] += np.asarray(y_a)[:, None] * mu
    return X


def sample(rho, n, separation, rng):
    y_p, y_a = sample_labels(rho, n, rng)
    return gen_features(y_p, y_a, separation, rng), y_p, y_a


def bayes_accuracy(separation):
    """Accuracy of the optimal rule for two equal-prior unit-covariance Gaussians."""
    if separation < 0:
        raise InputError("separation must be >= 0")
    return 0.5 * (1.0 + math.erf(separation / 2.0 / math.sqrt(2.0)))


def oracle_predict(X, separation):
    mu = class_mean(separation)
    return (X[:, :BLOCK] @ mu > 0.5 * mu @ mu).astype(np.int64)


# ----------------------------------------------------------------- models


def _bce_logit_grad(z, y):
    """Mean binary cross-entropy on logits ``z`` and its gradient."""
    p = sigmoid(z)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss, (p - y) / len(y)


class TwoLabelNet:
    """Linear encoder (optional) with a primary head and an optional auxiliary head.

    ``aux`` is ``None`` (no auxiliary head), ``"share"`` (auxiliary label is a
    second task) or ``"adv"`` (auxiliary head sits behind gradient reversal
    with weight ``lam``; it minimises ``lam`` times its own loss).
    """

    def __init__(self, hidden, aux, lam, seed):
        self.aux, self.lam = aux, float(lam)
        if hidden:
            self.encoder = Dense(2 * BLOCK, hidden, layer_rng(seed, 0))
            width = hidden
        else:
            self.encoder = None
            width = 2 * BLOCK
        self.head = Dense(width, 1, layer_rng(seed, 1))
        self.aux_head = Dense(width, 1, layer_rng(seed, 2)) if aux else None

    def layers(self):
        return [l for l in (self.encoder, self.head, self.aux_head) if l is not None]

    def logits(self, X):
        h = self.encoder.forward(X) if self.encoder else X
        return self.head.forward(h)[:, 0]

    def step(self, X, y_p, y_a, opt):
        h = self.encoder.forward(X) if self.encoder else X
        z = self.head.forward(h)[:, 0]
        loss, dz = _bce_logit_grad(z, y_p)
        dh, dW, db = self.head.backward(dz[:, None])
        grads = {id(self.head): (dW, db)}
        if self.aux_head is not None:
            za = self.aux_head.forward(h)[:, 0]
            _, dza = _bce_logit_grad(za, y_a)
            dha, dWa, dba = self.aux_head.backward(dza[:, None])
            if self.aux == "adv":
                grads[id(self.aux_head)] = (self.lam * dWa, self.lam * dba)
                dh = dh + grad_reverse(dha, self.lam)
            else:
                grads[id(self.aux_head)] = (dWa, dba)
                dh = dh + dha
        if self.encoder is not None:
            _, dW, db = self.encoder.backward(dh)
            grads[id(self.encoder)] = (dW, db)
        for layer in self.layers():
            sgd_nesterov_step(layer, *grads[id(layer)], opt)
        return loss

    def effective_weights(self):
        """Input-feature weights of the primary logit (encoder folded into the head)."""
        if self.encoder is None:
            return self.head.W[:, 0].copy()
        return (self.encoder.W @ self.head.W)[:, 0]

    def predict(self, X):
        return (self.logits(X) > 0).astype(np.int64)


def fit(net, X, y_p, y_a, cfg, rng):
    opt = OptimizerConfig(cfg.learning_rate, cfg.momentum, 0.0, cfg.momentum > 0)
    n = len(X)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            net.step(X[idx], y_p[idx], y_a[idx], opt)
    return net


def model_specs(lambdas):
    specs = [("baseline", None, 0, None, 0.0), ("sharing", None, None, "share", 0.0)]
    specs += [("adv", float(lam), None, "adv", float(lam)) for lam in lambdas]
    return specs


def run_two_label_suite(config=SynthConfig(), lambdas=None, models=None):
    """Train every model once at ``train_rho`` and score it on each test correlation.

    Returns ``{"accuracy": [...], "weights": [...], "bayes": float}`` where
    accuracy rows are ``(model, lambda, test_rho, accuracy)`` and weight
    rows are ``(model, lambda, feature_index, weight)``.
    """
    lambdas = config.lambdas if lambdas is None else tuple(lambdas)
    ss = np.random.SeedSequence(config.seed)
    train_ss, test_ss, fit_ss = ss.spawn(3)
    X, y_p, y_a = sample(config.train_rho, config.n_train, config.separation, np.random.default_rng(train_ss))
    if y_p.min() == y_p.max():
        raise InputError("degenerate training set: primary label has a single class")
    test_sets = [
        sample(rho, config.n_test, config.separation, np.random.default_rng(s))
        for rho, s in zip(config.test_rhos, test_ss.spawn(len(config.test_rhos)))
    ]
    acc_rows, weight_rows = [], []
    specs = model_specs(lambdas)
    if models is not None:
        specs = [s for s in specs if s[0] in models]
    fit_seed = int(fit_ss.generate_state(1)[0])
    for name, lam, hidden, aux, w in specs:
        width = config.hidden if hidden is None else hidden
        net = TwoLabelNet(width, aux, w, fit_seed)
        fit(net, X, y_p, y_a, config, np.random.default_rng([fit_seed, 7]))
        for rho, (Xt, tp, _) in zip(config.test_rhos, test_sets):
            acc_rows.append((name, lam, float(rho), float(np.mean(net.predict(Xt) == tp))))
        for k, v in enumerate(net.effective_weights()):
            weight_rows.append((name, lam, k, float(v)))
    return {"accuracy": acc_rows, "weights": weight_rows, "bayes": bayes_accuracy(config.separation)}


def accuracy_curve(result, model, lam=None):
    rows = [r for r in result["accuracy"] if r[0] == model and (lam is None or r[1] == lam)]
    return np.array([r[2] for r in rows]), np.array([r[3] for r in rows])


def weight_vector(result, model, lam=None):
    rows = [r for r in result["weights"] if r[0] == model and (lam is None or r[1] == lam)]
    return np.array([r[3] for r in sorted(rows, key=lambda r: r[2])])
