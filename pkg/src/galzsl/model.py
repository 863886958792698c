"""Grouped adversarial network: shared trunk, per-group extractors, primary and adversarial arms."""

from dataclasses import asdict, dataclass, fields, replace
import io
import struct

import numpy as np

from .errors import DimensionError, FormatError, InputError, NumericalError
from .grouping import Grouping
from .losses import LOSS_KINDS, batch_zsl_loss, loss_balanced_bce
from .nn import (
    Dense,
    OptimizerConfig,
    dropout,
    dropout_backward,
    grad_reverse,
    layer_rng,
    sgd_nesterov_step,
    sigmoid,
    sigmoid_backward,
)

WEIGHTINGS = ("delta-corr", "equal")
TRUNK_MODES = ("shared", "per-group")
ADVERSARY_UPDATES = ("weighted", "unit")


@dataclass(frozen=True)
class GalConfig:
    input_dim: int
    trunk_width: int = 500
    group_width: int = 100
    trunk_mode: str = "shared"
    loss: str = "sje"
    adv_weight: float = 1.0
    margin: float = 1.0
    dropout_trunk: float = 0.2
    dropout_group: float = 0.2
    l2: float = 1e-4
    weighting: str = "delta-corr"
    adversarial: bool = True
    adversary_update: str = "weighted"
    learning_rate: float = 0.01
    momentum: float = 0.9
    nesterov: bool = True
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.trunk_width < 1 or self.group_width < 1:
            raise InputError("input_dim and layer widths must be >= 1")
        if self.adv_weight < 0:
            raise InputError(f"adversarial weight must be >= 0, got {self.adv_weight}")
        if self.loss not in LOSS_KINDS:
            raise InputError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.weighting not in WEIGHTINGS:
            raise InputError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if self.trunk_mode not in TRUNK_MODES:
            raise InputError(f"trunk_mode must be one of {TRUNK_MODES}, got {self.trunk_mode!r}")
        if self.adversary_update not in ADVERSARY_UPDATES:
            raise InputError(f"adversary_update must be one of {ADVERSARY_UPDATES}")
        if self.margin <= 0:
            raise InputError("margin must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise InputError("batch_size must be >= 1 and epochs >= 0")
        for p in (self.dropout_trunk, self.dropout_group):
            if not 0.0 <= p <= 0.9:
                raise InputError(f"dropout probability {p} outside [0, 0.9]")

    def optimizer(self):
        return OptimizerConfig(self.learning_rate, self.momentum, self.l2, self.nesterov)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(names)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class Batch:
    features: np.ndarray
    labels: np.ndarray
    attr_targets: np.ndarray

    def __len__(self):
        return len(self.labels)


def make_batch(features, labels, binary_attributes):
    labels = np.asarray(labels, dtype=np.int64)
    return Batch(np.asarray(features, dtype=np.float64), labels, binary_attributes[labels])


class GalNetwork:
    """Parameters and forward/backward of the grouped adversarial network.

    Layer initialisation is keyed on the smallest attribute index of each
    group, so renumbering groups leaves every arm's weights unchanged.
    """

    def __init__(self, config, grouping, group_shift):
        self.config = config
        self.grouping = grouping
        L = grouping.n_groups
        group_shift = np.asarray(group_shift, dtype=np.float64)
        if group_shift.shape != (L, L):
            raise DimensionError(f"group shift matrix must be {L}x{L}, got {group_shift.shape}")
        if (group_shift < 0).any() or not np.all(np.isfinite(group_shift)):
            raise InputError("group shift weights must be finite and non-negative")
        if config.weighting == "equal":
            group_shift = np.ones((L, L))
        group_shift = group_shift.copy()
        np.fill_diagonal(group_shift, 0.0)
        self.group_shift = group_shift
        self.groups = grouping.groups()
        anchors = [int(g[0]) for g in self.groups]
        seed = config.seed
        c = config
        if c.trunk_mode == "shared":
            self.trunks = [Dense(c.input_dim, c.trunk_width, layer_rng(seed, 1, 0), name="trunk")]
        else:
            self.trunks = [
                Dense(c.input_dim, c.trunk_width, layer_rng(seed, 1, 1 + a), name=f"trunk[{i}]")
                for i, a in enumerate(anchors)
            ]
        self.extractors = [
            Dense(c.trunk_width, c.group_width, layer_rng(seed, 2, a), name=f"h[{i}]")
            for i, a in enumerate(anchors)
        ]
        self.primary = [
            Dense(c.group_width, len(g), layer_rng(seed, 3, a), weight_decay=True, name=f"f[{i},{i}]")
            for i, (g, a) in enumerate(zip(self.groups, anchors))
        ]
        self.adversaries = {}
        if c.adversarial:
            for i in range(L):
                for j in range(L):
                    if i != j and group_shift[i, j] > 0:
                        self.adversaries[(i, j)] = Dense(
                            c.group_width,
                            len(self.groups[j]),
                            layer_rng(seed, 4, anchors[i], anchors[j]),
                            weight_decay=True,
                            name=f"f[{i},{j}]",
                        )
        self._cache = None

    @property
    def n_groups(self):
        return self.grouping.n_groups

    @property
    def n_attributes(self):
        return self.grouping.n_attributes

    def layers(self):
        """All layers in a fixed order (trunks, extractors, primary arms, adversaries by (i, j))."""
        return (
            list(self.trunks)
            + list(self.extractors)
            + list(self.primary)
            + [self.adversaries[k] for k in sorted(self.adversaries)]
        )

    def arm_weight(self, i, j):
        return self.config.adv_weight * self.group_shift[i, j]

    # -------------------------------------------------------------- forward

    def forward(self, X, train=False, rng=None):
        c = self.config
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != c.input_dim:
            raise DimensionError(f"features have shape {X.shape}, expected (n, {c.input_dim})")
        if train and rng is None:
            rng = np.random.default_rng(c.seed)
        n = X.shape[0]
        trunk_out, trunk_masks = [], []
        if c.trunk_mode == "shared":
            t, m = dropout(self.trunks[0].forward(X), c.dropout_trunk, rng, train)
            trunk_out, trunk_masks = [t] * self.n_groups, [m]
        H, h_masks = [], []
        attr = np.empty((n, self.n_attributes))
        for i, g in enumerate(self.groups):
            if c.trunk_mode == "per-group":
                t, m = dropout(self.trunks[i].forward(X), c.dropout_trunk, rng, train)
                trunk_out.append(t)
                trunk_masks.append(m)
            h, m = dropout(self.extractors[i].forward(trunk_out[i]), c.dropout_group, rng, train)
            H.append(h)
            h_masks.append(m)
            attr[:, g] = self.primary[i].forward(h)
        adv = {}
        for (i, j), arm in sorted(self.adversaries.items()):
            # gradient reversal sits between H[i] and the arm; identity forward
            adv[(i, j)] = sigmoid(arm.forward(H[i]))
        self._cache = (trunk_masks, h_masks)
        return {"attr_scores": attr, "adv_probs": adv}

    # ------------------------------------------------------------- backward

    def backward(self, d_attr, d_adv_logits):
        """Parameter gradients for the main objective and the adversaries' own loss.

        ``d_adv_logits[(i, j)]`` is the gradient of the *unweighted* adversary
        loss w.r.t. that arm's logits. The arm receives it scaled by
        ``lambda * delta_ij``; the extractor receives it through gradient
        reversal with the same scale.
        """
        c = self.config
        trunk_masks, h_masks = self._cache
        grads = {}
        d_trunk = [None] * len(self.trunks)
        for i, g in enumerate(self.groups):
            dH, dW, db = self.primary[i].backward(d_attr[:, g])
            grads[self.primary[i].name] = (dW, db)
            for j in range(self.n_groups):
                arm = self.adversaries.get((i, j))
                if arm is None:
                    continue
                s = self.arm_weight(i, j)
                dX, dW, db = arm.backward(d_adv_logits[(i, j)])
                a = s if c.adversary_update == "weighted" else 1.0
                grads[arm.name] = (a * dW, a * db)
                dH = dH + grad_reverse(dX, s)
            dH = dropout_backward(h_masks[i], dH)
            dT, dW, db = self.extractors[i].backward(dH)
            grads[self.extractors[i].name] = (dW, db)
            k = 0 if c.trunk_mode == "shared" else i
            d_trunk[k] = dT if d_trunk[k] is None else d_trunk[k] + dT
        for k, trunk in enumerate(self.trunks):
            _, dW, db = trunk.backward(dropout_backward(trunk_masks[k], d_trunk[k]))
            grads[trunk.name] = (dW, db)
        return grads

    # ------------------------------------------------------------ inference

    def attribute_scores(self, X):
        return self.forward(np.atleast_2d(X), train=False)["attr_scores"]

    def copy(self):
        other = GalNetwork(self.config, self.grouping, self.group_shift)
        for a, b in zip(other.layers(), self.layers()):
            a.copy_params_from(b)
        return other

    def state(self):
        return [(layer.name, layer.W.copy(), layer.b.copy()) for layer in self.layers()]


def build(config, grouping, group_shift):
    return GalNetwork(config, grouping, group_shift)


def forward(net, batch, train=False, rng=None):
    X = batch.features if isinstance(batch, Batch) else batch
    return net.forward(X, train=train, rng=rng)


def _local_labels(labels, seen_classes):
    seen_classes = np.asarray(seen_classes, dtype=np.int64)
    pos = np.searchsorted(seen_classes, labels)
    pos = np.clip(pos, 0, len(seen_classes) - 1)
    if not np.array_equal(seen_classes[pos], labels):
        raise InputError("a batch label is not among the seen classes")
    return pos


def evaluate_objective(net, batch, seen_attributes, seen_classes, train=True, rng=None):
    """Forward pass plus losses and their gradients w.r.t. the network outputs.

    ``seen_attributes`` holds the raw attribute rows of ``seen_classes``
    (sorted ascending), used for compatibility scores.
    """
    c = net.config
    out = net.forward(batch.features, train=train, rng=rng)
    y = _local_labels(batch.labels, seen_classes)
    scores = out["attr_scores"] @ seen_attributes.T
    zsl, d_scores = batch_zsl_loss(c.loss, scores, y, c.margin)
    d_attr = d_scores @ seen_attributes
    adv_losses, d_adv = {}, {}
    for (i, j), probs in out["adv_probs"].items():
        targets = batch.attr_targets[:, net.groups[j]]
        loss, dp = loss_balanced_bce(probs, targets)
        adv_losses[(i, j)] = loss
        d_adv[(i, j)] = sigmoid_backward(probs, dp)
    objective = zsl - sum(net.arm_weight(i, j) * v for (i, j), v in adv_losses.items())
    return {
        "zsl_loss": zsl,
        "adv_loss": adv_losses,
        "objective": objective,
        "d_attr": d_attr,
        "d_adv": d_adv,
        "attr_scores": out["attr_scores"],
    }


def compute_gradients(net, batch, seen_attributes, seen_classes, train=True, rng=None):
    ev = evaluate_objective(net, batch, seen_attributes, seen_classes, train=train, rng=rng)
    grads = net.backward(ev["d_attr"], ev["d_adv"])
    return ev, grads


def training_step(net, batch, seen_attributes, seen_classes, rng=None):
    """One Nesterov SGD step on every layer; returns loss and gradient-norm metrics."""
    ev, grads = compute_gradients(net, batch, seen_attributes, seen_classes, train=True, rng=rng)
    if not np.isfinite(ev["objective"]):
        raise NumericalError(
            f"non-finite loss: zsl={ev['zsl_loss']!r}, "
            f"adv={ {k: v for k, v in ev['adv_loss'].items()} }"
        )
    opt = net.config.optimizer()
    norms = {}
    for layer in net.layers():
        dW, db = grads[layer.name]
        norms[layer.name] = float(np.sqrt((dW**2).sum() + (db**2).sum()))
        sgd_nesterov_step(layer, dW, db, opt)
    return {
        "zsl_loss": ev["zsl_loss"],
        "adv_loss": ev["adv_loss"],
        "objective": ev["objective"],
        "grad_norms": norms,
    }


def predict_class(net, X, attributes, class_set):
    """Highest-compatibility class from ``class_set`` per row; ties go to the lowest id."""
    class_set = np.asarray(sorted(int(c) for c in class_set), dtype=np.int64)
    if class_set.size == 0:
        raise InputError("empty candidate class set")
    single = np.asarray(X).ndim == 1
    scores = net.attribute_scores(X) @ np.asarray(attributes, dtype=np.float64)[class_set].T
    pred = class_set[np.argmax(scores, axis=1)]
    return int(pred[0]) if single else pred


# ------------------------------------------------------------------ checkpoint

MAGIC = b"GALM"
VERSION = 1


def _config_text(config):
    return "".join(f"{k}={v}\n" for k, v in config.to_dict().items())


def _parse_config_text(text):
    from .config import coerce_config

    pairs = dict(line.split("=", 1) for line in text.splitlines() if line)
    return GalConfig.from_dict(coerce_config(pairs))


def save_checkpoint(net, path):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    cfg = _config_text(net.config).encode()
    buf.write(struct.pack("<Q", len(cfg)))
    buf.write(cfg)
    a = net.grouping.assignment
    buf.write(struct.pack("<QQ", a.size, net.n_groups))
    buf.write(a.astype("<u4").tobytes())
    buf.write(net.group_shift.astype("<f8").tobytes())
    layers = net.layers()
    buf.write(struct.pack("<Q", len(layers)))
    for layer in layers:
        name = layer.name.encode()
        buf.write(struct.pack("<Q", len(name)))
        buf.write(name)
        rows, cols = layer.W.shape
        buf.write(struct.pack("<QQ", rows, cols))
        buf.write(layer.W.astype("<f8").tobytes())
        buf.write(layer.b.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


class _Reader:
    def __init__(self, data, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated checkpoint (need {n} bytes)", path=self.path, offset=self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic, not a GALM checkpoint", path=path, offset=0)
    (version,) = r.u("<I")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", path=path, offset=4)
    (n_cfg,) = r.u("<Q")
    config = _parse_config_text(r.take(n_cfg).decode())
    D, L = r.u("<QQ")
    assignment = np.frombuffer(r.take(4 * D), dtype="<u4").astype(np.int64)
    shift = np.frombuffer(r.take(8 * L * L), dtype="<f8").reshape(L, L).copy()
    # weighting already applied to the stored matrix
    net = GalNetwork(config.with_(weighting="delta-corr"), Grouping(assignment), shift)
    net.config = config
    (n_layers,) = r.u("<Q")
    layers = {layer.name: layer for layer in net.layers()}
    if n_layers != len(layers):
        raise FormatError(f"checkpoint has {n_layers} layers, config implies {len(layers)}", path=path)
    for _ in range(n_layers):
        (n_name,) = r.u("<Q")
        name = r.take(n_name).decode()
        rows, cols = r.u("<QQ")
        layer = layers.get(name)
        if layer is None or layer.W.shape != (rows, cols):
            raise FormatError(f"unexpected layer {name} ({rows}x{cols})", path=path, offset=r.pos)
        layer.W[...] = np.frombuffer(r.take(8 * rows * cols), dtype="<f8").reshape(rows, cols)
        layer.b[...] = np.frombuffer(r.take(8 * cols), dtype="<f8")
    if r.pos != len(r.data):
        raise FormatError("trailing bytes after last layer", path=path, offset=r.pos)
    return net
