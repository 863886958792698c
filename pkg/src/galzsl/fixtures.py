"""Small constructed datasets used by tests, benchmarks and the CLI demo paths."""

import numpy as np

from .data import Dataset, SplitDef
from .model import GalConfig

# Attribute layout of the shift fixture: two pairs (0, 1) and (2, 3) that
# agree on the frequent seen classes and disagree on every unseen class,
# plus two context attributes (4, 5).
_SHIFT_SEEN = np.array(
    [
        [1, 1, 0, 0, 0, 0],
        [0, 0, 1, 1, 0, 0],
        [1, 1, 1, 1, 1, 0],
        [0, 0, 0, 0, 1, 1],
        [1, 1, 0, 0, 1, 1],
        [0, 0, 1, 1, 0, 1],
        [1, 0, 0, 0, 1, 0],
        [0, 0, 0, 1, 0, 1],
    ]
)
_SHIFT_RARE = (6, 7)
_SHIFT_VAL = np.array([[1, 0, 0, 1, 0, 0], [0, 1, 1, 0, 1, 1], [1, 0, 1, 0, 0, 1]])
_SHIFT_TEST = np.array([[1, 0, 0, 1, 1, 1], [0, 1, 1, 0, 0, 0], [0, 1, 0, 1, 1, 0]])

#: grouping that separates the two correlated pairs
SHIFT_GROUPING = (0, 1, 0, 1, 2, 2)
#: adversarial weights swept on the shift fixture
SHIFT_LAMBDAS = (0.01, 0.03, 0.1)


def make_shift_fixture(seed, n_major=200, n_rare=20, n_eval=200, flip=0.1, separation=1.5, block=2):
    """8 seen / 3 val / 3 test classes with a planted correlation shift.

    Each attribute owns ``block`` feature dimensions whose mean is
    ``separation`` times the instance's realized attribute value. Realized
    attributes equal the class signature except for independent flips with
    probability ``flip``. Within the seen classes the pairs (0, 1) and (2, 3)
    are strongly correlated; only the two rare classes break the tie. All
    val and test classes carry the anti-correlated pattern.
    """
    rng = np.random.default_rng(seed)
    attrs = np.vstack([_SHIFT_SEEN, _SHIFT_VAL, _SHIFT_TEST]).astype(np.float64)
    C, D = attrs.shape
    X, y = [], []
    for c in range(C):
        if c < 8:
            n = n_rare if c in _SHIFT_RARE else n_major
        else:
            n = n_eval
        phi = np.repeat(attrs[c][None], n, axis=0)
        real = np.where(rng.random(phi.shape) < flip, 1.0 - phi, phi)
        X.append(rng.standard_normal((n, D * block)) + np.repeat(real * separation, block, axis=1))
        y += [c] * n
    split = SplitDef(tuple(range(8)), tuple(range(8, 11)), tuple(range(11, 14)))
    return Dataset(np.vstack(X).astype(np.float32), np.array(y), attrs, split)


def shift_fixture_config(seed, adv_weight=0.0, epochs=60):
    """Training recipe used on the shift fixture.

    Plain SGD (no momentum) with per-group trunks: with heavy momentum the
    min-max game between extractors and adversaries oscillates on a problem
    this small.
    """
    return GalConfig(
        input_dim=12,
        trunk_width=32,
        group_width=16,
        trunk_mode="per-group",
        loss="sje",
        adv_weight=adv_weight,
        dropout_trunk=0.0,
        dropout_group=0.0,
        l2=1e-4,
        learning_rate=0.01,
        momentum=0.0,
        batch_size=64,
        epochs=epochs,
        seed=seed,
    )


def make_separable_fixture(seed=0, n_per_class=40, separation=3.0, noise=0.3):
    """3 seen classes with one-hot signatures, one val and two test classes.

    Features are the attribute signature scaled by ``separation`` plus small
    Gaussian noise, so a linear compatibility model separates every class.
    """
    rng = np.random.default_rng(seed)
    attrs = np.array(
        [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 0], [0, 1, 1]],
        dtype=np.float64,
    )
    X, y = [], []
    for c, phi in enumerate(attrs):
        X.append(separation * phi + noise * rng.standard_normal((n_per_class, 3)))
        y += [c] * n_per_class
    split = SplitDef((0, 1, 2), (3,), (4, 5))
    return Dataset(np.vstack(X).astype(np.float32), np.array(y), attrs, split)
