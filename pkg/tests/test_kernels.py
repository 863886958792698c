"""The numba and numpy kernel versions must agree."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from galzsl import _kernels as K

pytestmark = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")


@given(st.integers(0, 10**6), st.integers(2, 12), st.integers(1, 9))
def test_weighted_phi_parity(seed, n, d):
    rng = np.random.default_rng(seed)
    bits = (rng.random((n, d)) < 0.4).astype(np.float64)
    w = rng.random(n) + 0.1
    np.testing.assert_allclose(K.weighted_phi_nb(bits, w), K.weighted_phi_np(bits, w), atol=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 10))
def test_delta_corr_parity(seed, d):
    rng = np.random.default_rng(seed)
    rs, ru = rng.uniform(-1, 1, (2, d, d))
    rs[rng.random((d, d)) < 0.2] = 0.0
    np.testing.assert_array_equal(K.delta_corr_matrix_nb(rs, ru), K.delta_corr_matrix_np(rs, ru))


@given(st.integers(0, 10**6), st.integers(1, 10), st.integers(1, 4))
def test_group_max_parity(seed, d, L):
    rng = np.random.default_rng(seed)
    L = min(L, d)
    a = np.concatenate([np.arange(L), rng.integers(0, L, d - L)]).astype(np.int64)
    delta = rng.random((d, d))
    np.testing.assert_array_equal(K.group_max_nb(delta, a, L), K.group_max_np(delta, a, L))


@pytest.mark.parametrize("kind", [0, 1, 2])
@given(seed=st.integers(0, 10**6), n=st.integers(1, 6), C=st.integers(2, 7))
def test_rank_hinge_parity(kind, seed, n, C):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.standard_normal((n, C)), 1)  # rounding creates ties
    y = rng.integers(0, C, n).astype(np.int64)
    l_nb, g_nb = K.rank_hinge_nb(scores, y, 1.0, kind)
    l_np, g_np = K.rank_hinge_np(scores, y, 1.0, kind)
    np.testing.assert_allclose(l_nb, l_np, atol=1e-12)
    np.testing.assert_allclose(g_nb, g_np, atol=1e-12)


@given(st.integers(0, 10**6), st.integers(1, 20), st.integers(1, 5))
def test_nearest_center_parity(seed, n, k):
    rng = np.random.default_rng(seed)
    pts, ctr = rng.standard_normal((n, 3)), rng.standard_normal((k, 3))
    a_nb, d_nb = K.nearest_center_nb(pts, ctr)
    a_np, d_np = K.nearest_center_np(pts, ctr)
    np.testing.assert_array_equal(a_nb, a_np)
    np.testing.assert_allclose(d_nb, d_np, atol=1e-12)


def test_backend_flag_subprocess():
    import subprocess
    import sys

    code = "import galzsl._kernels as k; print(k.backend())"
    env = {"GALZSL_DISABLE_NUMBA": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
