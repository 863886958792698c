import numpy as np
import pytest
from hypothesis import given, strategies as st

from galzsl.errors import FormatError, InputError
from galzsl.grouping import (
    Grouping,
    affinity_from_delta,
    canonical,
    format_grouping,
    group_by_shift,
    kmeans,
    load_grouping,
    spectral_cocluster,
    write_grouping,
)
from galzsl.shift import group_delta


def planted_delta(sizes, seed, low=0.05, high=0.9, noise=0.05):
    """Shift matrix with low within-block and high across-block entries, attributes shuffled."""
    rng = np.random.default_rng(seed)
    truth = np.repeat(np.arange(len(sizes)), sizes)
    truth = truth[rng.permutation(truth.size)]
    same = truth[:, None] == truth[None, :]
    d = np.where(same, low, high) + noise * rng.random((truth.size,) * 2)
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    return d, truth


def same_partition(a, b):
    return np.array_equal(canonical(a), canonical(b))


def is_partition(g, D, L):
    return g.n_attributes == D and g.n_groups == L and (g.sizes() > 0).all()


# ---------------------------------------------------------------- affinity


def test_affinity_uniform_for_zero_delta():
    A = affinity_from_delta(np.zeros((4, 4)))
    assert np.all(A == A[0, 0])


def test_affinity_extreme_maps_to_eps():
    d = np.array([[0, 0.3, 0.8], [0.3, 0, 0.1], [0.8, 0.1, 0]])
    A = affinity_from_delta(d)
    assert A[0, 2] == pytest.approx(1e-6)
    assert A[0, 0] == pytest.approx(0.8 + 1e-6)


@given(st.integers(0, 10**6))
def test_affinity_monotone(seed):
    rng = np.random.default_rng(seed)
    d = rng.random((5, 5))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0)
    A = affinity_from_delta(d)
    iu = np.triu_indices(5, 1)
    order = np.argsort(d[iu])
    assert np.all(np.diff(A[iu][order]) <= 0)


# ---------------------------------------------------------------- co-clustering


def test_planted_affinity_two_blocks():
    A = np.full((10, 10), 0.01)
    A[:5, :5] = A[5:, 5:] = 1.0
    g = spectral_cocluster(A, 2, seed=0)
    assert same_partition(g.assignment, [0] * 5 + [1] * 5)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("sizes", [(5, 5), (4, 7), (3, 5, 4), (6, 6, 6)])
def test_planted_recovery(seed, sizes):
    d, truth = planted_delta(sizes, seed)
    g = group_by_shift(d, len(sizes), seed=seed)
    assert is_partition(g, sum(sizes), len(sizes))
    assert same_partition(g.assignment, truth)


def test_degenerate_group_counts():
    d, _ = planted_delta((3, 3), 0)
    assert group_by_shift(d, 1).assignment.tolist() == [0] * 6
    assert group_by_shift(d, 6).assignment.tolist() == list(range(6))


def test_too_many_groups():
    with pytest.raises(InputError):
        spectral_cocluster(np.ones((3, 3)), 4)


def test_zero_row_rejected():
    A = np.ones((3, 3))
    A[1] = A[:, 1] = 0
    with pytest.raises(InputError):
        spectral_cocluster(A, 2)


def test_deterministic():
    d, _ = planted_delta((4, 4, 4), 3, noise=0.6)
    assert group_by_shift(d, 3, seed=7) == group_by_shift(d, 3, seed=7)


@given(st.integers(0, 10**6), st.integers(2, 12), st.integers(1, 6))
def test_always_a_partition(seed, D, L):
    L = min(L, D)
    rng = np.random.default_rng(seed)
    d = rng.random((D, D))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0)
    assert is_partition(group_by_shift(d, L, seed=seed), D, L)


@pytest.mark.parametrize("seed", range(5))
def test_within_group_shift_lower_than_across(seed):
    d, _ = planted_delta((4, 5, 3), seed, noise=0.2)
    a = group_by_shift(d, 3, seed=seed).assignment
    same = a[:, None] == a[None, :]
    off = ~np.eye(len(a), dtype=bool)
    assert d[same & off].mean() < d[~same].mean()


def test_relabeling_permutes_group_delta():
    d, _ = planted_delta((3, 4, 2), 1, noise=0.3)
    a = np.array([0, 0, 0, 1, 1, 1, 1, 2, 2])
    perm = np.array([2, 0, 1])
    g1 = group_delta(d, Grouping(a))
    g2 = group_delta(d, Grouping(perm[a]))
    np.testing.assert_array_equal(g2[np.ix_(perm, perm)], g1)


# ---------------------------------------------------------------- k-means


def test_kmeans_separated_clouds():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 0.1, (20, 2)), rng.normal(10, 0.1, (15, 2))])
    lab = kmeans(pts, 2, seed=1)
    assert same_partition(lab, [0] * 20 + [1] * 15)


def test_kmeans_k_equals_n():
    pts = np.random.default_rng(1).standard_normal((6, 3))
    assert len(set(kmeans(pts, 6, seed=0).tolist())) == 6


def test_kmeans_duplicates_share_label():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0], [5.1, 5.0]])
    lab = kmeans(pts, 2, seed=0)
    assert lab[0] == lab[1] and lab[2] == lab[3] == lab[4]


def test_kmeans_deterministic():
    pts = np.random.default_rng(2).standard_normal((30, 2))
    assert np.array_equal(kmeans(pts, 4, seed=3), kmeans(pts, 4, seed=3))


@given(st.integers(0, 10**6), st.integers(1, 15))
def test_kmeans_uses_every_cluster(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    pts = np.round(rng.standard_normal((n, 2)), 0)  # many duplicates
    distinct = len(np.unique(pts, axis=0))
    lab = kmeans(pts, k, seed=seed)
    assert lab.min() >= 0 and lab.max() < k
    if k <= distinct:
        assert len(np.unique(lab)) == k


# ---------------------------------------------------------------- files


def test_load_example(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# two groups\n0: 0 1 2\n1: 3 4\n")
    g = load_grouping(p, 5)
    assert g.n_groups == 2 and g.members(1).tolist() == [3, 4]


def test_load_duplicate_rejected_with_line(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0: 0 1 3\n1: 2 3 4\n")
    with pytest.raises(FormatError, match="line 2"):
        load_grouping(p, 5)


def test_load_missing_attribute(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("0: 0 1\n1: 3\n")
    with pytest.raises(FormatError, match="not assigned"):
        load_grouping(p, 4)


@pytest.mark.parametrize("text", ["0 1 2\n", "0: a b\n", "0: 0\n0: 1\n", "1: 0 1\n", "0: 0 9\n"])
def test_load_malformed(tmp_path, text):
    p = tmp_path / "g.txt"
    p.write_text(text)
    with pytest.raises(FormatError):
        load_grouping(p, 2)


def test_load_85_attributes_10_groups(tmp_path):
    rng = np.random.default_rng(0)
    perm = rng.permutation(85)
    sizes = [9, 8, 12, 6, 10, 7, 11, 5, 9, 8]
    groups, start = [], 0
    for s in sizes:
        groups.append(sorted(perm[start : start + s].tolist()))
        start += s
    p = tmp_path / "sem.txt"
    p.write_text("".join(f"{i}: {' '.join(map(str, g))}\n" for i, g in enumerate(groups)))
    g = load_grouping(p, 85)
    assert g.n_groups == 10 and g.sizes().sum() == 85
    assert g.sizes().tolist() == sizes


@given(st.integers(0, 10**6), st.integers(1, 20))
def test_write_load_round_trip(seed, D):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    L = int(rng.integers(1, D + 1))
    a = np.concatenate([np.arange(L), rng.integers(0, L, D - L)])
    g = Grouping(a[rng.permutation(D)])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "g.txt"
        write_grouping(g, path)
        assert load_grouping(path, D) == g
    assert format_grouping(g).count("\n") == g.n_groups


@pytest.mark.parametrize("bad", [[1, 1], [0, 2], [-1, 0], []])
def test_grouping_validation(bad):
    with pytest.raises(InputError):
        Grouping(np.array(bad, dtype=np.int64))


def test_order_round_trip():
    g = Grouping(np.array([2, 0, 1, 0, 2]))
    order = g.order()
    inverse = np.argsort(order)
    x = np.arange(5) * 10
    assert np.array_equal(x[order][inverse], x)
