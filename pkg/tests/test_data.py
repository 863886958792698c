from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from galzsl.data import (
    Dataset,
    SplitDef,
    binarize_attributes,
    cs_split_greedy,
    exhaustive_best_shift,
    load_dataset,
    random_split,
    read_features,
    split_audit,
    split_shift,
    write_dataset,
    write_features,
)
from galzsl.errors import FormatError, InputError


def small_dataset():
    """3 instances, 2 classes with instances, 2 attributes (a third, empty class serves as val)."""
    return Dataset(
        np.array([[0.5, -1.25], [3.0, 0.0], [1e-3, 7.5]], dtype=np.float32),
        np.array([0, 1, 1]),
        np.array([[0.2, 1.0], [0.9, 0.1], [0.3, 0.3]]),
        SplitDef([0], [2], [1]),
    )


def random_dataset(seed, C=8, D=5, per_class=3, split=None):
    rng = np.random.default_rng(seed)
    attrs = rng.random((C, D))
    labels = np.repeat(np.arange(C), per_class)
    feats = rng.standard_normal((labels.size, 4)).astype(np.float32)
    split = split or SplitDef(range(C - 4), range(C - 4, C - 2), range(C - 2, C))
    return Dataset(feats, labels, attrs, split)


# ------------------------------------------------------------------ I/O


def test_small_round_trip_bit_exact(tmp_path):
    ds = small_dataset()
    write_dataset(tmp_path, ds)
    back = load_dataset(tmp_path)
    assert back.features.tobytes() == ds.features.tobytes()
    assert np.array_equal(back.labels, ds.labels)
    assert back.attributes.tobytes() == ds.attributes.tobytes()
    assert back.split == ds.split
    write_dataset(tmp_path / "again", back)
    for name in ("features.bin", "labels.txt", "attributes.csv", "splits.txt"):
        assert (tmp_path / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


@given(st.integers(0, 10**6))
def test_random_round_trip(seed):
    import tempfile

    ds = random_dataset(seed)
    with tempfile.TemporaryDirectory() as tmp:
        write_dataset(tmp, ds)
        back = load_dataset(tmp)
    assert back.features.tobytes() == ds.features.tobytes()
    assert back.attributes.tobytes() == ds.attributes.tobytes()
    assert back.split == ds.split


def test_features_header_layout(tmp_path):
    write_features(tmp_path / "f.bin", np.ones((2, 3), dtype=np.float32))
    raw = (tmp_path / "f.bin").read_bytes()
    assert raw[:4] == b"GALF"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:16], "little") == 2 and int.from_bytes(raw[16:24], "little") == 3
    assert len(raw) == 24 + 24


def test_label_out_of_range(tmp_path):
    write_dataset(tmp_path, random_dataset(0, C=5))
    (tmp_path / "labels.txt").write_text("7\n" * 15)
    with pytest.raises(FormatError, match="label 7"):
        load_dataset(tmp_path)


def test_truncated_features(tmp_path):
    write_dataset(tmp_path, random_dataset(0))
    p = tmp_path / "features.bin"
    p.write_bytes(p.read_bytes()[:-6])
    with pytest.raises(FormatError, match="truncated") as err:
        load_dataset(tmp_path)
    assert err.value.offset is not None and "byte" in str(err.value)


def test_bad_magic(tmp_path):
    p = tmp_path / "f.bin"
    write_features(p, np.ones((1, 1)))
    p.write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(FormatError, match="magic"):
        read_features(p)


def test_bad_version(tmp_path):
    p = tmp_path / "f.bin"
    write_features(p, np.ones((1, 1)))
    raw = bytearray(p.read_bytes())
    raw[4] = 2
    p.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        read_features(p)


def test_n_mismatch(tmp_path):
    write_dataset(tmp_path, random_dataset(0))
    (tmp_path / "labels.txt").write_text("0\n1\n")
    with pytest.raises(FormatError, match="N ="):
        load_dataset(tmp_path)


@pytest.mark.parametrize(
    "text,match",
    [("a,b\n1,2\n", "header"), ("attr_0,attr_1\n1\n", "expected 2"), ("attr_0\nx\n", "non-numeric"), ("", "empty")],
)
def test_attribute_file_errors(tmp_path, text, match):
    write_dataset(tmp_path, random_dataset(0))
    (tmp_path / "attributes.csv").write_text(text)
    with pytest.raises(FormatError, match=match):
        load_dataset(tmp_path)


@pytest.mark.parametrize("text", ["train: 0 1\nval: 2\n", "train: 0\nval: 1\ntest: x\n", "foo: 1\n"])
def test_split_file_errors(tmp_path, text):
    write_dataset(tmp_path, random_dataset(0))
    (tmp_path / "splits.txt").write_text(text)
    with pytest.raises(FormatError):
        load_dataset(tmp_path)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError, match="missing"):
        load_dataset(tmp_path)


def test_overlapping_split():
    with pytest.raises(InputError):
        SplitDef([0, 1], [1], [2])


def test_split_out_of_range():
    with pytest.raises(InputError):
        random_dataset(0, split=SplitDef([0], [1], [99]))


# ------------------------------------------------------------ binarize


def test_binarize_examples():
    assert binarize_attributes(np.array([[0.0], [1.0]]))[:, 0].tolist() == [0, 1]
    assert binarize_attributes(np.array([[10.0], [20.0], [30.0]]))[:, 0].tolist() == [0, 0, 1]
    assert binarize_attributes(np.array([[0.4, 3.0], [0.4, 5.0]]))[:, 0].tolist() == [0, 0]


@given(st.integers(0, 10**6))
def test_binarize_idempotent(seed):
    a = np.random.default_rng(seed).random((6, 4))
    b = binarize_attributes(a)
    assert np.array_equal(binarize_attributes(b), b)


# ------------------------------------------------------------ CS split


def test_cs_split_toy_example():
    attrs = np.array([[1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 0]], dtype=float)
    split = cs_split_greedy(attrs, 2, 0, 2, seed=0)
    bits = binarize_attributes(attrs).astype(float)
    got = split_shift(bits, split.train_classes, split.test_classes)
    assert got == pytest.approx(exhaustive_best_shift(attrs, 2), abs=1e-12)


def test_cs_split_planted_halves():
    pos = [[1, 1], [0, 0], [1, 1], [0, 0]]  # the pair agrees
    neg = [[1, 0], [0, 1], [1, 0], [0, 1]]  # the pair disagrees
    attrs = np.array(pos + neg, dtype=float)
    split = cs_split_greedy(attrs, 4, 0, 4, seed=0)
    assert set(split.test_classes) in ({0, 1, 2, 3}, {4, 5, 6, 7})


@given(st.integers(0, 10**6))
def test_cs_split_contract(seed):
    rng = np.random.default_rng(seed)
    C = int(rng.integers(4, 12))
    n_test = int(rng.integers(1, C - 2))
    n_val = int(rng.integers(0, C - n_test))
    n_train = C - n_test - n_val
    if n_train < 1:
        return
    attrs = (rng.random((C, 5)) < 0.5).astype(float)
    s = cs_split_greedy(attrs, n_train, n_val, n_test, seed=seed)
    assert (len(s.train_classes), len(s.val_classes), len(s.test_classes)) == (n_train, n_val, n_test)
    assert sorted(s.train_classes + s.val_classes + s.test_classes) == list(range(C))
    assert s == cs_split_greedy(attrs, n_train, n_val, n_test, seed=seed)


def test_cs_split_infeasible():
    with pytest.raises(InputError):
        cs_split_greedy(np.eye(4), 2, 1, 2)


def _random_attrs(rng, C, D):
    return (rng.random((C, D)) < rng.uniform(0.3, 0.7)).astype(float)


def test_greedy_matches_exhaustive_small():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        C = int(rng.integers(4, 9))
        n_test = int(rng.integers(1, 4))
        attrs = _random_attrs(rng, C, int(rng.integers(3, 8)))
        s = cs_split_greedy(attrs, C - n_test, 0, n_test, seed=trial)
        bits = binarize_attributes(attrs).astype(float)
        assert split_shift(bits, s.train_classes, s.test_classes) == pytest.approx(
            exhaustive_best_shift(attrs, n_test), abs=1e-12
        ), trial


def test_exhaustive_oracle_direct():
    attrs = np.array([[1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 0]], dtype=float)
    bits = binarize_attributes(attrs).astype(float)
    vals = [split_shift(bits, [c for c in range(4) if c not in t], list(t)) for t in combinations(range(4), 2)]
    assert exhaustive_best_shift(attrs, 2) == max(vals)


@pytest.mark.parametrize("seed", range(10))
def test_greedy_beats_random_mean(seed):
    rng = np.random.default_rng(seed)
    attrs = _random_attrs(rng, 20, 10)
    bits = binarize_attributes(attrs).astype(float)
    s = cs_split_greedy(attrs, 12, 3, 5, seed=seed)
    greedy = split_shift(bits, s.train_classes + s.val_classes, s.test_classes)
    rand = []
    for _ in range(100):
        r = random_split(20, 12, 3, 5, rng)
        rand.append(split_shift(bits, r.train_classes + r.val_classes, r.test_classes))
    assert greedy > np.mean(rand)


# ------------------------------------------------------------ audit


def test_audit_no_shift():
    attrs = np.array([[1, 1, 0], [0, 0, 1], [1, 1, 0], [0, 0, 1], [1, 1, 0], [0, 0, 1]], dtype=float)
    labels = np.repeat(np.arange(6), 2)
    ds = Dataset(np.zeros((12, 2)), labels, attrs, SplitDef([0, 1], [2, 3], [4, 5]))
    a = split_audit(ds)
    assert a["mean"] == 0.0 and a["mean_at_top_50pct"] == 0.0
    assert a["instances"] == {"train": 4, "val": 4, "test": 4}


@pytest.mark.parametrize("seed", range(5))
def test_audit_cs_split_beats_random(seed):
    rng = np.random.default_rng(seed)
    attrs = rng.random((20, 10))
    ds = Dataset(np.zeros((40, 1)), np.repeat(np.arange(20), 2), attrs, SplitDef(range(12), range(12, 15), range(15, 20)))
    cs = cs_split_greedy(attrs, 12, 3, 5, seed=seed)
    rand = [split_audit(ds, random_split(20, 12, 3, 5, rng))["mean"] for _ in range(100)]
    assert split_audit(ds, cs)["mean"] >= np.mean(rand)
