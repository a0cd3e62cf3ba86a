import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sabce.data import (Dataset, SplitSpec, compute_centroids, kfold_indices, load_csv,
                        make_synthetic, planted_fixture, read_ground_truth, split,
                        split_indices, write_csv, write_ground_truth)
from sabce.errors import DataError
from sabce.numerics import make_rng


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_toy_csv(tmp_path):
    p = write(tmp_path, "a,b,c,label\n1,2,3,x\n4,5,6,y\n7,8,9,x\n0,1,2,y\n")
    ds = load_csv(p, "label")
    assert (ds.n, ds.d, ds.n_classes) == (4, 3, 2)
    assert ds.labels.tolist() == [0, 1, 0, 1]
    assert ds.class_names == ("x", "y")
    assert ds.feature_names == ("a", "b", "c")


def test_label_encoding_first_appearance(tmp_path):
    p = write(tmp_path, "cls,v\nzeta,1\nalpha,2\nzeta,3\n")
    ds = load_csv(p, 0)
    assert ds.class_names == ("zeta", "alpha")
    assert ds.labels.tolist() == [0, 1, 0]


def test_mean_imputation(tmp_path):
    p = write(tmp_path, "a,b,label\n1,10,x\n,20,y\n3,30,x\n5,40,y\n")
    ds = load_csv(p, "label", impute_missing=True)
    assert ds.x[1, 0] == pytest.approx((1 + 3 + 5) / 3)


def test_missing_without_impute_is_error(tmp_path):
    p = write(tmp_path, "a,b,label\n1,,x\n2,3,y\n")
    with pytest.raises(DataError, match="row 2.*'b'"):
        load_csv(p, "label")


def test_unparseable_cell_reports_position(tmp_path):
    p = write(tmp_path, "a,b,label\n1,2,x\n3,oops,y\n")
    with pytest.raises(DataError, match="row 3.*'b'"):
        load_csv(p, "label")


def test_single_class_is_error(tmp_path):
    p = write(tmp_path, "a,label\n1,x\n2,x\n")
    with pytest.raises(DataError, match="two classes"):
        load_csv(p, "label")


def test_csv_round_trip(tmp_path):
    ds, _ = make_synthetic(5, 4, [1], 2.0, 1.0, seed=3)
    write_csv(ds, tmp_path / "rt.csv")
    back = load_csv(tmp_path / "rt.csv", "label")
    assert np.array_equal(back.x, ds.x)
    assert np.array_equal(back.labels, ds.labels)
    assert back.feature_names == ds.feature_names
    assert back.class_names == ds.class_names


def test_centroid_two_points():
    ds = Dataset([[0, 0], [2, 2], [5, 5]], [0, 0, 1], ["a", "b"], ["p", "q"])
    c = compute_centroids(ds)
    assert c.base[0].tolist() == [1.0, 1.0]
    assert c.base[1].tolist() == [5.0, 5.0]  # singleton class
    assert np.array_equal(c.adapted, c.base) and c.epoch_stamp == 0


def test_centroids_match_loop_oracle(rng):
    x = rng.standard_normal((30, 5))
    y = rng.integers(0, 3, 30)
    y[:3] = [0, 1, 2]
    c = compute_centroids(Dataset(x, y, list("abcde"), ["a", "b", "c"]))
    for j in range(3):
        total, count = np.zeros(5), 0
        for i in range(30):
            if y[i] == j:
                total += x[i]
                count += 1
        np.testing.assert_allclose(c.base[j], total / count, atol=1e-12)


def test_adapted_centroids_are_base_times_spl():
    ds = Dataset([[1.0, 2.0], [3.0, 4.0]], [0, 1], ["a", "b"], ["p", "q"])
    c = compute_centroids(ds)
    assert np.array_equal(c.adapt(np.ones(2), 1).adapted, c.base)
    assert c.adapt(np.array([0.5, -1.0]), 4).adapted.tolist() == [[0.5, -2.0], [1.5, -4.0]]


def balanced(n_per_class, m):
    return np.repeat(np.arange(m), n_per_class)


def test_split_50_50_exact():
    labels = balanced(50, 2)
    tr, va, te = split_indices(labels, SplitSpec((0.5, 0.0, 0.5), True, 1))
    assert va.size == 0
    for part in (tr, te):
        assert np.bincount(labels[part]).tolist() == [25, 25]


def test_split_deterministic():
    labels = balanced(20, 3)
    a = split_indices(labels, SplitSpec((0.7, 0.1, 0.2), True, 42))
    b = split_indices(labels, SplitSpec((0.7, 0.1, 0.2), True, 42))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_split_70_10_20_on_975_samples():
    # class sizes of an 8-class, 975-sample set
    sizes = [150, 135, 150, 135, 135, 105, 90, 75]
    labels = np.repeat(np.arange(8), sizes)
    tr, va, te = split_indices(labels, SplitSpec((0.7, 0.1, 0.2), True, 0))
    assert abs(tr.size - 682) <= 1 and abs(va.size - 97) <= 1 and abs(te.size - 196) <= 1
    for part, f in ((tr, 0.7), (va, 0.1), (te, 0.2)):
        counts = np.bincount(labels[part], minlength=8)
        assert counts.min() >= 1
        assert np.all(np.abs(counts - np.array(sizes) * f) <= 1.0 + 1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(3, 40), min_size=2, max_size=6), st.integers(0, 10_000),
       st.sampled_from([(0.5, 0.0, 0.5), (0.7, 0.1, 0.2), (0.8, 0.2, 0.0), (0.6, 0.2, 0.2)]))
def test_split_is_stratified_partition(sizes, seed, fr):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    parts = split_indices(labels, SplitSpec(fr, True, seed))
    everything = np.sort(np.concatenate(parts))
    assert np.array_equal(everything, np.arange(labels.size))
    for part, f in zip(parts, fr):
        if f > 0:
            assert set(labels[part]) == set(range(len(sizes)))


def test_split_rejects_tiny_class():
    labels = np.array([0, 0, 0, 0, 1, 1])
    with pytest.raises(DataError, match="fewer samples"):
        split_indices(labels, SplitSpec((0.6, 0.2, 0.2), True, 0))


def test_split_rejects_bad_fractions():
    with pytest.raises(DataError):
        SplitSpec((0.5, 0.5, 0.5))


def test_train_centroids_use_train_rows_only():
    ds, _ = make_synthetic(20, 3, [0], 2.0, 1.0, seed=4)
    tr, _, te = split(ds, SplitSpec((0.5, 0.0, 0.5), True, 9))
    c = compute_centroids(tr)
    for j in range(2):
        rows = tr.indices[tr.labels == j]
        np.testing.assert_allclose(c.base[j], ds.x[rows].mean(axis=0), atol=1e-12)
    assert not set(tr.indices) & set(te.indices)


def test_kfold_covers_every_row_once():
    labels = balanced(11, 3)
    held = np.concatenate([h for _, h in kfold_indices(labels, 5, 0)])
    assert np.array_equal(np.sort(held), np.arange(labels.size))


def test_synthetic_null_shift_identical_distribution():
    ds, _ = make_synthetic(100, 5, [0, 1], 0.0, 1.0, seed=0)
    ds2, _ = make_synthetic(100, 5, [0, 1], 2.0, 1.0, seed=0)
    # the shift only touches class-1 informative columns
    diff = ds2.x - ds.x
    assert np.all(diff[:100] == 0) and np.all(diff[100:, 2:] == 0)
    assert np.allclose(diff[100:, :2], 2.0)


def test_synthetic_noiseless_values():
    ds, truth = make_synthetic(4, 6, [2, 4], 2.0, 0.0, seed=1)
    assert truth == [2, 4]
    assert set(np.unique(ds.x[:, truth])) == {0.0, 2.0}
    assert np.all(ds.x[ds.labels == 1][:, truth] == 2.0)
    assert np.all(ds.x[:, [0, 1, 3, 5]] == 0.0)


def welch_t(a, b):
    return abs(a.mean() - b.mean()) / np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)


def test_synthetic_informative_columns_have_largest_t():
    wins = 0
    for seed in range(20):
        ds, truth = make_synthetic(200, 100, range(10), 2.0, 1.0, seed=seed)
        t = np.array([welch_t(ds.x[ds.labels == 0, j], ds.x[ds.labels == 1, j])
                      for j in range(100)])
        noise = np.delete(t, truth)
        wins += t[truth].min() > noise.max()
    assert wins == 20


def test_ground_truth_sidecar(tmp_path):
    write_ground_truth([3, 1, 7], tmp_path / "truth.txt")
    assert (tmp_path / "truth.txt").read_text() == "3\n1\n7\n"
    assert read_ground_truth(tmp_path / "truth.txt") == [3, 1, 7]


def test_planted_fixture_extra_noise():
    ds, truth = planted_fixture(0, extra_noise=20)
    assert ds.d == 120 and truth == list(range(10))
    assert ds.x[:, 100:].std() > 2.5
