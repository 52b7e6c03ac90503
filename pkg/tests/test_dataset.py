import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsurf import dataset as ds
from qsurf.errors import DataError


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_maps_positive_label(tmp_path):
    p = _write(tmp_path, "x1,x2,cls\n1,2,a\n3,4,b\n5,6,a\n")
    d = ds.load_csv(p, "cls", "a")
    np.testing.assert_array_equal(d.labels, [1, -1, 1])
    np.testing.assert_array_equal(d.points, [[1, 2], [3, 4], [5, 6]])
    assert d.feature_names == ["x1", "x2"]
    # by index, label first
    p2 = _write(tmp_path, "cls,x1\na,1\nb,2\n", "e.csv")
    np.testing.assert_array_equal(ds.load_csv(p2, 0, "b").labels, [-1, 1])


def test_load_csv_nan_cell_names_row_and_column(tmp_path):
    p = _write(tmp_path, "x1,x2,y\n1,2,1\n3,nan,-1\n")
    with pytest.raises(DataError, match=r"row 2.*'x2'"):
        ds.load_csv(p, "y", "1")
    p = _write(tmp_path, "x1,x2,y\n1,abc,1\n", "g.csv")
    with pytest.raises(DataError, match=r"row 1.*'x2'.*abc"):
        ds.load_csv(p, "y", "1")


def test_load_csv_header_only(tmp_path):
    with pytest.raises(DataError, match="empty dataset"):
        ds.load_csv(_write(tmp_path, "x1,y\n"), "y", "1")


def test_load_csv_missing_column_and_single_class(tmp_path):
    p = _write(tmp_path, "x1,y\n1,1\n2,1\n")
    with pytest.raises(DataError, match="not found"):
        ds.load_csv(p, "label", "1")
    with pytest.warns(UserWarning, match="single class"):
        d = ds.load_csv(p, "y", "1")
    assert d.is_single_class


def test_csv_round_trip_is_exact(tmp_path):
    d = ds.synth_quadratic(20, rng_seed=4)
    p = _write(tmp_path, ds.dataset_to_csv(d))
    back = ds.load_csv(p, "y", "1")
    np.testing.assert_array_equal(back.points, d.points)
    np.testing.assert_array_equal(back.labels, d.labels)


def test_normalizer_examples():
    X = np.array([[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]])
    p = ds.fit_normalizer(X)
    np.testing.assert_allclose(ds.apply_normalizer(p, X), [[0, 0], [0.5, 0], [1, 0]])
    np.testing.assert_allclose(ds.apply_normalizer(p, [[12.0, 3.0]]), [[1.2, 0]])
    # clamp
    np.testing.assert_allclose(ds.apply_normalizer(p, [[100.0, 3.0], [-50.0, 3.0]]),
                               [[1.5, 0], [-0.5, 0]])


@given(st.integers(0, 10_000))
def test_normalizer_properties(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(int(rng.integers(2, 30)), 3)) * rng.uniform(0.1, 100)
    p = ds.fit_normalizer(X)
    Z = ds.apply_normalizer(p, X)
    assert Z.min() >= 0 and Z.max() <= 1
    np.testing.assert_allclose(Z.min(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(Z.max(axis=0), 1, atol=1e-12)
    # idempotent on normalized training data
    np.testing.assert_allclose(ds.apply_normalizer(ds.fit_normalizer(Z), Z), Z, atol=1e-12)
    assert np.all(p.hi >= p.lo)


def test_universum_pair_mean():
    d = ds.LabeledDataset([[0.0, 0.0], [2.0, 2.0]], [1, -1])
    u = ds.generate_universum(d, 1.0, 0)
    np.testing.assert_array_equal(u.points, [[1.0, 1.0]])
    np.testing.assert_array_equal(u.sources, [[0, 1]])


def test_universum_ten_percent_of_100_per_class():
    d = ds.synth_quadratic(100, rng_seed=0)
    u = ds.generate_universum(d, 0.1, 3)
    assert u.r == 10
    u2 = ds.generate_universum(d, 0.1, 3)
    np.testing.assert_array_equal(u.points, u2.points)
    # unequal classes: r is the smaller count
    sub = d.subset(np.r_[0:100, 100:130])
    assert ds.generate_universum(sub, 0.1, 0).r == 3


@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_universum_in_pair_hull(seed, frac):
    d = ds.synth_normal(15, 3, 1.0, rng_seed=seed)
    u = ds.generate_universum(d, frac, seed)
    a = d.points[u.sources[:, 0]]
    b = d.points[u.sources[:, 1]]
    assert np.all(d.labels[u.sources[:, 0]] == 1) and np.all(d.labels[u.sources[:, 1]] == -1)
    assert np.all(u.points >= np.minimum(a, b) - 1e-15)
    assert np.all(u.points <= np.maximum(a, b) + 1e-15)
    assert len(set(u.sources[:, 0])) == u.r and len(set(u.sources[:, 1])) == u.r


def test_universum_errors():
    d = ds.LabeledDataset([[0.0], [1.0]], [1, 1])
    with pytest.raises(DataError):
        ds.generate_universum(d, 0.1, 0)
    d = ds.LabeledDataset([[0.0], [1.0]], [1, -1])
    for f in (0.0, 1.5):
        with pytest.raises(DataError):
            ds.generate_universum(d, f, 0)


def test_expand_universum():
    e = ds.expand_universum(ds.UniversumSet([[1.0, 1.0]]))
    np.testing.assert_array_equal(e.points, [[1, 1], [1, 1]])
    np.testing.assert_array_equal(e.labels, [1, -1])
    empty = ds.expand_universum(ds.UniversumSet(np.zeros((0, 2))), 2)
    assert empty.r == 0 and empty.points.shape == (0, 2)
    e3 = ds.expand_universum(ds.UniversumSet(np.arange(6.0).reshape(3, 2)))
    assert e3.points.shape == (6, 2)
    np.testing.assert_array_equal(e3.labels, [1, 1, 1, -1, -1, -1])
    np.testing.assert_array_equal(e3.points[:3], e3.points[3:])
    assert e3.labels.sum() == 0


def test_kfold_examples():
    d = ds.LabeledDataset(np.arange(10.0)[:, None], [1] * 6 + [-1] * 4)
    # 4 negatives < 5 folds: unstratified, still equal sizes
    with pytest.warns(UserWarning):
        folds = ds.kfold_split(d, 5, 0)
    assert [t.size for _, t in folds] == [2] * 5
    f2 = ds.kfold_split(d, 2, 0)
    for _, test in f2:
        assert (d.labels[test] > 0).sum() == 3 and (d.labels[test] < 0).sum() == 2


@given(st.integers(2, 60), st.integers(2, 7), st.integers(0, 1000))
def test_kfold_properties(m, k, seed):
    if m < k:
        return
    rng = np.random.default_rng(seed)
    labels = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    d = ds.LabeledDataset(rng.normal(size=(m, 2)), labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        folds = ds.kfold_split(d, k, seed)
        again = ds.kfold_split(d, k, seed)
    tests = np.concatenate([t for _, t in folds])
    np.testing.assert_array_equal(np.sort(tests), np.arange(m))
    for (tr, te), (tr2, te2) in zip(folds, again):
        assert np.intersect1d(tr, te).size == 0
        assert tr.size + te.size == m
        np.testing.assert_array_equal(te, te2)
    sizes = [t.size for _, t in folds]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_stratification_within_one_point():
    d = ds.synth_quadratic(37, rng_seed=1).subset(np.r_[0:37, 37:60])
    pos_total = (d.labels > 0).sum()
    for _, te in ds.kfold_split(d, 5, 9):
        assert abs((d.labels[te] > 0).sum() - pos_total / 5) <= 1


def test_kfold_small_class_falls_back_with_warning():
    d = ds.LabeledDataset(np.arange(8.0)[:, None], [1] * 6 + [-1] * 2)
    with pytest.warns(UserWarning, match="unstratified"):
        folds = ds.kfold_split(d, 4, 0)
    assert len(folds) == 4
    with pytest.raises(DataError):
        ds.kfold_split(d, 1, 0)


def test_synth_quadratic_geometry():
    d = ds.synth_quadratic(50, rng_seed=2)
    t = np.einsum("ij,jk,ik->i", d.points, ds.ELLIPSE_Q, d.points) - 1.0
    assert np.all(t[d.labels < 0] <= -0.15) and np.all(t[d.labels > 0] >= 0.15)
    assert ds.quadratic_label([0.0, 0.0]) == -1
    again = ds.synth_quadratic(50, rng_seed=2)
    np.testing.assert_array_equal(d.points, again.points)
    noisy = ds.synth_quadratic(200, noise=0.3, separable=False, rng_seed=2)
    truth = np.array([ds.quadratic_label(x) for x in noisy.points])
    # noise flips some labels but not most
    agree = np.mean(truth == noisy.labels)
    assert 0.6 < agree < 1.0


def test_synth_linear_has_recorded_margin():
    d = ds.synth_linear(80, 3, 0.1, rng_seed=5)
    w, b = np.array(d.meta["w"]), d.meta["b"]
    assert np.all(d.labels * (d.points @ w + b) >= 0.1)
    np.testing.assert_array_equal(d.points, ds.synth_linear(80, 3, 0.1, rng_seed=5).points)


def test_synth_normal_determinism_and_shape():
    a = ds.synth_normal(30, 4, 2.0, rng_seed=1)
    b = ds.synth_normal(30, 4, 2.0, rng_seed=1)
    assert a.points.shape == (60, 4)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.class_counts() == (30, 30)


def test_dataset_validation():
    with pytest.raises(DataError):
        ds.LabeledDataset([[0.0], [1.0]], [1, 0])
    with pytest.raises(DataError):
        ds.LabeledDataset([[0.0], [np.inf]], [1, -1])
    with pytest.raises(DataError):
        ds.LabeledDataset([[0.0], [1.0]], [1])
