import time

import numpy as np
import pytest

from qsurf import dataset as ds
from qsurf import harness as H
from qsurf.errors import SolverError
from qsurf.models import Hyperparams, ModelKind


@pytest.fixture(scope="module")
def sep():
    return ds.synth_quadratic(40, rng_seed=11)


def test_accuracy_examples():
    y = np.ones(10)
    p = y.copy()
    p[:2] = -1
    assert H.accuracy(p, y) == 80.0
    assert H.accuracy(y, y) == 100.0
    assert H.accuracy(-y, y) == 0.0
    with pytest.raises(ValueError):
        H.accuracy([], [])
    with pytest.raises(ValueError):
        H.accuracy([1, 1], [1])


def test_timed_is_nonnegative_and_nests():
    def inner():
        time.sleep(0.01)
        return 3

    def outer():
        return H.timed(inner)

    (val, t_in), t_out = H.timed(outer)
    assert val == 3 and t_in >= 0 and t_out >= t_in


def _same(a, b):
    return (a.fold_accuracies == b.fold_accuracies and a.mean_accuracy == b.mean_accuracy
            and all(np.array_equal(x.test_idx, y.test_idx)
                    and np.array_equal(x.universum_sources, y.universum_sources)
                    for x, y in zip(a.folds, b.folds)))


def test_cv_is_deterministic(sep):
    h = Hyperparams(2.0 ** 10, 1.0, 4.0, 0.05)
    a = H.cross_validate("l1-u-sqssvm", sep, h, 5, 3)
    b = H.cross_validate("l1-u-sqssvm", sep, h, 5, 3)
    assert _same(a, b)
    assert a.k == 5 and 0 <= a.mean_accuracy <= 100 and a.std_accuracy >= 0
    c = H.cross_validate("l1-u-sqssvm", sep, h, 5, 4)
    assert not all(np.array_equal(x.test_idx, y.test_idx) for x, y in zip(a.folds, c.folds))


def test_cv_uses_population_std(sep):
    r = H.cross_validate("sqssvm", sep, Hyperparams(1.0), 5, 0)
    assert r.std_accuracy == pytest.approx(np.std(r.fold_accuracies, ddof=0))


def test_no_leakage(sep):
    r = H.cross_validate("u-sqssvm", sep, Hyperparams(2.0 ** 10, 0.0, 4.0, 0.05), 5, 0)
    for f in r.folds:
        assert np.intersect1d(f.train_idx, f.test_idx).size == 0
        np.testing.assert_array_equal(f.norm_source, f.train_idx)
        assert f.universum_sources.size > 0
        assert np.all(np.isin(f.universum_sources, f.train_idx))
        assert not np.any(np.isin(f.universum_sources, f.test_idx))
        # the pair's first member is a +1 point, the second a -1 point
        assert np.all(sep.labels[f.universum_sources[:, 0]] == 1)
        assert np.all(sep.labels[f.universum_sources[:, 1]] == -1)


def test_separable_set_perfect_cv(sep):
    r = H.cross_validate("u-sqssvm", sep, Hyperparams(2.0 ** 20, 0.0, 16.0, 0.01), 5, 0)
    assert r.mean_accuracy == 100.0 and r.std_accuracy == 0.0


def test_small_class_fallback_is_reported():
    d = ds.synth_quadratic(20, rng_seed=0)
    d = d.subset(np.r_[0:20, 20:23])
    r = H.cross_validate("sqssvm", d, Hyperparams(4.0), 5, 0)
    assert any("unstratified" in w for w in r.warnings)


def test_failed_fold_is_flagged(sep, monkeypatch):
    real = H.train_model
    calls = {"n": 0}

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise SolverError("synthetic failure")
        return real(*a, **kw)

    monkeypatch.setattr(H, "train_model", flaky)
    r = H.cross_validate("sqssvm", sep, Hyperparams(16.0), 5, 0)
    assert r.failed_folds == [1]
    assert r.fold_accuracies[1] == 0.0 and r.k == 5
    assert any("synthetic failure" in w for w in r.warnings)


def test_indistinguishable_classes_score_near_chance():
    d = ds.synth_normal(100, 2, 0.0, rng_seed=4)
    r = H.cross_validate("sqssvm", d, Hyperparams(1.0), 5, 0)
    assert 40.0 <= r.mean_accuracy <= 60.0


def test_grid_points_per_kind():
    g = H.GridSpec(mu=[0, 1], lam=[None, 2], c_u=[0], eps=[-1, 0])
    assert len(g.points("sqssvm")) == 2
    assert len(g.points("l1-sqssvm")) == 4
    assert len(g.points("l1-u-sqssvm")) == 8
    assert {h.lam for h in g.points("l1-sqssvm")} == {0.0, 4.0}
    with pytest.raises(ValueError):
        H.GridSpec(mu=[])
    full = H.GridSpec()
    assert (full.mu[0], full.mu[-1], full.lam[0], full.lam[-1]) == (-4, 20, -8, 20)
    assert (full.c_u[0], full.c_u[-1], full.eps[0], full.eps[-1]) == (-4, 10, -8, 0)


def test_one_point_grid(sep):
    g = H.GridSpec(mu=[4], lam=[0], c_u=[0], eps=[0])
    res = H.grid_search("sqssvm", sep, g, 5, 1)
    direct = H.cross_validate("sqssvm", sep, g.points("sqssvm")[0], 5, 1)
    assert len(res.table) == 1
    assert _same(res.best, direct)


def test_grid_best_dominates_and_ties_favor_small_penalties(sep):
    g = H.GridSpec(mu=[-2, 4, 10, 20], lam=[None, 0], c_u=[0], eps=[0])
    res = H.grid_search("l1-sqssvm", sep, g, 5, 0)
    assert all(res.best.mean_accuracy >= r.mean_accuracy for r in res.table)
    tied = [r for r in res.table if r.mean_accuracy == res.best.mean_accuracy
            and r.std_accuracy == res.best.std_accuracy]
    assert res.best.chosen == min((r.chosen for r in tied),
                                  key=lambda h: (h.mu, h.lam, h.c_u, h.eps))


def test_l1_at_zero_lambda_tracks_base_in_cv(sep):
    h = Hyperparams(2.0 ** 6, 0.0)
    a = H.cross_validate("sqssvm", sep, h, 5, 0)
    b = H.cross_validate("l1-sqssvm", sep, h, 5, 0)
    assert abs(a.mean_accuracy - b.mean_accuracy) <= 0.5


def test_pool_matches_serial(sep, monkeypatch):
    g = H.GridSpec(mu=[0, 6], lam=[0], c_u=[0], eps=[0])
    serial = H.grid_search("sqssvm", sep, g, 3, 0, workers=1)
    monkeypatch.setenv("QSURF_THREADS", "2")
    pooled = H.grid_search("sqssvm", sep, g, 3, 0, workers=2)
    assert [r.fold_accuracies for r in serial.table] == [r.fold_accuracies for r in pooled.table]


def test_pool_size_cap(monkeypatch):
    monkeypatch.setenv("QSURF_THREADS", "3")
    assert H.pool_size(8) == 3
    assert H.pool_size(2) == 2
    monkeypatch.setenv("QSURF_THREADS", "x")
    with pytest.raises(ValueError):
        H.pool_size(2)


def test_colormap_shape_and_range(sep):
    res = H.colormap_sweep("u-sqssvm", sep, 2.0 ** 10, 0.0, [0.0, 1.0, 8.0], [0.01, 0.25], 3, 0)
    assert res.matrix.shape == (3, 2)
    assert np.all((res.matrix >= 0) & (res.matrix <= 100))
    assert res.best == res.matrix.max()
    assert res.best_point[0] in res.cu_values


def test_rate_curve(sep):
    h = Hyperparams(2.0 ** 10, 0.0, 4.0, 0.05)
    one = H.universum_rate_curve("u-sqssvm", sep, h, [0.2], repeats=2, k=3, seed=5)
    assert len(one) == 1 and len(one[0].runs) == 2
    again = H.universum_rate_curve("u-sqssvm", sep, h, [0.2], repeats=2, k=3, seed=5)
    assert one[0].runs == again[0].runs
    curve = H.universum_rate_curve("u-sqssvm", sep, h, [0.05, 0.3], repeats=3, k=3, seed=5)
    assert curve[-1].mean >= curve[0].mean - 2.0
    with pytest.raises(ValueError):
        H.universum_rate_curve("u-sqssvm", sep, h, [0.0])


def test_ls_solver_is_fast():
    d = ds.synth_quadratic(100, rng_seed=0)
    from qsurf.models import train_model
    _, t = H.timed(train_model, ModelKind.LS_L1_U_SQSSVM, d, None,
                   Hyperparams(2.0 ** 10, 1.0, 0.0, 0.0))
    assert t < 1.0


def test_tables_round_trip(sep, tmp_path):
    cv = H.cross_validate("u-sqssvm", sep, Hyperparams(2.0 ** 4, 0.0, 2.0, 1 / 3), 3, 0)
    grid = H.grid_search("sqssvm", sep, H.GridSpec(mu=[-3, 0], lam=[0], c_u=[0], eps=[0]), 3, 0)
    cmap = H.colormap_sweep("u-sqssvm", sep, 8.0, 0.0, [0.5], [0.1, 0.3], 3, 0)
    curve = H.universum_rate_curve("u-sqssvm", sep, Hyperparams(8.0, 0.0, 1.0, 0.1), [0.1],
                                   repeats=2, k=3)
    tables = [(H.cv_table(cv), H.CV_TYPES), (H.grid_table(grid), H.GRID_TYPES),
              (H.colormap_table(cmap), H.COLORMAP_TYPES), (H.urate_table(curve), H.URATE_TYPES),
              (H.timings_table(H.cv_timings(cv)), H.TIMING_TYPES)]
    for t, types in tables:
        path = tmp_path / "t.csv"
        t.write(path)
        back = H.Table.from_csv(path.read_text(), types)
        assert back == t
        assert back.to_csv() == t.to_csv()
    # six-decimal fixed point for accuracies
    assert H.cv_table(cv).to_csv().splitlines()[1].split(",")[2].split(".")[1].__len__() == 6


def test_table_rounds_accuracy_cells():
    t = H.Table(["a"], ["acc"], [[100 / 3]])
    assert t.rows[0][0] == round(100 / 3, 6)
    assert t.to_csv() == "a\n33.333333\n"
    with pytest.raises(ValueError):
        t.add(1.0, 2.0)
