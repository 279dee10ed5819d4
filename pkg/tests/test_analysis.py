import json

import numpy as np
import pytest
from scipy import stats

from holomera.analysis import compare, estimate_correlations, write_plot_data
from holomera.simulator import NoiseModel, ShotRecord


def record(values, basis="X"):
    return ShotRecord(np.asarray(values, dtype=np.int8), 0, NoiseModel(), "python", basis)


def iid(rng, n, L, p_plus):
    return record(np.where(rng.random((n, L)) < p_plus, 1, -1))


def test_all_plus_gives_zero_with_zero_error():
    t = estimate_correlations(record(np.ones((100, 8))), 3)
    assert np.array_equal(t.distances, np.arange(1, 6))
    assert np.all(t.connected == 0) and np.all(t.connected_err == 0)
    assert np.all(t.onsite == 1) and np.all(t.onsite_err == 0)
    rep = compare(t, np.zeros(5), windows=[2])
    assert rep.max_error == 0 and np.all(rep.z_scores == 0)


def test_perfect_correlation(rng):
    col = np.where(rng.random(4000) < 0.5, 1, -1)
    t = estimate_correlations(record(np.repeat(col[:, None], 6, axis=1)), 1)
    m = col.mean()
    np.testing.assert_allclose(t.connected, 1 - m**2, atol=1e-12)


def test_connected_matches_direct_formula(rng):
    x = iid(rng, 500, 7, 0.6)
    t = estimate_correlations(x, 2)
    v = x.values.astype(float)
    want = [np.mean(v[:, 1] * v[:, j]) - v[:, 1].mean() * v[:, j].mean() for j in range(2, 7)]
    np.testing.assert_allclose(t.connected, want, atol=1e-14)


def test_jackknife_matches_brute_force_leave_one_out(rng):
    v = iid(rng, 60, 5, 0.7).values.astype(float)
    t = estimate_correlations(record(v), 1)
    reps = []
    for k in range(len(v)):
        w = np.delete(v, k, axis=0)
        reps.append(np.mean(w[:, :1] * w[:, 1:], axis=0) - w[:, 0].mean() * w[:, 1:].mean(axis=0))
    reps = np.array(reps)
    n = len(v)
    want = np.sqrt((n - 1) / n * np.sum((reps - reps.mean(0)) ** 2, axis=0))
    np.testing.assert_allclose(t.connected_err, want, rtol=1e-10)


def test_jackknife_error_close_to_analytic(rng):
    # independent +-1 with <x> = 0.4: Var(x) = 0.84 and SE(C) ~ Var(x) / sqrt(n)
    n = 20000
    t = estimate_correlations(iid(rng, n, 12, 0.7), 1)
    se = 0.84 / np.sqrt(n)
    assert np.all(np.abs(t.connected_err / se - 1) < 0.2)
    assert np.all(np.abs(t.connected) < 5 * se)
    np.testing.assert_allclose(t.onsite_err, np.sqrt(0.84 / n), rtol=0.05)


def test_z_scores_are_standard_normal(rng):
    z = []
    for _ in range(40):
        t = estimate_correlations(iid(rng, 2000, 12, 0.7), 1)
        z.extend(compare(t, np.zeros(11)).z_scores)
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_windows_and_mismatch(rng):
    t = estimate_correlations(iid(rng, 300, 10, 0.5), 2)
    ref = np.zeros(8)
    ref[5] = 3.0
    rep = compare(t, ref, windows=[3, 8])
    assert rep.window_argmax[8] == 6 and abs(rep.window_max[8] - rep.max_error) < 1e-15
    assert rep.window_max[3] < 1
    sub = compare(t, ref, distances=[1, 2])
    assert list(sub.distances) == [1, 2]
    assert json.loads(rep.to_json())["window_max"]["8"] == rep.window_max[8]
    with pytest.raises(ValueError):
        compare(t, np.zeros(3))
    with pytest.raises(ValueError):
        compare(t, ref, windows=[0])


def test_zero_error_with_nonzero_difference_is_infinite():
    t = estimate_correlations(record(np.ones((10, 3))), 1)
    assert np.all(np.isinf(compare(t, [0.5, 0.5]).z_scores))


def test_input_checks(rng):
    with pytest.raises(ValueError):
        estimate_correlations(iid(rng, 10, 4, 0.5), 5)
    with pytest.raises(ValueError):
        estimate_correlations(iid(rng, 1, 4, 0.5), 1)
    with pytest.raises(ValueError):
        estimate_correlations([record(np.ones((3, 4)), "X"), record(np.ones((3, 4)), "Z")], 1)
    with pytest.raises(ValueError):
        estimate_correlations([], 1)


def test_pooling_records(rng):
    a, b = iid(rng, 100, 5, 0.5), iid(rng, 50, 5, 0.5)
    t = estimate_correlations([a, b], 1)
    assert t.n_shots == 150


def test_serialization(rng):
    t = estimate_correlations(iid(rng, 50, 4, 0.5), 1, label="x")
    rows = t.to_csv().splitlines()
    assert rows[0] == "kind,index,mean,stderr,n_shots" and len(rows) == 1 + 4 + 3
    assert float(rows[-1].split(",")[2]) == t.connected[-1]
    plot = json.loads(write_plot_data([t], {"exact": [0.0, 0.0, 0.0]}))
    assert plot["series"][0]["x"] == [1, 2, 3] and plot["references"]["exact"] == [0.0] * 3
