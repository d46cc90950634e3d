import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from ecopersist.models import LyapunovPair, boundary_faces, logistic_model, logistic_pair
from ecopersist.occupation import (
    EmpiricalMeasure,
    accumulate,
    export_histogram_csv,
    merge,
    persistence_statistic,
    persistence_sweep,
    tightness_diagnostic,
    tv_distance,
    uniform_edges,
)
from ecopersist.sde import SdeSimConfig, Trajectory, simulate_sde


def _traj(states, dt=1.0):
    arr = np.atleast_2d(np.asarray(states, dtype=float))
    if arr.shape[0] == 1:
        arr = arr.T
    times = np.arange(arr.shape[0], dtype=float) * dt
    return Trajectory(times, arr)


def test_constant_trajectory_fills_one_bin():
    m = accumulate(_traj([0.55, 0.55, 0.55]), [uniform_edges(0, 1, 10)])
    assert m.mass[5] == 1.0
    assert m.mass.sum() == 1.0
    assert m.out_of_window_mass == 0.0


def test_alternating_trajectory_splits_mass_evenly():
    m = accumulate(_traj([0.1, 0.9, 0.1, 0.9, 0.1]), [uniform_edges(0, 1, 2)])
    assert m.mass[0] == 0.5 and m.mass[1] == 0.5


def test_out_of_window_mass_is_tracked():
    m = accumulate(_traj([0.5, 7.0, 0.5]), [uniform_edges(0, 4, 4)])
    assert m.out_of_window_mass == 0.5
    assert m.mass.sum() == 0.5


@given(st.lists(st.floats(-2.0, 6.0), min_size=2, max_size=60))
@settings(max_examples=150, deadline=None)
def test_normalization_invariant(values):
    m = accumulate(_traj(values), [uniform_edges(0, 4, 17)])
    assert abs(m.mass.sum() + m.out_of_window_mass - 1.0) < 1e-12
    assert np.all(m.mass >= 0)


def test_concatenation_equals_merge_exactly():
    edges = [uniform_edges(0, 1, 5)]
    part1 = _traj([0.1, 0.3, 0.5])
    part2 = Trajectory(np.array([2.0, 3.0, 4.0]), np.array([[0.5], [0.7], [0.9]]))
    whole = Trajectory(
        np.arange(5, dtype=float),
        np.array([[0.1], [0.3], [0.5], [0.7], [0.9]]),
    )
    merged = merge([accumulate(part1, edges), accumulate(part2, edges)])
    direct = accumulate(whole, edges)
    assert np.array_equal(merged.counts, direct.counts)
    assert merged.out_count == direct.out_count
    assert np.array_equal(merged.mass, direct.mass)


def test_merge_rejects_grid_mismatch():
    a = accumulate(_traj([0.1, 0.2]), [uniform_edges(0, 1, 4)])
    b = accumulate(_traj([0.1, 0.2]), [uniform_edges(0, 1, 5)])
    with pytest.raises(ValueError):
        merge([a, b])
    with pytest.raises(ValueError):
        tv_distance(a, b)
    with pytest.raises(ValueError):
        merge([])


def _measure_from_counts(counts, out=0):
    counts = np.asarray(counts, dtype=np.int64)
    return EmpiricalMeasure((uniform_edges(0, 1, counts.size),), counts, out, 1.0)


def test_tv_distance_basic_values():
    a = _measure_from_counts([4, 0, 0])
    b = _measure_from_counts([0, 0, 4])
    assert tv_distance(a, a) == 0.0
    assert tv_distance(a, b) == 1.0
    c = _measure_from_counts([2, 2, 0])
    assert tv_distance(a, c) == 0.5


def test_tv_is_a_metric_on_random_triples():
    rng = np.random.default_rng(23)
    for _ in range(50):
        ms = [
            _measure_from_counts(rng.integers(0, 30, size=6), out=int(rng.integers(0, 5)))
            for _ in range(3)
        ]
        a, b, c = ms
        assert tv_distance(a, b) == tv_distance(b, a)
        assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15
        assert 0.0 <= tv_distance(a, b) <= 1.0


def test_persistence_statistic_extremes():
    spec = boundary_faces([0])
    deep = _measure_from_counts([0, 0, 0, 0, 7])  # centers 0.1, ..., 0.9
    assert persistence_statistic(deep, spec, 0.5) == 1.0
    near = _measure_from_counts([7, 0, 0, 0, 0])
    assert persistence_statistic(near, spec, 0.5) == 0.0
    with pytest.raises(ValueError):
        persistence_statistic(deep, spec, 0.0)


def test_persistence_sweep_uses_dyadic_deltas():
    spec = boundary_faces([0])
    m = _measure_from_counts([1, 1, 1, 1, 4])
    sweep = persistence_sweep(m, spec)
    assert set(sweep) == {2.0**-k for k in range(1, 13)}
    # shrinking delta can only add bins
    vals = [sweep[2.0**-k] for k in range(1, 13)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_tightness_diagnostic_at_equilibrium():
    model = logistic_model(sigma=0.0)
    traj = simulate_sde(model, [1.0], SdeSimConfig(dt=0.01, t_max=20.0))
    report = tightness_diagnostic(traj, logistic_pair(1.0))
    assert not report.flagged
    assert abs(report.pi_w_tilde_tail - 1.0) < 1e-6
    assert report.series_values.size <= 401


def test_tightness_diagnostic_flags_divergence():
    # pure exponential growth has no Lyapunov pair; the running average of
    # W_tilde = x blows through any constant
    from ecopersist.models import EcologicalSdeModel

    growth = EcologicalSdeModel(
        n=1,
        m=1,
        alpha=(1,),
        drift=lambda x: np.array([1.0]),
        diffusion=lambda x: np.array([[0.0]]),
        extinction_index_set=frozenset({0}),
    )
    traj = simulate_sde(growth, [1.0], SdeSimConfig(dt=0.01, t_max=20.0))
    report = tightness_diagnostic(traj, logistic_pair(1.0))
    assert report.flagged
    assert report.pi_w_tilde_tail > 10.0


def test_logistic_histogram_matches_gamma_density():
    # occupation law of dx = x(1-x)dt + 0.6 x dB is Gamma(2/0.36 - 1, 0.18)
    sigma = 0.6
    model = logistic_model(kappa=1.0, sigma=sigma)
    cfg = SdeSimConfig(dt=1e-3, t_max=10_000.0, seed=17, record_stride=10)
    traj = simulate_sde(model, [1.0], cfg)
    edges = uniform_edges(0.0, 4.0, 200)
    m = accumulate(traj, [edges])
    k = 2.0 / sigma**2 - 1.0
    theta = sigma**2 / 2.0
    probs = np.diff(stats.gamma.cdf(edges, a=k, scale=theta))
    tail = 1.0 - stats.gamma.cdf(edges[-1], a=k, scale=theta)
    l1 = np.abs(m.mass - probs).sum() + abs(m.out_of_window_mass - tail)
    assert l1 <= 0.05


def test_two_runs_reach_small_tv_distance():
    model = logistic_model(kappa=1.0, sigma=0.6)
    edges = [uniform_edges(0.0, 4.0, 50)]
    ms = []
    for seed, x0 in ((101, 0.1), (202, 5.0)):
        cfg = SdeSimConfig(dt=1e-3, t_max=10_000.0, seed=seed, record_stride=10)
        ms.append(accumulate(simulate_sde(model, [x0], cfg), edges))
    assert tv_distance(ms[0], ms[1]) <= 0.1


def test_histogram_csv_export(tmp_path):
    counts = np.array([[3, 1], [0, 4]], dtype=np.int64)
    m = EmpiricalMeasure(
        (uniform_edges(0, 1, 2), uniform_edges(0, 2, 2)), counts, 0, 1.0
    )
    path = tmp_path / "hist.csv"
    export_histogram_csv(m, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_center_1,bin_center_2,mass"
    assert len(lines) == 5
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.25, 0.5, 3 / 8]


def test_accumulate_validation():
    with pytest.raises(ValueError):
        accumulate(_traj([0.1, 0.2]), [])
    with pytest.raises(ValueError):
        accumulate(Trajectory(np.array([0.0]), np.array([[0.1]])), [uniform_edges(0, 1, 2)])
    with pytest.raises(ValueError):
        accumulate(_traj([0.1, 0.2]), [uniform_edges(0, 1, 2), uniform_edges(0, 1, 2)])
    with pytest.raises(ValueError):
        uniform_edges(1.0, 0.0, 5)
