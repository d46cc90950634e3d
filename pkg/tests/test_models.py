import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecopersist.models import (
    Box,
    EcologicalSdeModel,
    SwitchedOdeModel,
    boundary_faces,
    boundary_union_diagonal,
    check_lyapunov_drift,
    check_rate_matrix,
    custom_extinction,
    default_drift_grid,
    distance_to_extinction,
    generator_apply,
    log_uniform_grid,
    logistic_model,
    logistic_pair,
    lv2d_model,
    lv2d_pair,
    two_state_rates,
)


def test_logistic_drift_inequality_holds_on_grid():
    for kappa in (1.0, 2.5):
        model = logistic_model(kappa=kappa, sigma=0.6)
        report = check_lyapunov_drift(model, logistic_pair(kappa), default_drift_grid(1))
        assert report.satisfied
        assert not report.failures
        # LW + W = 2x - x^2/kappa has maximum exactly kappa, so the slack is
        # small but strictly positive off the maximizer
        assert -kappa < report.max_violation <= 0.0


def test_logistic_drift_fails_with_too_small_constant():
    model = logistic_model(kappa=1.0, sigma=0.6)
    pair = logistic_pair(1.0)
    bad = type(pair)(W=pair.W, W_tilde=pair.W_tilde, C=0.5, grad_W=pair.grad_W, hess_W=pair.hess_W)
    report = check_lyapunov_drift(model, bad, default_drift_grid(1))
    assert not report.satisfied
    assert report.max_violation > 0.4
    assert report.witness is not None


def test_lv2d_drift_inequality_frozen_bound():
    # orthant maximum of LU + U/2 is 1.14347 (on an axis, found by hand), so
    # against C = 1.8 the worst grid violation sits near -0.6565
    model = lv2d_model()
    report = check_lyapunov_drift(model, lv2d_pair(), default_drift_grid(2))
    assert report.satisfied
    assert -0.67 < report.max_violation < -0.645


def test_generator_annihilates_constants_exactly():
    models = [logistic_model(), lv2d_model()]
    for model in models:
        pts = default_drift_grid(model.n)[:: max(1, model.n * 97)]
        for x in pts[:40]:
            assert generator_apply(model, lambda _: 4.25, x) == 0.0


def test_generator_finite_differences_match_analytic_derivatives():
    model = lv2d_model()
    pair = lv2d_pair()
    rng = np.random.default_rng(11)
    for _ in range(25):
        x = rng.uniform(0.05, 5.0, size=2)
        exact = generator_apply(model, pair.W, x, grad=pair.grad_W, hess=pair.hess_W)
        approx = generator_apply(model, pair.W, x)
        # the relative step 1e-5 leaves hessian roundoff of order eps/h^2
        assert math.isclose(exact, approx, rel_tol=5e-4, abs_tol=1e-4)


def test_drift_check_collects_nonfinite_failures():
    model = logistic_model()
    pair = logistic_pair()
    bad = type(pair)(
        W=lambda x: float("nan") if x[0] > 1 else float(x[0]),
        W_tilde=pair.W_tilde,
        C=1.0,
    )
    report = check_lyapunov_drift(model, bad, [[0.5], [2.0]])
    assert report.failures
    assert report.failures[0][0] == (2.0,)


# -- extinction distances --------------------------------------------------------


def test_boundary_faces_distance_is_min_named_coordinate():
    spec = boundary_faces([0, 1])
    assert distance_to_extinction(spec, (0.3, 0.5)) == 0.3
    assert distance_to_extinction(spec, (0.0, 0.5)) == 0.0
    partial = boundary_faces([1])
    assert distance_to_extinction(partial, (0.0, 0.5)) == 0.5


def test_diagonal_distance_zero_on_diagonal_and_faces():
    spec = boundary_union_diagonal(3)
    assert distance_to_extinction(spec, (0.7, 0.7, 0.7)) == 0.0
    assert distance_to_extinction(spec, (0.0, 1.0, 2.0)) == 0.0


def _brute_force_distance(x, mesh_step=0.01, extent=3.0):
    """Nearest-point search over a dense sample of faces and diagonal."""
    x = np.asarray(x, dtype=float)
    best = math.inf
    axis = np.arange(0.0, extent + mesh_step / 2, mesh_step)
    grid_a, grid_b = np.meshgrid(axis, axis, indexing="ij")
    flat = np.stack([grid_a.ravel(), grid_b.ravel()], axis=1)
    for face in range(3):
        pts = np.insert(flat, face, 0.0, axis=1)
        best = min(best, float(np.min(np.linalg.norm(pts - x, axis=1))))
    t = np.arange(0.0, extent + 1e-9, 0.001)
    diag = t[:, None] * np.ones(3)
    best = min(best, float(np.min(np.linalg.norm(diag - x, axis=1))))
    return best


def test_diagonal_distance_matches_brute_force_search():
    spec = boundary_union_diagonal(3)
    for x in [(0.4, 0.7, 1.1), (1.0, 1.05, 0.95), (0.02, 0.5, 0.5)]:
        d = distance_to_extinction(spec, x)
        assert abs(d - _brute_force_distance(x)) < 1e-9


@given(
    st.lists(st.floats(0.0, 10.0), min_size=3, max_size=3),
    st.lists(st.floats(0.0, 10.0), min_size=3, max_size=3),
)
@settings(max_examples=100, deadline=None)
def test_distance_is_lipschitz_along_segments(a, b):
    spec = boundary_union_diagonal(3)
    xa, xb = np.array(a), np.array(b)
    gap = abs(distance_to_extinction(spec, xa) - distance_to_extinction(spec, xb))
    assert gap <= np.linalg.norm(xa - xb) + 1e-12


def test_distance_rejects_negative_states():
    spec = boundary_faces([0])
    with pytest.raises(ValueError):
        distance_to_extinction(spec, (-0.1, 1.0))


def test_custom_distance_passthrough():
    spec = custom_extinction(lambda x: float(abs(x[0] - 1.0)))
    assert distance_to_extinction(spec, (1.0,)) == 0.0
    assert distance_to_extinction(spec, (1.5,)) == 0.5


# -- properness ------------------------------------------------------------------


def test_builtin_pairs_certify_proper():
    ok, mins = logistic_pair().certify_proper(1)
    assert ok and mins == sorted(mins)
    ok2, mins2 = lv2d_pair().certify_proper(2)
    assert ok2
    assert mins2[0] >= 1.0


def test_bounded_function_fails_properness_check():
    from ecopersist.models import LyapunovPair

    flat = LyapunovPair(
        W=lambda x: 1.0 / (1.0 + float(np.linalg.norm(x))),
        W_tilde=lambda x: 0.0,
        C=1.0,
    )
    ok, _ = flat.certify_proper(2)
    assert not ok


# -- switched models and rate matrices --------------------------------------------


def _toy_switched(rates):
    box = Box((0.1, 0.1), (2.0, 2.0))
    fields = (
        lambda x: np.array([x[0] * (1 - x[0]), -x[1]]),
        lambda x: np.array([-x[0], x[1] * (1 - x[1])]),
    )
    return SwitchedOdeModel(2, 2, fields, rates, box)


def test_constant_two_state_rates_pass_validation():
    model = _toy_switched(two_state_rates(2.0, 0.3))
    report = check_rate_matrix(model, n_samples=1000)
    assert report.ok
    assert report.n_checked == 1000


def test_state_dependent_rates_pass_validation():
    def rates(x):
        return np.array([[0.0, 1.0 + x[0]], [2.0 + x[1], 0.0]])

    report = check_rate_matrix(_toy_switched(rates), n_samples=100)
    assert report.ok


def test_reducible_rates_flagged():
    def rates(x):
        return np.zeros((2, 2))

    report = check_rate_matrix(_toy_switched(rates), n_samples=10)
    assert not report.ok
    assert "reducible" in report.message


def test_negative_rate_flagged():
    def rates(x):
        return np.array([[0.0, -1.0], [1.0, 0.0]])

    report = check_rate_matrix(_toy_switched(rates), n_samples=10)
    assert not report.ok
    assert "negative" in report.message


def test_two_state_rates_validates_inputs():
    with pytest.raises(ValueError):
        two_state_rates(0.0, 0.5)
    with pytest.raises(ValueError):
        two_state_rates(1.0, 1.0)


# -- boxes and grids ---------------------------------------------------------------


def test_box_contains_and_sampling():
    box = Box((0.0, 0.0), (1.0, 2.0))
    assert box.contains((0.5, 1.9))
    assert not box.contains((1.5, 0.5))
    from ecopersist.rng import GaussianStream

    pts = box.sample(200, GaussianStream(5))
    assert pts.shape == (200, 2)
    assert np.all(pts >= 0.0) and np.all(pts[:, 0] <= 1.0) and np.all(pts[:, 1] <= 2.0)


def test_box_membership_restriction():
    box = Box((0.0, 0.0), (1.0, 1.0), membership=lambda x: x[0] + x[1] <= 1.0)
    assert not box.contains((0.9, 0.9))
    from ecopersist.rng import GaussianStream

    pts = box.sample(150, GaussianStream(6))
    assert np.all(pts.sum(axis=1) <= 1.0)


def test_log_uniform_grid_shape_and_cap():
    g = log_uniform_grid([1e-3, 1e-2], [1.0, 10.0], 8)
    assert g.shape == (64, 2)
    assert np.all(g > 0)
    with pytest.raises(ValueError):
        log_uniform_grid([1e-3] * 4, [1.0] * 4, 64)


def test_default_drift_grid_respects_cap():
    g4 = default_drift_grid(4)
    assert g4.shape[0] <= 1_000_000
    assert g4.shape[0] == 31**4


# -- model validation ---------------------------------------------------------------


def test_model_validation_errors():
    with pytest.raises(ValueError):
        logistic_model(kappa=-1.0)
    with pytest.raises(ValueError):
        EcologicalSdeModel(
            n=1,
            m=1,
            alpha=(0,),
            drift=lambda x: np.array([0.0]),
            diffusion=lambda x: np.array([[1.0]]),
            extinction_index_set=frozenset({0}),
        )
    with pytest.raises(ValueError):
        EcologicalSdeModel(
            n=1,
            m=1,
            alpha=(1,),
            drift=lambda x: np.array([0.0]),
            diffusion=lambda x: np.array([[1.0]]),
            extinction_index_set=frozenset(),
        )


def test_model_rate_and_noise_products():
    model = logistic_model(kappa=2.0, sigma=0.5)
    x = np.array([0.8])
    assert np.allclose(model.rate_vector(x), [0.8 * (1 - 0.4)])
    assert np.allclose(model.noise_matrix(x), [[0.5 * 0.8]])
    assert model.param("sigma") == 0.5
    with pytest.raises(KeyError):
        model.param("missing")
