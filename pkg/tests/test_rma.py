"""Tests for the stochastic Rosenzweig-MacArthur case study."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ecopersist.brackets import RationalDet, det_polynomial, hormander_check, lie_bracket
from ecopersist.models import boundary_faces
from ecopersist.occupation import accumulate, persistence_statistic, persistence_sweep, uniform_edges
from ecopersist.persistence import ergodic_measure_average, invasion_rate_function
from ecopersist.poly import Poly
from ecopersist.rma import (
    GammaBoundaryLaw,
    RegimeError,
    RmaParams,
    classify_rma,
    gamma_boundary_density,
    lambda_rma,
    prey_face_measure,
    prey_marginal_l1,
    regime_report,
    rma_model,
    stratonovich_fields,
)
from ecopersist.sde import SdeSimConfig, Trajectory, simulate_sde

CANONICAL = RmaParams(alpha=0.3, kappa=2.5, epsilon=0.6)

# Midpoint Riemann sum of x/(1+x) against the Gamma law at the canonical
# parameters (20e6 points on [0, 80]), an oracle independent of the
# Laplace-transform quadrature used by lambda_rma.
LAMBDA_CANONICAL = 0.3399512947218912


class TestParams:
    def test_positivity_enforced(self):
        for bad in (
            dict(alpha=0.0, kappa=1.0, epsilon=0.5),
            dict(alpha=0.3, kappa=-1.0, epsilon=0.5),
            dict(alpha=0.3, kappa=1.0, epsilon=0.0),
        ):
            with pytest.raises(ValueError, match="positive"):
                RmaParams(**bad)

    def test_regime_flag_and_gamma_parameters(self):
        assert CANONICAL.gamma_regime
        assert CANONICAL.shape == pytest.approx(41.0 / 9.0, abs=1e-14)
        assert CANONICAL.scale == pytest.approx(0.45, abs=1e-14)
        loud = RmaParams(alpha=0.3, kappa=2.5, epsilon=1.5)
        assert not loud.gamma_regime
        with pytest.raises(RegimeError):
            _ = loud.shape
        with pytest.raises(RegimeError):
            _ = loud.scale


class TestGammaLaw:
    def test_shape_scale_and_mean(self):
        law = gamma_boundary_density(CANONICAL)
        assert law.shape == pytest.approx(41.0 / 9.0, abs=1e-14)
        assert law.scale == pytest.approx(0.45, abs=1e-14)
        assert law.mean == pytest.approx(2.05, abs=1e-13)
        assert law.mean == pytest.approx(2.5 * (1.0 - 0.18), abs=1e-13)

    def test_density_normalizes_by_quadrature(self):
        law = gamma_boundary_density(CANONICAL)
        head, _ = integrate.quad(law.pdf, 0.0, 25.0, limit=200)
        tail, _ = integrate.quad(law.pdf, 25.0, np.inf, limit=200)
        assert head + tail == pytest.approx(1.0, abs=1e-8)

    def test_moments_by_quadrature(self):
        law = gamma_boundary_density(CANONICAL)
        mean = sum(
            integrate.quad(lambda u: u * law.pdf(u), lo, hi, limit=200)[0]
            for lo, hi in ((0.0, 30.0), (30.0, np.inf))
        )
        assert mean == pytest.approx(law.mean, abs=1e-8)
        second = sum(
            integrate.quad(lambda u: u * u * law.pdf(u), lo, hi, limit=200)[0]
            for lo, hi in ((0.0, 40.0), (40.0, np.inf))
        )
        var = second - mean**2
        expected = 2.5**2 * 0.18 * 0.82
        assert var == pytest.approx(expected, rel=1e-6)
        assert law.variance == pytest.approx(expected, abs=1e-13)

    def test_outside_regime_raises(self):
        with pytest.raises(RegimeError, match="degenerates"):
            gamma_boundary_density(RmaParams(alpha=0.3, kappa=2.5, epsilon=2.0))

    def test_pdf_vanishes_left_of_origin(self):
        law = GammaBoundaryLaw(shape=2.0, scale=0.5)
        assert law.pdf(0.0) == 0.0
        assert law.pdf(-1.0) == 0.0


class TestLambda:
    def test_canonical_value_against_riemann_oracle(self):
        bounds = lambda_rma(CANONICAL)
        assert bounds.value == pytest.approx(LAMBDA_CANONICAL, abs=1e-9)
        assert bounds.value > 0.0

    def test_canonical_value_sits_in_printed_interval(self):
        bounds = lambda_rma(CANONICAL)
        assert 0.2445 <= bounds.value <= 0.3721
        assert bounds.lower <= bounds.value <= bounds.upper
        assert bounds.upper == pytest.approx(2.05 / 3.05 - 0.3, abs=1e-12)

    def test_small_noise_limit(self):
        params = RmaParams(alpha=0.3, kappa=2.5, epsilon=1e-3)
        bounds = lambda_rma(params)
        assert abs(bounds.value - (2.5 / 3.5 - 0.3)) < 1e-3

    def test_strong_predator_death_forces_negative_rate(self):
        # x/(1+x) < 1, so alpha >= 1 caps the average below zero.
        for eps in (0.2, 0.6, 1.0, 1.3):
            bounds = lambda_rma(RmaParams(alpha=1.0, kappa=4.0, epsilon=eps))
            assert bounds.value < 0.0

    def test_outside_regime_raises(self):
        with pytest.raises(RegimeError, match="Gamma regime"):
            lambda_rma(RmaParams(alpha=0.3, kappa=2.5, epsilon=1.5))

    @settings(max_examples=60, deadline=None)
    @given(
        eps=st.floats(0.05, 1.39),
        alpha=st.floats(0.05, 0.95),
        kappa=st.floats(0.5, 5.0),
    )
    def test_sandwich_property(self, eps, alpha, kappa):
        bounds = lambda_rma(RmaParams(alpha=alpha, kappa=kappa, epsilon=eps))
        assert bounds.lower - 1e-9 <= bounds.value <= bounds.upper + 1e-9

    def test_measure_route_agrees(self):
        # Integrating the predator's invasion rate against the packaged
        # face measure must reproduce the Laplace-transform quadrature.
        mu1 = prey_face_measure(CANONICAL)
        value, stderr = ergodic_measure_average(
            mu1, invasion_rate_function(rma_model(CANONICAL), 1)
        )
        assert value == pytest.approx(lambda_rma(CANONICAL).value, abs=1e-9)
        assert stderr < 1e-8


class TestClassification:
    def test_canonical_is_persistent(self):
        verdict = classify_rma(CANONICAL)
        assert verdict.regime == "persistent"
        assert not verdict.boundary_case
        assert verdict.note == ""
        assert verdict.lambda_bounds.value > 0.0

    def test_strong_death_is_prey_only(self):
        # Upper bound arithmetic already forces the sign:
        # kappa*c/(1+kappa*c) - alpha = 0.6721 - 0.9 < 0.
        verdict = classify_rma(RmaParams(alpha=0.9, kappa=2.5, epsilon=0.6))
        assert verdict.regime == "prey-only"
        assert verdict.lambda_bounds.upper < 0.0
        assert "simulation evidence" in verdict.note

    def test_loud_noise_is_collapse(self):
        verdict = classify_rma(RmaParams(alpha=0.3, kappa=2.5, epsilon=math.sqrt(3.0)))
        assert verdict.regime == "collapse"
        assert verdict.lambda_bounds is None
        assert not verdict.boundary_case
        assert "simulation evidence" in verdict.note

    def test_regime_boundaries_are_flagged(self):
        # alpha tuned to the canonical average puts Lambda within 1e-6 of 0.
        knife = RmaParams(alpha=LAMBDA_CANONICAL + 0.3, kappa=2.5, epsilon=0.6)
        verdict = classify_rma(knife)
        assert verdict.boundary_case
        edge = classify_rma(RmaParams(alpha=0.3, kappa=2.5, epsilon=math.sqrt(2.0)))
        assert edge.regime == "collapse"
        assert edge.boundary_case

    def test_report_fields_track_the_regime(self):
        persistent = regime_report(CANONICAL)
        assert persistent["regime"] == "persistent"
        assert persistent["gamma_regime"]
        assert persistent["lambda"] == pytest.approx(LAMBDA_CANONICAL, abs=1e-9)
        assert persistent["lambda_lower"] <= persistent["lambda"] <= persistent["lambda_upper"]
        assert persistent["gamma_shape"] == pytest.approx(41.0 / 9.0, abs=1e-12)
        collapse = regime_report(RmaParams(alpha=0.3, kappa=2.5, epsilon=1.6))
        assert collapse["regime"] == "collapse"
        assert not collapse["gamma_regime"]
        assert "lambda" not in collapse
        assert "gamma_shape" not in collapse


class TestModelWiring:
    def test_drift_and_noise_values(self):
        model = rma_model(CANONICAL)
        x = np.array([1.5, 0.8])
        drift = model.drift(x)
        assert drift[0] == pytest.approx(1.0 - 1.5 / 2.5 - 0.8 / 2.5, abs=1e-15)
        assert drift[1] == pytest.approx(-0.3 + 1.5 / 2.5, abs=1e-15)
        assert model.diffusion(x).tolist() == [[0.6], [0.0]]
        assert model.name == "rma"
        assert model.param("eps") == 0.6

    def test_builtin_kernel_matches_python_engine(self):
        model = rma_model(CANONICAL)
        cfg = SdeSimConfig(dt=1e-3, t_max=2.0, seed=3)
        fast = simulate_sde(model, (1.0, 0.5), cfg, engine="jit")
        slow = simulate_sde(model, (1.0, 0.5), cfg, engine="python")
        assert np.array_equal(fast.states, slow.states)


class TestRegimeSimulations:
    def test_prey_only_marginal_converges_to_gamma(self):
        params = RmaParams(alpha=0.9, kappa=2.5, epsilon=0.6)
        cfg = SdeSimConfig(dt=1e-3, t_max=1e4, seed=5, record_stride=10)
        traj = simulate_sde(rma_model(params), (1.0, 1.0), cfg)
        assert prey_marginal_l1(traj, params) <= 0.05
        # The predator leaves the picture entirely.
        tail = traj.states[traj.states.shape[0] // 5:, 1]
        assert tail.max() < 1e-100

    def test_persistent_occupation_avoids_the_axes(self):
        cfg = SdeSimConfig(dt=1e-3, t_max=1e4, seed=7, record_stride=10)
        traj = simulate_sde(rma_model(CANONICAL), (1.0, 1.0), cfg)
        burn = traj.states.shape[0] // 5
        tail = Trajectory(times=traj.times[burn:], states=traj.states[burn:])
        edges = [uniform_edges(0.0, 6.0, 120), uniform_edges(0.0, 6.0, 120)]
        measure = accumulate(tail, edges)
        spec = boundary_faces([0, 1])
        sweep = persistence_sweep(measure, spec)
        winners = [d for d, stat in sweep.items() if stat >= 0.95]
        assert winners, f"no delta reached 0.95 in {sweep}"
        delta = max(winners)
        near_axes = 1.0 - persistence_statistic(measure, spec, delta / 2.0)
        assert near_axes < 0.01

    def test_marginal_distance_validation(self):
        params = CANONICAL
        cfg = SdeSimConfig(dt=1e-2, t_max=1.0, seed=1)
        traj = simulate_sde(rma_model(params), (1.0, 1.0), cfg)
        with pytest.raises(ValueError, match="burn_in"):
            prey_marginal_l1(traj, params, burn_in=1.0)


class TestStratonovichFields:
    def test_noise_interaction_determinant_closed_form(self):
        # det([S0,S1], S1) = eps^2 x1^2 x2 / (1+x1)^2, exactly.
        for eps, alpha, kappa in (
            (Fraction(3, 5), Fraction(3, 10), Fraction(5, 2)),
            (Fraction(1, 4), Fraction(7, 8), Fraction(3, 1)),
            (Fraction(11, 10), Fraction(1, 3), Fraction(1, 2)),
        ):
            s0, s1 = stratonovich_fields(eps, alpha, kappa)
            det = det_polynomial([lie_bracket(s0, s1), s1])
            expected = RationalDet(Poly.monomial(2, (2, 1), eps * eps), det.den, 2)
            assert det.equals_rational(expected)
            reduced = det.reduce()
            assert reduced.num == expected.num
            assert reduced.power == 2

    def test_prey_component_restores_ito_drift(self):
        # Adding back eps^2/2 per capita must recover the Ito drift, checked
        # at an exact rational point.
        eps, alpha, kappa = Fraction(3, 5), Fraction(3, 10), Fraction(5, 2)
        s0, _ = stratonovich_fields(eps, alpha, kappa)
        pt = (Fraction(2, 3), Fraction(1, 5))
        strat = s0.evaluate(pt)
        x1, x2 = pt
        ito_prey = x1 * (1 - x1 / kappa - x2 / (1 + x1))
        ito_pred = x2 * (-alpha + x1 / (1 + x1))
        assert strat[0] == ito_prey - eps * eps / 2 * x1
        assert strat[1] == ito_pred

    def test_strong_bracket_condition_interior(self):
        s0, s1 = stratonovich_fields(Fraction(3, 5), Fraction(3, 10), Fraction(5, 2))
        for pt in ((Fraction(1, 3), Fraction(2, 5)), (Fraction(9, 10), Fraction(7, 3))):
            result = hormander_check([s0, s1], pt, mode="strong", system="sde", max_depth=3)
            assert result.satisfied
            assert result.rank == 2
            assert "S1" in result.witnesses

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="positive"):
            stratonovich_fields(0, Fraction(1, 2), 1)
