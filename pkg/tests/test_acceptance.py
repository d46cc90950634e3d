"""Acceptance gate: one test per release criterion.

Every test prints a single ``criterion N: PASS/FAIL (...)`` line with the
measured numbers before asserting, so a red run still tells you how far off
the estimate was.  Run ``pytest tests/test_acceptance.py -s`` to see the
lines for passing tests too.

The tolerances here are release gates, not scientific claims; the unit
suites carry the fine-grained checks these summaries lean on.
"""

import random
import time
from fractions import Fraction

import numpy as np
from scipy import stats

from ecopersist.brackets import (
    PolyVectorField,
    RationalDet,
    det_polynomial,
    hormander_check,
    lie_bracket,
)
from ecopersist.may_leonard import (
    MayLeonardEnv,
    bracket_u2_u1_closed_form,
    carrying_simplex,
    cell_membership,
    compare_printed_coefficients,
    lambda_bd,
    lambda_d_estimate,
    lambda_d_limits,
    may_leonard_model,
    transverse_eigenvalue,
    u_polynomial_field,
)
from ecopersist.models import boundary_faces, logistic_model
from ecopersist.occupation import (
    accumulate,
    persistence_sweep,
    tv_distance,
    uniform_edges,
)
from ecopersist.pdmp import PdmpSimConfig, simulate_pdmp
from ecopersist.persistence import (
    dirac_measure,
    h_exponent_estimate,
    invasion_rate_table,
)
from ecopersist.poly import Poly
from ecopersist.rma import (
    RmaParams,
    lambda_rma,
    prey_marginal_l1,
    rma_model,
    stratonovich_fields,
)
from ecopersist.sde import SdeSimConfig, Trajectory, simulate_sde

ENV1 = MayLeonardEnv(1.8, 0.6)
ENV2 = MayLeonardEnv(1.1, 0.2)
FIG1 = RmaParams(alpha=0.3, kappa=2.5, epsilon=0.6)


def verdict(tag, ok, detail):
    print(f"criterion {tag}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def late_window(traj, burn=0.2):
    keep = traj.times >= burn * traj.times[-1]
    return Trajectory(traj.times[keep], traj.states[keep])


def test_criterion_01_logistic_boundary_law():
    """Occupation histogram of the logistic diffusion against its Gamma law."""
    t0 = time.perf_counter()
    sigma, kappa = 0.6, 1.0
    model = logistic_model(kappa=kappa, sigma=sigma)
    cfg = SdeSimConfig(dt=1e-3, t_max=1e4, seed=7, record_stride=10)
    traj = simulate_sde(model, (1.0,), cfg)
    values = late_window(traj).states[:, 0]
    edges = uniform_edges(0.0, 6.0, 120)
    counts, _ = np.histogram(values, bins=edges)
    emp = counts / values.shape[0]
    shape = 2.0 / sigma**2 - 1.0
    scale = kappa * sigma**2 / 2.0
    cdf = stats.gamma.cdf(edges, a=shape, scale=scale)
    law = np.diff(cdf)
    tail = 1.0 - float(cdf[-1])
    l1 = float(np.abs(emp - law).sum() + abs(1.0 - emp.sum() - tail))
    elapsed = time.perf_counter() - t0
    ok = l1 <= 0.05 and elapsed < 30.0
    assert verdict("1", ok, f"L1={l1:.4f} <= 0.05, {elapsed:.1f}s < 30s")


def test_criterion_02_logistic_h_exponent():
    """Both decay exponents equal 1 - sigma^2/2 through the measure table."""
    model = logistic_model(kappa=1.0, sigma=0.6)
    table = invasion_rate_table(model, [dirac_measure((0.0,))])
    est = h_exponent_estimate(table, weights=(1.0,))
    target = 1.0 - 0.6**2 / 2.0
    ok = (
        abs(est.lambda_minus - target) <= 1e-12
        and est.lambda_minus == est.lambda_plus
    )
    assert verdict(
        "2",
        ok,
        f"lambda-={est.lambda_minus:.15f}, lambda+={est.lambda_plus:.15f}, "
        f"target {target}",
    )


def test_criterion_03_invasion_rate_sandwich():
    """Quadrature value sits between its closed-form bounds on a 10^3 grid."""
    t0 = time.perf_counter()
    eps_grid = np.linspace(0.0, 1.4, 12)[1:-1]
    alpha_grid = np.linspace(0.0, 1.0, 12)[1:-1]
    kappa_grid = np.linspace(0.5, 5.0, 12)[1:-1]
    worst = 0.0
    for eps in eps_grid:
        for alpha in alpha_grid:
            for kappa in kappa_grid:
                value, lower, upper = lambda_rma(RmaParams(alpha, kappa, eps))
                worst = max(worst, lower - value, value - upper)
    elapsed = time.perf_counter() - t0
    fig1_value = lambda_rma(FIG1).value
    ok = worst <= 1e-9 and elapsed < 10.0 and fig1_value > 0.0
    assert verdict(
        "3",
        ok,
        f"worst bound violation {worst:.2e} <= 1e-9 over 1000 points, "
        f"{elapsed:.2f}s < 10s, value at (0.6, 0.3, 2.5) = {fig1_value:.4f} > 0",
    )


def test_criterion_04_rma_persistence_and_collapse():
    """Persistent regime passes the delta sweep; the collapsing one hits the axis."""
    model = rma_model(FIG1)
    cfg = SdeSimConfig(dt=1e-3, t_max=1e4, seed=7, record_stride=10)
    traj = simulate_sde(model, (1.0, 0.5), cfg)
    edges = (uniform_edges(0.0, 6.0, 120), uniform_edges(0.0, 4.0, 120))
    measure = accumulate(late_window(traj), edges)
    sweep = persistence_sweep(measure, boundary_faces((0, 1)))
    best = max(sweep.values())

    # alpha = 0.9 puts the upper sandwich bound below zero, so the predator
    # dies out and the prey settles into its boundary Gamma law.
    collapse = RmaParams(alpha=0.9, kappa=2.5, epsilon=0.6)
    traj2 = simulate_sde(
        rma_model(collapse),
        (1.0, 0.5),
        SdeSimConfig(dt=1e-3, t_max=1e4, seed=5, record_stride=10),
    )
    l1 = prey_marginal_l1(traj2, collapse)
    predator_late = late_window(traj2, burn=0.8).states[:, 1]
    stray_mass = float((predator_late >= 0.01).mean())
    ok = best >= 0.95 and l1 <= 0.07 and stray_mass < 0.01
    assert verdict(
        "4",
        ok,
        f"best persistence stat {best:.4f} >= 0.95, prey L1 {l1:.4f} <= 0.07, "
        f"late predator mass off the axis {stray_mass:.2e} < 0.01",
    )


def test_criterion_05_may_leonard_closed_forms():
    """Hand-derived exponent values at the reference parameter quadruple.

    The five-decimal reference values are truncated displays; the 1e-9 gate
    runs against the exact fractions they abbreviate.
    """
    bd = lambda_bd(ENV1, ENV2, 0.5)
    slow, fast = lambda_d_limits(ENV1, ENV2, 0.5)
    exact = (Fraction(-3, 20), Fraction(-73, 1564), Fraction(-1, 38))
    displays = (-0.15, -0.04667, -0.02632)
    gaps = [abs(v - float(e)) for v, e in zip((bd, slow, fast), exact)]
    display_gaps = [abs(v - d) for v, d in zip((bd, slow, fast), displays)]
    ok = max(gaps) <= 1e-9 and max(display_gaps) <= 1e-5
    assert verdict(
        "5",
        ok,
        f"bd={bd:.10f}, slow={slow:.10f}, fast={fast:.10f}; "
        f"max exact gap {max(gaps):.2e} <= 1e-9, "
        f"max display gap {max(display_gaps):.2e} <= 1e-5",
    )


def test_criterion_06_diagonal_exponent_monte_carlo():
    """Monte Carlo diagonal exponent against its two limits and frozen flows."""
    slow, fast = lambda_d_limits(ENV1, ENV2, 0.5)
    parts = []
    ok = True
    for tau, rate_bound, want, label in (
        (0.01, 0.0051, slow, "tau=0.01"),
        (100.0, 50.5, fast, "tau=100"),
    ):
        cfg = PdmpSimConfig(dt=1e-3, t_max=1e4, rate_bound=rate_bound, seed=1)
        est = lambda_d_estimate(ENV1, ENV2, tau=tau, p=0.5, cfg=cfg)
        gap, gate = abs(est.value - want), 3.0 * est.stderr + 0.01
        ok = ok and gap <= gate
        parts.append(f"{label} gap {gap:.4f} <= {gate:.4f}")
    # Identical environments make the run deterministic; the estimator's
    # stderr then reports its quadrature roundoff floor, which is the honest
    # scale for this comparison.
    for env in (ENV1, ENV2):
        cfg = PdmpSimConfig(dt=1e-3, t_max=2000.0, rate_bound=1.01, seed=3)
        est = lambda_d_estimate(env, env, tau=1.0, p=0.5, cfg=cfg)
        want = transverse_eigenvalue(env).real
        gap = abs(est.value - want)
        ok = ok and gap <= 3.0 * est.stderr
        parts.append(f"frozen({env.alpha},{env.beta}) gap {gap:.1e} <= {3 * est.stderr:.1e}")
    assert verdict("6", ok, "; ".join(parts))


def sparse_field(rng, nvars=3, max_terms=2, max_exp=2):
    comps = []
    for _ in range(nvars):
        q = Poly.zero(nvars)
        for _ in range(rng.randint(0, max_terms)):
            exps = tuple(rng.randint(0, max_exp) for _ in range(nvars))
            coef = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
            if coef:
                q = q + Poly.monomial(nvars, exps, coef)
        comps.append(q)
    return PolyVectorField(tuple(comps))


def random_rational_env(rng):
    beta = Fraction(rng.randint(1, 63), 64)
    alpha = Fraction(rng.randint(65, 191), 64)
    return alpha, beta


def test_criterion_07_bracket_algebra():
    """Exact Lie bracket identities plus the two closed-form brackets."""
    rng = random.Random(20260814)
    fields = [sparse_field(rng) for _ in range(1000)]
    for i in range(500):
        y, z = fields[2 * i], fields[2 * i + 1]
        yz, zy = lie_bracket(y, z), lie_bracket(z, y)
        assert all(a == -b for a, b in zip(yz.components, zy.components))
    for i in range(333):
        y, w, z = fields[3 * i], fields[3 * i + 1], fields[3 * i + 2]
        a = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
        b = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
        combo = PolyVectorField(
            tuple(a * cy + b * cw for cy, cw in zip(y.components, w.components))
        )
        lhs = lie_bracket(combo, z)
        ya, wb = lie_bracket(y, z), lie_bracket(w, z)
        assert all(
            cl == a * cy + b * cw
            for cl, cy, cw in zip(lhs.components, ya.components, wb.components)
        )
        total = [Poly.zero(3)] * 3
        for f, g, h in ((y, w, z), (w, z, y), (z, y, w)):
            outer = lie_bracket(f, lie_bracket(g, h))
            total = [t + c for t, c in zip(total, outer.components)]
        assert all(t.is_zero() for t in total)

    closed_ok = True
    for _ in range(20):
        e1, e2 = random_rational_env(rng), random_rational_env(rng)
        direct = lie_bracket(u_polynomial_field(e2, "U2"), u_polynomial_field(e1, "U1"))
        closed_ok = closed_ok and (
            direct.components == bracket_u2_u1_closed_form(e1, e2).components
        )

    det_ok = True
    for eps, alpha, kappa in (
        (Fraction(3, 5), Fraction(3, 10), Fraction(5, 2)),
        (Fraction(1, 4), Fraction(7, 8), Fraction(3, 1)),
        (Fraction(11, 10), Fraction(1, 3), Fraction(1, 2)),
    ):
        s0, s1 = stratonovich_fields(eps, alpha, kappa)
        det = det_polynomial([lie_bracket(s0, s1), s1])
        expected = RationalDet(Poly.monomial(2, (2, 1), eps * eps), det.den, 2)
        reduced = det.reduce()
        det_ok = det_ok and det.equals_rational(expected)
        det_ok = det_ok and reduced.num == expected.num and reduced.power == 2

    ok = closed_ok and det_ok
    assert verdict(
        "7",
        ok,
        "identities exact on 1000 sparse fields, switched closed form at 20 "
        f"rational points {'ok' if closed_ok else 'BAD'}, noise determinant "
        f"eps^2 x1^2 x2 over (1+x1)^2 {'ok' if det_ok else 'BAD'}",
    )


def test_criterion_08_hormander_certification():
    """Strong bracket condition at random rational interior points, timed.

    The printed reference coefficients are compared verbatim at 20 random
    parameter pairs; mismatches are surfaced (not corrected), and the unit
    suite pins the exact values behind them.
    """
    t0 = time.perf_counter()
    rng = random.Random(97)
    s0, s1 = stratonovich_fields(Fraction(3, 5), Fraction(3, 10), Fraction(5, 2))
    rma_ok = True
    for _ in range(10):
        pt = (Fraction(rng.randint(1, 40), 12), Fraction(rng.randint(1, 40), 12))
        res = hormander_check([s0, s1], pt, mode="strong", system="sde", max_depth=3)
        rma_ok = rma_ok and res.satisfied and res.rank == 2
    u1 = u_polynomial_field((Fraction(9, 5), Fraction(3, 5)), "U1")
    u2 = u_polynomial_field((Fraction(11, 10), Fraction(1, 5)), "U2")
    ml_ok = True
    for _ in range(10):
        pt = tuple(Fraction(rng.randint(1, 30), 31) for _ in range(3))
        res = hormander_check([u1, u2], pt, mode="strong", system="pdmp", max_depth=3)
        ml_ok = ml_ok and res.satisfied and res.rank == 3

    n_mismatch = 0
    n_total = 0
    for _ in range(20):
        e1, e2 = random_rational_env(rng), random_rational_env(rng)
        comparisons = compare_printed_coefficients(e1, e2)
        n_total += len(comparisons)
        n_mismatch += sum(not c.match for c in comparisons)
    elapsed = time.perf_counter() - t0
    # The mismatches are the expected outcome: the printed expressions carry
    # a transcription slip, so a zero count would mean the comparison never
    # exercised its surfacing path.
    ok = rma_ok and ml_ok and elapsed < 5.0 and n_total == 60 and n_mismatch > 0
    assert verdict(
        "8",
        ok,
        f"predator-prey rank 2 at 10 points {'ok' if rma_ok else 'BAD'}, "
        f"switched rank 3 at 10 points {'ok' if ml_ok else 'BAD'}, "
        f"{elapsed:.2f}s < 5s, printed-coefficient mismatches surfaced "
        f"{n_mismatch}/{n_total}",
    )


def test_criterion_09_carrying_simplices_and_cell():
    """Simplex meshes sit on the right side of the unit simplex and trap mass."""
    meshes = (carrying_simplex(ENV1, 12), carrying_simplex(ENV2, 12))
    mesh_ok = True
    parts = []
    for mesh, side in zip(meshes, ("below", "above")):
        vertex = (mesh.directions == 1.0).any(axis=1)
        mesh_ok = mesh_ok and np.abs(mesh.radii[vertex] - 1.0).max() <= 1e-6
        off = mesh.radii[~vertex]
        if side == "below":
            mesh_ok = mesh_ok and off.max() < 1.0 - 1e-6
        else:
            mesh_ok = mesh_ok and off.min() > 1.0 + 1e-6
        points = mesh.radii[:, None] * mesh.directions
        le = np.all(points[:, None, :] <= points[None, :, :] + 1e-12, axis=2)
        lt = np.any(points[:, None, :] < points[None, :, :] - 1e-12, axis=2)
        ordered_pairs = int((le & lt).sum())
        mesh_ok = mesh_ok and ordered_pairs == 0
        parts.append(f"{side}: {mesh.radii.size} nodes, {ordered_pairs} ordered pairs")

    model = may_leonard_model(ENV1, ENV2, tau=1.0, p=0.5, r_mode="bump")
    cfg = PdmpSimConfig(dt=2e-5, t_max=500.0, rate_bound=1.01, seed=23, record_stride=200)
    res = simulate_pdmp(model, np.array([0.5, 0.3, 0.2]), 0, cfg)
    traj = res.trajectory
    late = traj.states[traj.times >= 0.5 * traj.times[-1]]
    inside = np.fromiter(
        (cell_membership(meshes, x, pad=0.005) for x in late), bool, late.shape[0]
    )
    fraction = float(inside.mean())
    ok = mesh_ok and fraction >= 0.95
    assert verdict(
        "9",
        ok,
        f"{'; '.join(parts)}; late-window cell occupancy {fraction:.4f} >= 0.95",
    )


def test_criterion_10_engine_properties():
    """Bitwise reproducibility plus the two distributional engine checks."""
    model = rma_model(FIG1)
    cfg = SdeSimConfig(dt=1e-3, t_max=5.0, seed=3)
    face = simulate_sde(model, (1.0, 0.0), cfg)
    face_ok = bool(np.all(face.states[:, 1] == 0.0) and np.all(face.states[:, 0] > 0.0))

    a = simulate_sde(model, (1.0, 0.5), cfg)
    b = simulate_sde(model, (1.0, 0.5), cfg)
    switched = may_leonard_model(ENV1, ENV2, tau=2.0, p=0.5)
    pcfg = PdmpSimConfig(dt=1e-3, t_max=10.0, rate_bound=2.0, seed=6)
    pa = simulate_pdmp(switched, np.array([0.5, 0.4, 0.3]), 0, pcfg)
    pb = simulate_pdmp(switched, np.array([0.5, 0.4, 0.3]), 0, pcfg)
    seed_ok = bool(
        np.array_equal(a.states, b.states)
        and np.array_equal(pa.trajectory.states, pb.trajectory.states)
        and np.array_equal(pa.trajectory.env, pb.trajectory.env)
    )

    # Equal flip rates at p = 1/2 thin the candidates to rate tau/2.
    ks_model = may_leonard_model(ENV1, ENV2, tau=4.0, p=0.5)
    ks_cfg = PdmpSimConfig(dt=1e-2, t_max=5000.0, rate_bound=8.0, seed=37, record_stride=100)
    ks_res = simulate_pdmp(ks_model, np.array([0.5, 0.4, 0.3]), 0, ks_cfg)
    diffs = np.diff(ks_res.jump_times)
    ks = stats.kstest(diffs, "expon", args=(0.0, 0.5))
    ks_ok = bool(
        diffs.size + 1 >= 10_000 and ks.statistic < 1.628 / np.sqrt(diffs.size + 1)
    )

    occ_model = may_leonard_model(ENV1, ENV2, tau=5.0, p=0.3)
    occ_cfg = PdmpSimConfig(dt=1e-2, t_max=2000.0, rate_bound=5.0, seed=11, record_stride=10)
    occ_res = simulate_pdmp(occ_model, np.array([0.5, 0.4, 0.3]), 0, occ_cfg)
    occ = (occ_res.trajectory.env[1:] == 0).astype(float)
    blocks = occ.reshape(50, -1).mean(axis=1)
    se = blocks.std(ddof=1) / np.sqrt(blocks.size)
    occ_gap = abs(float(occ.mean()) - 0.3)
    occ_ok = occ_gap <= 3.0 * se

    ok = face_ok and seed_ok and ks_ok and occ_ok
    assert verdict(
        "10",
        ok,
        f"face invariance bitwise {'ok' if face_ok else 'BAD'}, seed determinism "
        f"bitwise {'ok' if seed_ok else 'BAD'}, thinning KS stat {ks.statistic:.4f} "
        f"< {1.628 / np.sqrt(diffs.size + 1):.4f} on {diffs.size + 1} jumps, "
        f"occupation gap {occ_gap:.4f} <= {3 * se:.4f}",
    )


def test_tv_proxy_two_runs_share_occupation():
    """Distant starts in the persistent regime land on the same histogram."""
    model = rma_model(FIG1)
    edges = (uniform_edges(0.0, 6.0, 30), uniform_edges(0.0, 4.0, 30))

    def late_measure(x0, seed):
        cfg = SdeSimConfig(dt=1e-3, t_max=1e4, seed=seed, record_stride=10)
        return accumulate(late_window(simulate_sde(model, x0, cfg)), edges)

    tv = tv_distance(late_measure((0.05, 0.05), 101), late_measure((5.0, 3.0), 202))
    ok = tv <= 0.1
    assert verdict("tv-proxy", ok, f"tv distance {tv:.4f} <= 0.1")
