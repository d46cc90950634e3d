"""Boundary ergodic measures, invasion rates, and persistence certificates.

Long-run behaviour near the extinction set is summarised by the ergodic
measures living on it.  This module catalogs those measures for the
tractable low-dimensional diffusions (point masses, one-dimensional face
densities, simulated face averages), integrates per-species invasion rates
against them, and assembles the results into a weighted-positivity
certificate: the community persists when some strictly positive weighting
of the per-species rates is positive under every boundary measure.  The
weighting is found by a small linear program solved in exact rational
arithmetic, so a reported margin is never a float artifact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .models import EcologicalSdeModel
from .sde import SdeSimConfig, simulate_sde

__all__ = [
    "QuadratureError",
    "DegenerateBoundaryError",
    "BoundaryMeasure",
    "FaceDensityResult",
    "InvasionRateTable",
    "PersistenceCertificate",
    "HExponentEstimate",
    "CoverageReport",
    "invasion_rate_sde",
    "invasion_rate_function",
    "dirac_measure",
    "face_density_measure",
    "empirical_face_measure",
    "boundary_stationary_density_1d",
    "ergodic_measure_average",
    "enumerate_boundary_ergodic_measures",
    "invasion_rate_table",
    "certify_persistence",
    "h_exponent_estimate",
    "boundary_coverage_warning",
    "certificate_json",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries its own diagnostics."""

    def __init__(self, message: str, value: float, abserr: float):
        super().__init__(message)
        self.value = value
        self.abserr = abserr


class DegenerateBoundaryError(ValueError):
    """An invasion rate sits on the zero boundary of the case criterion.

    The catalog of boundary ergodic measures changes discontinuously with
    the sign of the origin invasion rates, so a rate within tolerance of
    zero cannot be classified honestly and is reported instead of guessed.
    """


def _quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    epsabs: float = 1e-12,
    epsrel: float = 1e-10,
    limit: int = 200,
    what: str = "integral",
) -> tuple[float, float]:
    """Gauss-Kronrod quadrature that raises instead of warning on trouble."""
    res = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = res[0], res[1]
    if len(res) > 3:
        raise QuadratureError(
            f"{what} did not converge on [{a:g}, {b:g}]: {res[3]} "
            f"(value {value:g}, error estimate {abserr:g})",
            value,
            abserr,
        )
    return float(value), float(abserr)


def invasion_rate_sde(model: EcologicalSdeModel, i: int, x: Sequence[float]) -> float:
    """Per-capita growth rate of species ``i`` corrected for its own noise.

    For the diffusion dx_i = x_i^{alpha_i} (F_i dt + Sigma_i dB) the
    log-scale drift of species i at state x is

        F_i(x) - alpha_i * a_ii(x)/2 * x_i^{alpha_i - 1},

    with a = Sigma Sigma^T.  The Ito correction vanishes only when the
    species carries no noise; for alpha_i = 1 the rate is state-size free.
    """
    if i not in model.extinction_index_set:
        raise ValueError(f"species {i} is not tracked by the extinction set")
    v = np.asarray(x, dtype=float)
    if v.shape != (model.n,):
        raise ValueError(f"expected a state of shape ({model.n},)")
    drift = np.asarray(model.drift(v), dtype=float)
    row = np.asarray(model.diffusion(v), dtype=float)[i]
    a_ii = float(row @ row)
    al = int(model.alpha[i])
    power = 1.0 if al == 1 else float(v[i]) ** (al - 1)
    return float(drift[i] - al * (a_ii / 2.0) * power)


def invasion_rate_function(model: EcologicalSdeModel, i: int) -> Callable[[np.ndarray], float]:
    """Close over the model so the rate can be integrated like any observable."""
    if i not in model.extinction_index_set:
        raise ValueError(f"species {i} is not tracked by the extinction set")
    return lambda x: invasion_rate_sde(model, i, x)


@dataclass(frozen=True)
class BoundaryMeasure:
    """One identified ergodic measure on the extinction set.

    Three kinds are supported.  ``dirac`` is a point mass (averages are
    exact).  ``density-1d`` lives on a single coordinate axis and carries a
    normalized density of the surviving coordinate; averages are adaptive
    quadrature with the quadrature error estimate standing in for a
    standard error.  ``empirical`` also lives on one axis but is known only
    through a face-restricted simulation; averages are long-run time
    averages with a batch-means standard error.
    """

    tag: str
    kind: str
    dim: int
    point: tuple[float, ...] | None = None
    survivor: int | None = None
    density: Callable[[float], float] | None = None
    sample_path: Callable[[], np.ndarray] | None = None
    tail_cut: float = 10.0

    def __post_init__(self):
        if self.kind not in ("dirac", "density-1d", "empirical"):
            raise ValueError("kind must be dirac, density-1d, or empirical")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.kind == "dirac":
            if self.point is None or len(self.point) != self.dim:
                raise ValueError("a dirac measure needs a point of length dim")
        else:
            if self.survivor is None or not 0 <= self.survivor < self.dim:
                raise ValueError("axis measures need a survivor index in range(dim)")
        if self.kind == "density-1d" and self.density is None:
            raise ValueError("density-1d needs a normalized density callable")
        if self.kind == "empirical" and self.sample_path is None:
            raise ValueError("empirical needs a sample_path callable")

    def embed(self, u: float) -> np.ndarray:
        """Lift a surviving-coordinate value to the full state space."""
        x = np.zeros(self.dim)
        if self.survivor is not None:
            x[self.survivor] = u
        return x

    def average(
        self,
        f: Callable[[np.ndarray], float],
        *,
        n_batches: int = 32,
        epsabs: float = 1e-12,
        epsrel: float = 1e-10,
    ) -> tuple[float, float]:
        """Integrate ``f`` against the measure; returns (value, stderr)."""
        if self.kind == "dirac":
            return float(f(np.asarray(self.point, dtype=float))), 0.0
        if self.kind == "density-1d":
            g = lambda u: float(f(self.embed(u))) * self.density(u)
            head, e1 = _quad(g, 0.0, self.tail_cut, epsabs=epsabs, epsrel=epsrel,
                             what=f"average against {self.tag}")
            tail, e2 = _quad(g, self.tail_cut, np.inf, epsabs=epsabs, epsrel=epsrel,
                             what=f"tail average against {self.tag}")
            return head + tail, e1 + e2
        states = self.sample_path()
        vals = np.array([float(f(s)) for s in states])
        if n_batches < 2 or vals.size < 2 * n_batches:
            raise ValueError("need at least two points per batch for batch means")
        usable = vals.size - vals.size % n_batches
        means = vals[:usable].reshape(n_batches, -1).mean(axis=1)
        stderr = float(means.std(ddof=1) / math.sqrt(n_batches))
        return float(means.mean()), stderr


def ergodic_measure_average(
    measure: BoundaryMeasure,
    f: Callable[[np.ndarray], float],
    **kwargs,
) -> tuple[float, float]:
    """Free-function spelling of :meth:`BoundaryMeasure.average`."""
    return measure.average(f, **kwargs)


def dirac_measure(point: Sequence[float], tag: str | None = None) -> BoundaryMeasure:
    """Point mass at ``point``; tagged ``delta_origin`` when at the origin."""
    pt = tuple(float(v) for v in point)
    if tag is None:
        tag = "delta_origin" if all(v == 0.0 for v in pt) else (
            "delta(" + ",".join(f"{v:g}" for v in pt) + ")"
        )
    return BoundaryMeasure(tag=tag, kind="dirac", dim=len(pt), point=pt)


@dataclass(frozen=True)
class FaceDensityResult:
    """Stationary density of a one-dimensional invariant face.

    ``integrable`` reports whether the unnormalized density has finite mass
    near the origin, which happens exactly when the surviving species has a
    positive invasion rate there.  When it does, ``density`` is the
    normalized version and ``normalization`` its computed mass; otherwise
    both are None and only the unnormalized shape is available.
    """

    survivor: int
    integrable: bool
    lambda_at_origin: float
    reference_point: float
    normalization: float | None
    normalization_error: float | None
    density: Callable[[float], float] | None
    unnormalized: Callable[[float], float]


def boundary_stationary_density_1d(
    model: EcologicalSdeModel,
    survivor: int = 0,
    r: float = 1.0,
    *,
    x_cut: float | None = None,
    epsabs: float = 1e-12,
    epsrel: float = 1e-10,
) -> FaceDensityResult:
    """Stationary density of the two-species diffusion restricted to a face.

    With the other species extinct, the survivor follows a scalar diffusion
    whose speed-measure density is

        h(u) = 2 / (u^2 a(u)) * exp( int_r^u 2 F(v) / (v a(v)) dv ),

    where F and a are the drift and squared noise of the survivor evaluated
    on the face and r > 0 is an arbitrary reference point (changing r only
    rescales h, so the normalized density does not depend on it).  Near the
    origin h grows like u^(c-2) with c = 2 F(0)/a(0), hence h is integrable
    precisely when c > 1, i.e. when the survivor's invasion rate at the
    origin is positive.
    """
    if model.n != 2:
        raise ValueError("face densities are built for two-species models")
    if survivor not in (0, 1):
        raise ValueError("survivor must be 0 or 1")
    if model.alpha[survivor] != 1:
        raise ValueError("the face formula assumes linear noise scaling (alpha = 1)")
    if r <= 0:
        raise ValueError("the reference point must be positive")

    def embed(u: float) -> np.ndarray:
        x = np.zeros(2)
        x[survivor] = u
        return x

    def face_drift(u: float) -> float:
        return float(np.asarray(model.drift(embed(u)), dtype=float)[survivor])

    def face_sq_noise(u: float) -> float:
        row = np.asarray(model.diffusion(embed(u)), dtype=float)[survivor]
        return float(row @ row)

    a0 = face_sq_noise(0.0)
    if a0 <= 0.0 or face_sq_noise(r) <= 0.0:
        raise ValueError("the survivor carries no noise on this face")
    f0 = face_drift(0.0)
    lam0 = f0 - a0 / 2.0
    integrable = 2.0 * f0 / a0 > 1.0

    def log_unnormalized(u: float) -> float:
        inner, _ = _quad(
            lambda v: 2.0 * face_drift(v) / (v * face_sq_noise(v)),
            r,
            u,
            epsabs=epsabs,
            epsrel=epsrel,
            what="face density exponent",
        )
        return math.log(2.0) - 2.0 * math.log(u) - math.log(face_sq_noise(u)) + inner

    def unnormalized(u: float) -> float:
        if u <= 0.0:
            return 0.0
        return math.exp(log_unnormalized(u))

    if not integrable:
        return FaceDensityResult(
            survivor=survivor,
            integrable=False,
            lambda_at_origin=lam0,
            reference_point=r,
            normalization=None,
            normalization_error=None,
            density=None,
            unnormalized=unnormalized,
        )

    cut = float(x_cut) if x_cut is not None else max(10.0, 10.0 * r)
    total = 0.0
    total_err = 0.0
    pieces = [(0.0, min(r, cut)), (min(r, cut), cut), (cut, np.inf)]
    for lo, hi in pieces:
        if hi <= lo:
            continue
        val, err = _quad(unnormalized, lo, hi, epsabs=epsabs, epsrel=epsrel,
                         what="face density normalization")
        total += val
        total_err += err
    if total <= 0.0 or not math.isfinite(total):
        raise QuadratureError("face density normalization came out non-positive",
                              total, total_err)

    def density(u: float) -> float:
        return unnormalized(u) / total

    return FaceDensityResult(
        survivor=survivor,
        integrable=True,
        lambda_at_origin=lam0,
        reference_point=r,
        normalization=total,
        normalization_error=total_err,
        density=density,
        unnormalized=unnormalized,
    )


def face_density_measure(
    model: EcologicalSdeModel,
    survivor: int,
    r: float = 1.0,
    *,
    tag: str | None = None,
    x_cut: float | None = None,
) -> BoundaryMeasure:
    """Package a normalized face density as a boundary measure."""
    result = boundary_stationary_density_1d(model, survivor, r, x_cut=x_cut)
    if not result.integrable:
        raise ValueError(
            f"face {survivor} has no stationary probability: the survivor's "
            f"origin invasion rate {result.lambda_at_origin:g} is not positive"
        )
    cut = float(x_cut) if x_cut is not None else max(10.0, 10.0 * r)
    return BoundaryMeasure(
        tag=tag or f"mu_{survivor + 1}",
        kind="density-1d",
        dim=model.n,
        survivor=survivor,
        density=result.density,
        tail_cut=cut,
    )


def empirical_face_measure(
    model: EcologicalSdeModel,
    survivor: int,
    *,
    start: float = 1.0,
    dt: float = 1e-3,
    t_max: float = 500.0,
    seed: int = 101,
    burn_in: float = 0.25,
    record_stride: int = 10,
    tag: str | None = None,
) -> BoundaryMeasure:
    """Boundary measure backed by a simulation of the face-restricted process.

    Coordinate faces are invariant for the diffusion, so starting with every
    species but the survivor at zero keeps the path on the face exactly and
    the time average estimates the face's ergodic measure.  Used when the
    face dynamics admit no closed-form density (for instance when the
    survivor carries no noise and the face measure degenerates to a point).
    """
    if survivor not in range(model.n):
        raise ValueError("survivor must index a species of the model")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must be a fraction in [0, 1)")
    cfg = SdeSimConfig(dt=dt, t_max=t_max, seed=seed, record_stride=record_stride)

    def sample_path() -> np.ndarray:
        x0 = np.zeros(model.n)
        x0[survivor] = start
        traj = simulate_sde(model, x0, cfg)
        skip = int(burn_in * traj.states.shape[0])
        return traj.states[skip:]

    return BoundaryMeasure(
        tag=tag or f"mu_{survivor + 1}",
        kind="empirical",
        dim=model.n,
        survivor=survivor,
        sample_path=sample_path,
    )


def enumerate_boundary_ergodic_measures(
    model: EcologicalSdeModel,
    tol: float = 1e-9,
    r: float = 1.0,
    **face_kwargs,
) -> tuple[BoundaryMeasure, ...]:
    """Catalog the ergodic measures on the boundary of a two-species system.

    The extinction set of a two-species diffusion is the union of the origin
    and the two coordinate axes.  The origin always carries a point mass.
    Each axis carries its own stationary measure exactly when the resident
    species can invade at the origin, so the catalog follows the signs of
    the two origin invasion rates:

        both <= 0              -> { delta_origin }
        rate 1 > 0, rate 2 < 0 -> { delta_origin, mu_1 }
        rate 1 < 0, rate 2 > 0 -> { delta_origin, mu_2 }
        both > 0               -> { delta_origin, mu_1, mu_2 }

    A rate within ``tol`` of zero sits on the boundary of the criterion; the
    catalog is then genuinely ambiguous and a
    :class:`DegenerateBoundaryError` is raised rather than guessed around.
    Faces whose survivor carries no noise fall back to an empirical measure.
    """
    if model.n != 2:
        raise ValueError("the boundary catalog is built for two-species models")
    origin = np.zeros(2)
    rates = [invasion_rate_sde(model, i, origin) for i in (0, 1)]
    for i, lam in enumerate(rates):
        if abs(lam) < tol:
            raise DegenerateBoundaryError(
                f"origin invasion rate of species {i + 1} is {lam:.3e}, within "
                f"{tol:g} of zero; the measure catalog is not determined"
            )
    measures: list[BoundaryMeasure] = [dirac_measure(origin)]
    for i, lam in enumerate(rates):
        if lam <= 0.0:
            continue
        row = np.asarray(model.diffusion(origin), dtype=float)[i]
        if float(row @ row) > 0.0:
            measures.append(face_density_measure(model, i, r))
        else:
            measures.append(empirical_face_measure(model, i, **face_kwargs))
    return tuple(measures)


@dataclass(frozen=True)
class InvasionRateTable:
    """Invasion rates of every tracked species under every boundary measure.

    Row m, column k holds the average of species k's invasion rate against
    measure m, with a matching standard-error entry (zero for closed
    forms).
    """

    measures: tuple[BoundaryMeasure, ...]
    species: tuple[int, ...]
    rates: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        want = (len(self.measures), len(self.species))
        if self.rates.shape != want or self.errors.shape != want:
            raise ValueError(
                f"rates and errors must have shape {want} "
                f"(one row per measure, one column per species)"
            )
        if np.any(self.errors < 0):
            raise ValueError("standard errors must be nonnegative")


def invasion_rate_table(
    model: EcologicalSdeModel,
    measures: Sequence[BoundaryMeasure],
    species: Sequence[int] | None = None,
) -> InvasionRateTable:
    """Integrate every tracked invasion rate against every boundary measure."""
    sp = tuple(sorted(model.extinction_index_set)) if species is None else tuple(species)
    rates = np.zeros((len(measures), len(sp)))
    errors = np.zeros_like(rates)
    for mi, measure in enumerate(measures):
        for ki, i in enumerate(sp):
            rates[mi, ki], errors[mi, ki] = measure.average(invasion_rate_function(model, i))
    return InvasionRateTable(
        measures=tuple(measures), species=sp, rates=rates, errors=errors
    )


class _InfeasibleProgram(RuntimeError):
    pass


def _simplex_min(
    rows: list[list[Fraction]],
    rhs: list[Fraction],
    cost: list[Fraction],
) -> tuple[Fraction, list[Fraction]]:
    """Minimize cost.z subject to rows.z = rhs, z >= 0, in exact arithmetic.

    Two-phase tableau simplex with Bland's rule, which cannot cycle.  The
    right-hand side must be nonnegative (callers flip row signs first).
    Raises :class:`_InfeasibleProgram` when phase one cannot zero out the
    artificial variables and RuntimeError on an unbounded phase two.
    """
    m = len(rows)
    nvar = len(cost)
    zero, one = Fraction(0), Fraction(1)
    tableau = [list(row) + [zero] * m + [rhs[k]] for k, row in enumerate(rows)]
    for k in range(m):
        tableau[k][nvar + k] = one
    basis = list(range(nvar, nvar + m))

    def pivot(row: int, col: int) -> None:
        piv = tableau[row][col]
        tableau[row] = [v / piv for v in tableau[row]]
        for k in range(m):
            if k != row and tableau[k][col] != 0:
                factor = tableau[k][col]
                tableau[k] = [v - factor * w for v, w in zip(tableau[k], tableau[row])]
        basis[row] = col

    def run(obj: list[Fraction], n_enterable: int) -> None:
        while True:
            entering = None
            for j in range(n_enterable):
                reduced = obj[j] - sum(obj[basis[k]] * tableau[k][j] for k in range(m))
                if reduced < 0:
                    entering = j
                    break
            if entering is None:
                return
            leaving = None
            best = None
            for k in range(m):
                coef = tableau[k][entering]
                if coef > 0:
                    ratio = tableau[k][-1] / coef
                    if best is None or ratio < best or (
                        ratio == best and basis[k] < basis[leaving]
                    ):
                        best, leaving = ratio, k
            if leaving is None:
                raise RuntimeError("linear program is unbounded")
            pivot(leaving, entering)

    phase1 = [zero] * nvar + [one] * m
    run(phase1, nvar + m)
    if sum(phase1[basis[k]] * tableau[k][-1] for k in range(m)) != 0:
        raise _InfeasibleProgram
    for k in range(m):
        if basis[k] >= nvar:
            col = next((j for j in range(nvar) if tableau[k][j] != 0), None)
            if col is not None:
                pivot(k, col)

    run(list(cost) + [zero] * m, nvar)
    solution = [zero] * nvar
    for k in range(m):
        if basis[k] < nvar:
            solution[basis[k]] = tableau[k][-1]
    value = sum(c * z for c, z in zip(cost, solution))
    return value, solution


@dataclass(frozen=True)
class PersistenceCertificate:
    """Outcome of the weighted-positivity search over the rate table.

    ``margin`` is the exact optimum of max t subject to (rates @ weights)
    >= t under every measure, with weights on the probability simplex and
    floored away from zero.  The verdict is ``persistent`` only when the
    margin clears three propagated standard errors, since Monte Carlo rows
    are themselves uncertain.  A nonpositive margin means no positive
    weighting works; that leaves persistence uncertified but proves nothing
    about extinction, as the note spells out.
    """

    weights: tuple[float, ...]
    margin: float
    stderr: float
    verdict: str
    feasible: bool
    lambda_minus: float
    lambda_plus: float
    h_exponent_bounds: tuple[float, float]
    note: str = ""


def certify_persistence(
    table: InvasionRateTable,
    floor: float = 1e-9,
) -> PersistenceCertificate:
    """Search for strictly positive species weights with positive rate sums.

    The search maximizes the worst weighted rate over measures, exactly:
    rates convert to rationals (binary floats are exact rationals), the
    linear program runs in Fraction arithmetic, and only the final report
    rounds back to floats.  ``floor`` is the lower bound applied to each
    weight so that strict positivity becomes a closed constraint.
    """
    n_measures, n_species = table.rates.shape
    eps = Fraction(floor)
    if eps <= 0 or n_species * eps >= 1:
        raise ValueError("floor must be positive and small enough to leave weight mass")

    rational = [[Fraction(float(v)) for v in row] for row in table.rates]
    # Variables: q_k = p_k - floor, the split margin t = tp - tm, one surplus
    # per measure.  Equalities: sum q = 1 - K*floor and, per measure,
    # sum_k R[m,k] q_k - tp + tm - s_m = -floor * sum_k R[m,k].
    nvar = n_species + 2 + n_measures
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    zero, one = Fraction(0), Fraction(1)

    row0 = [one] * n_species + [zero] * (2 + n_measures)
    rows.append(row0)
    rhs.append(1 - n_species * eps)
    for mi in range(n_measures):
        row = list(rational[mi]) + [-one, one] + [zero] * n_measures
        row[n_species + 2 + mi] = -one
        b = -eps * sum(rational[mi])
        if b < 0:
            row = [-v for v in row]
            b = -b
        rows.append(row)
        rhs.append(b)

    cost = [zero] * n_species + [-one, one] + [zero] * n_measures
    value, solution = _simplex_min(rows, rhs, cost)
    margin_exact = -value
    weights_exact = [solution[k] + eps for k in range(n_species)]

    weighted = [sum(r * p for r, p in zip(row, weights_exact)) for row in rational]
    lambda_minus = min(weighted)
    lambda_plus = max(weighted)

    weights = tuple(float(p) for p in weights_exact)
    stderr = float(
        np.sqrt(((np.asarray(weights) * table.errors) ** 2).sum(axis=1)).max()
    )
    margin = float(margin_exact)
    feasible = margin_exact > 0
    persistent = margin_exact > 0 and margin > 3.0 * stderr
    note = ""
    if not feasible:
        note = (
            "no strictly positive weighting makes every boundary average "
            "positive; persistence is not certified, and this does not "
            "certify extinction"
        )
    elif not persistent:
        note = "positive margin is within three standard errors of zero"
    return PersistenceCertificate(
        weights=weights,
        margin=margin,
        stderr=stderr,
        verdict="persistent" if persistent else "not-certified",
        feasible=feasible,
        lambda_minus=float(lambda_minus),
        lambda_plus=float(lambda_plus),
        h_exponent_bounds=(margin - 3.0 * stderr, margin + 3.0 * stderr),
        note=note,
    )


@dataclass(frozen=True)
class HExponentEstimate:
    """Extremes of the weighted invasion rates over the boundary measures.

    For the standard construction the near-boundary decay observable is the
    negative weighted sum of invasion rates, so its lower exponent is the
    smallest weighted rate over the catalog and the upper exponent the
    largest.  A positive ``lambda_minus`` is the persistence criterion;
    ``warning`` flags a catalog suspected of missing measures.
    """

    lambda_minus: float
    lambda_minus_err: float
    lambda_plus: float
    lambda_plus_err: float
    warning: str | None = None


def h_exponent_estimate(
    table: InvasionRateTable,
    weights: Sequence[float] | None = None,
    *,
    v_global: bool = False,
    coverage: "CoverageReport | None" = None,
) -> HExponentEstimate:
    """Estimate the decay exponents attached to a weighting of the table.

    ``v_global`` asserts that the underlying envelope function is finite on
    the whole state space, not just off the boundary; the occupation
    averages of its drift then vanish and both exponents are exactly zero.
    Otherwise the exponents are the extreme rows of ``rates @ weights``
    with errors propagated from the matching row.
    """
    warning = None
    if coverage is not None and coverage.suspect:
        warning = coverage.message
    if v_global:
        return HExponentEstimate(0.0, 0.0, 0.0, 0.0, warning)
    n_species = len(table.species)
    if weights is None:
        p = np.full(n_species, 1.0 / n_species)
    else:
        p = np.asarray(weights, dtype=float)
        if p.shape != (n_species,):
            raise ValueError(f"weights must have shape ({n_species},)")
        if np.any(p <= 0):
            raise ValueError("weights must be strictly positive")
    combined = table.rates @ p
    row_err = np.sqrt(((p * table.errors) ** 2).sum(axis=1))
    lo = int(np.argmin(combined))
    hi = int(np.argmax(combined))
    return HExponentEstimate(
        lambda_minus=float(combined[lo]),
        lambda_minus_err=float(row_err[lo]),
        lambda_plus=float(combined[hi]),
        lambda_plus_err=float(row_err[hi]),
        warning=warning,
    )


@dataclass(frozen=True)
class CoverageReport:
    """How much simulated boundary mass falls outside the catalogued supports."""

    outside_fraction: float
    threshold: float
    suspect: bool
    message: str


def boundary_coverage_warning(
    model: EcologicalSdeModel,
    measures: Sequence[BoundaryMeasure],
    *,
    dt: float = 1e-3,
    t_max: float = 200.0,
    seed: int = 17,
    burn_in: float = 0.25,
    record_stride: int = 10,
    atol: float = 0.05,
    threshold: float = 0.01,
) -> CoverageReport:
    """Check the measure catalog against simulated boundary trajectories.

    One trajectory is launched on each invariant face (every species at zero
    except one); occupation mass landing outside every catalogued support
    suggests an unenumerated ergodic measure and flips ``suspect``.  Support
    membership is geometric: within ``atol`` of a point mass, or on the
    right axis for the density and empirical kinds.
    """
    if model.n == 1:
        starts = [np.zeros(1)]
    else:
        starts = []
        for i in range(model.n):
            x0 = np.zeros(model.n)
            x0[i] = 1.0
            starts.append(x0)
    cfg = SdeSimConfig(dt=dt, t_max=t_max, seed=seed, record_stride=record_stride)
    chunks = []
    for x0 in starts:
        traj = simulate_sde(model, x0, cfg)
        skip = int(burn_in * traj.states.shape[0])
        chunks.append(traj.states[skip:])
    states = np.vstack(chunks)

    covered = np.zeros(states.shape[0], dtype=bool)
    for measure in measures:
        if measure.kind == "dirac":
            pt = np.asarray(measure.point)
            covered |= np.abs(states - pt).max(axis=1) <= atol
        else:
            others = [j for j in range(model.n) if j != measure.survivor]
            covered |= np.abs(states[:, others]).max(axis=1) <= atol
    outside = float(1.0 - covered.mean())
    suspect = outside > threshold
    message = ""
    if suspect:
        message = (
            f"boundary simulation leaves {outside:.1%} of its occupation mass "
            f"outside the catalogued supports; an unenumerated ergodic "
            f"measure is suspected"
        )
    return CoverageReport(
        outside_fraction=outside, threshold=threshold, suspect=suspect, message=message
    )


def certificate_json(table: InvasionRateTable, certificate: PersistenceCertificate) -> str:
    """Serialize a certificate and its rate table with stable key order."""
    payload = {
        "measures": [m.tag for m in table.measures],
        "rates": table.rates.tolist(),
        "stderr": table.errors.tolist(),
        "weights": list(certificate.weights),
        "margin": certificate.margin,
        "verdict": certificate.verdict,
        "lambda_minus": certificate.lambda_minus,
        "lambda_plus": certificate.lambda_plus,
    }
    return json.dumps(payload, sort_keys=True)
