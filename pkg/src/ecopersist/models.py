"""Model containers and the Lyapunov drift checker.

Two model families are supported: diffusions whose i-th coordinate moves at a
rate proportional to ``x_i**alpha_i`` (so coordinate faces are invariant), and
switched ODE systems driven by a finite environment index.  Both are plain
data holders; the engines consume them without subclassing.  Everything here
is immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import GaussianStream

__all__ = [
    "Box",
    "EcologicalSdeModel",
    "SwitchedOdeModel",
    "LyapunovPair",
    "ExtinctionSetSpec",
    "DriftReport",
    "RateMatrixReport",
    "boundary_faces",
    "boundary_union_diagonal",
    "custom_extinction",
    "distance_to_extinction",
    "generator_apply",
    "check_lyapunov_drift",
    "check_rate_matrix",
    "log_uniform_grid",
    "default_drift_grid",
    "logistic_model",
    "logistic_pair",
    "lv2d_model",
    "lv2d_pair",
    "two_state_rates",
]

Point = Sequence[float]


def _as_state(x: Point, n: int) -> np.ndarray:
    out = np.asarray(x, dtype=float)
    if out.shape != (n,):
        raise ValueError(f"expected a state of shape ({n},), got {out.shape}")
    return out


@dataclass(frozen=True)
class Box:
    """Compact region of the positive orthant, axis-aligned by default.

    A callable ``membership`` restricts the axis-aligned bounding box further
    (used for sets like a simplex slab); points are then drawn by rejection.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    membership: Callable[[np.ndarray], bool] | None = None

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if any(lo < 0 or hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need 0 <= lower < upper on every axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x: Point, tol: float = 1e-9) -> bool:
        v = _as_state(x, self.dim)
        inside = all(
            lo - tol <= xi <= hi + tol
            for xi, lo, hi in zip(v, self.lower, self.upper)
        )
        if inside and self.membership is not None:
            inside = bool(self.membership(v))
        return inside

    def sample(self, count: int, stream: GaussianStream) -> np.ndarray:
        """Draw ``count`` points uniformly from the box (rejection if needed)."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        picked: list[np.ndarray] = []
        attempts = 0
        while len(picked) < count:
            attempts += 1
            if attempts > 1000:
                raise RuntimeError("box membership rejects too many samples")
            u = stream.uniforms(count * self.dim).reshape(count, self.dim)
            pts = lo + u * (hi - lo)
            if self.membership is None:
                picked.extend(pts)
            else:
                picked.extend(p for p in pts if self.membership(p))
        return np.array(picked[:count])


@dataclass(frozen=True)
class EcologicalSdeModel:
    """Diffusion dx_i = x_i^alpha_i (F_i(x) dt + sum_j Sigma_i^j(x) dB_j).

    ``drift`` maps a state to the vector F(x); ``diffusion`` maps a state to
    the n-by-m matrix whose rows are the per-species noise loadings.  The
    indices in ``extinction_index_set`` (0-based) name the species whose
    absence defines the extinction set.
    """

    n: int
    m: int
    alpha: tuple[int, ...]
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    extinction_index_set: frozenset[int]
    name: str = "custom"
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("need at least one species and one noise source")
        if len(self.alpha) != self.n:
            raise ValueError("alpha must have one entry per species")
        if any(int(a) != a or a < 1 for a in self.alpha):
            raise ValueError("every alpha_i must be an integer >= 1")
        if not self.extinction_index_set:
            raise ValueError("extinction_index_set must be nonempty")
        if not self.extinction_index_set <= set(range(self.n)):
            raise ValueError("extinction indices must lie in range(n)")
        for probe in (np.zeros(self.n), np.ones(self.n)):
            f = np.asarray(self.drift(probe), dtype=float)
            s = np.asarray(self.diffusion(probe), dtype=float)
            if f.shape != (self.n,) or not np.all(np.isfinite(f)):
                raise ValueError("drift must return a finite length-n vector")
            if s.shape != (self.n, self.m) or not np.all(np.isfinite(s)):
                raise ValueError("diffusion must return a finite n-by-m matrix")

    def param(self, key: str) -> float:
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    def rate_vector(self, x: np.ndarray) -> np.ndarray:
        """Full drift of the state: x^alpha * F(x)."""
        xa = np.power(x, self.alpha)
        return xa * np.asarray(self.drift(x), dtype=float)

    def noise_matrix(self, x: np.ndarray) -> np.ndarray:
        """Full dispersion of the state: diag(x^alpha) @ Sigma(x)."""
        xa = np.power(x, self.alpha)
        return xa[:, None] * np.asarray(self.diffusion(x), dtype=float)


@dataclass(frozen=True)
class SwitchedOdeModel:
    """Deterministic flows indexed by a finite environment with state-dependent
    switching rates.

    ``vector_fields[j]`` maps a state to dx/dt in environment j.  ``rates``
    maps a state to the off-diagonal intensity matrix (a_jk); row j gives the
    rates of leaving environment j for each k.
    """

    n: int
    n_env: int
    vector_fields: tuple[Callable[[np.ndarray], np.ndarray], ...]
    rates: Callable[[np.ndarray], np.ndarray]
    box: Box
    name: str = "custom"
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.n_env < 1:
            raise ValueError("need at least one environment")
        if len(self.vector_fields) != self.n_env:
            raise ValueError("need one vector field per environment")
        if self.box.dim != self.n:
            raise ValueError("box dimension must match the state dimension")

    def param(self, key: str) -> float:
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    def field_at(self, j: int, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.vector_fields[j](x), dtype=float)


def two_state_rates(tau: float, p: float) -> Callable[[np.ndarray], np.ndarray]:
    """Constant two-environment rate matrix with stationary law (p, 1-p).

    Jump intensities are a_12 = tau*(1-p) and a_21 = tau*p, so detailed
    balance p*a_12 = (1-p)*a_21 holds and tau sets the overall switching
    speed.
    """
    if tau <= 0 or not 0 < p < 1:
        raise ValueError("need tau > 0 and 0 < p < 1")
    mat = np.array([[0.0, tau * (1.0 - p)], [tau * p, 0.0]])
    return lambda x: mat


@dataclass(frozen=True)
class RateMatrixReport:
    ok: bool
    n_checked: int
    message: str


def check_rate_matrix(
    model: SwitchedOdeModel, n_samples: int = 1000, seed: int = 7
) -> RateMatrixReport:
    """Verify rate matrices are valid intensity matrices on random box points.

    Checks off-diagonal nonnegativity, an exactly zero diagonal, and
    irreducibility of the jump graph (strong connectivity of the positive
    entries) at each sampled point.
    """
    stream = GaussianStream(seed, stream=90)
    pts = model.box.sample(n_samples, stream)
    for x in pts:
        a = np.asarray(model.rates(x), dtype=float)
        if a.shape != (model.n_env, model.n_env):
            return RateMatrixReport(False, 0, f"bad rate shape at {x}")
        if np.any(np.diag(a) != 0.0):
            return RateMatrixReport(False, 0, f"nonzero diagonal at {x}")
        if np.any(a < 0):
            return RateMatrixReport(False, 0, f"negative rate at {x}")
        if not _strongly_connected(a > 0):
            return RateMatrixReport(False, 0, f"reducible rate matrix at {x}")
    return RateMatrixReport(True, n_samples, "all sampled rate matrices valid")


def _strongly_connected(adj: np.ndarray) -> bool:
    m = adj.shape[0]

    def reach(start: int, graph: np.ndarray) -> set[int]:
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = frontier.pop()
            for k in range(m):
                if graph[nxt, k] and k not in seen:
                    seen.add(k)
                    frontier.append(k)
        return seen

    return len(reach(0, adj)) == m and len(reach(0, adj.T)) == m


# -- Lyapunov pairs -------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovPair:
    """Proper functions (W, W_tilde) with constant C for the drift inequality
    LW <= -W_tilde + C.

    When the pair satisfies W_tilde = alpha*W for a constant alpha, setting
    ``alpha_opt`` records it (exponential-tightness form).  Optional analytic
    ``grad_W`` / ``hess_W`` avoid finite differences in the generator.
    """

    W: Callable[[np.ndarray], float]
    W_tilde: Callable[[np.ndarray], float]
    C: float
    alpha_opt: float | None = None
    grad_W: Callable[[np.ndarray], np.ndarray] | None = None
    hess_W: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.C < 0:
            raise ValueError("C must be nonnegative")

    def certify_proper(
        self, n: int, seed: int = 3, directions: int = 256
    ) -> tuple[bool, list[float]]:
        """Spot-check properness on expanding shells of radius 2^k, k=0..10.

        Samples random positive-orthant directions, takes the minimum of W on
        each shell, and requires the minima to be strictly increasing.  This
        tests the observable consequence of properness, not the property
        itself.
        """
        stream = GaussianStream(seed, stream=91)
        z = np.abs(stream.normals(directions * n).reshape(directions, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        mins = []
        for k in range(11):
            r = float(2**k)
            mins.append(min(float(self.W(r * u)) for u in z))
        ok = all(b > a for a, b in zip(mins, mins[1:]))
        return ok, mins


def _fd_gradient(f, x: np.ndarray, h_rel: float) -> np.ndarray:
    n = x.size
    g = np.empty(n)
    for i in range(n):
        h = h_rel * max(1.0, abs(x[i]))
        e = np.zeros(n)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def _fd_hessian(f, x: np.ndarray, h_rel: float) -> np.ndarray:
    n = x.size
    steps = [h_rel * max(1.0, abs(x[i])) for i in range(n)]
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        hess[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            val = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * steps[i] * steps[j])
            hess[i, j] = hess[j, i] = val
    return hess


def generator_apply(
    model: EcologicalSdeModel,
    f: Callable[[np.ndarray], float],
    x: Point,
    grad: Callable[[np.ndarray], np.ndarray] | None = None,
    hess: Callable[[np.ndarray], np.ndarray] | None = None,
    h_rel: float = 1e-5,
) -> float:
    """Apply the diffusion generator to a scalar function at one point.

    Lf(x) = sum_i x_i^a_i F_i(x) d_i f + (1/2) sum_ij x_i^a_i x_j^a_j a_ij(x)
    d_ij f, with a = Sigma Sigma^T.  Derivatives of f come from ``grad`` and
    ``hess`` when supplied, otherwise central differences with a relative
    step (f must then be defined in a small neighbourhood of the orthant).
    """
    v = _as_state(x, model.n)
    xa = np.power(v, model.alpha)
    drift_term = xa * np.asarray(model.drift(v), dtype=float)
    sigma = np.asarray(model.diffusion(v), dtype=float)
    a = sigma @ sigma.T
    g = np.asarray(grad(v), dtype=float) if grad is not None else _fd_gradient(f, v, h_rel)
    hmat = np.asarray(hess(v), dtype=float) if hess is not None else _fd_hessian(f, v, h_rel)
    first = float(drift_term @ g)
    second = 0.5 * float(np.einsum("i,j,ij,ij->", xa, xa, a, hmat))
    return first + second


@dataclass(frozen=True)
class DriftReport:
    max_violation: float
    witness: tuple[float, ...] | None
    n_points: int
    failures: tuple[tuple[tuple[float, ...], str], ...] = ()

    @property
    def satisfied(self) -> bool:
        return not self.failures and self.max_violation <= 0.0


def check_lyapunov_drift(
    model: EcologicalSdeModel,
    pair: LyapunovPair,
    grid: np.ndarray | Sequence[Point],
) -> DriftReport:
    """Evaluate LW(x) + W_tilde(x) - C on a grid and report the worst point.

    A nonpositive ``max_violation`` means the drift inequality held at every
    grid point.  Non-finite generator values are collected as failures rather
    than raising, so one bad point does not hide the rest of the report.
    """
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    if pts.shape[1] != model.n:
        raise ValueError("grid points must match the model dimension")
    if np.any(pts < 0):
        raise ValueError("grid points must lie in the positive orthant")
    worst = -math.inf
    witness: tuple[float, ...] | None = None
    failures: list[tuple[tuple[float, ...], str]] = []
    for row in pts:
        try:
            lw = generator_apply(model, pair.W, row, pair.grad_W, pair.hess_W)
            val = lw + float(pair.W_tilde(row)) - pair.C
        except (ArithmeticError, ValueError) as exc:
            failures.append((tuple(row), str(exc)))
            continue
        if not math.isfinite(val):
            failures.append((tuple(row), "non-finite generator value"))
            continue
        if val > worst:
            worst = val
            witness = tuple(row)
    return DriftReport(worst, witness, len(pts), tuple(failures))


# -- extinction sets ------------------------------------------------------------


@dataclass(frozen=True)
class ExtinctionSetSpec:
    """Where extinction lives, as a distance function that vanishes exactly
    on the set."""

    kind: str
    distance: Callable[[np.ndarray], float]
    indices: frozenset[int] = frozenset()


def boundary_faces(indices: Sequence[int]) -> ExtinctionSetSpec:
    """Union of the faces {x_i = 0} over the given (0-based) species indices.

    Within the positive orthant the Euclidean distance to that union is just
    the smallest named coordinate.
    """
    idx = frozenset(int(i) for i in indices)
    if not idx:
        raise ValueError("need at least one face index")
    order = sorted(idx)

    def dist(x: np.ndarray) -> float:
        return float(min(x[i] for i in order))

    return ExtinctionSetSpec("boundary-faces", dist, idx)


def boundary_union_diagonal(n: int) -> ExtinctionSetSpec:
    """Boundary faces plus the diagonal line {x_1 = ... = x_n}.

    Distance to the diagonal is the norm of the component of x orthogonal to
    the all-ones direction.
    """
    if n < 2:
        raise ValueError("a diagonal needs at least two coordinates")

    def dist(x: np.ndarray) -> float:
        v = np.asarray(x, dtype=float)
        face = float(v.min())
        if np.all(v == v[0]):
            # mean subtraction is not exact in floats, so catch the declared
            # set itself before rounding noise can make the distance positive
            return 0.0
        diag = float(np.linalg.norm(v - v.mean()))
        return min(face, diag)

    return ExtinctionSetSpec("boundary-union-diagonal", dist, frozenset(range(n)))


def custom_extinction(distance: Callable[[np.ndarray], float]) -> ExtinctionSetSpec:
    return ExtinctionSetSpec("custom", distance)


def distance_to_extinction(spec: ExtinctionSetSpec, x: Point) -> float:
    v = np.asarray(x, dtype=float)
    if np.any(v < 0):
        raise ValueError("state must lie in the positive orthant")
    d = float(spec.distance(v))
    return 0.0 if d == 0.0 else d


# -- grids ----------------------------------------------------------------------


def log_uniform_grid(
    lows: Sequence[float], highs: Sequence[float], per_axis: int
) -> np.ndarray:
    """Tensor grid with log-uniform spacing per axis, flattened to points."""
    if per_axis < 2:
        raise ValueError("need at least two points per axis")
    if len(lows) != len(highs):
        raise ValueError("lows and highs must have equal length")
    if any(lo <= 0 or hi <= lo for lo, hi in zip(lows, highs)):
        raise ValueError("need 0 < low < high per axis")
    n = len(lows)
    if per_axis**n > 1_000_000:
        raise ValueError("grid would exceed the 1e6-point cap")
    axes = [
        np.logspace(math.log10(lo), math.log10(hi), per_axis)
        for lo, hi in zip(lows, highs)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def default_drift_grid(n: int, low: float = 1e-3, high: float = 1e2) -> np.ndarray:
    """Default grid for drift checks: 64 points per axis, capped at 1e6 total."""
    per_axis = 64
    while per_axis**n > 1_000_000:
        per_axis -= 1
    return log_uniform_grid([low] * n, [high] * n, per_axis)


# -- built-in models ------------------------------------------------------------


def logistic_model(kappa: float = 1.0, sigma: float = 0.6) -> EcologicalSdeModel:
    """Scalar logistic diffusion dx = x(1 - x/kappa) dt + sigma x dB."""
    if kappa <= 0 or sigma < 0:
        raise ValueError("need kappa > 0 and sigma >= 0")

    def drift(x: np.ndarray) -> np.ndarray:
        return np.array([1.0 - x[0] / kappa])

    def diffusion(x: np.ndarray) -> np.ndarray:
        return np.array([[sigma]])

    return EcologicalSdeModel(
        n=1,
        m=1,
        alpha=(1,),
        drift=drift,
        diffusion=diffusion,
        extinction_index_set=frozenset({0}),
        name="logistic",
        params=(("kappa", float(kappa)), ("sigma", float(sigma))),
    )


def logistic_pair(kappa: float = 1.0) -> LyapunovPair:
    """W(x) = x with W_tilde = W: LW + W = 2x - x^2/kappa peaks at kappa."""
    return LyapunovPair(
        W=lambda x: float(x[0]),
        W_tilde=lambda x: float(x[0]),
        C=float(kappa),
        alpha_opt=1.0,
        grad_W=lambda x: np.array([1.0]),
        hess_W=lambda x: np.zeros((1, 1)),
    )


def lv2d_model(
    r: Sequence[float] = (1.0, 1.0),
    b: Sequence[Sequence[float]] = ((1.0, 0.5), (0.5, 1.0)),
    sigma: float = 0.3,
) -> EcologicalSdeModel:
    """Two-species competitive Lotka-Volterra diffusion with independent noise.

    F_i(x) = r_i - sum_j b_ij x_j, each species driven by its own Brownian
    motion scaled by a common sigma.
    """
    rv = np.asarray(r, dtype=float)
    bm = np.asarray(b, dtype=float)
    if rv.shape != (2,) or bm.shape != (2, 2):
        raise ValueError("r must be length 2 and b must be 2x2")
    if np.any(bm < 0) or bm[0, 0] <= 0 or bm[1, 1] <= 0:
        raise ValueError("competition matrix needs b_ij >= 0 and b_ii > 0")

    def drift(x: np.ndarray) -> np.ndarray:
        return rv - bm @ x

    dispersion = sigma * np.eye(2)

    def diffusion(x: np.ndarray) -> np.ndarray:
        return dispersion

    return EcologicalSdeModel(
        n=2,
        m=2,
        alpha=(1, 1),
        drift=drift,
        diffusion=diffusion,
        extinction_index_set=frozenset({0, 1}),
        name="lv2d",
        params=(
            ("r1", float(rv[0])),
            ("r2", float(rv[1])),
            ("b11", float(bm[0, 0])),
            ("b12", float(bm[0, 1])),
            ("b21", float(bm[1, 0])),
            ("b22", float(bm[1, 1])),
            ("sigma", float(sigma)),
        ),
    )


def lv2d_pair() -> LyapunovPair:
    """Quadratic pair for the default competitive parameters.

    With U = 1 + x1^2 + x2^2 the generator gives LU = 2*sum_i x_i^2 F_i(x) +
    sigma^2 (x1^2 + x2^2); for the default r, b, sigma the orthant maximum of
    LU + U/2 is about 1.1435 (attained on an axis), so C = 1.8 leaves slack.
    """
    def U(x: np.ndarray) -> float:
        return 1.0 + float(x[0]) ** 2 + float(x[1]) ** 2

    return LyapunovPair(
        W=U,
        W_tilde=lambda x: 0.5 * U(x),
        C=1.8,
        alpha_opt=0.5,
        grad_W=lambda x: 2.0 * np.asarray(x, dtype=float),
        hess_W=lambda x: 2.0 * np.eye(2),
    )
