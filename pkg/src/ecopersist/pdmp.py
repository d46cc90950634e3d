"""Randomly-switched ODE simulation (piecewise deterministic Markov processes).

Between jumps of the environment index the state follows the environment's
vector field, integrated by classical RK4 on a fixed grid; jump times come
from Poisson thinning at a user-declared rate bound, so state-dependent
rates only ever need pointwise evaluation.  Candidate times and acceptance
variates are drawn up front from the counter-based stream, which makes every
run a deterministic function of the seed.

The three-species competitive family used throughout gets a compiled kernel
(dispatched by model name); everything else runs through a plain Python loop
over the user's callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import SwitchedOdeModel
from .rng import GaussianStream
from .sde import Trajectory

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


__all__ = [
    "PdmpSimConfig",
    "PdmpResult",
    "PolarResult",
    "BoxExitError",
    "ThinningError",
    "simulate_pdmp",
    "simulate_boundary_polar",
    "kernel_plane_basis",
]


class BoxExitError(RuntimeError):
    """The integrated state left the declared invariant set."""

    def __init__(self, time: float, state):
        super().__init__(
            f"state left the invariant box at t={time:g} (integration accuracy); state={state}"
        )
        self.time = time
        self.state = np.asarray(state)


class ThinningError(RuntimeError):
    """A visited state had total jump rate above the declared bound."""

    def __init__(self, time: float, state):
        super().__init__(f"jump rate exceeded the thinning bound at t={time:g}; state={state}")
        self.time = time
        self.state = np.asarray(state)


@dataclass(frozen=True)
class PdmpSimConfig:
    dt: float
    t_max: float
    rate_bound: float
    seed: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must cover at least one step")
        if self.rate_bound <= 0:
            raise ValueError("rate_bound must be positive")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be an integer >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @property
    def steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class PdmpResult:
    trajectory: Trajectory
    jump_times: np.ndarray
    n_candidates: int


@dataclass(frozen=True)
class PolarResult:
    """Boundary-polar run: states are (theta_1, theta_2, z) with env column."""

    trajectory: Trajectory
    quad_mean: float
    batch_means: np.ndarray
    jump_times: np.ndarray


def _poisson_times(stream: GaussianStream, lam: float, t_max: float) -> np.ndarray:
    """All points of a rate-lam Poisson process on [0, t_max)."""
    if lam <= 0:
        return np.empty(0)
    chunks = []
    t = 0.0
    while t < t_max:
        n = max(64, int(lam * (t_max - t) * 1.2) + 32)
        gaps = stream.exponentials(n, rate=lam)
        times = t + np.cumsum(gaps)
        chunks.append(times)
        t = times[-1]
    cand = np.concatenate(chunks)
    return cand[cand < t_max]


def _sampled_rate_sup(model: SwitchedOdeModel, seed: int, samples: int = 256) -> float:
    stream = GaussianStream(seed, stream=7)
    pts = model.box.sample(samples, stream)
    sup = 0.0
    for x in pts:
        a = np.asarray(model.rates(x), dtype=float)
        sup = max(sup, float(a.sum(axis=1).max()))
    return sup


# -- compiled kernel for the three-species competitive family -----------------------


@njit(cache=True)
def _ml_rhs(x0, x1, x2, a, b, rmode, z1):
    if rmode == 0:
        r = 1.0
    else:
        r = 100.0 * math.sqrt(
            math.exp(-200.0 * (x0 - z1) ** 2)
            + math.exp(-200.0 * (x1 - z1) ** 2)
            + math.exp(-200.0 * (x2 - z1) ** 2)
        )
    f0 = r * x0 * (1.0 - (x0 + a * x1 + b * x2))
    f1 = r * x1 * (1.0 - (b * x0 + x1 + a * x2))
    f2 = r * x2 * (1.0 - (a * x0 + b * x1 + x2))
    return f0, f1, f2


@njit(cache=True)
def _ml_rk4(x, a, b, rmode, z1, h):
    p0, p1, p2 = x[0], x[1], x[2]
    k10, k11, k12 = _ml_rhs(p0, p1, p2, a, b, rmode, z1)
    k20, k21, k22 = _ml_rhs(p0 + 0.5 * h * k10, p1 + 0.5 * h * k11, p2 + 0.5 * h * k12, a, b, rmode, z1)
    k30, k31, k32 = _ml_rhs(p0 + 0.5 * h * k20, p1 + 0.5 * h * k21, p2 + 0.5 * h * k22, a, b, rmode, z1)
    k40, k41, k42 = _ml_rhs(p0 + h * k30, p1 + h * k31, p2 + h * k32, a, b, rmode, z1)
    x[0] = p0 + h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
    x[1] = p1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    x[2] = p2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)


@njit(cache=True)
def _ml_kernel(
    x, j0, a1, b1, a2, b2, tau, p, rmode, z1, eta, dt, steps, rs, lam, cand, accept_u, out, env_out, jump_times, bad
):
    j = j0
    t = 0.0
    ci = 0
    nj = 0
    nc = cand.shape[0]
    out[0, 0] = x[0]
    out[0, 1] = x[1]
    out[0, 2] = x[2]
    env_out[0] = j
    for g in range(steps):
        t_end = (g + 1) * dt
        while ci < nc and cand[ci] < t_end:
            h = cand[ci] - t
            if h > 0.0:
                if j == 0:
                    _ml_rk4(x, a1, b1, rmode, z1, h)
                else:
                    _ml_rk4(x, a2, b2, rmode, z1, h)
            t = cand[ci]
            q = tau * (1.0 - p) if j == 0 else tau * p
            if q > lam * (1.0 + 1e-12):
                bad[0] = t
                bad[1] = x[0]
                bad[2] = x[1]
                bad[3] = x[2]
                return 2, nj
            if accept_u[ci] <= q / lam:
                j = 1 - j
                jump_times[nj] = t
                nj += 1
            ci += 1
        h = t_end - t
        if h > 0.0:
            if j == 0:
                _ml_rk4(x, a1, b1, rmode, z1, h)
            else:
                _ml_rk4(x, a2, b2, rmode, z1, h)
        t = t_end
        s = x[0] + x[1] + x[2]
        if (
            s < 3.0 * eta - 1e-9
            or s > 3.0 + 1e-9
            or x[0] < -1e-9
            or x[1] < -1e-9
            or x[2] < -1e-9
        ):
            bad[0] = t
            bad[1] = x[0]
            bad[2] = x[1]
            bad[3] = x[2]
            return 1, nj
        if (g + 1) % rs == 0:
            r = (g + 1) // rs
            out[r, 0] = x[0]
            out[r, 1] = x[1]
            out[r, 2] = x[2]
            env_out[r] = j
    return 0, nj


_ML_KEYS = ("a1", "b1", "a2", "b2", "tau", "p", "r_mode", "z1", "eta")


def _ml_spec(model: SwitchedOdeModel):
    if model.name != "may_leonard":
        return None
    keys = dict(model.params)
    try:
        return tuple(float(keys[k]) for k in _ML_KEYS)
    except KeyError:
        return None


def _rk4_generic(field, x, h):
    k1 = field(x)
    k2 = field(x + 0.5 * h * k1)
    k3 = field(x + 0.5 * h * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _simulate_generic(model, x, j, cfg, cand, accept_u):
    steps, rs, lam = cfg.steps, cfg.record_stride, cfg.rate_bound
    rows = steps // rs + 1
    out = np.empty((rows, model.n))
    env_out = np.empty(rows, dtype=np.int64)
    jump_times = np.empty(cand.size)
    out[0] = x
    env_out[0] = j
    t = 0.0
    ci = 0
    nj = 0
    for g in range(steps):
        t_end = (g + 1) * cfg.dt
        while ci < cand.size and cand[ci] < t_end:
            h = cand[ci] - t
            if h > 0.0:
                x = _rk4_generic(lambda v: model.field_at(j, v), x, h)
            t = cand[ci]
            row = np.asarray(model.rates(x), dtype=float)[j]
            total = float(row.sum())
            if total > lam * (1.0 + 1e-12):
                raise ThinningError(t, x)
            v = accept_u[ci] * lam
            cum = np.cumsum(row)
            if v <= total:
                k = int(np.searchsorted(cum, v))
                if k != j:
                    j = k
                    jump_times[nj] = t
                    nj += 1
            ci += 1
        h = t_end - t
        if h > 0.0:
            x = _rk4_generic(lambda v: model.field_at(j, v), x, h)
        t = t_end
        if not model.box.contains(x, tol=1e-9):
            raise BoxExitError(t, x)
        if (g + 1) % rs == 0:
            out[(g + 1) // rs] = x
            env_out[(g + 1) // rs] = j
    return out, env_out, jump_times[:nj]


def simulate_pdmp(
    model: SwitchedOdeModel,
    x0,
    j0: int,
    cfg: PdmpSimConfig,
    engine: str = "auto",
) -> PdmpResult:
    """Simulate (x(t), J(t)) and record every ``record_stride``-th grid state.

    The environment column is right-continuous: a record at time t carries
    the environment in force just after t.
    """
    if engine not in ("auto", "jit", "python"):
        raise ValueError("engine must be auto, jit, or python")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.n,):
        raise ValueError(f"x0 must have shape ({model.n},)")
    if not model.box.contains(x, tol=1e-9):
        raise ValueError("x0 must lie in the model's invariant box")
    if not 0 <= j0 < model.n_env:
        raise ValueError("j0 out of range")
    sup = _sampled_rate_sup(model, cfg.seed)
    if cfg.rate_bound < sup:
        raise ValueError(
            f"rate_bound {cfg.rate_bound:g} is below the sampled rate supremum {sup:g}"
        )

    stream = GaussianStream(cfg.seed)
    cand = _poisson_times(stream, cfg.rate_bound, cfg.t_max)
    accept_u = stream.uniforms(cand.size) if cand.size else np.empty(0)

    spec = _ml_spec(model)
    if engine == "jit" and (spec is None or not _HAVE_NUMBA):
        raise ValueError("jit engine requires the built-in competitive model and numba")
    use_jit = engine != "python" and spec is not None and _HAVE_NUMBA

    steps, rs = cfg.steps, cfg.record_stride
    if use_jit:
        a1, b1, a2, b2, tau, p, rmode, z1, eta = spec
        rows = steps // rs + 1
        out = np.empty((rows, 3))
        env_out = np.empty(rows, dtype=np.int64)
        jump_buf = np.empty(max(1, cand.size))
        bad = np.zeros(4)
        status, nj = _ml_kernel(
            x, j0, a1, b1, a2, b2, tau, p, int(rmode), z1, eta,
            cfg.dt, steps, rs, cfg.rate_bound, cand, accept_u,
            out, env_out, jump_buf, bad,
        )
        if status == 1:
            raise BoxExitError(bad[0], bad[1:])
        if status == 2:
            raise ThinningError(bad[0], bad[1:])
        jumps = jump_buf[:nj].copy()
    else:
        out, env_out, jumps = _simulate_generic(model, x, j0, cfg, cand, accept_u)

    times = np.arange(out.shape[0], dtype=float) * (cfg.dt * rs)
    return PdmpResult(Trajectory(times, out, env_out), jumps, int(cand.size))


# -- boundary-polar process -----------------------------------------------------------


def kernel_plane_basis() -> np.ndarray:
    """Orthonormal basis (columns) of the zero-sum plane in R^3."""
    u = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)
    v = np.array([1.0, 1.0, -2.0]) / math.sqrt(6.0)
    return np.stack([u, v], axis=1)


def _competition_matrix(a: float, b: float) -> np.ndarray:
    return np.array(
        [
            [-1.0, -a, -b],
            [-b, -1.0, -a],
            [-a, -b, -1.0],
        ]
    )


@njit(cache=True)
def _polar_rhs(th1, th2, z, scoef, m11, m12, m21, m22, rmode, z1):
    if rmode == 0:
        rhat = 1.0
    else:
        rhat = 100.0 * math.sqrt(3.0) * math.exp(-100.0 * (z - z1) ** 2)
    s = 1.0 - z * scoef
    v1 = rhat * ((s + z * m11) * th1 + z * m12 * th2)
    v2 = rhat * (z * m21 * th1 + (s + z * m22) * th2)
    q = th1 * v1 + th2 * v2
    return v1 - q * th1, v2 - q * th2, rhat * z * s, q


@njit(cache=True)
def _polar_rk4(state, scoef, m11, m12, m21, m22, rmode, z1, h):
    t1, t2, zz = state[0], state[1], state[2]
    a1, a2, a3, _ = _polar_rhs(t1, t2, zz, scoef, m11, m12, m21, m22, rmode, z1)
    b1, b2, b3, _ = _polar_rhs(t1 + 0.5 * h * a1, t2 + 0.5 * h * a2, zz + 0.5 * h * a3, scoef, m11, m12, m21, m22, rmode, z1)
    c1, c2, c3, _ = _polar_rhs(t1 + 0.5 * h * b1, t2 + 0.5 * h * b2, zz + 0.5 * h * b3, scoef, m11, m12, m21, m22, rmode, z1)
    d1, d2, d3, _ = _polar_rhs(t1 + h * c1, t2 + h * c2, zz + h * c3, scoef, m11, m12, m21, m22, rmode, z1)
    state[0] = t1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
    state[1] = t2 + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
    state[2] = zz + h / 6.0 * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
    nrm = math.sqrt(state[0] ** 2 + state[1] ** 2)
    state[0] /= nrm
    state[1] /= nrm


@njit(cache=True)
def _polar_kernel(
    state, j0, scoefs, ms, tau, p, rmode, z1, z_min, z_max,
    dt, steps, rs, lam, cand, accept_u, batch_width,
    out, env_out, jump_times, batch_int, bad,
):
    j = j0
    t = 0.0
    ci = 0
    nj = 0
    nc = cand.shape[0]
    total_int = 0.0
    nb = batch_int.shape[0]
    out[0, 0] = state[0]
    out[0, 1] = state[1]
    out[0, 2] = state[2]
    env_out[0] = j
    for g in range(steps):
        t_end = (g + 1) * dt
        while ci < nc and cand[ci] < t_end:
            h = cand[ci] - t
            if h > 0.0:
                _, _, _, q = _polar_rhs(state[0], state[1], state[2], scoefs[j], ms[j, 0], ms[j, 1], ms[j, 2], ms[j, 3], rmode, z1)
                total_int += q * h
                bi = int(t / batch_width)
                if bi >= nb:
                    bi = nb - 1
                batch_int[bi] += q * h
                _polar_rk4(state, scoefs[j], ms[j, 0], ms[j, 1], ms[j, 2], ms[j, 3], rmode, z1, h)
            t = cand[ci]
            qr = tau * (1.0 - p) if j == 0 else tau * p
            if accept_u[ci] <= qr / lam:
                j = 1 - j
                jump_times[nj] = t
                nj += 1
            ci += 1
        h = t_end - t
        if h > 0.0:
            _, _, _, q = _polar_rhs(state[0], state[1], state[2], scoefs[j], ms[j, 0], ms[j, 1], ms[j, 2], ms[j, 3], rmode, z1)
            total_int += q * h
            bi = int(t / batch_width)
            if bi >= nb:
                bi = nb - 1
            batch_int[bi] += q * h
            _polar_rk4(state, scoefs[j], ms[j, 0], ms[j, 1], ms[j, 2], ms[j, 3], rmode, z1, h)
        t = t_end
        if state[2] < z_min - 1e-9 or state[2] > z_max + 1e-9:
            bad[0] = t
            bad[1] = state[2]
            return 1, nj, total_int
        if (g + 1) % rs == 0:
            r = (g + 1) // rs
            out[r, 0] = state[0]
            out[r, 1] = state[1]
            out[r, 2] = state[2]
            env_out[r] = j
    return 0, nj, total_int


def _simulate_polar_python(
    state, j0, scoefs, ms, tau, p, rmode, z1, z_min, z_max,
    cfg, cand, accept_u, batch_width, out, env_out, jump_times, batch_int,
):
    """Independent numpy implementation of the polar loop for cross-checks."""
    mats = [np.array([[ms[j, 0], ms[j, 1]], [ms[j, 2], ms[j, 3]]]) for j in range(2)]

    def rhs(s, j):
        th, z = s[:2], s[2]
        rhat = 1.0 if rmode == 0 else 100.0 * math.sqrt(3.0) * math.exp(-100.0 * (z - z1) ** 2)
        sz = 1.0 - z * scoefs[j]
        v = rhat * (sz * th + z * (mats[j] @ th))
        q = float(th @ v)
        return np.concatenate([v - q * th, [rhat * z * sz]]), q

    def advance(s, j, h):
        k1, _ = rhs(s, j)
        k2, _ = rhs(s + 0.5 * h * k1, j)
        k3, _ = rhs(s + 0.5 * h * k2, j)
        k4, _ = rhs(s + h * k3, j)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s[:2] /= np.linalg.norm(s[:2])
        return s

    j = j0
    t = 0.0
    ci = 0
    nj = 0
    total_int = 0.0
    nb = batch_int.shape[0]
    s = state.copy()
    out[0] = s
    env_out[0] = j
    steps, rs, lam = cfg.steps, cfg.record_stride, cfg.rate_bound
    for g in range(steps):
        t_end = (g + 1) * cfg.dt
        while ci < cand.size and cand[ci] < t_end:
            h = cand[ci] - t
            if h > 0.0:
                _, q = rhs(s, j)
                total_int += q * h
                batch_int[min(int(t / batch_width), nb - 1)] += q * h
                s = advance(s, j, h)
            t = cand[ci]
            qr = tau * (1.0 - p) if j == 0 else tau * p
            if accept_u[ci] <= qr / lam:
                j = 1 - j
                jump_times[nj] = t
                nj += 1
            ci += 1
        h = t_end - t
        if h > 0.0:
            _, q = rhs(s, j)
            total_int += q * h
            batch_int[min(int(t / batch_width), nb - 1)] += q * h
            s = advance(s, j, h)
        t = t_end
        if s[2] < z_min - 1e-9 or s[2] > z_max + 1e-9:
            raise BoxExitError(t, s)
        if (g + 1) % rs == 0:
            out[(g + 1) // rs] = s
            env_out[(g + 1) // rs] = j
    return nj, total_int


def simulate_boundary_polar(
    alphas,
    betas,
    tau: float,
    p: float,
    cfg: PdmpSimConfig,
    j0: int = 0,
    theta0=None,
    z0: float | None = None,
    r_mode: str = "constant",
    bump_center: float | None = None,
    z_min: float = 0.0,
    z_max: float = 1.0 + 1e-6,
    n_batches: int = 100,
    engine: str = "auto",
) -> PolarResult:
    """Simulate the diagonal-boundary process (theta, z, J).

    theta lives on the unit circle of the zero-sum plane (coordinates in the
    orthonormal basis of :func:`kernel_plane_basis`), z is the diagonal
    coordinate with dz/dt = rhat(z) z (1 - z (1 + alpha_J + beta_J)), and the
    angular part follows the projectivized linearization, renormalized every
    step.  The running time-average of the radial quadratic form is returned
    with batch means for error bars.
    """
    if engine not in ("auto", "jit", "python"):
        raise ValueError("engine must be auto, jit, or python")
    if tau < 0 or not 0 < p < 1:
        raise ValueError("need tau >= 0 and 0 < p < 1")
    if r_mode not in ("constant", "bump"):
        raise ValueError("r_mode must be constant or bump")
    if tau > 0 and cfg.rate_bound < tau * max(p, 1.0 - p):
        raise ValueError("rate_bound is below the switching rate supremum")
    if j0 not in (0, 1):
        raise ValueError("j0 must be 0 or 1")
    a = tuple(float(v) for v in alphas)
    b = tuple(float(v) for v in betas)
    if len(a) != 2 or len(b) != 2:
        raise ValueError("need exactly two environments")

    basis = kernel_plane_basis()
    scoefs = np.array([1.0 + a[0] + b[0], 1.0 + a[1] + b[1]])
    ms = np.empty((2, 4))
    for j in range(2):
        mj = basis.T @ _competition_matrix(a[j], b[j]) @ basis
        ms[j] = mj.ravel()
    rmode = 0 if r_mode == "constant" else 1
    z1 = float(bump_center) if bump_center is not None else 1.0 / scoefs[0]

    state = np.empty(3)
    if theta0 is None:
        state[0], state[1] = 1.0, 0.0
    else:
        th = np.asarray(theta0, dtype=float)
        nrm = float(np.linalg.norm(th))
        if nrm == 0:
            raise ValueError("theta0 must be nonzero")
        state[0], state[1] = th / nrm
    state[2] = float(z0) if z0 is not None else 1.0 / scoefs[j0]
    if not z_min <= state[2] <= z_max:
        raise ValueError("z0 outside the declared z range")

    stream = GaussianStream(cfg.seed)
    if tau > 0:
        cand = _poisson_times(stream, cfg.rate_bound, cfg.t_max)
        accept_u = stream.uniforms(cand.size) if cand.size else np.empty(0)
    else:
        cand = np.empty(0)
        accept_u = np.empty(0)

    steps, rs = cfg.steps, cfg.record_stride
    rows = steps // rs + 1
    out = np.empty((rows, 3))
    env_out = np.empty(rows, dtype=np.int64)
    jump_buf = np.empty(max(1, cand.size))
    batch_int = np.zeros(max(1, n_batches))
    batch_width = cfg.t_max / batch_int.shape[0]

    use_jit = engine != "python" and _HAVE_NUMBA
    if engine == "jit" and not _HAVE_NUMBA:
        raise ValueError("jit engine requires numba")
    if use_jit:
        bad = np.zeros(2)
        status, nj, total_int = _polar_kernel(
            state, j0, scoefs, ms, tau, p, rmode, z1, z_min, z_max,
            cfg.dt, steps, rs, cfg.rate_bound, cand, accept_u, batch_width,
            out, env_out, jump_buf, batch_int, bad,
        )
        if status == 1:
            raise BoxExitError(bad[0], bad[1:])
    else:
        nj, total_int = _simulate_polar_python(
            state, j0, scoefs, ms, tau, p, rmode, z1, z_min, z_max,
            cfg, cand, accept_u, batch_width, out, env_out, jump_buf, batch_int,
        )

    times = np.arange(rows, dtype=float) * (cfg.dt * rs)
    traj = Trajectory(times, out, env_out)
    return PolarResult(
        trajectory=traj,
        quad_mean=total_int / cfg.t_max,
        batch_means=batch_int / batch_width,
        jump_times=jump_buf[:nj].copy(),
    )
