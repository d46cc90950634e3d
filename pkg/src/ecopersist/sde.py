"""Trajectory simulation for the face-invariant diffusions.

Coordinates with alpha_i = 1 are integrated in log scale, which keeps them
strictly positive and makes the faces exactly invariant; coordinates with
alpha_i >= 2 fall back to Euler-Maruyama with clamping at zero (documented
bias near the face, where no positivity-preserving first-order scheme
exists).  Built-in models run through a compiled kernel; anything else uses
a plain Python twin of the same loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import EcologicalSdeModel
from .rng import GaussianStream

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _HAVE_NUMBA = False

__all__ = [
    "SdeSimConfig",
    "Trajectory",
    "BlowUpError",
    "simulate_sde",
    "gaussian_stream",
    "BLOWUP_LIMIT",
]

BLOWUP_LIMIT = 1e12
_LOG_BLOWUP = math.log(BLOWUP_LIMIT)
_CHUNK_STEPS = 1 << 20

_SCHEMES = ("auto", "log-euler", "euler-maruyama-clamped")


class BlowUpError(RuntimeError):
    """The state escaped past the guard; carries the first bad time."""

    def __init__(self, time: float):
        super().__init__(f"state exceeded {BLOWUP_LIMIT:g} (or became non-finite) at t={time:g}")
        self.time = time


@dataclass(frozen=True)
class SdeSimConfig:
    dt: float
    t_max: float
    seed: int = 0
    scheme: str = "auto"
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must be at least one step")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be an integer >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")

    @property
    def steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Recorded time series: times, states (rows), optional environment index."""

    times: np.ndarray
    states: np.ndarray
    env: np.ndarray | None = None

    def __post_init__(self):
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must have matching lengths")
        if self.env is not None and self.env.shape[0] != self.times.shape[0]:
            raise ValueError("env must align with times")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, labels: tuple[str, ...] | None = None) -> None:
        """Write `t,x1,...,xn[,env]` rows at full double precision.

        ``labels`` renames the state columns (e.g. polar coordinates).
        """
        if labels is None:
            labels = tuple(f"x{i + 1}" for i in range(self.n))
        elif len(labels) != self.n:
            raise ValueError("need one label per state column")
        names = ["t", *labels]
        cols = [self.times[:, None], self.states]
        fmt = ["%.17g"] * (1 + self.n)
        if self.env is not None:
            names.append("env")
            cols.append(self.env[:, None].astype(float))
            fmt.append("%d")
        data = np.hstack(cols)
        np.savetxt(path, data, fmt=fmt, delimiter=",", header=",".join(names), comments="")


def gaussian_stream(seed: int, count: int) -> np.ndarray:
    """Reproducible standard normal variates (the engines' noise source)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return GaussianStream(seed).normals(count)


# -- stepping kernel ----------------------------------------------------------------
#
# One source of truth for the built-in models; compiled with numba for speed
# and kept callable as plain Python so both paths can be cross-checked.
# Model ids: 0 = logistic, 1 = lv2d, 2 = rma.


def _builtin_chunk(mid, par, alpha, use_log, y, dt, sqdt, start, chunk_steps, noise, rs, out):
    n = y.shape[0]
    m = noise.shape[1]
    f = np.empty(n)
    sig = np.empty((n, m))
    xw = np.empty(n)
    for s in range(chunk_steps):
        g = start + s
        for i in range(n):
            xw[i] = math.exp(y[i]) if use_log[i] else y[i]
        if g % rs == 0:
            r = g // rs
            for i in range(n):
                out[r, i] = xw[i]
        if mid == 0:
            f[0] = 1.0 - xw[0] / par[0]
            sig[0, 0] = par[1]
        elif mid == 1:
            f[0] = par[0] - (par[2] * xw[0] + par[3] * xw[1])
            f[1] = par[1] - (par[4] * xw[0] + par[5] * xw[1])
            sig[0, 0] = par[6]
            sig[0, 1] = 0.0
            sig[1, 0] = 0.0
            sig[1, 1] = par[6]
        else:
            f[0] = 1.0 - xw[0] / par[2] - xw[1] / (1.0 + xw[0])
            f[1] = -par[1] + xw[0] / (1.0 + xw[0])
            sig[0, 0] = par[0]
            sig[1, 0] = 0.0
        for i in range(n):
            dot = 0.0
            aii = 0.0
            for j in range(m):
                dot += sig[i, j] * noise[s, j]
                aii += sig[i, j] * sig[i, j]
            if use_log[i]:
                y[i] = y[i] + (f[i] - 0.5 * aii) * dt + sqdt * dot
                if not (y[i] < _LOG_BLOWUP):
                    return g + 1
            else:
                xa = 1.0
                for _ in range(alpha[i]):
                    xa *= xw[i]
                v = xw[i] + xa * (f[i] * dt + sqdt * dot)
                if v < 0.0:
                    v = 0.0
                y[i] = v
                if not (v < BLOWUP_LIMIT):
                    return g + 1
    return -1


_builtin_chunk_jit = njit(cache=True)(_builtin_chunk) if _HAVE_NUMBA else None


def _generic_chunk(model, alpha, use_log, y, dt, sqdt, start, chunk_steps, noise, rs, out):
    """Pure-Python stepping for user-supplied drift/diffusion callables."""
    logmask = use_log
    emmask = ~use_log
    for s in range(chunk_steps):
        g = start + s
        xw = y.copy()
        xw[logmask] = np.exp(y[logmask])
        if g % rs == 0:
            out[g // rs] = xw
        f = np.asarray(model.drift(xw), dtype=float)
        sig = np.asarray(model.diffusion(xw), dtype=float)
        dots = sig @ noise[s]
        aii = np.einsum("ij,ij->i", sig, sig)
        y[logmask] = y[logmask] + (f[logmask] - 0.5 * aii[logmask]) * dt + sqdt * dots[logmask]
        if np.any(emmask):
            xa = xw[emmask] ** alpha[emmask]
            v = xw[emmask] + xa * (f[emmask] * dt + sqdt * dots[emmask])
            y[emmask] = np.maximum(v, 0.0)
        bad = (~np.isfinite(y)) | (logmask & (y >= _LOG_BLOWUP)) | (emmask & (y >= BLOWUP_LIMIT))
        if np.any(bad):
            return g + 1
    return -1


_MODEL_IDS = {"logistic": 0, "lv2d": 1, "rma": 2}
_PARAM_ORDER = {
    "logistic": ("kappa", "sigma"),
    "lv2d": ("r1", "r2", "b11", "b12", "b21", "b22", "sigma"),
    "rma": ("eps", "alpha", "kappa"),
}


def _builtin_spec(model: EcologicalSdeModel):
    if model.name not in _MODEL_IDS:
        return None
    keys = dict(model.params)
    try:
        par = np.array([keys[k] for k in _PARAM_ORDER[model.name]], dtype=float)
    except KeyError:
        return None
    return _MODEL_IDS[model.name], par


def simulate_sde(
    model: EcologicalSdeModel,
    x0: Sequence[float],
    cfg: SdeSimConfig,
    engine: str = "auto",
) -> Trajectory:
    """Simulate the diffusion and record every ``record_stride``-th state.

    Deterministic given (model, x0, cfg): the noise comes from a counter-based
    stream keyed by ``cfg.seed``.  Raises :class:`BlowUpError` when any
    coordinate reaches the 1e12 guard or turns non-finite.
    """
    if engine not in ("auto", "jit", "python"):
        raise ValueError("engine must be auto, jit, or python")
    x = np.asarray(x0, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"x0 must have shape ({model.n},)")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("x0 must be finite and componentwise nonnegative")

    alpha = np.asarray(model.alpha, dtype=np.int64)
    if cfg.scheme == "log-euler" and np.any(alpha >= 2):
        raise ValueError("log-euler requires alpha_i = 1 on every coordinate")
    if cfg.scheme == "euler-maruyama-clamped":
        use_log = np.zeros(model.n, dtype=bool)
    else:
        use_log = (alpha == 1) & (x > 0)

    y = x.copy()
    y[use_log] = np.log(x[use_log])

    steps = cfg.steps
    rs = int(cfg.record_stride)
    records = steps // rs + 1
    out = np.empty((records, model.n))

    spec = _builtin_spec(model)
    if engine == "jit" and (spec is None or not _HAVE_NUMBA):
        raise ValueError("jit engine requires a built-in model and numba")
    use_jit = engine != "python" and spec is not None and _HAVE_NUMBA

    stream = GaussianStream(cfg.seed)
    sqdt = math.sqrt(cfg.dt)
    start = 0
    while start < steps:
        cs = min(_CHUNK_STEPS, steps - start)
        noise = stream.normals(cs * model.m).reshape(cs, model.m)
        if spec is not None:
            mid, par = spec
            stepper = _builtin_chunk_jit if use_jit else _builtin_chunk
            stop = stepper(mid, par, alpha, use_log, y, cfg.dt, sqdt, start, cs, noise, rs, out)
        else:
            stop = _generic_chunk(model, alpha, use_log, y, cfg.dt, sqdt, start, cs, noise, rs, out)
        if stop >= 0:
            raise BlowUpError(stop * cfg.dt)
        start += cs

    if steps % rs == 0:
        final = y.copy()
        final[use_log] = np.exp(y[use_log])
        out[-1] = final

    times = np.arange(records, dtype=float) * (cfg.dt * rs)
    return Trajectory(times, out, None)
