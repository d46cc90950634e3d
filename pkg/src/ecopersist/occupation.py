"""Empirical occupation measures and persistence diagnostics.

The occupation measure of a trajectory is held as a histogram on a declared
rectangular window, with the mass that fell outside the window tracked
explicitly (tightness is usually the claim under test, so leaking mass must
be visible).  Counts are kept raw internally; normalized mass is derived, so
merging parallel shards is exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .models import ExtinctionSetSpec, LyapunovPair
from .sde import Trajectory

__all__ = [
    "EmpiricalMeasure",
    "TightnessReport",
    "accumulate",
    "merge",
    "tv_distance",
    "persistence_statistic",
    "persistence_sweep",
    "tightness_diagnostic",
    "uniform_edges",
    "export_histogram_csv",
]


def uniform_edges(low: float, high: float, bins: int) -> np.ndarray:
    if bins < 1 or high <= low:
        raise ValueError("need bins >= 1 and high > low")
    return np.linspace(low, high, bins + 1)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Histogram of time fractions on a rectangular window.

    Bins are left-closed/right-open; a state is in the window only when every
    coordinate satisfies edges[0] <= x < edges[-1].
    """

    edges: tuple[np.ndarray, ...]
    counts: np.ndarray
    out_count: int
    t_total: float

    def __post_init__(self):
        if not self.edges:
            raise ValueError("need at least one axis of bin edges")
        for e in self.edges:
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("each axis needs at least 2 strictly increasing edges")
        shape = tuple(e.size - 1 for e in self.edges)
        if self.counts.shape != shape:
            raise ValueError(f"counts shape {self.counts.shape} does not match edges {shape}")
        if np.any(self.counts < 0) or self.out_count < 0:
            raise ValueError("counts must be nonnegative")
        if self.n_samples == 0:
            raise ValueError("measure must contain at least one sample")
        if self.t_total <= 0:
            raise ValueError("t_total must be positive")

    @property
    def dim(self) -> int:
        return len(self.edges)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum()) + self.out_count

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.n_samples

    @property
    def out_of_window_mass(self) -> float:
        return self.out_count / self.n_samples

    def bin_centers(self) -> tuple[np.ndarray, ...]:
        return tuple((e[:-1] + e[1:]) / 2.0 for e in self.edges)

    def same_grid(self, other: "EmpiricalMeasure") -> bool:
        return self.dim == other.dim and all(
            np.array_equal(a, b) for a, b in zip(self.edges, other.edges)
        )


def accumulate(traj: Trajectory, edges: Sequence[np.ndarray]) -> EmpiricalMeasure:
    """Bin a trajectory by the left-endpoint rule.

    Each recorded state except the last one represents the slice of time up
    to the next record, so with a uniform recording grid the bin mass is the
    fraction of recorded slices spent there.
    """
    grid = tuple(np.asarray(e, dtype=float) for e in edges)
    if len(grid) == 0:
        raise ValueError("empty bin specification")
    if traj.states.shape[0] < 2:
        raise ValueError("need at least two records to form time slices")
    if traj.states.shape[1] != len(grid):
        raise ValueError("grid dimension must match the trajectory dimension")

    xs = traj.states[:-1]
    n_axes = len(grid)
    inside = np.ones(xs.shape[0], dtype=bool)
    idx = np.zeros(xs.shape[0], dtype=np.int64)
    for a, e in enumerate(grid):
        ia = np.searchsorted(e, xs[:, a], side="right") - 1
        inside &= (xs[:, a] >= e[0]) & (xs[:, a] < e[-1])
        idx = idx * (e.size - 1) + np.clip(ia, 0, e.size - 2)
    shape = tuple(e.size - 1 for e in grid)
    flat = np.bincount(idx[inside], minlength=int(np.prod(shape)))
    counts = flat.reshape(shape).astype(np.int64)
    out_count = int(xs.shape[0] - inside.sum())
    t_total = float(traj.times[-1] - traj.times[0])
    return EmpiricalMeasure(grid, counts, out_count, t_total)


def merge(measures: Sequence[EmpiricalMeasure]) -> EmpiricalMeasure:
    """Combine shard histograms; exact because raw counts add."""
    if not measures:
        raise ValueError("nothing to merge")
    head = measures[0]
    for m in measures[1:]:
        if not head.same_grid(m):
            raise ValueError("cannot merge measures on different grids")
    counts = sum(m.counts for m in measures)
    out = sum(m.out_count for m in measures)
    t_total = sum(m.t_total for m in measures)
    return EmpiricalMeasure(head.edges, counts, out, t_total)


def tv_distance(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> float:
    """Total variation on the common grid, counting out-of-window mass."""
    if not m1.same_grid(m2):
        raise ValueError("total variation requires identical grids")
    inside = 0.5 * float(np.abs(m1.mass - m2.mass).sum())
    return inside + 0.5 * abs(m1.out_of_window_mass - m2.out_of_window_mass)


def persistence_statistic(
    measure: EmpiricalMeasure, spec: ExtinctionSetSpec, delta: float
) -> float:
    """Fraction of time spent at distance >= delta from the extinction set.

    Bins are classified by their centers; out-of-window mass never counts as
    persistent.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    centers = measure.bin_centers()
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    far = np.array([spec.distance(p) >= delta for p in pts]).reshape(measure.counts.shape)
    return float(measure.mass[far].sum())


def persistence_sweep(
    measure: EmpiricalMeasure, spec: ExtinctionSetSpec, k_max: int = 12
) -> dict[float, float]:
    """Persistence statistic over the dyadic sweep delta = 2^-k, k = 1..k_max."""
    return {
        2.0**-k: persistence_statistic(measure, spec, 2.0**-k)
        for k in range(1, k_max + 1)
    }


@dataclass(frozen=True)
class TightnessReport:
    pi_w_tilde_tail: float
    C: float
    flagged: bool
    series_times: np.ndarray
    series_values: np.ndarray


def tightness_diagnostic(
    traj: Trajectory, pair: LyapunovPair, max_series_points: int = 400
) -> TightnessReport:
    """Running occupation average of W_tilde against the drift constant C.

    The tail average (last quarter of the run) should settle at or below C
    for a valid Lyapunov pair; exceeding C by more than 10% raises the flag.
    """
    xs = traj.states[:-1]
    if xs.shape[0] < 4:
        raise ValueError("trajectory too short for a tail average")
    vals = np.array([float(pair.W_tilde(x)) for x in xs])
    running = np.cumsum(vals) / np.arange(1, vals.size + 1)
    tail = float(running[-1] if vals.size < 8 else np.mean(vals[-(vals.size // 4):]))
    stride = max(1, vals.size // max_series_points)
    return TightnessReport(
        pi_w_tilde_tail=tail,
        C=pair.C,
        flagged=bool(tail > 1.1 * pair.C),
        series_times=traj.times[:-1][::stride].copy(),
        series_values=running[::stride].copy(),
    )


def export_histogram_csv(measure: EmpiricalMeasure, path) -> None:
    """Write `bin_center_1,...,bin_center_n,mass` rows in C order."""
    centers = measure.bin_centers()
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    data = np.hstack([pts, measure.mass.ravel()[:, None]])
    names = [f"bin_center_{i + 1}" for i in range(measure.dim)] + ["mass"]
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="")
