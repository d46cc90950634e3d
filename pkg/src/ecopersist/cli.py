"""Batch front-end: configured experiments in, reports and plot data out.

``simulate`` and ``persist`` drive a TOML experiment file through the
engines; ``rma`` and ``may-leonard`` are flag-driven shortcuts around the two
case studies; ``bracket`` prints canonical bracket polynomials for golden
files; ``validate`` runs every check that does not need a simulation.

Reports are JSON with sorted keys and a single timestamp line, so equal
configs and seeds give byte-identical files once that line is dropped.  Every
numeric result carries a provenance tag (closed-form, quadrature, exact, or
monte-carlo with a standard error) because downstream consumers should never
have to guess which numbers fluctuate under reseeding.  Exit codes: 0 for a
clean run, 1 for errors, 2 when a verdict sits inside its own statistical
noise; pipelines need to tell "cannot certify yet" apart from "broken".
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .brackets import PolyVectorField, hormander_check, lie_bracket
from .config import (
    BUILTIN_MODELS,
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    default_model_params,
    default_x0,
    effective_mapping,
    load_config,
    validate_config,
)
from .may_leonard import (
    MayLeonardEnv,
    carrying_simplex,
    classify_switching,
    compare_printed_coefficients,
    growth_rate_function,
    lambda_bd,
    lambda_d_estimate,
    lambda_d_limits,
    may_leonard_model,
    ml_persistence_report,
    strong_bracket_reduction,
)
from .models import (
    boundary_faces,
    boundary_union_diagonal,
    check_lyapunov_drift,
    log_uniform_grid,
    logistic_model,
    logistic_pair,
    lv2d_model,
    lv2d_pair,
)
from .occupation import (
    accumulate,
    export_histogram_csv,
    merge,
    persistence_sweep,
    tightness_diagnostic,
    uniform_edges,
)
from .pdmp import PdmpSimConfig, simulate_pdmp
from .persistence import (
    certify_persistence,
    dirac_measure,
    enumerate_boundary_ergodic_measures,
    h_exponent_estimate,
    invasion_rate_table,
)
from .poly import parse_poly
from .rma import RmaParams, prey_marginal_l1, regime_report, rma_model, stratonovich_fields
from .sde import SdeSimConfig, Trajectory, simulate_sde

__all__ = ["main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2

STDERR_GATE = 3.0


# -- report plumbing ----------------------------------------------------------------


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _jsonable(obj: Any) -> Any:
    """Recursively coerce numpy scalars and arrays for json.dumps."""
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _dump_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def _write_report(payload: Mapping[str, Any], out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(_dump_json(payload))
    return path


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, str]]:
    if isinstance(obj, Mapping):
        rows: list[tuple[str, str]] = []
        for key in sorted(obj):
            rows.extend(_flatten(obj[key], f"{prefix}{key}."))
        return rows
    return [(prefix.rstrip("."), json.dumps(_jsonable(obj)))]


def _print_payload(payload: Mapping[str, Any], fmt: str) -> None:
    if fmt == "csv":
        print("key,value")
        for key, value in _flatten(payload):
            print(f"{key},{value}")
    else:
        sys.stdout.write(_dump_json(payload))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


# -- model construction -------------------------------------------------------------


def _merged(config: ExperimentConfig) -> dict[str, Any]:
    params = default_model_params(config.model.name)
    params.update(config.model.params)
    return params


def _ml_envs(params: Mapping[str, Any]) -> tuple[MayLeonardEnv, MayLeonardEnv]:
    return (
        MayLeonardEnv(float(params["alpha1"]), float(params["beta1"])),
        MayLeonardEnv(float(params["alpha2"]), float(params["beta2"])),
    )


def _bump_center(params: Mapping[str, Any], env1: MayLeonardEnv) -> float | None:
    if params.get("r_mode", "constant") != "bump":
        return None
    center = params.get("bump_center")
    return float(center) if center is not None else env1.z_star


def _auto_rate_bound(tau: float, p: float) -> float:
    # constant two-state intensities peak at tau * max(p, 1 - p); 1% headroom
    return 1.01 * tau * max(p, 1.0 - p)


def _build_model(config: ExperimentConfig):
    """Instantiate the configured built-in; returns (model, kind)."""
    name = config.model.name
    params = _merged(config)
    if name == "logistic":
        return logistic_model(kappa=params["kappa"], sigma=params["sigma"]), "sde"
    if name == "lv2d":
        return lv2d_model(r=params["r"], b=params["b"], sigma=params["sigma"]), "sde"
    if name == "rma":
        return rma_model(RmaParams(params["alpha"], params["kappa"], params["epsilon"])), "sde"
    env1, env2 = _ml_envs(params)
    model = may_leonard_model(
        env1,
        env2,
        float(params["tau"]),
        float(params["p"]),
        eta=params.get("eta"),
        r_mode=params.get("r_mode", "constant"),
        bump_center=_bump_center(params, env1),
    )
    return model, "pdmp"


# -- simulation stage ---------------------------------------------------------------


def _simulate_one(config: ExperimentConfig, model, kind: str, seed: int) -> Trajectory:
    sim = config.simulation
    x0 = sim.x0 if sim.x0 is not None else default_x0(config.model.name)
    if kind == "sde":
        cfg = SdeSimConfig(dt=sim.dt, t_max=sim.t_max, seed=seed, record_stride=sim.record_stride)
        return simulate_sde(model, x0, cfg, engine=sim.engine)
    params = _merged(config)
    bound = sim.rate_bound
    if bound is None:
        bound = _auto_rate_bound(float(params["tau"]), float(params["p"]))
    cfg = PdmpSimConfig(dt=sim.dt, t_max=sim.t_max, rate_bound=bound, seed=seed, record_stride=sim.record_stride)
    return simulate_pdmp(model, x0, sim.j0, cfg, engine=sim.engine).trajectory


def _simulate_stage(config: ExperimentConfig, model, kind: str, threads: int, out_dir: Path) -> tuple[list[Trajectory], dict]:
    """Run the configured replicates and write one CSV per trajectory.

    Workers only compute; the main thread does every file write, in seed
    order, so output is deterministic no matter how the pool schedules.
    """
    sim = config.simulation
    seeds = [sim.seed + k for k in range(sim.replicates)]
    if len(seeds) == 1 or threads <= 1:
        trajectories = [_simulate_one(config, model, kind, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = list(pool.map(lambda s: _simulate_one(config, model, kind, s), seeds))
    traj_dir = out_dir / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for seed, traj in zip(seeds, trajectories):
        name = "trajectory.csv" if len(seeds) == 1 else f"trajectory_seed{seed}.csv"
        traj.to_csv(traj_dir / name)
        files.append(f"trajectories/{name}")
    block = {
        "files": files,
        "seeds": seeds,
        "rows_per_file": int(trajectories[0].times.shape[0]),
        "t_final": float(trajectories[0].times[-1]),
        "provenance": "monte-carlo",
    }
    return trajectories, block


def _extinction_spec(config: ExperimentConfig, n: int):
    if config.extinction.kind == "union_diagonal":
        return boundary_union_diagonal(n)
    return boundary_faces(range(n))


def _histogram_stage(config: ExperimentConfig, model, trajectories: Sequence[Trajectory], out_dir: Path) -> dict:
    ana = config.analysis
    edges = [uniform_edges(ana.support[0], ana.support[1], ana.bins)] * model.n
    measure = merge([accumulate(traj, edges) for traj in trajectories])
    hist_dir = out_dir / "histograms"
    hist_dir.mkdir(parents=True, exist_ok=True)
    export_histogram_csv(measure, hist_dir / "occupation.csv")
    total = measure.counts.sum() + measure.out_count
    # the delta sweep visits every bin center, so cap its grid: 32 bins in
    # three dimensions is already 32768 centers
    if ana.bins ** model.n > 50_000:
        coarse_edges = [uniform_edges(ana.support[0], ana.support[1], 32)] * model.n
        sweep_measure = merge([accumulate(traj, coarse_edges) for traj in trajectories])
        sweep_bins = 32
    else:
        sweep_measure = measure
        sweep_bins = ana.bins
    sweep = persistence_sweep(sweep_measure, _extinction_spec(config, model.n), k_max=6)
    return {
        "file": "histograms/occupation.csv",
        "bins": ana.bins,
        "support": list(ana.support),
        "mass_outside_window": float(measure.out_count / total) if total else 0.0,
        "persistence_by_delta": {f"{d:g}": float(v) for d, v in sweep.items()},
        "sweep_bins": sweep_bins,
        "extinction_set": config.extinction.kind,
        "provenance": "monte-carlo",
    }


def _gamma_stage(config: ExperimentConfig, trajectories: Sequence[Trajectory]) -> dict:
    """L1 distance between the prey (or sole) marginal and its Gamma law."""
    params = _merged(config)
    ana = config.analysis
    if config.model.name == "rma":
        rp = RmaParams(params["alpha"], params["kappa"], params["epsilon"])
        l1 = prey_marginal_l1(trajectories[0], rp, bins=ana.bins)
        shape = 2.0 / rp.epsilon**2 - 1.0
        scale = rp.epsilon**2 * rp.kappa / 2.0
    else:
        sigma, kappa = params["sigma"], params["kappa"]
        shape = 2.0 / sigma**2 - 1.0
        scale = kappa * sigma**2 / 2.0
        traj = trajectories[0]
        keep = traj.times >= 0.2 * traj.times[-1]
        values = traj.states[keep, 0]
        edges = uniform_edges(0.0, float(ana.support[1]), ana.bins)
        counts, _ = np.histogram(values, bins=edges)
        emp = counts / values.shape[0]
        law = np.diff(stats.gamma.cdf(edges, a=shape, scale=scale))
        tail = 1.0 - float(stats.gamma.cdf(edges[-1], a=shape, scale=scale))
        out_mass = 1.0 - emp.sum()
        l1 = float(np.abs(emp - law).sum() + abs(out_mass - tail))
    return {
        "l1_distance": float(l1),
        "gamma_shape": float(shape),
        "gamma_scale": float(scale),
        "provenance": "monte-carlo",
    }


def _lyapunov_stage(config: ExperimentConfig, model, trajectories: Sequence[Trajectory]) -> dict:
    pair = logistic_pair(_merged(config)["kappa"]) if config.model.name == "logistic" else lv2d_pair()
    pts = config.lyapunov.grid_points
    grid = log_uniform_grid([1e-3] * model.n, [1e2] * model.n, pts)
    drift = check_lyapunov_drift(model, pair, grid)
    tight = tightness_diagnostic(trajectories[0], pair)
    return {
        "drift_ok": drift.max_violation <= 0.0,
        "max_drift_violation": float(drift.max_violation),
        "points_checked": int(drift.n_points),
        "pi_w_tilde_tail": float(tight.pi_w_tilde_tail),
        "C": float(tight.C),
        "flagged": bool(tight.flagged),
        "provenance": "monte-carlo",
    }


def _simplices_stage(config: ExperimentConfig, out_dir: Path) -> dict:
    params = _merged(config)
    env1, env2 = _ml_envs(params)
    mesh_dir = out_dir / "simplices"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for tag, env in (("env1", env1), ("env2", env2)):
        mesh = carrying_simplex(env, config.analysis.mesh_resolution)
        rows = np.hstack([mesh.directions, mesh.radii[:, None], mesh.points])
        np.savetxt(
            mesh_dir / f"{tag}.csv",
            rows,
            fmt="%.17g",
            delimiter=",",
            header="d1,d2,d3,radius,x1,x2,x3",
            comments="",
        )
        files.append(f"simplices/{tag}.csv")
    return {
        "files": files,
        "resolution": config.analysis.mesh_resolution,
        "bisection_tol": 1e-6,
        "provenance": "quadrature",
    }


# -- verdict stages -----------------------------------------------------------------


def _sde_certificate_stage(config: ExperimentConfig, model) -> tuple[dict, bool]:
    """Boundary catalog, invasion rates, and the simplex certificate.

    Returns the JSON block and an inconclusive flag: the margin is trusted
    only when it clears three propagated standard errors in absolute value.
    """
    if model.n == 1:
        measures = (dirac_measure((0.0,)),)
    else:
        measures = enumerate_boundary_ergodic_measures(model)
    table = invasion_rate_table(model, measures)
    cert = certify_persistence(table)
    exponents = h_exponent_estimate(table, weights=cert.weights if cert.feasible else None)
    inconclusive = abs(cert.margin) <= STDERR_GATE * cert.stderr
    block = {
        "measures": [m.tag for m in measures],
        "rates": [[float(v) for v in row] for row in table.rates],
        "stderr": [[float(v) for v in row] for row in table.errors],
        "weights": list(cert.weights),
        "margin": float(cert.margin),
        "margin_stderr": float(cert.stderr),
        "verdict": "inconclusive" if inconclusive else cert.verdict,
        "lambda_minus": float(exponents.lambda_minus),
        "lambda_plus": float(exponents.lambda_plus),
        "note": cert.note,
        "provenance": "quadrature",
    }
    return block, inconclusive


def _ml_persistence_stage(config: ExperimentConfig) -> tuple[dict, bool]:
    params = _merged(config)
    env1, env2 = _ml_envs(params)
    sim = config.simulation
    tau, p = float(params["tau"]), float(params["p"])
    bound = sim.rate_bound if sim.rate_bound is not None else _auto_rate_bound(tau, p)
    cfg = PdmpSimConfig(dt=sim.dt, t_max=sim.t_max, rate_bound=bound, seed=sim.seed, record_stride=sim.record_stride)
    report = ml_persistence_report(
        env1,
        env2,
        tau,
        p,
        cfg,
        r_mode=params.get("r_mode", "constant"),
        bump_center=_bump_center(params, env1),
        eta=params.get("eta"),
        j0=sim.j0,
        x0=sim.x0,
        mesh_resolution=config.analysis.mesh_resolution,
        engine=sim.engine,
    )
    block = dict(report.as_dict())
    block["provenance"] = "monte-carlo"
    return block, not report.conclusive


def _exponent_stage(config: ExperimentConfig) -> dict:
    """Closed-form exponents for the switched system (no simulation)."""
    params = _merged(config)
    env1, env2 = _ml_envs(params)
    p = float(params["p"])
    r = growth_rate_function(params.get("r_mode", "constant"), _bump_center(params, env1))
    slow, fast = lambda_d_limits(env1, env2, p, r)
    return {
        "lambda_bd": float(lambda_bd(env1, env2, p)),
        "lambda_d_slow_switching_limit": float(slow),
        "lambda_d_fast_switching_limit": float(fast),
        "provenance": "closed-form",
    }


def _bracket_stage(config: ExperimentConfig) -> dict:
    """Hypoellipticity checks at fixed rational points; exact arithmetic."""
    params = _merged(config)
    if config.model.name == "rma":
        # going through the decimal string keeps the rationals as written
        # (3/5 rather than the binary expansion of 0.6)
        fields = stratonovich_fields(
            Fraction(str(params["epsilon"])), Fraction(str(params["alpha"])), Fraction(str(params["kappa"]))
        )
        result = hormander_check(fields, (Fraction(1), Fraction(2)), mode="strong", system="sde")
        return {
            "system": "stratonovich-sde",
            "point": ["1", "2"],
            "satisfied": bool(result.satisfied),
            "rank": int(result.rank),
            "witnesses": list(result.witnesses),
            "provenance": "exact-rational",
        }
    env1, env2 = _ml_envs(params)
    rank, _residual = strong_bracket_reduction(env1, env2)
    comparisons = compare_printed_coefficients(env1, env2)
    return {
        "system": "switched-ode",
        "strong_bracket_rank": int(rank),
        "coefficient_comparisons": [
            {"name": c.name, "computed": str(c.computed), "printed": str(c.printed), "match": c.computed == c.printed}
            for c in comparisons
        ],
        "provenance": "exact-rational",
    }


# -- pipeline -----------------------------------------------------------------------


def _dry_run_payload(config: ExperimentConfig) -> dict:
    builtins = {
        name: {"params": default_model_params(name), "x0": list(default_x0(name))}
        for name in BUILTIN_MODELS
    }
    return {
        "tool": {"name": "ecopersist", "version": __version__},
        "dry_run": True,
        "builtin_models": builtins,
        "config": effective_mapping(config),
    }


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    sim = config.simulation
    out = config.output
    if getattr(args, "seed", None) is not None:
        sim = dataclasses.replace(sim, seed=args.seed)
    if getattr(args, "out", None) is not None:
        out = dataclasses.replace(out, directory=args.out)
    if getattr(args, "format", None) is not None:
        out = dataclasses.replace(out, format=args.format)
    return dataclasses.replace(config, simulation=sim, output=out)


def _run_pipeline(config: ExperimentConfig, threads: int, want_verdicts: bool) -> int:
    """Shared body of `simulate` and `persist`."""
    fmt = config.output.format
    if config.empty:
        _print_payload(_dry_run_payload(config), fmt)
        return EXIT_OK
    diagnostics = validate_config(config)
    if diagnostics:
        for line in diagnostics:
            print(f"invalid config: {line}", file=sys.stderr)
        return EXIT_ERROR

    out_dir = Path(config.output.directory)
    model, kind = _build_model(config)
    results: dict[str, Any] = {}
    verdicts: dict[str, Any] = {}
    tolerances: dict[str, Any] = {"stderr_gate": STDERR_GATE}
    inconclusive = False

    trajectories, results["trajectory"] = _simulate_stage(config, model, kind, threads, out_dir)
    ana = config.analysis
    if ana.histogram:
        results["histogram"] = _histogram_stage(config, model, trajectories, out_dir)
    if ana.gamma_density:
        results["gamma_density"] = _gamma_stage(config, trajectories)
    if config.lyapunov.check:
        results["lyapunov"] = _lyapunov_stage(config, model, trajectories)
    if ana.simplices:
        results["simplices"] = _simplices_stage(config, out_dir)
        tolerances["simplex_bisection"] = 1e-6
    if ana.brackets:
        results["brackets"] = _bracket_stage(config)

    if want_verdicts or ana.certificate or ana.exponents:
        if kind == "sde":
            block, flag = _sde_certificate_stage(config, model)
            results["certificate"] = block
            verdicts["persistence"] = block["verdict"]
            tolerances["certificate_weight_floor"] = 1e-9
            inconclusive = inconclusive or flag
            if config.model.name == "rma":
                params = _merged(config)
                regime = dict(regime_report(RmaParams(params["alpha"], params["kappa"], params["epsilon"])))
                regime["provenance"] = "closed-form"
                results["regime"] = regime
        else:
            if ana.exponents or want_verdicts:
                results["exponents"] = _exponent_stage(config)
            if ana.certificate or want_verdicts:
                block, flag = _ml_persistence_stage(config)
                results["persistence"] = block
                verdicts["persistence"] = block["regime"]
                inconclusive = inconclusive or flag

    report = {
        "tool": {"name": "ecopersist", "version": __version__},
        "created_utc": _utc_now(),
        "config": effective_mapping(config),
        "results": results,
        "verdicts": verdicts,
        "tolerances": tolerances,
    }
    path = _write_report(report, out_dir)
    _print_payload({"report": str(path), "verdicts": verdicts}, fmt)
    return EXIT_INCONCLUSIVE if inconclusive else EXIT_OK


# -- subcommands --------------------------------------------------------------------


def _load_for(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        return config_from_mapping({}, source="<defaults>")
    return load_config(args.config)


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = _apply_overrides(_load_for(args), args)
        return _run_pipeline(config, args.threads, want_verdicts=False)
    except ConfigError as exc:
        return _fail(str(exc))
    except (ValueError, RuntimeError) as exc:
        return _fail(str(exc))


def _cmd_persist(args: argparse.Namespace) -> int:
    try:
        config = _apply_overrides(_load_for(args), args)
        return _run_pipeline(config, args.threads, want_verdicts=True)
    except ConfigError as exc:
        return _fail(str(exc))
    except (ValueError, RuntimeError) as exc:
        return _fail(str(exc))


def _cmd_rma(args: argparse.Namespace) -> int:
    try:
        params = RmaParams(args.alpha, args.kappa, args.epsilon)
    except ValueError as exc:
        return _fail(str(exc))
    report = dict(regime_report(params))
    report["provenance"] = "closed-form"
    payload: dict[str, Any] = {
        "tool": {"name": "ecopersist", "version": __version__},
        "regime_report": report,
    }
    inconclusive = bool(report.get("boundary_case"))
    if args.simulate:
        mapping = {
            "model": {"name": "rma", "params": {"alpha": args.alpha, "kappa": args.kappa, "epsilon": args.epsilon}},
            "simulation": {"dt": args.dt, "t_max": args.t_max, "seed": args.seed or 0},
            "analysis": {"histogram": True, "bins": args.bins},
            "output": {"directory": args.out or "out"},
        }
        config = _apply_overrides(config_from_mapping(mapping, source="<rma flags>"), args)
        out_dir = Path(config.output.directory)
        model, kind = _build_model(config)
        trajectories, traj_block = _simulate_stage(config, model, kind, args.threads, out_dir)
        payload["trajectory"] = traj_block
        payload["histogram"] = _histogram_stage(config, model, trajectories, out_dir)
        payload["prey_gamma_l1"] = _gamma_stage(config, trajectories)
        payload["created_utc"] = _utc_now()
        payload["config"] = effective_mapping(config)
        _write_report(payload, out_dir)
    _print_payload(payload, args.format or "json")
    return EXIT_INCONCLUSIVE if inconclusive else EXIT_OK


def _cmd_may_leonard(args: argparse.Namespace) -> int:
    try:
        env1 = MayLeonardEnv(args.alpha1, args.beta1)
        env2 = MayLeonardEnv(args.alpha2, args.beta2)
    except ValueError as exc:
        return _fail(str(exc))
    if not 0.0 < args.p < 1.0 or args.tau <= 0.0:
        return _fail("need 0 < p < 1 and tau > 0")
    out_dir = Path(args.out or "out")
    seed = args.seed if args.seed is not None else 0
    center = env1.z_star if args.r == "bump" else None
    r = growth_rate_function(args.r, center)
    bound = _auto_rate_bound(args.tau, args.p)
    cfg = PdmpSimConfig(dt=args.dt, t_max=args.t_max, rate_bound=bound, seed=seed, record_stride=args.record_stride)

    estimate = lambda_d_estimate(env1, env2, args.tau, args.p, cfg, r_mode=args.r, bump_center=center)
    conclusive = abs(estimate.value) > STDERR_GATE * estimate.stderr
    verdict = classify_switching(env1, env2, args.p, estimate.value).regime if conclusive else "inconclusive"
    slow, fast = lambda_d_limits(env1, env2, args.p, r)

    model = may_leonard_model(env1, env2, args.tau, args.p, r_mode=args.r, bump_center=center)
    result = simulate_pdmp(model, (0.5, 0.3, 0.2), 0, cfg)
    traj_dir = out_dir / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    result.trajectory.to_csv(traj_dir / "trajectory.csv")

    mesh_files = []
    mesh_dir = out_dir / "simplices"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    for tag, env in (("env1", env1), ("env2", env2)):
        mesh = carrying_simplex(env, args.mesh_resolution)
        rows = np.hstack([mesh.directions, mesh.radii[:, None], mesh.points])
        np.savetxt(mesh_dir / f"{tag}.csv", rows, fmt="%.17g", delimiter=",", header="d1,d2,d3,radius,x1,x2,x3", comments="")
        mesh_files.append(f"simplices/{tag}.csv")

    payload = {
        "tool": {"name": "ecopersist", "version": __version__},
        "environments": {
            "env1": {"alpha": args.alpha1, "beta": args.beta1},
            "env2": {"alpha": args.alpha2, "beta": args.beta2},
        },
        "switching": {"tau": args.tau, "p": args.p, "r_mode": args.r},
        "exponents": {
            "lambda_bd": {"value": float(lambda_bd(env1, env2, args.p)), "provenance": "closed-form"},
            "lambda_d": {
                "value": float(estimate.value),
                "stderr": float(estimate.stderr),
                "n_jumps": int(estimate.n_jumps),
                "provenance": "monte-carlo",
            },
            "lambda_d_slow_switching_limit": {"value": float(slow), "provenance": "closed-form"},
            "lambda_d_fast_switching_limit": {"value": float(fast), "provenance": "closed-form"},
        },
        "verdict": verdict,
        "artifacts": {
            "trajectory": "trajectories/trajectory.csv",
            "simplices": mesh_files,
        },
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "exponents.json").write_text(_dump_json(payload))
    _print_payload(payload, args.format or "json")
    return EXIT_OK if conclusive else EXIT_INCONCLUSIVE


def _cmd_bracket(args: argparse.Namespace) -> int:
    try:
        config = _load_for(args)
    except ConfigError as exc:
        return _fail(str(exc))
    section = config.bracket
    if not section.fields:
        return _fail("no [bracket] fields declared in the config")
    diagnostics = validate_config(config)
    bracket_diags = [d for d in diagnostics if d.startswith("[bracket]")]
    if bracket_diags:
        for line in bracket_diags:
            print(f"invalid config: {line}", file=sys.stderr)
        return EXIT_ERROR

    labels = section.labels or tuple(f"X{i + 1}" for i in range(len(section.fields)))
    parsed = [
        PolyVectorField(tuple(parse_poly(text, section.nvars) for text in comps), label=labels[i])
        for i, comps in enumerate(section.fields)
    ]
    pairs = section.pairs or tuple(
        (i + 1, j + 1) for i in range(len(parsed)) for j in range(i + 1, len(parsed))
    )
    lines = []
    for a, b in pairs:
        bracket = lie_bracket(parsed[a - 1], parsed[b - 1])
        lines.append(f"[{labels[a - 1]}, {labels[b - 1]}]")
        for k, comp in enumerate(bracket.components):
            lines.append(f"  x{k + 1}: {comp}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "brackets.txt").write_text(text)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    diagnostics: list[str]
    try:
        config = _load_for(args)
    except ConfigError as exc:
        diagnostics = [str(exc)]
    else:
        diagnostics = validate_config(config)
    if (args.format or "json") == "csv":
        for line in diagnostics:
            print(line)
    else:
        sys.stdout.write(_dump_json({"diagnostics": diagnostics}))
    return EXIT_OK if not diagnostics else EXIT_ERROR


# -- argument parsing ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="override [simulation].seed")
    shared.add_argument("--out", type=str, default=None, help="override [output].directory")
    shared.add_argument("--threads", type=int, default=1, help="worker threads for replicate sweeps")
    shared.add_argument("--format", choices=("json", "csv"), default=None, help="stdout rendering")

    parser = argparse.ArgumentParser(prog="ecopersist", description="simulation and persistence certification")
    parser.add_argument("--version", action="version", version=f"ecopersist {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[shared], help="run the configured model; write trajectories")
    p_sim.add_argument("config", nargs="?", default=None, help="TOML experiment file (omit for a dry run)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_per = sub.add_parser("persist", parents=[shared], help="simulate plus persistence verdicts")
    p_per.add_argument("config", nargs="?", default=None)
    p_per.set_defaults(func=_cmd_persist)

    p_rma = sub.add_parser("rma", parents=[shared], help="predator-prey regime report from closed forms")
    p_rma.add_argument("--alpha", type=float, required=True, help="predator death rate")
    p_rma.add_argument("--kappa", type=float, required=True, help="prey carrying capacity")
    p_rma.add_argument("--epsilon", type=float, required=True, help="prey noise strength")
    p_rma.add_argument("--simulate", action="store_true", help="also write trajectory and histogram CSVs")
    p_rma.add_argument("--dt", type=float, default=1e-3)
    p_rma.add_argument("--t-max", type=float, default=200.0)
    p_rma.add_argument("--bins", type=int, default=64)
    p_rma.set_defaults(func=_cmd_rma)

    p_ml = sub.add_parser("may-leonard", parents=[shared], help="switched competition exponents and meshes")
    p_ml.add_argument("--alpha1", type=float, default=1.8)
    p_ml.add_argument("--beta1", type=float, default=0.6)
    p_ml.add_argument("--alpha2", type=float, default=1.1)
    p_ml.add_argument("--beta2", type=float, default=0.2)
    p_ml.add_argument("--p", type=float, default=0.5, help="environment-1 weight")
    p_ml.add_argument("--tau", type=float, default=10.0, help="switching clock rate")
    p_ml.add_argument("--r", choices=("constant", "bump"), default="constant", help="growth-rate profile")
    p_ml.add_argument("--mesh-resolution", type=int, default=12)
    p_ml.add_argument("--dt", type=float, default=1e-3)
    p_ml.add_argument("--t-max", type=float, default=200.0)
    p_ml.add_argument("--record-stride", type=int, default=10)
    p_ml.set_defaults(func=_cmd_may_leonard)

    p_br = sub.add_parser("bracket", parents=[shared], help="print canonical Lie brackets of declared fields")
    p_br.add_argument("config", help="TOML file with a [bracket] section")
    p_br.set_defaults(func=_cmd_bracket)

    p_val = sub.add_parser("validate", parents=[shared], help="schema and semantic checks, no simulation")
    p_val.add_argument("config", nargs="?", default=None)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
