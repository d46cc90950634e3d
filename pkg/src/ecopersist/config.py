"""Experiment configuration: TOML schema, defaults, and semantic checks.

A config file selects one of the built-in models by key, tunes its numeric
parameters, and toggles analyses.  Every field has a default, so an empty
file is a valid (if boring) experiment, and the fully resolved mapping is
echoed into every report for reproducibility.  Loading is split in two
deliberately: :func:`load_config` rejects structural problems (unknown keys,
wrong types) with errors that name the offending field, while
:func:`validate_config` returns semantic diagnostics as a list and never
raises, so a validation front-end can report all problems at once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .poly import PolyParseError, parse_poly

__all__ = [
    "ConfigError",
    "ModelSection",
    "SimulationSection",
    "AnalysisSection",
    "LyapunovSection",
    "ExtinctionSection",
    "OutputSection",
    "BracketSection",
    "ExperimentConfig",
    "BUILTIN_MODELS",
    "default_model_params",
    "default_x0",
    "load_config",
    "config_from_mapping",
    "effective_mapping",
    "validate_config",
]

BUILTIN_MODELS = ("logistic", "lv2d", "rma", "may_leonard")

_MODEL_DEFAULTS: dict[str, dict[str, Any]] = {
    "logistic": {"kappa": 1.0, "sigma": 0.6},
    "lv2d": {
        "r": [1.0, 1.0],
        "b": [[1.0, 0.5], [0.5, 1.0]],
        "sigma": 0.3,
    },
    "rma": {"alpha": 0.3, "kappa": 2.5, "epsilon": 0.6},
    "may_leonard": {
        "alpha1": 1.8,
        "beta1": 0.6,
        "alpha2": 1.1,
        "beta2": 0.2,
        "tau": 10.0,
        "p": 0.5,
        "r_mode": "constant",
    },
}

_DEFAULT_X0: dict[str, tuple[float, ...]] = {
    "logistic": (1.0,),
    "lv2d": (0.5, 0.5),
    "rma": (1.0, 0.5),
    "may_leonard": (0.5, 0.3, 0.2),
}

_MODEL_DIM = {"logistic": 1, "lv2d": 2, "rma": 2, "may_leonard": 3}


class ConfigError(ValueError):
    """Structural problem in a config file, with the field spelled out."""


def default_model_params(name: str) -> dict[str, Any]:
    """Full parameter table the named built-in uses when nothing is set."""
    if name not in _MODEL_DEFAULTS:
        raise ConfigError(f"unknown model '{name}'")
    return {k: v for k, v in _MODEL_DEFAULTS[name].items()}


def default_x0(name: str) -> tuple[float, ...]:
    """Interior starting point used when [simulation].x0 is omitted."""
    if name not in _DEFAULT_X0:
        raise ConfigError(f"unknown model '{name}'")
    return _DEFAULT_X0[name]


@dataclass(frozen=True)
class ModelSection:
    """Built-in selection plus its numeric parameter table.

    ``params`` holds only the keys the user set; defaults are merged in by
    :func:`effective_mapping` and by the runner, so the stored section stays
    an honest record of what the file said.
    """

    name: str = "logistic"
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationSection:
    dt: float = 1e-3
    t_max: float = 100.0
    x0: tuple[float, ...] | None = None
    seed: int = 0
    record_stride: int = 1
    engine: str = "auto"
    replicates: int = 1
    j0: int = 0
    rate_bound: float | None = None


@dataclass(frozen=True)
class AnalysisSection:
    """Toggles; everything defaults to off so `simulate` stays cheap."""

    certificate: bool = False
    exponents: bool = False
    brackets: bool = False
    simplices: bool = False
    histogram: bool = False
    gamma_density: bool = False
    bins: int = 64
    support: tuple[float, float] = (0.0, 6.0)
    mesh_resolution: int = 12


@dataclass(frozen=True)
class LyapunovSection:
    check: bool = False
    grid_points: int = 48


@dataclass(frozen=True)
class ExtinctionSection:
    kind: str = "faces"  # faces | union_diagonal


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    format: str = "json"


@dataclass(frozen=True)
class BracketSection:
    """Polynomial vector fields declared as monomial-list strings.

    ``fields`` is a list of fields, each a list of ``nvars`` component
    strings like ``"2 * x1^2 x3 - 1/3 * x2"``.  ``pairs`` are 1-based index
    pairs to bracket; empty means every ordered pair i < j.
    """

    nvars: int = 3
    labels: tuple[str, ...] = ()
    fields: tuple[tuple[str, ...], ...] = ()
    pairs: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    lyapunov: LyapunovSection = field(default_factory=LyapunovSection)
    extinction: ExtinctionSection = field(default_factory=ExtinctionSection)
    output: OutputSection = field(default_factory=OutputSection)
    bracket: BracketSection = field(default_factory=BracketSection)
    source: str = "<defaults>"
    empty: bool = True


_SECTION_TYPES = {
    "model": ModelSection,
    "simulation": SimulationSection,
    "analysis": AnalysisSection,
    "lyapunov": LyapunovSection,
    "extinction": ExtinctionSection,
    "output": OutputSection,
    "bracket": BracketSection,
}


def _type_name(value: Any) -> str:
    return type(value).__name__


def _as_float(raw: Any, where: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {_type_name(raw)}")
    return float(raw)


def _as_int(raw: Any, where: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{where}: expected an integer, got {_type_name(raw)}")
    return raw


def _as_bool(raw: Any, where: str) -> bool:
    if not isinstance(raw, bool):
        raise ConfigError(f"{where}: expected true/false, got {_type_name(raw)}")
    return raw


def _as_str(raw: Any, where: str) -> str:
    if not isinstance(raw, str):
        raise ConfigError(f"{where}: expected a string, got {_type_name(raw)}")
    return raw


def _as_float_tuple(raw: Any, where: str) -> tuple[float, ...]:
    if not isinstance(raw, (list, tuple)):
        raise ConfigError(f"{where}: expected an array of numbers, got {_type_name(raw)}")
    return tuple(_as_float(v, f"{where}[{i}]") for i, v in enumerate(raw))


def _reject_unknown(table: Mapping[str, Any], allowed: Sequence[str], where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key '{key}'")


def _parse_model(table: Mapping[str, Any]) -> ModelSection:
    _reject_unknown(table, ("name", "params"), "[model]")
    name = _as_str(table.get("name", "logistic"), "[model].name")
    params_raw = table.get("params", {})
    if not isinstance(params_raw, Mapping):
        raise ConfigError(f"[model].params: expected a table, got {_type_name(params_raw)}")
    params: dict[str, Any] = {}
    for key, value in params_raw.items():
        where = f"[model.params].{key}"
        if isinstance(value, str):
            params[key] = value
        elif isinstance(value, bool):
            raise ConfigError(f"{where}: expected a number, got bool")
        elif isinstance(value, (int, float)):
            params[key] = float(value)
        elif isinstance(value, list):
            # lv2d takes vector and matrix parameters
            if value and isinstance(value[0], list):
                params[key] = [list(map(lambda v: _as_float(v, where), row)) for row in value]
            else:
                params[key] = list(_as_float_tuple(value, where))
        else:
            raise ConfigError(f"{where}: unsupported value type {_type_name(value)}")
    return ModelSection(name=name, params=params)


def _parse_simulation(table: Mapping[str, Any]) -> SimulationSection:
    allowed = ("dt", "t_max", "x0", "seed", "record_stride", "engine", "replicates", "j0", "rate_bound")
    _reject_unknown(table, allowed, "[simulation]")
    kwargs: dict[str, Any] = {}
    if "dt" in table:
        kwargs["dt"] = _as_float(table["dt"], "[simulation].dt")
    if "t_max" in table:
        kwargs["t_max"] = _as_float(table["t_max"], "[simulation].t_max")
    if "x0" in table:
        kwargs["x0"] = _as_float_tuple(table["x0"], "[simulation].x0")
    if "seed" in table:
        kwargs["seed"] = _as_int(table["seed"], "[simulation].seed")
    if "record_stride" in table:
        kwargs["record_stride"] = _as_int(table["record_stride"], "[simulation].record_stride")
    if "engine" in table:
        kwargs["engine"] = _as_str(table["engine"], "[simulation].engine")
    if "replicates" in table:
        kwargs["replicates"] = _as_int(table["replicates"], "[simulation].replicates")
    if "j0" in table:
        kwargs["j0"] = _as_int(table["j0"], "[simulation].j0")
    if "rate_bound" in table:
        kwargs["rate_bound"] = _as_float(table["rate_bound"], "[simulation].rate_bound")
    return SimulationSection(**kwargs)


def _parse_analysis(table: Mapping[str, Any]) -> AnalysisSection:
    allowed = (
        "certificate",
        "exponents",
        "brackets",
        "simplices",
        "histogram",
        "gamma_density",
        "bins",
        "support",
        "mesh_resolution",
    )
    _reject_unknown(table, allowed, "[analysis]")
    kwargs: dict[str, Any] = {}
    for key in ("certificate", "exponents", "brackets", "simplices", "histogram", "gamma_density"):
        if key in table:
            kwargs[key] = _as_bool(table[key], f"[analysis].{key}")
    if "bins" in table:
        kwargs["bins"] = _as_int(table["bins"], "[analysis].bins")
    if "support" in table:
        pair = _as_float_tuple(table["support"], "[analysis].support")
        if len(pair) != 2:
            raise ConfigError("[analysis].support: expected [low, high]")
        kwargs["support"] = (pair[0], pair[1])
    if "mesh_resolution" in table:
        kwargs["mesh_resolution"] = _as_int(table["mesh_resolution"], "[analysis].mesh_resolution")
    return AnalysisSection(**kwargs)


def _parse_lyapunov(table: Mapping[str, Any]) -> LyapunovSection:
    _reject_unknown(table, ("check", "grid_points"), "[lyapunov]")
    kwargs: dict[str, Any] = {}
    if "check" in table:
        kwargs["check"] = _as_bool(table["check"], "[lyapunov].check")
    if "grid_points" in table:
        kwargs["grid_points"] = _as_int(table["grid_points"], "[lyapunov].grid_points")
    return LyapunovSection(**kwargs)


def _parse_extinction(table: Mapping[str, Any]) -> ExtinctionSection:
    _reject_unknown(table, ("kind",), "[extinction]")
    kwargs: dict[str, Any] = {}
    if "kind" in table:
        kwargs["kind"] = _as_str(table["kind"], "[extinction].kind")
    return ExtinctionSection(**kwargs)


def _parse_output(table: Mapping[str, Any]) -> OutputSection:
    _reject_unknown(table, ("directory", "format"), "[output]")
    kwargs: dict[str, Any] = {}
    if "directory" in table:
        kwargs["directory"] = _as_str(table["directory"], "[output].directory")
    if "format" in table:
        kwargs["format"] = _as_str(table["format"], "[output].format")
    return OutputSection(**kwargs)


def _parse_bracket(table: Mapping[str, Any]) -> BracketSection:
    _reject_unknown(table, ("nvars", "labels", "fields", "pairs"), "[bracket]")
    kwargs: dict[str, Any] = {}
    if "nvars" in table:
        kwargs["nvars"] = _as_int(table["nvars"], "[bracket].nvars")
    if "labels" in table:
        raw = table["labels"]
        if not isinstance(raw, list):
            raise ConfigError("[bracket].labels: expected an array of strings")
        kwargs["labels"] = tuple(_as_str(v, f"[bracket].labels[{i}]") for i, v in enumerate(raw))
    if "fields" in table:
        raw = table["fields"]
        if not isinstance(raw, list):
            raise ConfigError("[bracket].fields: expected an array of component arrays")
        fields: list[tuple[str, ...]] = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, list):
                raise ConfigError(f"[bracket].fields[{i}]: expected an array of monomial strings")
            fields.append(tuple(_as_str(c, f"[bracket].fields[{i}][{k}]") for k, c in enumerate(entry)))
        kwargs["fields"] = tuple(fields)
    if "pairs" in table:
        raw = table["pairs"]
        if not isinstance(raw, list):
            raise ConfigError("[bracket].pairs: expected an array of [i, j] pairs")
        pairs: list[tuple[int, int]] = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, list) or len(entry) != 2:
                raise ConfigError(f"[bracket].pairs[{i}]: expected a pair [i, j]")
            pairs.append((_as_int(entry[0], f"[bracket].pairs[{i}][0]"), _as_int(entry[1], f"[bracket].pairs[{i}][1]")))
        kwargs["pairs"] = tuple(pairs)
    return BracketSection(**kwargs)


_PARSERS = {
    "model": _parse_model,
    "simulation": _parse_simulation,
    "analysis": _parse_analysis,
    "lyapunov": _parse_lyapunov,
    "extinction": _parse_extinction,
    "output": _parse_output,
    "bracket": _parse_bracket,
}


def config_from_mapping(mapping: Mapping[str, Any], source: str = "<memory>") -> ExperimentConfig:
    """Build a config from an already parsed TOML table.

    Raises :class:`ConfigError` on unknown sections or keys and on type
    mismatches; every message names the section and field.
    """
    for key in mapping:
        if key not in _PARSERS:
            raise ConfigError(f"unknown section [{key}] (known: {', '.join(_PARSERS)})")
    sections: dict[str, Any] = {}
    for key, parser in _PARSERS.items():
        table = mapping.get(key, {})
        if not isinstance(table, Mapping):
            raise ConfigError(f"[{key}]: expected a table, got {_type_name(table)}")
        sections[key] = parser(table)
    return ExperimentConfig(source=source, empty=not mapping, **sections)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a TOML config file.

    TOML syntax errors come back as :class:`ConfigError` carrying the
    parser's line and column; schema errors name the offending field.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            mapping = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from None
    try:
        return config_from_mapping(mapping, source=str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def effective_mapping(config: ExperimentConfig) -> dict[str, Any]:
    """Fully resolved config as a JSON-ready nested dict.

    Model parameters and the starting point are merged with their defaults,
    so the echo in a report pins every number the run actually used.
    """
    model = dict(default_model_params(config.model.name)) if config.model.name in _MODEL_DEFAULTS else {}
    model.update(config.model.params)
    sim = dataclasses.asdict(config.simulation)
    if sim["x0"] is None and config.model.name in _DEFAULT_X0:
        sim["x0"] = list(default_x0(config.model.name))
    elif sim["x0"] is not None:
        sim["x0"] = list(sim["x0"])
    out = {
        "model": {"name": config.model.name, "params": model},
        "simulation": sim,
        "analysis": dataclasses.asdict(config.analysis),
        "lyapunov": dataclasses.asdict(config.lyapunov),
        "extinction": dataclasses.asdict(config.extinction),
        "output": dataclasses.asdict(config.output),
    }
    out["analysis"]["support"] = list(config.analysis.support)
    if config.bracket.fields:
        out["bracket"] = {
            "nvars": config.bracket.nvars,
            "labels": list(config.bracket.labels),
            "fields": [list(f) for f in config.bracket.fields],
            "pairs": [list(p) for p in config.bracket.pairs],
        }
    return out


def _merged_params(config: ExperimentConfig) -> dict[str, Any]:
    merged = dict(_MODEL_DEFAULTS.get(config.model.name, {}))
    merged.update(config.model.params)
    return merged


def _check_may_leonard(params: Mapping[str, Any], diags: list[str]) -> None:
    for j in (1, 2):
        alpha = params.get(f"alpha{j}")
        beta = params.get(f"beta{j}")
        if not isinstance(alpha, (int, float)) or not isinstance(beta, (int, float)):
            diags.append(f"[model.params]: alpha{j} and beta{j} must be numbers")
            continue
        if not (0.0 < beta < 1.0 < alpha):
            diags.append(
                f"[model.params]: environment {j} violates 0 < beta < 1 < alpha "
                f"(alpha{j} = {alpha}, beta{j} = {beta})"
            )
    tau = params.get("tau", 10.0)
    if not isinstance(tau, (int, float)) or tau <= 0:
        diags.append(f"[model.params].tau: switching clock rate must be positive, got {tau}")
    p = params.get("p", 0.5)
    if not isinstance(p, (int, float)) or not (0.0 < p < 1.0):
        diags.append(f"[model.params].p: environment-1 weight must lie in (0, 1), got {p}")
    r_mode = params.get("r_mode", "constant")
    if r_mode not in ("constant", "bump"):
        diags.append(f"[model.params].r_mode: expected 'constant' or 'bump', got '{r_mode}'")
    eta = params.get("eta")
    if eta is not None and (not isinstance(eta, (int, float)) or eta <= 0):
        diags.append(f"[model.params].eta: slab floor must be positive, got {eta}")


_PARAM_KEYS = {
    "logistic": {"kappa", "sigma"},
    "lv2d": {"r", "b", "sigma"},
    "rma": {"alpha", "kappa", "epsilon"},
    "may_leonard": {"alpha1", "beta1", "alpha2", "beta2", "tau", "p", "r_mode", "bump_center", "eta"},
}


def validate_config(config: ExperimentConfig) -> list[str]:
    """Semantic diagnostics without running anything.

    Returns a list of human-readable problems; an empty list means the
    config is runnable.  Structural errors are assumed already caught by
    :func:`load_config`, so this function never raises.
    """
    diags: list[str] = []
    name = config.model.name
    if name not in BUILTIN_MODELS:
        diags.append(f"[model].name: unknown model '{name}' (built-ins: {', '.join(BUILTIN_MODELS)})")
        return diags

    params = _merged_params(config)
    for key in config.model.params:
        if key not in _PARAM_KEYS[name]:
            diags.append(f"[model.params]: '{key}' is not a parameter of '{name}'")

    sigma_sq: float | None = None
    if name == "logistic":
        if params["kappa"] <= 0:
            diags.append(f"[model.params].kappa: carrying capacity must be positive, got {params['kappa']}")
        if params["sigma"] <= 0:
            diags.append(f"[model.params].sigma: noise strength must be positive, got {params['sigma']}")
        else:
            sigma_sq = params["sigma"] ** 2
    elif name == "lv2d":
        if params["sigma"] <= 0:
            diags.append(f"[model.params].sigma: noise strength must be positive, got {params['sigma']}")
    elif name == "rma":
        for key in ("alpha", "kappa", "epsilon"):
            if not isinstance(params[key], (int, float)) or params[key] <= 0:
                diags.append(f"[model.params].{key}: must be positive, got {params[key]}")
        if isinstance(params["epsilon"], (int, float)) and params["epsilon"] > 0:
            sigma_sq = params["epsilon"] ** 2
    elif name == "may_leonard":
        _check_may_leonard(params, diags)

    sim = config.simulation
    if sim.dt <= 0:
        diags.append(f"[simulation].dt: step must be positive, got {sim.dt}")
    if sim.t_max < sim.dt:
        diags.append(f"[simulation].t_max: horizon {sim.t_max} is shorter than one step {sim.dt}")
    if sim.record_stride < 1:
        diags.append(f"[simulation].record_stride: must be >= 1, got {sim.record_stride}")
    if sim.seed < 0:
        diags.append(f"[simulation].seed: must be nonnegative, got {sim.seed}")
    if sim.replicates < 1:
        diags.append(f"[simulation].replicates: must be >= 1, got {sim.replicates}")
    if sim.engine not in ("auto", "python", "numba"):
        diags.append(f"[simulation].engine: expected auto, python or numba, got '{sim.engine}'")
    if sim.x0 is not None:
        if len(sim.x0) != _MODEL_DIM[name]:
            diags.append(
                f"[simulation].x0: model '{name}' has dimension {_MODEL_DIM[name]}, got {len(sim.x0)} coordinates"
            )
        elif any(v <= 0 for v in sim.x0):
            diags.append("[simulation].x0: starting point must have strictly positive coordinates")
    if name == "may_leonard":
        if sim.j0 not in (0, 1):
            diags.append(f"[simulation].j0: environment index must be 0 or 1, got {sim.j0}")
        tau = params.get("tau", 10.0)
        p = params.get("p", 0.5)
        if isinstance(tau, (int, float)) and isinstance(p, (int, float)) and 0 < p < 1 and tau > 0:
            needed = tau * max(p, 1.0 - p)
            if sim.rate_bound is not None and sim.rate_bound < needed:
                diags.append(
                    f"[simulation].rate_bound: {sim.rate_bound} is below the peak switching intensity "
                    f"{needed:g}; thinning would be biased"
                )
    elif sim.rate_bound is not None:
        diags.append(f"[simulation].rate_bound: only meaningful for the may_leonard model, not '{name}'")

    ana = config.analysis
    if ana.bins < 2:
        diags.append(f"[analysis].bins: need at least 2 bins, got {ana.bins}")
    if ana.support[0] >= ana.support[1]:
        diags.append(f"[analysis].support: low {ana.support[0]} must be below high {ana.support[1]}")
    if ana.simplices and name != "may_leonard":
        diags.append(
            f"[analysis].simplices: carrying simplices are defined for the may_leonard switched system, "
            f"not for the '{name}' diffusion"
        )
    if ana.simplices and ana.mesh_resolution < 8:
        diags.append(f"[analysis].mesh_resolution: need at least 8, got {ana.mesh_resolution}")
    if ana.brackets and name in ("logistic", "lv2d"):
        diags.append(f"[analysis].brackets: bracket analysis is wired for rma and may_leonard only, not '{name}'")
    if ana.gamma_density:
        if name in ("lv2d", "may_leonard"):
            diags.append(
                f"[analysis].gamma_density: the Gamma boundary-law comparison applies to logistic and rma, "
                f"not '{name}'"
            )
        elif sigma_sq is not None and sigma_sq >= 2.0:
            noise = "sigma" if name == "logistic" else "epsilon"
            diags.append(
                f"[analysis].gamma_density: {noise}^2 = {sigma_sq:g} >= 2, outside the regime with a "
                f"Gamma stationary density on the boundary; the marginal piles up at zero instead"
            )

    lya = config.lyapunov
    if lya.check and name not in ("logistic", "lv2d"):
        diags.append(f"[lyapunov].check: built-in Lyapunov pairs exist for logistic and lv2d only, not '{name}'")
    if lya.grid_points < 2:
        diags.append(f"[lyapunov].grid_points: need at least 2, got {lya.grid_points}")

    if config.extinction.kind not in ("faces", "union_diagonal"):
        diags.append(f"[extinction].kind: expected 'faces' or 'union_diagonal', got '{config.extinction.kind}'")
    if config.extinction.kind == "union_diagonal" and _MODEL_DIM[name] != 3:
        diags.append("[extinction].kind: 'union_diagonal' needs a three-species model")

    if config.output.format not in ("json", "csv"):
        diags.append(f"[output].format: expected 'json' or 'csv', got '{config.output.format}'")

    diags.extend(_validate_bracket(config.bracket))
    return diags


def _validate_bracket(section: BracketSection) -> list[str]:
    diags: list[str] = []
    if not section.fields:
        return diags
    if section.nvars < 1:
        diags.append(f"[bracket].nvars: must be >= 1, got {section.nvars}")
        return diags
    if section.labels and len(section.labels) != len(section.fields):
        diags.append(
            f"[bracket].labels: got {len(section.labels)} labels for {len(section.fields)} fields"
        )
    for i, comps in enumerate(section.fields):
        if len(comps) != section.nvars:
            diags.append(f"[bracket].fields[{i}]: expected {section.nvars} components, got {len(comps)}")
            continue
        for k, text in enumerate(comps):
            try:
                parse_poly(text, section.nvars)
            except PolyParseError as exc:
                diags.append(f"[bracket].fields[{i}][{k}]: {exc}")
    n = len(section.fields)
    for i, (a, b) in enumerate(section.pairs):
        if not (1 <= a <= n and 1 <= b <= n):
            diags.append(f"[bracket].pairs[{i}]: indices are 1-based into {n} fields, got [{a}, {b}]")
    return diags
