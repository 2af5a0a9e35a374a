"""Command-line interface: ``arrayg2 {spectrum,g2,map,optimize} --config run.json``.

Exit codes (stable):

====  ==========================================================
0     success (maps with flagged cells still succeed)
2     invalid config, arguments or preconditions
3     numerical failure (near-defective spectrum, singular kernel,
      quadrature failure, vanishing single-photon amplitude)
4     optimization found no feasible point
====  ==========================================================

See ``docs/config.md`` for the configuration schema.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__, io
from .errors import ArrayG2Error, InfeasibleError, ValidationError
from .scenarios import KINDS, SCENARIO_SCHEMA_VERSION, Scenario, build_scenario
from .sweep import (
    DEFAULT_TAU_MAX,
    DEFAULT_TAU_STEP,
    OBJECTIVES,
    default_tau_grid,
    map_g2_tau,
    map_g2_zero,
    optimize,
    persistence,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

CONFIG_SCHEMA_VERSION = 1

COMMANDS = ("spectrum", "g2", "map", "optimize")

_TOP_KEYS = {"schema_version", "scenario", "scenario_file", "tau", "persistence", "map", "optimize"}
_GRID_KEYS = {"name", "start", "stop", "step", "num", "endpoint", "unit", "values"}


class ConfigError(ValidationError):
    """Config problem; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field = field_path


@dataclass
class RunConfig:
    """Validated run configuration (scenario plus per-command sections)."""

    scenario: Scenario
    raw: dict
    tau_grid: np.ndarray
    persistence: dict = field(default_factory=dict)
    map: dict | None = None
    optimize: dict | None = None


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, Mapping):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return dict(value)


def _reject_unknown(obj: Mapping, allowed: set, path: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{extra[0]}", f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return float(value)


def _parse_grid(spec, path: str) -> tuple[str | None, np.ndarray]:
    spec = _require_mapping(spec, path)
    _reject_unknown(spec, _GRID_KEYS, path)
    unit = spec.get("unit", 1)
    if unit == "pi":
        scale = math.pi
    elif unit == 1:
        scale = 1.0
    else:
        raise ConfigError(f"{path}.unit", "must be 1 or \"pi\"")
    if "values" in spec:
        if set(spec) & {"start", "stop", "step", "num", "endpoint"}:
            raise ConfigError(path, "give either 'values' or a start/stop range, not both")
        vals = spec["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"{path}.values", "must be a non-empty list")
        grid = np.array([_number(v, f"{path}.values[{k}]") for k, v in enumerate(vals)])
    else:
        for key in ("start", "stop"):
            if key not in spec:
                raise ConfigError(f"{path}.{key}", "required field missing")
        a = _number(spec["start"], f"{path}.start")
        b = _number(spec["stop"], f"{path}.stop")
        if ("step" in spec) == ("num" in spec):
            raise ConfigError(path, "give exactly one of 'step' or 'num'")
        if "step" in spec:
            h = _number(spec["step"], f"{path}.step")
            if h <= 0 or b < a:
                raise ConfigError(f"{path}.step", "needs step > 0 and stop >= start")
            n = int(round((b - a) / h))
            # stop is included when it lies on the lattice
            if a + n * h > b + 1e-9 * max(1.0, abs(b)):
                n -= 1
            grid = a + h * np.arange(n + 1)
        else:
            num = spec["num"]
            if isinstance(num, bool) or not isinstance(num, int) or num < 1:
                raise ConfigError(f"{path}.num", "must be a positive integer")
            grid = np.linspace(a, b, num, endpoint=bool(spec.get("endpoint", True)))
    return spec.get("name"), np.round(grid * scale, 12)


def _load_scenario(raw: dict, base: Path | None) -> tuple[dict, Scenario]:
    if ("scenario" in raw) == ("scenario_file" in raw):
        raise ConfigError("scenario", "give exactly one of 'scenario' or 'scenario_file'")
    if "scenario_file" in raw:
        ref = raw["scenario_file"]
        if not isinstance(ref, str):
            raise ConfigError("scenario_file", "must be a path string")
        p = Path(ref)
        if not p.is_absolute() and base is not None:
            p = base / p
        try:
            sc = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError("scenario_file", f"no such file {str(p)!r}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("scenario_file", f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        path = "scenario_file"
    else:
        sc = raw["scenario"]
        path = "scenario"
    sc = _require_mapping(sc, path)
    _reject_unknown(sc, {"schema_version", "kind", "params"}, path)
    if sc.get("schema_version", SCENARIO_SCHEMA_VERSION) != SCENARIO_SCHEMA_VERSION:
        raise ConfigError(f"{path}.schema_version", f"unsupported version {sc['schema_version']!r}")
    kind = sc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{path}.kind", f"expected one of {sorted(KINDS)}, got {kind!r}")
    params = _require_mapping(sc.get("params", {}), f"{path}.params")
    schema = KINDS[kind][1]
    _reject_unknown(params, set(schema), f"{path}.params")
    # config files must be explicit: no silent defaults for physical parameters
    for name in schema:
        if name not in params:
            raise ConfigError(f"{path}.params.{name}", "required field missing")
    for name, value in params.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}.params.{name}", f"expected a number, got {value!r}")
        try:
            schema[name].check(name, value)
        except ValidationError as exc:
            raise ConfigError(f"{path}.params.{name}", str(exc)) from None
    resolved = {"schema_version": SCENARIO_SCHEMA_VERSION, "kind": kind, "params": params}
    return resolved, build_scenario(kind, **params)


def parse_config(raw: Any, command: str, base: Path | None = None) -> RunConfig:
    """Validate a decoded config for ``command``; raises :class:`ConfigError`."""
    raw = _require_mapping(raw, "")
    _reject_unknown(raw, _TOP_KEYS, "")
    version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    scen_dict, scenario = _load_scenario(raw, base)

    tau = _require_mapping(raw.get("tau", {}), "tau")
    _reject_unknown(tau, {"max", "step"}, "tau")
    tmax = _number(tau.get("max", DEFAULT_TAU_MAX), "tau.max")
    tstep = _number(tau.get("step", DEFAULT_TAU_STEP), "tau.step")
    if tmax <= 0 or tstep <= 0 or tstep > tmax:
        raise ConfigError("tau", "needs 0 < step <= max")
    tau_grid = default_tau_grid(tmax, tstep)

    pers = _require_mapping(raw.get("persistence", {}), "persistence")
    _reject_unknown(pers, {"enabled", "threshold", "window"}, "persistence")
    pers_cfg = {
        "enabled": bool(pers.get("enabled", True)),
        "threshold": _number(pers.get("threshold", 0.5), "persistence.threshold"),
        "window": tuple(pers.get("window", (0.0, 5.0))),
    }
    if not 0 < pers_cfg["threshold"] < 1:
        raise ConfigError("persistence.threshold", "must lie in (0, 1)")
    if len(pers_cfg["window"]) != 2:
        raise ConfigError("persistence.window", "must be [start, stop]")

    map_cfg = None
    if "map" in raw:
        m = _require_mapping(raw["map"], "map")
        _reject_unknown(m, {"axes"}, "map")
        axes = m.get("axes")
        if not isinstance(axes, list) or len(axes) != 2:
            raise ConfigError("map.axes", "must list exactly two grids")
        parsed = []
        for k, ax in enumerate(axes):
            name, grid = _parse_grid(ax, f"map.axes[{k}]")
            if name is None:
                raise ConfigError(f"map.axes[{k}].name", "required field missing")
            if name != "tau":
                spec = scenario.parameter_schema.get(name)
                if spec is None or not spec.sweepable:
                    raise ConfigError(f"map.axes[{k}].name", f"{name!r} is not a sweepable parameter of {scenario.kind!r}")
                for v in (grid.min(), grid.max()):
                    try:
                        spec.check(name, v)
                    except ValidationError as exc:
                        raise ConfigError(f"map.axes[{k}]", str(exc)) from None
            parsed.append((name, grid))
        names = [p[0] for p in parsed]
        if names[0] == names[1]:
            raise ConfigError("map.axes", "the two axes must differ")
        if "tau" in names and set(names) != {"detuning", "tau"}:
            raise ConfigError("map.axes", "a delay map needs axes 'detuning' and 'tau'")
        map_cfg = {"axes": parsed}
    elif command == "map":
        raise ConfigError("map", "required section missing for the map command")

    opt_cfg = None
    if "optimize" in raw:
        o = _require_mapping(raw["optimize"], "optimize")
        _reject_unknown(o, {"objective", "bounds", "budget", "cap", "grid_points", "seed"}, "optimize")
        objective = o.get("objective")
        if objective not in OBJECTIVES:
            raise ConfigError("optimize.objective", f"expected one of {list(OBJECTIVES)}, got {objective!r}")
        bounds = _require_mapping(o.get("bounds"), "optimize.bounds") if "bounds" in o else None
        if not bounds:
            raise ConfigError("optimize.bounds", "required field missing")
        parsed_bounds = {}
        for name, pair in bounds.items():
            p = f"optimize.bounds.{name}"
            spec = scenario.parameter_schema.get(name)
            if spec is None or not spec.sweepable:
                raise ConfigError(p, f"{name!r} is not a sweepable parameter of {scenario.kind!r}")
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(p, "must be [lo, hi]")
            lo, hi = _number(pair[0], p + "[0]"), _number(pair[1], p + "[1]")
            if hi < lo:
                raise ConfigError(p, "needs lo <= hi")
            for v in (lo, hi):
                try:
                    spec.check(name, v)
                except ValidationError as exc:
                    raise ConfigError(p, str(exc)) from None
            parsed_bounds[name] = (lo, hi)
        budget = o.get("budget")
        if isinstance(budget, bool) or not isinstance(budget, int) or budget < 1:
            raise ConfigError("optimize.budget", "must be a positive integer")
        gp = o.get("grid_points", 9)
        if isinstance(gp, Mapping):
            unknown = set(gp) - set(parsed_bounds)
            if unknown:
                raise ConfigError(f"optimize.grid_points.{sorted(unknown)[0]}", "not a bounded parameter")
            if set(gp) != set(parsed_bounds):
                raise ConfigError("optimize.grid_points", "needs a count for every bounded parameter")
            gp_vals = list(gp.values())
        else:
            gp_vals = [gp]
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in gp_vals):
            raise ConfigError("optimize.grid_points", "counts must be positive integers")
        cap = o.get("cap")
        if cap is not None:
            cap = _number(cap, "optimize.cap")
        seed = o.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("optimize.seed", "must be an integer")
        opt_cfg = {
            "objective": objective, "bounds": parsed_bounds, "budget": budget,
            "cap": cap, "grid_points": dict(gp) if isinstance(gp, Mapping) else gp, "seed": seed,
        }
    elif command == "optimize":
        raise ConfigError("optimize", "required section missing for the optimize command")

    resolved = dict(raw)
    resolved.pop("scenario_file", None)
    resolved["scenario"] = scen_dict
    return RunConfig(scenario, resolved, tau_grid, pers_cfg, map_cfg, opt_cfg)


def load_config(path: Path, command: str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {str(path)!r}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw, command, base=path.parent)


# -- commands ---------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig, out: Path, fmt: str, threads: int = 1) -> int:
    sc = cfg.scenario
    spec = sc.spectrum
    c = sc.c_constants()
    prov = io.make_provenance(cfg.raw, "spectrum", detuning=sc.detuning)
    cols, rows = io.spectrum_table(spec, c)
    path = io.write_table(out / "spectrum", cols, rows, prov, fmt)
    print(f"spectrum: {len(rows)} states, min decay {min(r[3] for r in rows):.6g} -> {path}")
    return EXIT_OK


def cmd_g2(cfg: RunConfig, out: Path, fmt: str, threads: int = 1) -> int:
    sc = cfg.scenario
    trace = sc.trace(cfg.tau_grid)
    payload: dict = {"config": cfg.raw, "g2_zero": trace.g2_zero,
                     "c_constants": [[z.real, z.imag] for z in trace.c_constants]}
    summary = f"g2(0) = {trace.g2_zero:.6g}"
    if cfg.persistence["enabled"]:
        m = persistence(trace, cfg.persistence["threshold"], window=cfg.persistence["window"])
        payload["persistence"] = {"tau_half": m.tau_half, "window_max": m.window_max,
                                  "threshold": m.threshold, "window": list(m.window)}
        summary += f"  tau_half = {m.tau_half:.6g}  window_max = {m.window_max:.6g}"
    prov = io.make_provenance(cfg.raw, "g2", detuning=sc.detuning)
    cols, rows = io.trace_table(trace)
    path = io.write_table(out / "trace", cols, rows, prov, fmt)
    cols, rows = io.spectrum_table(sc.spectrum, trace.c_constants)
    io.write_table(out / "constants", cols, rows, prov, fmt)
    io.write_json(out / "trace_summary.json", payload, prov)
    print(f"{summary} -> {path}")
    return EXIT_OK


def cmd_map(cfg: RunConfig, out: Path, fmt: str, threads: int = 1) -> int:
    sc = cfg.scenario
    (n1, g1), (n2, g2) = cfg.map["axes"]
    if "tau" in (n1, n2):
        dets, taus = (g1, g2) if n1 == "detuning" else (g2, g1)
        result = map_g2_tau(sc, dets, taus, threads=threads)
    else:
        result = map_g2_zero(sc, (n1, g1), (n2, g2), threads=threads)
    prov = io.make_provenance(cfg.raw, "map")
    cols, rows = io.map_table(result)
    path = io.write_table(out / "map", cols, rows, prov, fmt)
    flagged = [{"cell": [float(r[0]), float(r[1])], "flag": r[3]} for r in rows if r[3]]
    sidecar = {
        "config": cfg.raw,
        "quantity": result.quantity,
        "shape": list(result.values.shape),
        "axes": {k: {"min": float(v.min()), "max": float(v.max()), "n": len(v)} for k, v in result.axes.items()},
        "argmin": result.argmin() if result.n_flagged < result.values.size else None,
        "min_value": float(np.min(np.where(result.flags == 0, result.values, np.inf))),
        "n_flagged": result.n_flagged,
        "flagged_cells": flagged,
        "flag_codes": {"0": "ok", "1": "linear amplitude zero", "2": "numerical failure"},
    }
    io.write_json(out / "map_meta.json", sidecar, prov)
    print(f"map: {len(rows)} cells, {result.n_flagged} flagged, argmin {sidecar['argmin']} -> {path}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out: Path, fmt: str, threads: int = 1) -> int:
    o = cfg.optimize
    prov = io.make_provenance(cfg.raw, "optimize")
    code = EXIT_OK
    try:
        res = optimize(
            cfg.scenario, o["objective"], o["bounds"], o["budget"], cap=o["cap"],
            grid_points=o["grid_points"], threshold=cfg.persistence["threshold"],
            tau_grid=cfg.tau_grid, seed=o["seed"],
        )
    except InfeasibleError as exc:
        res = exc.result
        code = EXIT_INFEASIBLE
    cols, rows = io.audit_table(res.audit)
    io.write_table(out / "audit", cols, rows, prov, fmt)
    payload = {
        "config": cfg.raw,
        "status": res.status,
        "best_so_far": res.best_so_far,
        "objective": res.objective,
        "best_params": res.best_params,
        "best_value": res.best_value,
        "n_evaluations": len(res.audit),
    }
    if res.metric is not None:
        payload["metric"] = {"g2_zero": res.metric.g2_zero, "tau_half": res.metric.tau_half,
                             "window_max": res.metric.window_max}
    io.write_json(out / "best.json", payload, prov)
    print(f"optimize: status {res.status}, best {res.best_params} value {res.best_value:.6g}, "
          f"{len(res.audit)} evaluations")
    return code


_DISPATCH = {"spectrum": cmd_spectrum, "g2": cmd_g2, "map": cmd_map, "optimize": cmd_optimize}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arrayg2", description="Photon correlations of emitter arrays.")
    parser.add_argument("--version", action="version", version=f"arrayg2 {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="run configuration (JSON)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for maps")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="tabular output format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        cfg = load_config(args.config, args.command)
        args.out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[args.command](cfg, args.out, args.format, args.threads)
    except ValidationError as exc:
        print(f"arrayg2: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ArrayG2Error as exc:
        print(f"arrayg2: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
