"""Parameter maps, persistence metrics and antibunching optimization."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import __version__
from ._backend import kernels as _k
from .errors import (
    ArrayG2Error,
    GridTooCoarseError,
    InfeasibleError,
    LinearAmplitudeZeroError,
    ValidationError,
)
from .scattering import LINEAR_ZERO_TOL, CorrelationTrace, c_constants_grid
from .scenarios import Scenario

__all__ = [
    "SweepResult",
    "PersistenceMetric",
    "OptimizationResult",
    "map_g2_zero",
    "map_g2_tau",
    "persistence",
    "optimize",
    "default_tau_grid",
    "FLAG_OK",
    "FLAG_LINEAR_ZERO",
    "FLAG_NUMERICAL",
    "OBJECTIVES",
]

FLAG_OK = 0
FLAG_LINEAR_ZERO = 1
FLAG_NUMERICAL = 2
#: Value stored in flagged cells (the uncorrelated level); flagged cells never win an argmin.
FLAG_FILL = 1.0

DEFAULT_DETUNING_STEP = 0.05
DEFAULT_TAU_STEP = 0.02
DEFAULT_TAU_MAX = 60.0
MAX_TAU_STEP = 0.05


def default_tau_grid(tau_max: float = DEFAULT_TAU_MAX, step: float = DEFAULT_TAU_STEP) -> np.ndarray:
    n = int(round(tau_max / step))
    return np.linspace(0.0, n * step, n + 1)


@dataclass(frozen=True)
class SweepResult:
    """Dense map over named axes; ``values.shape`` matches the axis lengths."""

    axes: dict[str, np.ndarray]
    values: np.ndarray
    flags: np.ndarray
    quantity: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(v) for v in self.axes.values())
        if self.values.shape != shape or self.flags.shape != shape:
            raise ValidationError(f"values shape {self.values.shape} != axes shape {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("sweep values must be finite")

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.flags))

    def argmin(self) -> dict[str, float]:
        """Axis values of the smallest unflagged cell."""
        masked = np.where(self.flags == FLAG_OK, self.values, np.inf)
        idx = np.unravel_index(int(np.argmin(masked)), masked.shape)
        return {name: float(grid[i]) for (name, grid), i in zip(self.axes.items(), idx)}


@dataclass(frozen=True)
class PersistenceMetric:
    g2_zero: float
    tau_half: float
    window_max: float
    threshold: float = 0.5
    window: tuple[float, float] = (0.0, 5.0)


@dataclass
class OptimizationResult:
    best_params: dict[str, float]
    best_value: float
    objective: str
    metric: PersistenceMetric | None
    status: str
    audit: list[dict]

    @property
    def best_so_far(self) -> bool:
        return self.status == "budget_exhausted"


def _check_axis(scenario: Scenario, name: str, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValidationError(f"axis {name!r} must be a non-empty 1-D grid")
    spec = scenario.parameter_schema.get(name)
    if spec is None:
        raise ValidationError(f"{name!r} is not a parameter of scenario {scenario.kind!r}")
    if not spec.sweepable:
        raise ValidationError(f"parameter {name!r} cannot be swept")
    for v in (grid.min(), grid.max()):
        spec.check(name, v)
    return grid


def _row_g2_zero(scenario: Scenario, detunings: np.ndarray):
    """g2(0) and flags along a detuning grid for one structural configuration."""
    values = np.full(len(detunings), FLAG_FILL)
    flags = np.full(len(detunings), FLAG_OK, dtype=np.int8)
    try:
        spec = scenario.spectrum
    except ArrayG2Error:
        flags[:] = FLAG_NUMERICAL
        return values, flags
    C, t_lin = c_constants_grid(spec, scenario.g_in, scenario.g_out, detunings)
    floor = LINEAR_ZERO_TOL * np.linalg.norm(scenario.g_in) * np.linalg.norm(scenario.g_out)
    g0 = np.abs(1.0 - C.sum(axis=1)) ** 2
    zero = np.abs(t_lin) <= floor
    bad = ~np.isfinite(g0)
    flags[zero] = FLAG_LINEAR_ZERO
    flags[bad & ~zero] = FLAG_NUMERICAL
    ok = flags == FLAG_OK
    values[ok] = g0[ok]
    return values, flags


def _provenance(scenario: Scenario, axes: Mapping[str, np.ndarray], extra: dict | None = None) -> dict:
    out = {
        "tool": "arrayg2",
        "version": __version__,
        "scenario": scenario.to_dict(),
        "axes": {k: {"min": float(v.min()), "max": float(v.max()), "n": len(v)} for k, v in axes.items()},
    }
    if extra:
        out.update(extra)
    return out


def _pmap(fn: Callable, items: Sequence, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def map_g2_zero(
    scenario: Scenario,
    axis1: tuple[str, Sequence[float]],
    axis2: tuple[str, Sequence[float]],
    *,
    threads: int = 1,
) -> SweepResult:
    """Dense map of ``g2(0)`` over two scenario parameters.

    Cells are independent; rows are assembled in grid order so the result does
    not depend on ``threads``.
    """
    (n1, g1), (n2, g2) = axis1, axis2
    if n1 == n2:
        raise ValidationError("the two axes must be different parameters")
    g1 = _check_axis(scenario, n1, g1)
    g2 = _check_axis(scenario, n2, g2)

    # detuning is batched inside the kernels, so iterate over the other axis
    if n2 == "detuning" or n1 == "detuning":
        other, other_grid, det_grid = (n1, g1, g2) if n2 == "detuning" else (n2, g2, g1)

        def row(v):
            return _row_g2_zero(scenario.with_params(**{other: float(v)}), det_grid)

        rows = _pmap(row, list(other_grid), threads)
        values = np.array([r[0] for r in rows])
        flags = np.array([r[1] for r in rows])
        if n1 == "detuning":
            values, flags = values.T.copy(), flags.T.copy()
    else:

        def cell(pair):
            s = scenario.with_params(**{n1: float(pair[0]), n2: float(pair[1])})
            v, f = _row_g2_zero(s, np.array([s.detuning]))
            return v[0], f[0]

        cells = _pmap(cell, list(product(g1, g2)), threads)
        values = np.array([c[0] for c in cells]).reshape(len(g1), len(g2))
        flags = np.array([c[1] for c in cells], dtype=np.int8).reshape(len(g1), len(g2))

    axes = {n1: g1, n2: g2}
    return SweepResult(axes, values, flags, "g2_zero", _provenance(scenario, axes))


def map_g2_tau(
    scenario: Scenario,
    detuning_grid: Sequence[float],
    tau_grid: Sequence[float],
    *,
    threads: int = 1,
) -> SweepResult:
    """``g2(tau)`` over detuning x delay for a fixed configuration."""
    dets = _check_axis(scenario, "detuning", detuning_grid)
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or len(tau) == 0 or tau[0] < 0 or np.any(np.diff(tau) < 0):
        raise ValidationError("tau grid must be non-empty, non-negative and ascending")
    values = np.full((len(dets), len(tau)), FLAG_FILL)
    flags = np.zeros((len(dets), len(tau)), dtype=np.int8)
    try:
        spec = scenario.spectrum
    except ArrayG2Error:
        flags[:] = FLAG_NUMERICAL
        axes = {"detuning": dets, "tau": tau}
        return SweepResult(axes, values, flags, "g2", _provenance(scenario, axes))
    C, t_lin = c_constants_grid(spec, scenario.g_in, scenario.g_out, dets)
    floor = LINEAR_ZERO_TOL * np.linalg.norm(scenario.g_in) * np.linalg.norm(scenario.g_out)

    def row(k):
        if abs(t_lin[k]) <= floor:
            return None, FLAG_LINEAR_ZERO
        if not np.all(np.isfinite(C[k])):
            return None, FLAG_NUMERICAL
        return _k.g2_from_constants(C[k], spec.eigenvalues, float(dets[k]), tau), FLAG_OK

    for k, (vals, flag) in enumerate(_pmap(row, range(len(dets)), threads)):
        if flag == FLAG_OK:
            values[k] = vals
        flags[k] = flag
    axes = {"detuning": dets, "tau": tau}
    return SweepResult(axes, values, flags, "g2", _provenance(scenario, axes))


def persistence(
    trace: CorrelationTrace,
    threshold: float = 0.5,
    *,
    window: tuple[float, float] = (0.0, 5.0),
    lifetime: float = 1.0,
    debounce: float | None = None,
) -> PersistenceMetric:
    """Persistence of antibunching along a trace.

    ``tau_half`` is the first (linearly interpolated) delay at which ``g2``
    reaches ``threshold`` and then stays above ``debounce`` (default
    ``0.9 * threshold``, i.e. 0.45 for 0.5) for one ``lifetime``; it is 0 when
    ``g2(0) >= threshold`` and ``inf`` if the level is never reached for good.
    """
    if not 0 < threshold < 1:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")
    tau, g2 = trace.tau, trace.g2
    if len(tau) > 1 and np.max(np.diff(tau)) > MAX_TAU_STEP * lifetime * (1 + 1e-9):
        raise GridTooCoarseError(
            f"tau step {np.max(np.diff(tau)):.3g} exceeds {MAX_TAU_STEP} lifetimes"
        )
    low = 0.9 * threshold if debounce is None else debounce
    in_window = (tau >= window[0]) & (tau <= window[1])
    window_max = float(g2[in_window].max()) if in_window.any() else float("nan")
    g0 = float(g2[0]) if len(g2) else float("nan")

    if g0 >= threshold:
        tau_half = 0.0
    else:
        tau_half = math.inf
        up = np.flatnonzero((g2[1:] >= threshold) & (g2[:-1] < threshold)) + 1
        for k in up:
            horizon = tau[k] + lifetime
            stay = (tau >= tau[k]) & (tau <= horizon)
            if np.all(g2[stay] > low):
                f = (threshold - g2[k - 1]) / (g2[k] - g2[k - 1])
                tau_half = float(tau[k - 1] + f * (tau[k] - tau[k - 1]))
                break
    return PersistenceMetric(g0, tau_half, window_max, threshold, tuple(window))


OBJECTIVES = ("min_g2_zero", "max_tau_half", "max_window")


class _BudgetSpent(Exception):
    pass


def _antibunching_window(trace: CorrelationTrace, cap: float) -> float:
    above = np.flatnonzero(trace.g2 >= cap)
    if len(above) == 0:
        return float(trace.tau[-1])
    k = above[0]
    if k == 0:
        return 0.0
    g = trace.g2
    f = (cap - g[k - 1]) / (g[k] - g[k - 1])
    return float(trace.tau[k - 1] + f * (trace.tau[k] - trace.tau[k - 1]))


def optimize(
    scenario: Scenario,
    objective: str,
    bounds: Mapping[str, tuple[float, float]],
    budget: int,
    *,
    cap: float | None = None,
    grid_points: int | Mapping[str, int] = 9,
    threshold: float = 0.5,
    tau_grid: Sequence[float] | None = None,
    seed: int = 0,
) -> OptimizationResult:
    """Coarse grid scan followed by bounded Nelder-Mead refinement.

    Parameters
    ----------
    objective
        ``"min_g2_zero"``, ``"max_tau_half"`` or ``"max_window"`` (length of
        the initial stretch with ``g2 < cap``).
    cap
        Feasibility constraint ``g2(0) < cap``; ``None`` means unconstrained.
        Required by ``"max_window"``.
    bounds
        Closed interval per swept parameter.
    budget
        Total number of objective evaluations, coarse grid included.
    seed
        Seeds the jitter of the initial simplex so reruns are identical.

    Raises
    ------
    InfeasibleError
        No evaluated point satisfies the constraint; ``err.result`` holds the audit trail.
    """
    if objective not in OBJECTIVES:
        raise ValidationError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if not bounds:
        raise ValidationError("at least one parameter bound is required")
    if objective == "max_window" and cap is None:
        raise ValidationError("objective 'max_window' needs a cap")
    names = list(bounds)
    lo = np.array([float(bounds[n][0]) for n in names])
    hi = np.array([float(bounds[n][1]) for n in names])
    if np.any(hi < lo):
        raise ValidationError("every bound must satisfy lo <= hi")
    for n in names:
        _check_axis(scenario, n, [bounds[n][0], bounds[n][1]])
    if isinstance(grid_points, Mapping):
        counts = [int(grid_points[n]) for n in names]
    else:
        counts = [int(grid_points)] * len(names)
    counts = [1 if h == l else c for c, l, h in zip(counts, lo, hi)]
    grids = [np.linspace(l, h, c) if c > 1 else np.array([0.5 * (l + h)]) for l, h, c in zip(lo, hi, counts)]
    n_grid = int(np.prod(counts))
    if budget < n_grid:
        raise ValidationError(f"budget {budget} smaller than coarse grid size {n_grid}")
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)

    audit: list[dict] = []
    best = {"value": math.inf, "x": None, "metric": None}

    def evaluate(x, stage):
        params = {n: float(v) for n, v in zip(names, x)}
        record = {"stage": stage, **params}
        metric = None
        try:
            s = scenario.with_params(**params)
            if objective == "min_g2_zero":
                c = s.c_constants()
                g0 = float(abs(1 - c.sum()) ** 2)
                if not math.isfinite(g0):
                    raise LinearAmplitudeZeroError("non-finite g2(0)")
                value = g0
            else:
                trace = s.trace(taus)
                metric = persistence(trace, threshold)
                g0 = metric.g2_zero
                if objective == "max_tau_half":
                    value = -metric.tau_half
                else:
                    value = -_antibunching_window(trace, cap)
            feasible = cap is None or g0 < cap
            record.update(g2_zero=g0, value=value, feasible=bool(feasible), flag="")
        except ArrayG2Error as exc:
            value, feasible = math.inf, False
            record.update(g2_zero=float("nan"), value=value, feasible=False, flag=type(exc).__name__)
        audit.append(record)
        if feasible and value < best["value"]:
            best.update(value=value, x=np.array(x, dtype=float), metric=metric)
        return value if feasible else math.inf

    for x in product(*grids):
        evaluate(x, "grid")

    if best["x"] is None:
        result = OptimizationResult({}, math.inf, objective, None, "infeasible", audit)
        err = InfeasibleError(f"no grid point satisfies the constraint (cap={cap})")
        err.result = result
        raise err

    remaining = budget - n_grid
    status = "ok"
    free = hi > lo
    if remaining > 0 and np.any(free):
        rng = np.random.default_rng(seed)
        x0 = best["x"][free]
        span = (hi - lo)[free]
        steps = span / np.maximum(np.array(counts)[free] - 1, 1)
        simplex = [x0]
        for k in range(len(x0)):
            v = x0.copy()
            d = steps[k] * 0.5 * (1 + 0.1 * rng.random())
            v[k] = v[k] + d if v[k] + d <= hi[free][k] else v[k] - d
            simplex.append(v)
        fixed = best["x"].copy()

        def f(y):
            # scipy may overshoot maxfev inside one simplex step
            if len(audit) >= budget:
                raise _BudgetSpent
            x = fixed.copy()
            x[free] = np.clip(y, lo[free], hi[free])
            return evaluate(x, "refine")

        try:
            res = minimize(
                f, x0, method="Nelder-Mead",
                bounds=list(zip(lo[free], hi[free])),
                options={"maxfev": remaining, "initial_simplex": np.array(simplex),
                         "xatol": 1e-4, "fatol": 1e-6},
            )
            if not res.success and res.nfev >= remaining:
                status = "budget_exhausted"
        except _BudgetSpent:
            status = "budget_exhausted"

    best_params = {n: float(v) for n, v in zip(names, best["x"])}
    return OptimizationResult(best_params, float(best["value"]), objective, best["metric"], status, audit)
