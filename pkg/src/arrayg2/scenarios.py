"""Ready-made scattering scenarios.

A :class:`Scenario` bundles the emitters, the effective Hamiltonian, the
scattering geometry and the couplings of both photon modes, together with the
declared bounds of each parameter that may be swept.  Scenarios are rebuilt
from ``(kind, params)`` alone, which is also their serialized form::

    {"schema_version": 1, "kind": "square", "params": {"a": 0.1, "theta": 0.785..., "detuning": 3.9}}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping

import numpy as np

from .environment import (
    AtomArray,
    EffectiveHamiltonian,
    WaveguideParams,
    build_heff_free_space,
    build_heff_waveguide,
)
from .errors import ValidationError
from .scattering import (
    PhotonMode,
    ScatteringSetup,
    c_constants,
    coupling_free_space,
    coupling_waveguide,
    g2_trace,
)
from .spectral import SpectralData, eigendecompose

__all__ = [
    "ParamSpec",
    "Scenario",
    "square_array",
    "chiral_chain",
    "single_atom",
    "build_scenario",
    "SCENARIO_SCHEMA_VERSION",
    "KINDS",
]

SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ParamSpec:
    lo: float
    hi: float
    hi_open: bool = False
    lo_open: bool = False
    integer: bool = False
    sweepable: bool = True
    default: float = 0.0

    def check(self, name: str, value) -> float | int:
        if self.integer:
            if isinstance(value, bool) or not float(value).is_integer():
                raise ValidationError(f"parameter {name!r} must be an integer, got {value!r}")
            value = int(value)
        else:
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ValidationError(f"parameter {name!r} must be a number, got {value!r}") from None
        if not math.isfinite(value):
            raise ValidationError(f"parameter {name!r} must be finite")
        below = value <= self.lo if self.lo_open else value < self.lo
        above = value >= self.hi if self.hi_open else value > self.hi
        if below or above:
            lb = "(" if self.lo_open else "["
            rb = ")" if self.hi_open else "]"
            raise ValidationError(
                f"parameter {name!r} = {value} outside {lb}{self.lo}, {self.hi}{rb}"
            )
        return value


@dataclass(frozen=True)
class Scenario:
    """A fully specified scattering problem."""

    kind: str
    params: Mapping[str, Any]
    array: AtomArray | WaveguideParams
    hamiltonian: EffectiveHamiltonian
    setup: ScatteringSetup
    g_in: np.ndarray
    g_out: np.ndarray
    parameter_schema: Mapping[str, ParamSpec] = field(repr=False)

    @property
    def name(self) -> str:
        return self.kind

    @property
    def detuning(self) -> float:
        return self.setup.detuning

    @property
    def n_atoms(self) -> int:
        return self.hamiltonian.n

    @cached_property
    def spectrum(self) -> SpectralData:
        return eigendecompose(self.hamiltonian)

    def with_params(self, **changes) -> "Scenario":
        params = dict(self.params)
        params.update(changes)
        return build_scenario(self.kind, **params)

    def c_constants(self, detuning: float | None = None) -> np.ndarray:
        w = self.detuning if detuning is None else detuning
        return c_constants(self.spectrum, self.g_in, self.g_out, w)

    def trace(self, tau_grid, detuning: float | None = None):
        w = self.detuning if detuning is None else detuning
        return g2_trace(
            self.c_constants(w), self.spectrum, w, tau_grid,
            metadata={"scenario": self.to_dict(), "detuning": w},
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "kind": self.kind,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        unknown = set(data) - {"schema_version", "kind", "params"}
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        version = data.get("schema_version", SCENARIO_SCHEMA_VERSION)
        if version != SCENARIO_SCHEMA_VERSION:
            raise ValidationError(f"unsupported scenario schema_version {version!r}")
        if "kind" not in data:
            raise ValidationError("scenario is missing required field 'kind'")
        return build_scenario(data["kind"], **dict(data.get("params", {})))


def _validate(schema: Mapping[str, ParamSpec], given: Mapping[str, Any]) -> dict:
    unknown = set(given) - set(schema)
    if unknown:
        raise ValidationError(f"unknown parameters: {sorted(unknown)}")
    out = {}
    for name, spec in schema.items():
        out[name] = spec.check(name, given.get(name, spec.default))
    return out


SQUARE_SCHEMA = {
    "a": ParamSpec(0.0, 10.0, lo_open=True, default=0.1),
    "theta": ParamSpec(0.0, math.pi, hi_open=True, default=0.25 * math.pi),
    "detuning": ParamSpec(-100.0, 100.0, default=3.9),
}

CHAIN_SCHEMA = {
    "n_atoms": ParamSpec(1, 64, integer=True, sweepable=False, default=5),
    "a": ParamSpec(0.0, 10.0, lo_open=True, default=0.22),
    "xi": ParamSpec(0.0, 1.0, default=0.01),
    "gamma_r": ParamSpec(0.0, 100.0, default=0.1),
    "detuning": ParamSpec(-100.0, 100.0, default=0.3),
}

SINGLE_SCHEMA = {
    "detuning": ParamSpec(-100.0, 100.0, default=0.0),
}


def square_array(a: float = 0.1, theta: float = 0.25 * math.pi, detuning: float = 3.9) -> Scenario:
    """Four atoms on a square in the xy-plane, normal incidence, backscattering.

    The square is centred at the origin with edges along x and y; in-plane
    dipoles and both photon polarizations point along ``(cos theta, sin theta, 0)``.
    Lengths are in units of the resonant wavelength, frequencies in units of
    the single-atom decay rate.
    """
    p = _validate(SQUARE_SCHEMA, {"a": a, "theta": theta, "detuning": detuning})
    h = 0.5 * p["a"]
    positions = np.array([[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]])
    d = np.array([math.cos(p["theta"]), math.sin(p["theta"]), 0.0])
    array = AtomArray(positions, np.tile(d, (4, 1)))
    incident = PhotonMode(np.array([0.0, 0.0, 1.0]), d, p["detuning"])
    detected = PhotonMode(np.array([0.0, 0.0, -1.0]), d, p["detuning"])
    setup = ScatteringSetup(incident, detected)
    return Scenario(
        "square", p, array, build_heff_free_space(array), setup,
        coupling_free_space(array, incident), coupling_free_space(array, detected),
        SQUARE_SCHEMA,
    )


def chiral_chain(
    n_atoms: int = 5,
    a: float = 0.22,
    xi: float = 0.01,
    gamma_r: float = 0.1,
    detuning: float = 0.3,
) -> Scenario:
    """Equally spaced chain on a chiral waveguide, probed in reflection.

    Rates are in units of ``gamma_wg = gamma_f + gamma_b`` (held at 1 while
    ``xi = gamma_b / gamma_f`` varies), lengths in guided wavelengths.
    Photons are sent forward and detected backward.
    """
    p = _validate(
        CHAIN_SCHEMA,
        {"n_atoms": n_atoms, "a": a, "xi": xi, "gamma_r": gamma_r, "detuning": detuning},
    )
    gamma_f = 1.0 / (1.0 + p["xi"])
    params = WaveguideParams(
        gamma_f=gamma_f,
        gamma_b=p["xi"] * gamma_f,
        gamma_r=p["gamma_r"],
        z_positions=p["a"] * np.arange(p["n_atoms"]),
    )
    setup = ScatteringSetup(
        PhotonMode("forward", frequency=p["detuning"]),
        PhotonMode("backward", frequency=p["detuning"]),
    )
    return Scenario(
        "chain", p, params, build_heff_waveguide(params), setup,
        coupling_waveguide(params, "forward"), coupling_waveguide(params, "backward"),
        CHAIN_SCHEMA,
    )


def single_atom(detuning: float = 0.0) -> Scenario:
    """One atom in free space, x-polarized, probed in backscattering."""
    p = _validate(SINGLE_SCHEMA, {"detuning": detuning})
    d = np.array([1.0, 0.0, 0.0])
    array = AtomArray(np.zeros((1, 3)), d[None, :])
    incident = PhotonMode(np.array([0.0, 0.0, 1.0]), d, p["detuning"])
    detected = PhotonMode(np.array([0.0, 0.0, -1.0]), d, p["detuning"])
    return Scenario(
        "single_atom", p, array, build_heff_free_space(array), ScatteringSetup(incident, detected),
        coupling_free_space(array, incident), coupling_free_space(array, detected),
        SINGLE_SCHEMA,
    )


KINDS: dict[str, tuple[Callable[..., Scenario], Mapping[str, ParamSpec]]] = {
    "square": (square_array, SQUARE_SCHEMA),
    "chain": (chiral_chain, CHAIN_SCHEMA),
    "single_atom": (single_atom, SINGLE_SCHEMA),
}


def build_scenario(kind: str, **params) -> Scenario:
    try:
        builder, schema = KINDS[kind]
    except KeyError:
        raise ValidationError(f"unknown scenario kind {kind!r}; expected one of {sorted(KINDS)}") from None
    unknown = set(params) - set(schema)
    if unknown:
        raise ValidationError(f"unknown parameters for {kind!r}: {sorted(unknown)}")
    return builder(**params)
