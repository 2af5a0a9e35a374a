"""Photon couplings, single-photon amplitudes and delay-resolved g2.

Both incident photons share one mode and both detected photons share another
(the twin-photon setup); ``omega`` below is always the detuning of the
incident photons from the atomic transition.  In that setup

    g2(tau) = |1 - sum_nu C_nu exp(-i (E_nu - omega) tau)|^2 .
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Literal

import numpy as np

from ._backend import kernels as _k
from .environment import AtomArray, EffectiveHamiltonian, WaveguideParams
from .errors import LinearAmplitudeZeroError, ValidationError
from .spectral import SpectralData, green_direct, green_single

__all__ = [
    "PhotonMode",
    "ScatteringSetup",
    "CorrelationTrace",
    "coupling_free_space",
    "coupling_waveguide",
    "amplitudes_s",
    "t_matrix_single",
    "c_constants",
    "c_constants_grid",
    "c_constants_explicit",
    "g2_trace",
    "LINEAR_ZERO_TOL",
]

LINEAR_ZERO_TOL = 1e-12

Direction = Literal["forward", "backward"]


@dataclass(frozen=True)
class PhotonMode:
    """A plane-wave (free space) or guided (waveguide) photon mode.

    Free-space modes carry ``direction`` as a unit 3-vector and a transverse
    unit ``polarization``; guided modes carry ``direction`` as
    ``"forward"``/``"backward"`` and no polarization.
    """

    direction: Any
    polarization: Any = None
    frequency: float = 0.0

    def __post_init__(self):
        if isinstance(self.direction, str):
            if self.direction not in ("forward", "backward"):
                raise ValidationError(f"unknown guided direction {self.direction!r}")
            if self.polarization is not None:
                raise ValidationError("guided modes carry no polarization")
            return
        n = np.asarray(self.direction, dtype=float)
        eps = np.asarray(self.polarization, dtype=complex)
        if n.shape != (3,) or eps.shape != (3,):
            raise ValidationError("free-space mode needs 3-vector direction and polarization")
        if abs(np.linalg.norm(n) - 1) > 1e-12 or abs(np.linalg.norm(eps) - 1) > 1e-12:
            raise ValidationError("direction and polarization must be unit vectors")
        if abs(n @ eps) > 1e-12:
            raise ValidationError("polarization must be transverse to the direction")
        n.setflags(write=False)
        eps.setflags(write=False)
        object.__setattr__(self, "direction", n)
        object.__setattr__(self, "polarization", eps)

    @property
    def guided(self) -> bool:
        return isinstance(self.direction, str)

    def same_direction(self, other: "PhotonMode") -> bool:
        if self.guided or other.guided:
            return self.direction == other.direction
        return bool(np.allclose(self.direction, other.direction, atol=1e-12))


@dataclass(frozen=True)
class ScatteringSetup:
    """Twin-photon scattering geometry: both photons in, both photons out share a mode."""

    incident_mode: PhotonMode
    detected_mode: PhotonMode

    def __post_init__(self):
        if self.incident_mode.guided != self.detected_mode.guided:
            raise ValidationError("incident and detected modes must live in the same environment")
        if self.incident_mode.same_direction(self.detected_mode):
            raise ValidationError(
                "detection along the incident direction is not supported "
                "(the linear amplitude contains an unscattered singular part)"
            )

    @property
    def detuning(self) -> float:
        return self.incident_mode.frequency


@dataclass(frozen=True)
class CorrelationTrace:
    """Sampled ``g2(tau)`` together with the constants that generate it."""

    c_constants: np.ndarray
    eigenvalues: np.ndarray
    omega: float
    tau: np.ndarray
    g2: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def exponents(self) -> np.ndarray:
        """Complex frequencies ``E_nu - omega`` of each contribution."""
        return self.eigenvalues - self.omega

    @property
    def g2_zero(self) -> float:
        return float(abs(1 - self.c_constants.sum()) ** 2)

    def contributions(self) -> np.ndarray:
        """Per-eigenstate complex terms ``C_nu exp(-i (E_nu - omega) tau)``, shape (T, N)."""
        return _k.contributions(self.c_constants, self.eigenvalues, self.omega, self.tau)


def coupling_free_space(array: AtomArray, mode: PhotonMode) -> np.ndarray:
    """``g_j = -i (d_j . eps) exp(i k0 n . r_j)`` with the volume prefactor set to 1.

    Near-resonant approximation: the wavenumber is ``k0 = 2 pi`` for positions
    in units of the resonant wavelength, whatever the photon detuning.
    """
    if mode.guided:
        raise ValidationError("free-space coupling needs a free-space mode")
    k0 = 2 * np.pi
    overlap = array.dipole_orientations @ mode.polarization
    return -1j * overlap * np.exp(1j * k0 * (array.positions @ mode.direction))


def coupling_waveguide(params: WaveguideParams, direction: Direction) -> np.ndarray:
    """``g_i = sqrt(gamma_sigma) exp(+-i kz z_i)`` (``+`` forward, ``-`` backward)."""
    if direction == "forward":
        rate, sign = params.gamma_f, 1.0
    elif direction == "backward":
        rate, sign = params.gamma_b, -1.0
    else:
        raise ValidationError(f"unknown direction {direction!r}")
    return np.sqrt(rate) * np.exp(sign * 1j * params.kz * params.z_positions)


def amplitudes_s(
    spec: SpectralData | EffectiveHamiltonian,
    coupling: np.ndarray,
    omega: float,
    side: Literal["absorption", "emission"],
) -> np.ndarray:
    """Self-consistent excitation amplitudes.

    ``absorption``: ``s-_i = sum_j G_ij g_j``;
    ``emission``: ``s+_i = sum_j conj(g_j) G_ji``.
    Given a bare Hamiltonian (e.g. a defective cascaded chain with no
    eigenbasis) ``G`` comes from a dense solve instead of the residues.
    """
    if isinstance(spec, EffectiveHamiltonian):
        green = green_direct(spec, omega)
    else:
        green = green_single(spec, omega)
    coupling = np.asarray(coupling, dtype=complex)
    if side == "absorption":
        return green @ coupling
    if side == "emission":
        return coupling.conj() @ green
    raise ValidationError(f"side must be 'absorption' or 'emission', got {side!r}")


def t_matrix_single(g_out, g_in, green) -> complex:
    """Single-photon T-matrix element ``g_out^dagger G g_in``."""
    return complex(np.conj(g_out) @ np.asarray(green) @ np.asarray(g_in))


def _check_linear(t_lin, g_in, g_out):
    floor = LINEAR_ZERO_TOL * np.linalg.norm(g_in) * np.linalg.norm(g_out)
    bad = np.abs(t_lin) <= floor
    return bad


def c_constants(
    spec: SpectralData,
    g_in: np.ndarray,
    g_out: np.ndarray,
    omega: float,
) -> np.ndarray:
    """Per-eigenstate constants ``C_nu`` at incident detuning ``omega``.

    ``g_in`` / ``g_out`` are the (unconjugated) couplings to the incident and
    detected modes.  Uses the residue route for the kernel.

    Raises
    ------
    LinearAmplitudeZeroError
        If the single-photon amplitude vanishes so g2 is undefined.
    """
    C, t_lin = c_constants_grid(spec, g_in, g_out, [omega])
    if _check_linear(t_lin, g_in, g_out)[0]:
        raise LinearAmplitudeZeroError(
            f"single-photon amplitude |T| = {abs(t_lin[0]):.3g} vanishes at omega = {omega}"
        )
    return C[0]


def c_constants_grid(spec: SpectralData, g_in, g_out, omegas):
    """Vectorized :func:`c_constants`; returns ``(C, T)`` with no zero check."""
    ebar = np.conj(np.asarray(g_out, dtype=complex))
    return _k.c_constants_batch(spec.eigenvalues, spec.residues, g_in, ebar, omegas)


def c_constants_explicit(
    spec: SpectralData,
    g_in: np.ndarray,
    g_out: np.ndarray,
    omega: float,
    kernel: Callable[[float], np.ndarray],
) -> np.ndarray:
    """Same constants with an arbitrary kernel evaluator ``Omega -> Q``.

    Written index-by-index after the closed form so it can cross-check the
    fast kernels (e.g. with the two-excitation kernel plugged in).
    """
    E = spec.eigenvalues
    g = spec.residues
    n = spec.n
    big = 2.0 * omega
    ebar = np.conj(np.asarray(g_out, dtype=complex))
    green = green_single(spec, omega)
    s_minus = green @ np.asarray(g_in, dtype=complex)
    t_lin = ebar @ s_minus
    if _check_linear(np.array([t_lin]), g_in, g_out)[0]:
        raise LinearAmplitudeZeroError(f"single-photon amplitude vanishes at omega = {omega}")
    q = kernel(big)
    out = np.empty(n, dtype=complex)
    for nu in range(n):
        emit = np.zeros(n, dtype=complex)
        for i in range(n):
            acc = 0j
            for nu2 in range(n):
                acc += (ebar @ g[nu][:, i]) * (ebar @ g[nu2][:, i]) / (big - E[nu] - E[nu2])
            emit[i] = acc
        out[nu] = -1j * (emit @ q @ s_minus**2) / t_lin**2
    return out


def g2_trace(
    c: np.ndarray,
    spec: SpectralData,
    omega: float,
    tau_grid,
    metadata: dict | None = None,
) -> CorrelationTrace:
    """Evaluate ``g2`` on a non-negative ascending delay grid."""
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or (len(tau) and tau[0] < 0) or np.any(np.diff(tau) < 0):
        raise ValidationError("tau grid must be 1-D, non-negative and ascending")
    c = np.asarray(c, dtype=complex)
    values = _k.g2_from_constants(c, spec.eigenvalues, float(omega), tau)
    return CorrelationTrace(c, spec.eigenvalues, float(omega), tau, values, dict(metadata or {}))
