"""Effective non-Hermitian Hamiltonians for emitter arrays.

Two environments are supported: vacuum (atoms at arbitrary positions with
arbitrary dipole orientations) and a single-mode waveguide with possibly
chiral (direction-dependent) coupling.

All matrices are stored in the *detuning convention*: the transition frequency
``omega0`` is subtracted from the diagonal, so the diagonal of a free-space
Hamiltonian is exactly ``-i*gamma0/2``.  The subtracted offset is recorded on
:class:`EffectiveHamiltonian` and can be restored with
:meth:`EffectiveHamiltonian.absolute`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import CoincidentPointsError, ValidationError

__all__ = [
    "AtomArray",
    "WaveguideParams",
    "EffectiveHamiltonian",
    "free_space_dyadic_green",
    "build_heff_free_space",
    "build_heff_waveguide",
    "MIN_SEPARATION",
]

#: Separation floor in units of the resonant wavelength.
MIN_SEPARATION = 1e-9

_UNIT_TOL = 1e-12

Environment = Literal["free_space", "waveguide"]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AtomArray:
    """Emitters in vacuum.

    Parameters
    ----------
    positions : (N, 3) array_like
        Atom positions in units of the resonant wavelength ``lambda0``.
    dipole_orientations : (N, 3) array_like
        Unit (possibly complex) dipole vectors.
    omega0 : float
        Transition frequency, kept only as the reference offset.
    gamma0 : float
        Single-atom spontaneous emission rate; sets the frequency unit.
    """

    positions: np.ndarray
    dipole_orientations: np.ndarray
    omega0: float = 0.0
    gamma0: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        dip = np.asarray(self.dipole_orientations, dtype=complex)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValidationError(f"positions must have shape (N, 3), got {pos.shape}")
        if dip.shape != pos.shape:
            raise ValidationError(
                f"dipole_orientations shape {dip.shape} != positions shape {pos.shape}"
            )
        norms = np.linalg.norm(dip, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValidationError(f"dipole orientations must be unit vectors, norms={norms}")
        if not self.gamma0 > 0:
            raise ValidationError(f"gamma0 must be positive, got {self.gamma0}")
        n = len(pos)
        for i in range(n):
            for j in range(i + 1, n):
                sep = np.linalg.norm(pos[i] - pos[j])
                if sep <= MIN_SEPARATION:
                    raise CoincidentPointsError(
                        f"atoms {i} and {j} are {sep:.3g} lambda0 apart "
                        f"(floor {MIN_SEPARATION:g})"
                    )
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "dipole_orientations", _frozen(dip))

    @property
    def n_atoms(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class WaveguideParams:
    """Atoms coupled to a single guided mode.

    ``kz`` is the guided wavenumber; with ``z_positions`` in units of the
    guided wavelength it equals ``2*pi``.
    """

    gamma_f: float
    gamma_b: float
    gamma_r: float
    z_positions: np.ndarray
    kz: float = 2 * np.pi

    def __post_init__(self):
        z = np.asarray(self.z_positions, dtype=float)
        if z.ndim != 1 or len(z) == 0:
            raise ValidationError("z_positions must be a non-empty 1-D sequence")
        if self.gamma_f < 0 or self.gamma_b < 0 or self.gamma_r < 0:
            raise ValidationError(
                f"rates must be non-negative: f={self.gamma_f}, b={self.gamma_b}, r={self.gamma_r}"
            )
        if not self.gamma_f + self.gamma_b > 0:
            raise ValidationError("gamma_f + gamma_b must be positive")
        if np.any(np.diff(z) <= 0):
            raise ValidationError("z_positions must be strictly increasing")
        object.__setattr__(self, "z_positions", _frozen(z))

    @property
    def gamma_wg(self) -> float:
        return self.gamma_f + self.gamma_b

    @property
    def xi(self) -> float:
        """Asymmetry ``gamma_b / gamma_f`` (``inf`` for purely backward coupling)."""
        return self.gamma_b / self.gamma_f if self.gamma_f > 0 else float("inf")

    @property
    def n_atoms(self) -> int:
        return len(self.z_positions)


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Dense single-excitation Hamiltonian, detuning convention.

    ``matrix`` holds ``H - omega_ref * I``.
    """

    matrix: np.ndarray
    environment: Environment
    total_onsite_decay: float
    omega_ref: float = 0.0
    rate_floor: float = field(default=0.0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"matrix must be square, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def absolute(self) -> np.ndarray:
        """Matrix with the reference frequency restored on the diagonal."""
        return self.matrix + self.omega_ref * np.eye(self.n)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - m.T), initial=0.0) <= tol * max(1.0, np.max(np.abs(m))))


def free_space_dyadic_green(r, r_prime, k: float = 2 * np.pi) -> np.ndarray:
    """Retarded vacuum dyadic Green's tensor ``G(r, r', k)``.

    Solves ``curl curl G - k^2 G = I delta(r - r')``::

        G = e^{ikR}/(4 pi R) [ (1 + (ikR - 1)/(kR)^2) I
                               + (3 - 3ikR - (kR)^2)/(kR)^2 R^ R^ ]

    Parameters
    ----------
    r, r_prime : array_like, shape (3,)
        Field and source points (same length unit as ``1/k``).
    k : float
        Wavenumber ``omega/c``. With lengths in units of the resonant
        wavelength the resonant value is ``2*pi``.

    Raises
    ------
    CoincidentPointsError
        If ``|r - r'|`` is below :data:`MIN_SEPARATION` (in units of ``2 pi/k``).
    """
    if not k > 0:
        raise ValidationError(f"k must be positive, got {k}")
    d = np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)
    dist = float(np.linalg.norm(d))
    if dist * k / (2 * np.pi) <= MIN_SEPARATION:
        raise CoincidentPointsError(f"coincident points: |r - r'| = {dist:.3g}")
    u = d / dist
    kr = k * dist
    kr2 = kr * kr
    pref = np.exp(1j * kr) / (4 * np.pi * dist)
    a = 1 + (1j * kr - 1) / kr2
    b = (3 - 3j * kr - kr2) / kr2
    return pref * (a * np.eye(3) + b * np.outer(u, u))


def build_heff_free_space(array: AtomArray) -> EffectiveHamiltonian:
    """Free-space effective Hamiltonian.

    Off-diagonal elements are ``-(3 pi gamma0 / k0) d_i^* . G(r_i, r_j) . d_j``.
    The prefactor is fixed so that the imaginary part of the (regularized)
    self-interaction gives exactly ``-i gamma0/2``, because
    ``Im G(r, r) = k0/(6 pi) I``.
    """
    k0 = 2 * np.pi
    gamma = array.gamma0
    pos = array.positions
    dip = array.dipole_orientations
    n = array.n_atoms
    scale = -3 * np.pi * gamma / k0
    h = np.zeros((n, n), dtype=complex)
    for i in range(n):
        h[i, i] = -0.5j * gamma
        for j in range(i + 1, n):
            g = free_space_dyadic_green(pos[i], pos[j], k0)
            h[i, j] = scale * (dip[i].conj() @ g @ dip[j])
            h[j, i] = scale * (dip[j].conj() @ g.T @ dip[i])
    heff = EffectiveHamiltonian(h, "free_space", gamma, omega_ref=array.omega0)
    _check_passive(heff)
    return heff


def build_heff_waveguide(params: WaveguideParams) -> EffectiveHamiltonian:
    """Chiral waveguide Hamiltonian (frequencies measured from the transition).

    ``H_ij = -i gamma_f e^{i phi_ij}`` for ``i > j`` (downstream),
    ``-i gamma_b e^{i phi_ij}`` for ``i < j`` and
    ``-i (gamma_wg + gamma_r)/2`` on the diagonal, with
    ``phi_ij = kz |z_i - z_j|``.
    """
    z = params.z_positions
    phase = np.exp(1j * params.kz * np.abs(z[:, None] - z[None, :]))
    n = len(z)
    lower = np.tril(np.ones((n, n), dtype=bool), -1)
    upper = lower.T
    h = np.zeros((n, n), dtype=complex)
    h[lower] = -1j * params.gamma_f * phase[lower]
    h[upper] = -1j * params.gamma_b * phase[upper]
    total = params.gamma_wg + params.gamma_r
    h[np.diag_indices(n)] = -0.5j * total
    heff = EffectiveHamiltonian(h, "waveguide", total, rate_floor=params.gamma_r)
    _check_passive(heff)
    return heff


def _check_passive(heff: EffectiveHamiltonian) -> None:
    ev = np.linalg.eigvals(heff.matrix)
    # tolerance scales with the matrix norm; eigvals of non-normal matrices are noisy
    tol = 1e-10 * max(1.0, float(np.abs(heff.matrix).max()))
    if np.any(ev.imag >= -tol):
        raise ValidationError(f"Hamiltonian is not passive: eigenvalues {ev}")
    if np.any(-2 * ev.imag < heff.rate_floor - tol):
        raise ValidationError(
            f"decay rates {-2 * ev.imag} below loss floor {heff.rate_floor}"
        )

