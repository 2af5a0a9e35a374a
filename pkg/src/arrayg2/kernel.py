"""Two-photon scattering kernel ``Q(Omega)``.

Three independent routes:

* :func:`sigma_eigen` -- residue expansion of the pair propagator, then
  :func:`kernel_q` inverts it (production route);
* :func:`sigma_quadrature` -- direct real-axis integral of ``G_ij(w) G_ij(Omega - w)``
  with ``G`` from dense solves (oracle, no eigendecomposition involved);
* :func:`kernel_q_two_exc` -- expansion over two-excitation eigenstates of the
  hard-core pair Hamiltonian (oracle).

``Omega`` is the total two-photon detuning, i.e. measured from ``2*omega0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.integrate import quad_vec

from ._backend import kernels as _k
from .environment import EffectiveHamiltonian
from .errors import NearDefectiveError, QuadratureError, SingularKernelError, ValidationError
from .spectral import MAX_CONDITION, SpectralData

__all__ = [
    "TwoExcitationData",
    "sigma_eigen",
    "sigma_quadrature",
    "kernel_q",
    "build_two_excitation",
    "kernel_q_two_exc",
    "MAX_KERNEL_CONDITION",
]

MAX_KERNEL_CONDITION = 1e12

QUAD_RTOL = 1e-7


def sigma_eigen(spec: SpectralData, Omega: float) -> np.ndarray:
    """``Sigma_ij = -i sum_{a,b} g^(a)_ij g^(b)_ij / (Omega - E_a - E_b)``.

    The residue products are entrywise, not matrix products.
    """
    return _k.sigma_from_residues(spec.eigenvalues, spec.residues, float(Omega))


def sigma_quadrature(
    source: SpectralData | EffectiveHamiltonian,
    Omega: float,
    *,
    rtol: float = QUAD_RTOL,
    limit: int = 4000,
    return_parts: bool = False,
):
    """Pair propagator by adaptive quadrature along the real frequency axis.

    The integration variable is centred at ``Omega/2``; a finite window of
    half-width ``max(1e3*gamma, 1e3*max|E|)`` is refined around the pole
    positions, and both tails out to infinity are integrated as well (the
    diagonal integrand decays only as ``1/u^2``, so the tails are not
    negligible at the 1e-7 level).

    Parameters
    ----------
    source
        Either the spectral data (its Hamiltonian is used) or the Hamiltonian.
    return_parts
        Also return ``(window, tails)`` contributions for tail diagnostics.

    Raises
    ------
    QuadratureError
        If the estimated error exceeds ``rtol`` relative to the result.
    """
    h = source.hamiltonian if isinstance(source, SpectralData) else source
    mat = h.matrix
    n = h.n
    eye = np.eye(n)
    center = 0.5 * Omega

    def integrand(u):
        ga = np.linalg.solve((center + u) * eye - mat, eye)
        gb = np.linalg.solve((center - u) * eye - mat, eye)
        return (ga * gb).ravel() / (2 * np.pi)

    evals = np.linalg.eigvals(mat)
    gamma = max(h.total_onsite_decay, float(np.max(-2 * evals.imag)))
    half = max(1e3 * gamma, 1e3 * float(np.max(np.abs(evals))), 1e3 * abs(center))
    poles = np.concatenate([evals.real - center, center - evals.real])
    poles = np.unique(np.round(poles[np.abs(poles) < half], 12))

    opts = dict(epsrel=rtol * 1e-2, epsabs=0.0, limit=limit)
    win, err_w = quad_vec(integrand, -half, half, points=poles, **opts)
    hi, err_h = quad_vec(integrand, half, np.inf, **opts)
    lo, err_l = quad_vec(integrand, -np.inf, -half, **opts)
    total = win + hi + lo
    err = err_w + err_h + err_l
    scale = np.linalg.norm(total)
    if not np.isfinite(scale) or err > rtol * scale:
        raise QuadratureError(f"quadrature error {err:.3g} exceeds {rtol:g} x |Sigma| = {scale:.3g}")
    result = total.reshape(n, n)
    if return_parts:
        return result, win.reshape(n, n), (hi + lo).reshape(n, n)
    return result


def kernel_q(sigma: np.ndarray) -> np.ndarray:
    """``Q = Sigma^{-1}``.

    Raises
    ------
    SingularKernelError
        If ``cond(Sigma)`` exceeds :data:`MAX_KERNEL_CONDITION`.
    """
    sigma = np.asarray(sigma, dtype=complex)
    cond = float(np.linalg.cond(sigma))
    if not np.isfinite(cond) or cond > MAX_KERNEL_CONDITION:
        raise SingularKernelError(f"Sigma condition number {cond:.3g} too large", cond)
    return np.linalg.inv(sigma)


@dataclass(frozen=True)
class TwoExcitationData:
    """Two-excitation eigenstates on the hard-core pair basis.

    ``right_amplitudes[mu]`` is the symmetric zero-diagonal matrix
    ``Psi^(R,mu)`` normalized to ``sum |Psi|^2 = 1``; the left amplitudes are
    scaled so that ``sum_ij Psi^(L)_ij Psi^(R)_ij = 1``.
    """

    pair_basis: tuple[tuple[int, int], ...]
    hamiltonian2: np.ndarray
    energies: np.ndarray
    right_amplitudes: np.ndarray
    left_amplitudes: np.ndarray
    emission_right: np.ndarray
    emission_left: np.ndarray
    onsite: np.ndarray


def _pair_hamiltonian(mat: np.ndarray):
    n = mat.shape[0]
    pairs = tuple(combinations(range(n), 2))
    index = {p: k for k, p in enumerate(pairs)}
    h2 = np.zeros((len(pairs), len(pairs)), dtype=complex)
    for (i, j), col in index.items():
        h2[col, col] = mat[i, i] + mat[j, j]
        for k in range(n):
            if k == i or k == j:
                continue
            # excitation hops i -> k (j spectator) and j -> k (i spectator)
            h2[index[tuple(sorted((k, j)))], col] += mat[k, i]
            h2[index[tuple(sorted((i, k)))], col] += mat[k, j]
    return pairs, h2


def build_two_excitation(h: EffectiveHamiltonian) -> TwoExcitationData:
    """Diagonalize the two-excitation sector (no interaction beyond hard-core exclusion)."""
    mat = h.matrix
    n = h.n
    if n < 2:
        raise ValidationError("two-excitation sector needs at least two atoms")
    pairs, h2 = _pair_hamiltonian(mat)
    energies, vecs = np.linalg.eig(h2)
    order = np.lexsort((np.round(energies.real, 12), np.round(-energies.imag, 12)))
    energies = energies[order]
    vecs = vecs[:, order]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    cond = float(np.linalg.cond(vecs))
    if cond > MAX_CONDITION:
        raise NearDefectiveError(f"pair eigenvector condition {cond:.3g}", cond)
    left = np.linalg.inv(vecs)

    m = len(pairs)
    psi_r = np.zeros((m, n, n), dtype=complex)
    psi_l = np.zeros((m, n, n), dtype=complex)
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    for mu in range(m):
        psi_r[mu, rows, cols] = psi_r[mu, cols, rows] = vecs[:, mu] / np.sqrt(2)
        psi_l[mu, rows, cols] = psi_l[mu, cols, rows] = left[mu, :] / np.sqrt(2)
    # d^R_i = sum_j H_ij Psi^R_ji ; d^L_i = sum_j Psi^L_ij H_ji
    d_r = np.einsum("ij,mji->mi", mat, psi_r)
    d_l = np.einsum("mij,ji->mi", psi_l, mat)
    return TwoExcitationData(
        pair_basis=pairs,
        hamiltonian2=h2,
        energies=energies,
        right_amplitudes=psi_r,
        left_amplitudes=psi_l,
        emission_right=d_r,
        emission_left=d_l,
        onsite=np.diag(mat).copy(),
    )


def kernel_q_two_exc(two_exc: TwoExcitationData | None, Omega: float, onsite=None) -> np.ndarray:
    """Kernel from the two-excitation expansion.

    ``Q = i diag(Omega - 2 H_ii) - 4i sum_mu d^(R,mu) (x) d^(L,mu) / (Omega - E2_mu)``.
    For uniform on-site terms ``-i gamma/2`` the first term is ``i (Omega + i gamma) I``.

    ``two_exc`` may be ``None`` for a single atom, in which case ``onsite``
    (the 1x1 diagonal) must be given.
    """
    if two_exc is None:
        if onsite is None:
            raise ValidationError("onsite energies required without two-excitation data")
        return np.diag(1j * (Omega - 2 * np.asarray(onsite, dtype=complex)))
    q = np.diag(1j * (Omega - 2 * two_exc.onsite))
    weights = 1.0 / (Omega - two_exc.energies)
    q -= 4j * np.einsum("m,mi,mj->ij", weights, two_exc.emission_right, two_exc.emission_left)
    return q
