"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` function-for-function; the compiled module is used
when importable (see :mod:`arrayg2._backend`).

Array conventions shared by both backends:

* ``E`` -- (N,) complex eigenvalues (detuning convention)
* ``res`` -- (N, N, N) complex residues, ``res[nu, i, j]``
* ``gin`` -- (N,) complex couplings of the incident mode
* ``ebar`` -- (N,) complex *conjugated* couplings of the detected mode
"""

from __future__ import annotations

import numpy as np


def sigma_from_residues(E, res, Omega):
    """Pair propagator ``Sigma(Omega)`` from the residue expansion (entrywise products)."""
    E = np.asarray(E, dtype=complex)
    res = np.asarray(res, dtype=complex)
    w = 1.0 / (Omega - E[:, None] - E[None, :])
    return -1j * np.einsum("ab,aij,bij->ij", w, res, res)


def c_constants_batch(E, res, gin, ebar, omegas):
    """Per-eigenstate constants ``C[nu]`` for a batch of photon detunings.

    Returns
    -------
    C : (M, N) complex
    T : (M,) complex
        Single-photon amplitudes ``ebar . G(omega) . gin``.
    """
    E = np.asarray(E, dtype=complex)
    res = np.asarray(res, dtype=complex)
    gin = np.asarray(gin, dtype=complex)
    ebar = np.asarray(ebar, dtype=complex)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))

    inv = 1.0 / (omegas[:, None] - E[None, :])  # (M, N)
    green = np.einsum("mn,nij->mij", inv, res)  # (M, N, N)
    s_minus = green @ gin  # (M, N)
    t_lin = s_minus @ ebar  # (M,)

    big_omega = 2.0 * omegas
    w = 1.0 / (big_omega[:, None, None] - E[None, :, None] - E[None, None, :])  # (M, N, N)
    sigma = -1j * np.einsum("mab,aij,bij->mij", w, res, res)
    x = np.linalg.solve(sigma, (s_minus**2)[..., None])[..., 0]  # Q @ s_minus^2

    p = np.einsum("k,nki->ni", ebar, res)  # (N, N): sum_i' ebar_i' g^(nu)_{i', i}
    # M[m, nu, i] = p[nu, i] * sum_nu2 p[nu2, i] w[m, nu, nu2]
    m_vec = p[None, :, :] * np.einsum("mab,bi->mai", w, p)
    C = -1j * np.einsum("mai,mi->ma", m_vec, x) / (t_lin**2)[:, None]
    return C, t_lin


def g2_from_constants(C, E, omega, taus):
    """``|1 - sum_nu C_nu exp(-i (E_nu - omega) tau)|^2`` on a delay grid."""
    C = np.asarray(C, dtype=complex)
    E = np.asarray(E, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    phases = np.exp(-1j * np.outer(taus, E - omega))
    return np.abs(1.0 - phases @ C) ** 2


def contributions(C, E, omega, taus):
    """Per-eigenstate terms ``C_nu exp(-i (E_nu - omega) tau)``, shape (T, N)."""
    C = np.asarray(C, dtype=complex)
    E = np.asarray(E, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    return np.exp(-1j * np.outer(taus, E - omega)) * C[None, :]
