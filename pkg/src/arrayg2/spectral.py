"""Biorthogonal eigendecomposition of the effective Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import EffectiveHamiltonian
from .errors import NearDefectiveError

__all__ = ["SpectralData", "eigendecompose", "green_single", "green_direct", "MAX_CONDITION"]

#: Eigenvector-matrix condition number above which the decomposition is refused.
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues, biorthonormal eigenvectors and residue matrices.

    Attributes
    ----------
    eigenvalues : (N,) complex
        Sorted by ascending decay rate ``-2 Im E`` (ties broken by ``Re E``).
    right_vectors : (N, N) complex
        Columns are right eigenvectors, unit norm, largest component real > 0.
    left_vectors : (N, N) complex
        Rows are left eigenvectors with ``left @ right = I``.
    residues : (N, N, N) complex
        ``residues[nu] = outer(right[:, nu], left[nu, :])``.
    condition_estimate : float
        2-norm condition number of ``right_vectors``.
    hamiltonian : EffectiveHamiltonian
        The decomposed operator (kept for independent oracles).
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    residues: np.ndarray
    condition_estimate: float
    hamiltonian: EffectiveHamiltonian

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def decay_rates(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    @property
    def frequencies(self) -> np.ndarray:
        """Eigenfrequencies measured from the transition frequency."""
        return self.eigenvalues.real


def _fix_gauge(vec: np.ndarray) -> np.ndarray:
    vec = vec / np.linalg.norm(vec)
    mags = np.abs(vec)
    # first index within rounding of the maximum, so ties resolve deterministically
    k = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-9))[0])
    vec = vec * (np.conj(vec[k]) / mags[k])
    vec[k] = mags[k]
    return vec


def eigendecompose(h: EffectiveHamiltonian | np.ndarray) -> SpectralData:
    """Diagonalize ``H`` into biorthonormal left/right eigenvectors.

    Raises
    ------
    NearDefectiveError
        If the eigenvector matrix condition number exceeds :data:`MAX_CONDITION`.
    """
    if not isinstance(h, EffectiveHamiltonian):
        h = EffectiveHamiltonian(np.asarray(h, dtype=complex), "free_space", 0.0)
    mat = h.matrix
    evals, evecs = np.linalg.eig(mat)
    order = np.lexsort((np.round(evals.real, 12), np.round(-2 * evals.imag, 12)))
    evals = evals[order]
    right = np.column_stack([_fix_gauge(evecs[:, k]) for k in order])
    cond = float(np.linalg.cond(right))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NearDefectiveError(
            f"eigenvector matrix condition {cond:.3g} exceeds {MAX_CONDITION:.0e}; "
            "use the quadrature kernel route",
            cond,
        )
    left = np.linalg.inv(right)
    residues = np.einsum("in,nj->nij", right, left)
    for a in (evals, right, left, residues):
        a.setflags(write=False)
    return SpectralData(evals, right, left, residues, cond, h)


def green_single(spec: SpectralData, omega: float) -> np.ndarray:
    """Single-excitation Green's function from the eigen-expansion.

    ``G(omega) = sum_nu g^(nu) / (omega - E_nu)``, ``omega`` a detuning.
    """
    return np.einsum("n,nij->ij", 1.0 / (omega - spec.eigenvalues), spec.residues)


def green_direct(h: EffectiveHamiltonian, omega: float) -> np.ndarray:
    """``(omega - H)^{-1}`` by dense solve; reference for :func:`green_single`."""
    n = h.n
    return np.linalg.solve(omega * np.eye(n) - h.matrix, np.eye(n))
