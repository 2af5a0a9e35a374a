# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same signatures and conventions as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport NAN

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)


cdef int _solve_inplace(double complex[:, ::1] a, double complex[::1] b, Py_ssize_t n) noexcept nogil:
    """Gaussian elimination with partial pivoting; solution left in ``b``."""
    cdef Py_ssize_t i, j, k, piv
    cdef double best, mag
    cdef double complex tmp, f
    for k in range(n):
        piv = k
        best = cabs(a[k, k])
        for i in range(k + 1, n):
            mag = cabs(a[i, k])
            if mag > best:
                best = mag
                piv = i
        if best == 0.0:
            return 1
        if piv != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            if f != 0:
                for j in range(k, n):
                    a[i, j] = a[i, j] - f * a[k, j]
                b[i] = b[i] - f * b[k]
    for i in range(n - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, n):
            tmp = tmp - a[i, j] * b[j]
        b[i] = tmp / a[i, i]
    return 0


def sigma_from_residues(E, res, double Omega):
    cdef const double complex[::1] e = np.ascontiguousarray(E, dtype=np.complex128)
    cdef const double complex[:, :, ::1] r = np.ascontiguousarray(res, dtype=np.complex128)
    cdef Py_ssize_t n = e.shape[0], a, b, i, j
    out = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] s = out
    cdef double complex w
    for a in range(n):
        for b in range(n):
            w = -1j / (Omega - e[a] - e[b])
            for i in range(n):
                for j in range(n):
                    s[i, j] += w * r[a, i, j] * r[b, i, j]
    return out


def c_constants_batch(E, res, gin, ebar, omegas):
    cdef const double complex[::1] e = np.ascontiguousarray(E, dtype=np.complex128)
    cdef const double complex[:, :, ::1] r = np.ascontiguousarray(res, dtype=np.complex128)
    cdef const double complex[::1] g = np.ascontiguousarray(gin, dtype=np.complex128)
    cdef const double complex[::1] eb = np.ascontiguousarray(ebar, dtype=np.complex128)
    cdef const double[::1] om = np.ascontiguousarray(np.atleast_1d(omegas), dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], m = om.shape[0]
    cdef Py_ssize_t q, a, b, i, j, k

    C_out = np.empty((m, n), dtype=np.complex128)
    T_out = np.empty(m, dtype=np.complex128)
    cdef double complex[:, ::1] C = C_out
    cdef double complex[::1] T = T_out

    p_arr = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] p = p_arr
    for a in range(n):
        for k in range(n):
            for i in range(n):
                p[a, i] += eb[k] * r[a, k, i]

    cdef double complex[:, ::1] sig = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] w = np.empty((n, n), dtype=np.complex128)
    cdef double complex[::1] inv = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] sm = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] x = np.empty(n, dtype=np.complex128)
    cdef double complex acc, tl, inner, big
    cdef double omega
    cdef int fail

    with nogil:
        for q in range(m):
            omega = om[q]
            big = 2.0 * omega
            for a in range(n):
                inv[a] = 1.0 / (omega - e[a])
                for b in range(n):
                    w[a, b] = 1.0 / (big - e[a] - e[b])
            # s_minus = G(omega) gin, G from residues
            tl = 0
            for i in range(n):
                acc = 0
                for a in range(n):
                    inner = 0
                    for j in range(n):
                        inner = inner + r[a, i, j] * g[j]
                    acc = acc + inv[a] * inner
                sm[i] = acc
                tl = tl + eb[i] * acc
            T[q] = tl
            for i in range(n):
                for j in range(n):
                    acc = 0
                    for a in range(n):
                        for b in range(n):
                            acc = acc + w[a, b] * r[a, i, j] * r[b, i, j]
                    sig[i, j] = -1j * acc
                x[i] = sm[i] * sm[i]
            fail = _solve_inplace(sig, x, n)
            for a in range(n):
                if fail:
                    C[q, a] = NAN
                    continue
                acc = 0
                for i in range(n):
                    inner = 0
                    for b in range(n):
                        inner = inner + w[a, b] * p[b, i]
                    acc = acc + p[a, i] * inner * x[i]
                C[q, a] = -1j * acc / (tl * tl)
    return C_out, T_out


def g2_from_constants(C, E, double omega, taus):
    cdef const double complex[::1] c = np.ascontiguousarray(C, dtype=np.complex128)
    cdef const double complex[::1] e = np.ascontiguousarray(E, dtype=np.complex128)
    cdef const double[::1] t = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], nt = t.shape[0], k, a
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] o = out
    cdef double complex acc
    with nogil:
        for k in range(nt):
            acc = 1.0
            for a in range(n):
                acc = acc - c[a] * cexp(-1j * (e[a] - omega) * t[k])
            o[k] = acc.real * acc.real + acc.imag * acc.imag
    return out


def contributions(C, E, double omega, taus):
    cdef const double complex[::1] c = np.ascontiguousarray(C, dtype=np.complex128)
    cdef const double complex[::1] e = np.ascontiguousarray(E, dtype=np.complex128)
    cdef const double[::1] t = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], nt = t.shape[0], k, a
    out = np.empty((nt, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    with nogil:
        for k in range(nt):
            for a in range(n):
                o[k, a] = c[a] * cexp(-1j * (e[a] - omega) * t[k])
    return out
