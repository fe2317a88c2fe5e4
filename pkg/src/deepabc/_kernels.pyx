# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``deepabc._fallback`` mirrors every function here."""

from libc.math cimport log, sqrt, M_PI


def ising_sweeps(signed char[:, :, ::1] spins not None,
                 const int[:, ::1] sites not None,
                 const double[:, ::1] uniforms not None,
                 const double[:, ::1] accept not None):
    """Random-site Metropolis updates over a batch of toroidal lattices.

    ``spins`` has shape (chains, m, m) and is updated in place. Update ``k``
    of chain ``b`` proposes flipping the spin at flat index ``sites[b, k]``
    and accepts when ``uniforms[b, k] < accept[b, (s * field + 4) >> 1]``,
    where ``field`` is the sum of the four neighbours.
    """
    cdef Py_ssize_t n_chains = spins.shape[0]
    cdef Py_ssize_t m = spins.shape[1]
    cdef Py_ssize_t n_visits = uniforms.shape[1]
    cdef Py_ssize_t b, i, j, k, ip, im, jp, jm, site
    cdef int s, field
    if spins.shape[2] != m:
        raise ValueError("lattice must be square")
    if (uniforms.shape[0] != n_chains or sites.shape[0] != n_chains
            or accept.shape[0] != n_chains):
        raise ValueError("batch dimension mismatch")
    if sites.shape[1] != n_visits:
        raise ValueError("sites and uniforms must have the same length")
    if accept.shape[1] != 5:
        raise ValueError("acceptance table must have 5 entries")
    for b in range(n_chains):
        for k in range(n_visits):
            if sites[b, k] < 0 or sites[b, k] >= m * m:
                raise ValueError("site index out of range")
    with nogil:
        for b in range(n_chains):
            for k in range(n_visits):
                site = sites[b, k]
                i = site // m
                j = site - i * m
                ip = i + 1 if i + 1 < m else 0
                im = i - 1 if i > 0 else m - 1
                jp = j + 1 if j + 1 < m else 0
                jm = j - 1 if j > 0 else m - 1
                s = spins[b, i, j]
                field = (spins[b, ip, j] + spins[b, im, j]
                         + spins[b, i, jp] + spins[b, i, jm])
                if uniforms[b, k] < accept[b, (s * field + 4) >> 1]:
                    spins[b, i, j] = -s


def ma2_loglik_batch(const double[::1] x not None, const double[:, ::1] theta not None):
    """Exact Gaussian MA(2) log-likelihood of ``x`` for each row of ``theta``.

    Banded Cholesky of the pentadiagonal Toeplitz covariance, O(p) per row.
    Rows whose covariance is not numerically positive definite get NaN.
    """
    cdef Py_ssize_t p = x.shape[0]
    cdef Py_ssize_t n = theta.shape[0]
    cdef Py_ssize_t r, j
    cdef double t1, t2, g0, g1, g2
    cdef double d1, d2, e1, y1, y2, d, e, f, piv, y, logdet, quad
    cdef double[::1] out
    import numpy as np
    out_arr = np.empty(n, dtype=np.float64)
    out = out_arr
    if theta.shape[1] != 2:
        raise ValueError("theta must have shape (n, 2)")
    with nogil:
        for r in range(n):
            t1 = theta[r, 0]
            t2 = theta[r, 1]
            g0 = 1.0 + t1 * t1 + t2 * t2
            g1 = t1 + t1 * t2
            g2 = t2
            # (d2, d1): previous two diagonal entries; e1: previous sub-diagonal
            d2 = 0.0
            d1 = 0.0
            e1 = 0.0
            y2 = 0.0
            y1 = 0.0
            logdet = 0.0
            quad = 0.0
            for j in range(p):
                f = g2 / d2 if j >= 2 else 0.0
                e = (g1 - f * e1) / d1 if j >= 1 else 0.0
                piv = g0 - e * e - f * f
                if not piv > 0.0:
                    logdet = 0.0 / 0.0
                    break
                d = sqrt(piv)
                y = (x[j] - e * y1 - f * y2) / d
                logdet += log(d)
                quad += y * y
                d2 = d1
                d1 = d
                e1 = e
                y2 = y1
                y1 = y
            out[r] = -0.5 * p * log(2.0 * M_PI) - logdet - 0.5 * quad
    return out_arr
