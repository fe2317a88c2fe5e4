"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Each function has the same signature and produces the same result; the
Ising sweep is bit-identical because both sides compare the same uniforms
against the same precomputed acceptance table.
"""

import numpy as np


def neighbours(m):
    """Flat indices of the (down, up, right, left) toroidal neighbours of each site."""
    i, j = np.divmod(np.arange(m * m), m)
    return np.stack([((i + 1) % m) * m + j, ((i - 1) % m) * m + j,
                     i * m + (j + 1) % m, i * m + (j - 1) % m], axis=1)


def ising_sweeps(spins, sites, uniforms, accept):
    n_chains, m, m2 = spins.shape
    if m2 != m:
        raise ValueError("lattice must be square")
    if uniforms.shape[0] != n_chains or sites.shape[0] != n_chains or accept.shape[0] != n_chains:
        raise ValueError("batch dimension mismatch")
    if sites.shape[1] != uniforms.shape[1]:
        raise ValueError("sites and uniforms must have the same length")
    if accept.shape[1] != 5:
        raise ValueError("acceptance table must have 5 entries")
    if np.any(sites < 0) or np.any(sites >= m * m):
        raise ValueError("site index out of range")
    rows = np.arange(n_chains)
    nbr = neighbours(m)
    # int16 avoids int8 overflow in s * field
    lat = spins.reshape(n_chains, m * m).astype(np.int16)
    for k in range(uniforms.shape[1]):
        idx = sites[:, k]
        s = lat[rows, idx]
        field = lat[rows[:, None], nbr[idx]].sum(axis=1)
        flip = uniforms[:, k] < accept[rows, (s * field + 4) >> 1]
        lat[rows, idx] = np.where(flip, -s, s)
    spins[...] = lat.reshape(n_chains, m, m)


def ma2_loglik_batch(x, theta):
    x = np.ascontiguousarray(x, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[1] != 2:
        raise ValueError("theta must have shape (n, 2)")
    p = x.shape[0]
    t1, t2 = theta[:, 0], theta[:, 1]
    g0 = 1.0 + t1 * t1 + t2 * t2
    g1 = t1 + t1 * t2
    g2 = t2
    n = theta.shape[0]
    d2 = np.zeros(n)
    d1 = np.zeros(n)
    e1 = np.zeros(n)
    y2 = np.zeros(n)
    y1 = np.zeros(n)
    logdet = np.zeros(n)
    quad = np.zeros(n)
    bad = np.zeros(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(p):
            f = g2 / d2 if j >= 2 else np.zeros(n)
            e = (g1 - f * e1) / d1 if j >= 1 else np.zeros(n)
            piv = g0 - e * e - f * f
            bad |= ~(piv > 0.0)
            d = np.sqrt(np.where(piv > 0.0, piv, 1.0))
            y = (x[j] - e * y1 - f * y2) / d
            logdet += np.log(d)
            quad += y * y
            d2, d1, e1, y2, y1 = d1, d, e, y1, y
    out = -0.5 * p * np.log(2.0 * np.pi) - logdet - 0.5 * quad
    out[bad] = np.nan
    return out
