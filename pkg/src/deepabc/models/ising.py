"""Ising model on an m x m torus.

The lattice is flattened row-major into a vector of +1/-1 spins. The
sufficient statistic sums ``x_j * x_k`` over every nearest-neighbour edge of
the torus (each site's right and down neighbour), so an all-up 10 x 10
lattice scores 200.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.special import logsumexp

from .. import kernels
from ..core import ExponentialPrior, PriorSpec, as_generator

MAX_ENUMERATION_SIDE = 4

# sweeps handed to the kernel per call; bounds the uniform buffer size
_SWEEP_CHUNK = 64


@dataclass(frozen=True)
class IsingModel:
    """Ising simulator settings.

    Every sample comes from a fresh chain started from i.i.d. uniform spins
    and run for ``burn_in + sweeps`` Metropolis sweeps. A sweep is m*m
    single-spin-flip updates at uniformly chosen sites.
    """

    m: int = 10
    burn_in: int = 1000
    sweeps: int = 1

    tag = "ising"
    discrete = True

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("lattice side m must be at least 2")
        if self.sweeps < 1 or self.burn_in < 0:
            raise ValueError("need sweeps >= 1 and burn_in >= 0")

    @property
    def data_dim(self) -> int:
        return self.m * self.m

    @property
    def param_dim(self) -> int:
        return 1

    def simulate(self, theta, rng) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return self.simulate_batch(theta[None, :], [as_generator(rng)])[0]

    def simulate_batch(self, thetas, gens) -> np.ndarray:
        """Simulate one lattice per row of ``thetas``, each from its own generator.

        Returns an int8 array of shape (len(thetas), m*m).
        """
        thetas = np.asarray(thetas, dtype=float).reshape(len(gens), -1)[:, 0]
        if np.any(thetas < 0) or not np.all(np.isfinite(thetas)):
            raise ValueError("Ising theta must be finite and nonnegative")
        m, n = self.m, len(gens)
        spins = np.empty((n, m, m), dtype=np.int8)
        for b, gen in enumerate(gens):
            spins[b] = 2 * gen.integers(0, 2, size=(m, m), dtype=np.int8) - 1
        accept = acceptance_table(thetas)
        remaining = self.burn_in + self.sweeps
        while remaining > 0:
            chunk = min(remaining, _SWEEP_CHUNK)
            visits = chunk * m * m
            sites = np.empty((n, visits), dtype=np.int32)
            uniforms = np.empty((n, visits))
            for b, gen in enumerate(gens):
                sites[b] = gen.integers(0, m * m, size=visits, dtype=np.int32)
                uniforms[b] = gen.random(visits)
            kernels.ising_sweeps(spins, sites, uniforms, accept)
            remaining -= chunk
        return spins.reshape(n, m * m)

    def to_dict(self) -> dict:
        return {"model": self.tag, "m": self.m, "burn_in": self.burn_in, "sweeps": self.sweeps}


def acceptance_table(thetas) -> np.ndarray:
    """Flip probabilities indexed by ``(s * field + 4) // 2``.

    Flipping spin ``s`` with neighbour sum ``field`` changes the sufficient
    statistic by ``-2 * s * field``.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    local = np.arange(-4, 5, 2, dtype=float)
    return np.minimum(1.0, np.exp(-2.0 * thetas[:, None] * local[None, :]))


def _check_spins(x, m: int | None = None) -> tuple[np.ndarray, int]:
    x = np.asarray(x)
    p = x.shape[-1]
    side = int(round(np.sqrt(p)))
    if side * side != p:
        raise ValueError(f"length {p} is not a square lattice")
    if m is not None and side != m:
        raise ValueError(f"expected a {m}x{m} lattice, got length {p}")
    if not np.all((x == 1) | (x == -1)):
        raise ValueError("Ising states must contain only +1/-1 entries")
    return x, side


def sufficient_stat(x) -> np.ndarray | float:
    """Sum of neighbour products over the torus; accepts one state or a batch."""
    x, m = _check_spins(x)
    lat = x.reshape(x.shape[:-1] + (m, m)).astype(np.int32)
    s = (lat * np.roll(lat, -1, axis=-1)).sum(axis=(-2, -1)) + (
        lat * np.roll(lat, -1, axis=-2)
    ).sum(axis=(-2, -1))
    return float(s) if np.ndim(s) == 0 else s.astype(np.float64)


def saturated_values(m: int) -> tuple[int, int]:
    """The all-aligned value and the one-flipped-spin value of S*."""
    return 2 * m * m - 8, 2 * m * m


# --------------------------------------------------------------------------
# exact enumeration for small lattices


@lru_cache(maxsize=None)
def density_of_states(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Achievable S* values and how many of the 2**(m*m) states attain each."""
    if m > MAX_ENUMERATION_SIDE:
        raise ValueError(
            f"exact enumeration is limited to m <= {MAX_ENUMERATION_SIDE} (got m={m})"
        )
    p = m * m
    codes = np.arange(2 ** p, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(p)) & 1
    states = (2 * bits - 1).astype(np.int8)
    values, counts = np.unique(sufficient_stat(states).astype(np.int64), return_counts=True)
    values.setflags(write=False)
    counts.setflags(write=False)
    return values, counts


def log_partition(m: int, theta) -> np.ndarray:
    values, counts = density_of_states(m)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return logsumexp(theta[:, None] * values[None, :], b=counts[None, :], axis=1)


def stat_pmf(m: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact distribution of S* under the Ising law with parameter ``theta``."""
    values, counts = density_of_states(m)
    logw = theta * values + np.log(counts)
    return values, np.exp(logw - logsumexp(logw))


def default_theta_grid(prior: PriorSpec, n: int = 8001) -> np.ndarray:
    # integrate until the prior tail mass is below 1e-12
    upper = 12 * np.log(10) / prior.rate
    return np.linspace(0.0, upper, n)


def posterior_mean_by_stat(m: int, prior: PriorSpec, theta_grid=None) -> dict[int, float]:
    """E[theta | S* = s] for every achievable s, by Simpson quadrature."""
    if not isinstance(prior, ExponentialPrior):
        raise TypeError("the Ising oracle needs an exponential prior")
    values, _ = density_of_states(m)
    grid = default_theta_grid(prior) if theta_grid is None else np.asarray(theta_grid, float)
    log_prior = prior.logpdf(grid)
    log_z = log_partition(m, grid)
    out = {}
    for s in values:
        logw = log_prior + s * grid - log_z
        w = np.exp(logw - logw.max())
        out[int(s)] = float(simpson(grid * w, x=grid) / simpson(w, x=grid))
    return out


def exact_posterior_mean(x, prior: PriorSpec, m: int, theta_grid=None) -> float:
    """Posterior mean of theta given the state ``x`` (small lattices only)."""
    if m > MAX_ENUMERATION_SIDE:
        raise ValueError(
            f"exact enumeration is limited to m <= {MAX_ENUMERATION_SIDE} (got m={m})"
        )
    _check_spins(x, m)
    table = posterior_mean_by_stat(m, prior, theta_grid)
    return table[int(sufficient_stat(x))]
