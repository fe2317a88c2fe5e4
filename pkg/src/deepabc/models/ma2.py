"""Second-order moving-average model with standard normal innovations."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .. import kernels
from ..core import TrianglePrior, as_generator


class NotPositiveDefiniteError(ArithmeticError):
    """The MA(2) covariance matrix failed its Cholesky factorisation."""


@dataclass(frozen=True)
class Ma2Model:
    """X_j = Z_j + theta1 Z_{j-1} + theta2 Z_{j-2}, j = 1..p, Z ~ N(0, 1)."""

    p: int = 100

    tag = "ma2"
    discrete = False

    def __post_init__(self):
        if self.p < 3:
            raise ValueError("series length p must be at least 3")

    @property
    def data_dim(self) -> int:
        return self.p

    @property
    def param_dim(self) -> int:
        return 2

    def simulate(self, theta, rng) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(1, 2)
        return self.simulate_batch(theta, [as_generator(rng)])[0]

    def simulate_batch(self, thetas, gens) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float).reshape(len(gens), 2)
        # column k holds Z_{k-1}, so X_j uses columns j+1, j, j-1
        z = np.empty((len(gens), self.p + 2))
        for b, gen in enumerate(gens):
            z[b] = gen.standard_normal(self.p + 2)
        return (
            z[:, 2:]
            + thetas[:, :1] * z[:, 1:-1]
            + thetas[:, 1:] * z[:, :-2]
        )

    def to_dict(self) -> dict:
        return {"model": self.tag, "p": self.p}


def autocovariance(x) -> np.ndarray:
    """Uncentred lag-1 and lag-2 autocovariances; shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    p = x.shape[-1]
    if p < 3:
        raise ValueError("need at least 3 observations")
    ac1 = (x[..., :-1] * x[..., 1:]).sum(axis=-1) / (p - 1)
    ac2 = (x[..., :-2] * x[..., 2:]).sum(axis=-1) / (p - 2)
    return np.stack([ac1, ac2], axis=-1)


def covariance_bands(theta) -> tuple[float, float, float]:
    t1, t2 = float(theta[0]), float(theta[1])
    return 1.0 + t1 * t1 + t2 * t2, t1 + t1 * t2, t2


def dense_covariance(theta, p: int) -> np.ndarray:
    g0, g1, g2 = covariance_bands(theta)
    idx = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.select([idx == 0, idx == 1, idx == 2], [g0, g1, g2], 0.0)


_TRIANGLE = TrianglePrior()


def loglik_many(x, thetas) -> np.ndarray:
    """Log-likelihood of one series for many parameter points at once.

    Points outside the closed triangle raise ``ValueError``; a failed
    factorisation raises :class:`NotPositiveDefiniteError`.
    """
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=np.float64)
    outside = ~_TRIANGLE.contains(thetas, atol=1e-12)
    if outside.any():
        raise ValueError(f"theta {thetas[outside][0]} lies outside the MA(2) triangle")
    out = kernels.ma2_loglik_batch(x, thetas)
    bad = np.isnan(out)
    if bad.any():
        raise NotPositiveDefiniteError(
            f"covariance is not positive definite at theta={thetas[bad][0]}"
        )
    return out


def loglikelihood(x, theta) -> float:
    """Exact Gaussian log-density of the series ``x`` under parameters ``theta``."""
    return float(loglik_many(x, np.asarray(theta, dtype=float).reshape(1, 2))[0])


@dataclass(frozen=True)
class Ma2PosteriorGrid:
    """Grid approximation of the exact posterior under the uniform triangle prior.

    ``theta1``/``theta2`` are cell centres of a ``resolution x resolution``
    grid over [-2, 2] x [-1, 1]; ``log_posterior`` is ``-inf`` off the
    triangle. ``prob`` holds the normalised cell probabilities.
    """

    resolution: int
    theta1: np.ndarray
    theta2: np.ndarray
    log_posterior: np.ndarray
    log_normalization: float

    @property
    def prob(self) -> np.ndarray:
        return np.exp(self.log_posterior)

    def moments(self):
        from ..evaluation import PosteriorMoments

        w = self.prob
        t1 = self.theta1[None, :]
        t2 = self.theta2[:, None]
        m1 = float((w * t1).sum())
        m2 = float((w * t2).sum())
        v1 = float((w * (t1 - m1) ** 2).sum())
        v2 = float((w * (t2 - m2) ** 2).sum())
        c12 = float((w * (t1 - m1) * (t2 - m2)).sum())
        return PosteriorMoments(
            mean=np.array([m1, m2]),
            std=np.sqrt([v1, v2]),
            cor=c12 / np.sqrt(v1 * v2),
        )

    def write_csv(self, path, comments=()) -> None:
        """Grid cells inside the triangle as (theta1, theta2, prob) rows."""
        rows, cols = np.nonzero(np.isfinite(self.log_posterior))
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            w = csv.writer(fh)
            w.writerow(["theta1", "theta2", "prob"])
            for r, c in zip(rows, cols):
                w.writerow([repr(float(self.theta1[c])), repr(float(self.theta2[r])),
                            repr(float(np.exp(self.log_posterior[r, c])))])


def exact_posterior(x, resolution: int = 200) -> Ma2PosteriorGrid:
    if resolution < 50:
        raise ValueError("grid resolution must be at least 50")
    h1, h2 = 4.0 / resolution, 2.0 / resolution
    theta1 = -2.0 + h1 * (np.arange(resolution) + 0.5)
    theta2 = -1.0 + h2 * (np.arange(resolution) + 0.5)
    t1, t2 = np.meshgrid(theta1, theta2)
    pts = np.column_stack([t1.ravel(), t2.ravel()])
    inside = _TRIANGLE.contains(pts)
    logp = np.full(len(pts), -np.inf)
    logp[inside] = loglik_many(x, pts[inside])
    log_norm = float(logsumexp(logp[inside]))
    return Ma2PosteriorGrid(
        resolution=resolution,
        theta1=theta1,
        theta2=theta2,
        log_posterior=(logp - log_norm).reshape(resolution, resolution),
        log_normalization=log_norm,
    )
