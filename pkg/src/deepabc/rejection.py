"""ABC rejection samplers.

Proposal ``i`` of a run is simulated from ``RngStream(seed, i)``, so the
proposal pool, and therefore the accepted set, does not depend on batching
or thread count.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import PriorSpec
from .models import ising, ma2, simulate_pairs

CHUNK = 16384


class AbcBudgetExceeded(RuntimeError):
    """Exact-match rejection would need more proposals than allowed."""


# --------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryStatistic:
    """Deterministic map from data rows (n, p) to summaries (n, dim)."""

    fn: Callable[[np.ndarray], np.ndarray]
    dim: int
    source: str

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 1:
            return self(x[None, :])[0]
        out = np.asarray(self.fn(x), dtype=np.float64).reshape(len(x), -1)
        if out.shape[1] != self.dim:
            raise ValueError(f"summary {self.source} returned {out.shape[1]} values, expected {self.dim}")
        return out


def dnn_summary(model) -> SummaryStatistic:
    return SummaryStatistic(model.predict, model.layer_sizes[-1], "dnn")


def linear_summary(summary) -> SummaryStatistic:
    return SummaryStatistic(summary.predict, summary.coefficients.shape[0], "linear")


def ising_sufficient_summary() -> SummaryStatistic:
    return SummaryStatistic(lambda x: ising.sufficient_stat(x)[:, None], 1, "ising-sufficient")


def ma2_autocov_summary() -> SummaryStatistic:
    return SummaryStatistic(ma2.autocovariance, 2, "ma2-autocov")


def identity_summary(p: int) -> SummaryStatistic:
    return SummaryStatistic(lambda x: x.astype(np.float64), p, "identity")


def ising_posterior_mean_summary(m: int, prior: PriorSpec, theta_grid=None) -> SummaryStatistic:
    """Exact E[theta | x] via enumeration; only for m <= 4."""
    table = ising.posterior_mean_by_stat(m, prior, theta_grid)
    values = np.array(sorted(table))
    means = np.array([table[v] for v in values])

    def fn(x):
        idx = np.searchsorted(values, ising.sufficient_stat(x).astype(np.int64))
        return means[idx][:, None]

    return SummaryStatistic(fn, 1, "exact-posterior-mean")


# --------------------------------------------------------------------------
# distances


def distance(a, b, mode: str = "euclidean", scale=None) -> np.ndarray | float:
    """Euclidean norm of ``a - b``, optionally dividing each component by ``scale``.

    ``a`` may be a batch of summaries (one per row).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"summary length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    diff = a - b
    if mode == "standardized":
        if scale is None:
            raise ValueError("standardized distance needs a scale")
        scale = np.asarray(scale, dtype=np.float64)
        if scale.shape[-1] != a.shape[-1] or np.any(scale <= 0):
            raise ValueError("scale must be positive with one entry per component")
        diff = diff / scale
    elif mode != "euclidean":
        raise ValueError(f"unknown distance mode {mode!r}")
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def pool_scale(summaries) -> np.ndarray:
    sd = np.std(summaries, axis=0, ddof=1) if len(summaries) > 1 else np.ones(summaries.shape[1])
    return np.where(sd > 0, sd, 1.0)


# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class AbcConfig:
    """Rejection settings.

    With ``epsilon`` set, proposals closer than ``epsilon`` are accepted
    (fixed tolerance); ``epsilon=0`` accepts exact summary matches. Otherwise the closest ``ceil(quantile * n_proposals)``
    proposals are accepted. ``distance=None`` picks euclidean for scalar
    summaries and standardized otherwise.
    """

    n_proposals: int = 100_000
    quantile: float = 0.001
    epsilon: float | None = None
    distance: str | None = None
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.n_proposals < 1:
            raise ValueError("n_proposals must be >= 1")
        if self.epsilon is None and not 0 < self.quantile <= 1:
            raise ValueError("quantile must lie in (0, 1]")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.distance not in (None, "euclidean", "standardized"):
            raise ValueError(f"unknown distance mode {self.distance!r}")

    @property
    def mode(self) -> str:
        return "fixed-epsilon" if self.epsilon is not None else "quantile"

    def distance_for(self, dim: int) -> str:
        if self.distance is not None:
            return self.distance
        return "euclidean" if dim == 1 else "standardized"


@dataclass
class AbcResult:
    accepted: np.ndarray        # (n_accepted, q)
    indices: np.ndarray         # proposal index of each accepted draw
    distances: np.ndarray
    realized_epsilon: float
    n_proposed: int
    distance_mode: str
    seed: int
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def n_accepted(self) -> int:
        return len(self.accepted)

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0

    def write_csv(self, path, comments=()) -> None:
        q = self.accepted.shape[1] if self.accepted.ndim == 2 else 1
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            w = csv.writer(fh)
            w.writerow(["proposal"] + [f"theta{j + 1}" for j in range(q)] + ["distance"])
            for i, th, d in zip(self.indices, self.accepted, self.distances):
                w.writerow([int(i)] + [repr(float(v)) for v in th] + [repr(float(d))])

    def sidecar(self) -> dict:
        return {
            "status": self.status,
            "realized_epsilon": _json_float(self.realized_epsilon),
            "n_proposed": int(self.n_proposed),
            "n_accepted": int(self.n_accepted),
            "acceptance_rate": self.acceptance_rate,
            "distance": self.distance_mode,
            "seed": int(self.seed),
            **self.meta,
        }

    def write_sidecar(self, path, **extra) -> None:
        with open(path, "w") as fh:
            json.dump({**self.sidecar(), **extra}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _json_float(v: float):
    return v if math.isfinite(v) else str(v)


def _empty_result(q: int, cfg_seed: int, mode: str, eps: float, n_proposed: int, status: str):
    return AbcResult(np.empty((0, q)), np.empty(0, dtype=np.int64), np.empty(0),
                     eps, n_proposed, mode, cfg_seed, status)


# --------------------------------------------------------------------------
# samplers


def abc_reject_exact(prior: PriorSpec, model, x_obs, n: int, seed: int = 0,
                     budget: int = 10_000_000, batch: int = 4096, threads=None) -> AbcResult:
    """Exact-match rejection for discrete models: accept theta when X' == x_obs.

    The first ``n`` matching proposals (by proposal index) are returned.
    Raises :class:`AbcBudgetExceeded` once the projected number of proposals
    needed exceeds ``budget``.
    """
    if not getattr(model, "discrete", False):
        raise ValueError("exact-match rejection needs a discrete model; "
                         "continuous data match with probability zero")
    x_obs = np.asarray(x_obs)
    if n == 0:
        return _empty_result(prior.dim, seed, "exact", 0.0, 0, "ok")
    thetas, idx = [], []
    proposed = 0
    while sum(len(t) for t in thetas) < n:
        ids = np.arange(proposed, proposed + batch)
        theta, x = simulate_pairs(model, prior, seed, ids, threads)
        hit = np.all(x == x_obs, axis=1)
        thetas.append(theta[hit])
        idx.append(ids[hit])
        proposed += batch
        got = sum(len(t) for t in thetas)
        projected = proposed * n / got if got else math.inf
        if proposed >= budget or (got and projected > budget):
            raise AbcBudgetExceeded(
                f"{got} matches in {proposed} proposals; reaching {n} would need "
                f"~{projected:.3g} proposals, over the budget of {budget}"
            )
    accepted = np.concatenate(thetas)[:n]
    return AbcResult(accepted, np.concatenate(idx)[:n], np.zeros(n), 0.0,
                     int(np.concatenate(idx)[n - 1]) + 1, "exact", seed)


@dataclass
class ProposalPool:
    theta: np.ndarray
    summaries: np.ndarray
    x: np.ndarray | None = None


def simulate_proposals(prior: PriorSpec, model, summaries: dict[str, SummaryStatistic],
                       n: int, seed: int, threads=None, keep_data: bool = False):
    """Simulate ``n`` proposals and evaluate several summaries on them.

    Returns ``theta`` and a dict of summary arrays (plus the raw data when
    ``keep_data``), computed chunk by chunk to bound memory.
    """
    thetas, xs = [], []
    out = {k: [] for k in summaries}
    for start in range(0, n, CHUNK):
        ids = np.arange(start, min(n, start + CHUNK))
        theta, x = simulate_pairs(model, prior, seed, ids, threads)
        thetas.append(theta)
        for k, s in summaries.items():
            out[k].append(s(x))
        if keep_data:
            xs.append(x)
    theta = np.concatenate(thetas)
    stats = {k: np.concatenate(v) for k, v in out.items()}
    return theta, stats, (np.concatenate(xs) if keep_data else None)


def select(theta, summaries, s_obs, cfg: AbcConfig) -> AbcResult:
    """Acceptance step on an already simulated proposal pool."""
    summaries = np.asarray(summaries, dtype=np.float64)
    s_obs = np.atleast_1d(np.asarray(s_obs, dtype=np.float64))
    if summaries.ndim != 2 or summaries.shape[1] != s_obs.shape[0]:
        raise ValueError("observed summary dimension does not match the proposals")
    n = len(theta)
    mode = cfg.distance_for(s_obs.shape[0])
    scale = pool_scale(summaries) if mode == "standardized" else None
    d = distance(summaries, s_obs, mode, scale)
    if cfg.epsilon is not None:
        hit = np.flatnonzero(d < cfg.epsilon if cfg.epsilon > 0 else d == 0)
        if hit.size == 0:
            return _empty_result(theta.shape[1], cfg.seed, mode, cfg.epsilon, n, "empty")
        res = AbcResult(theta[hit], hit, d[hit], cfg.epsilon, n, mode, cfg.seed)
    else:
        k = min(n, math.ceil(round(cfg.quantile * n, 9)))
        # stable sort: ties at the threshold go to the lower proposal index
        order = np.argsort(d, kind="stable")[:k]
        eps = float(np.nextafter(d[order[-1]], np.inf))
        res = AbcResult(theta[order], order, d[order], eps, n, mode, cfg.seed)
    if scale is not None:
        res.meta["scale"] = [float(s) for s in scale]
    res.meta["mode"] = cfg.mode
    return res


def abc_reject_summary(prior: PriorSpec, model, summary: SummaryStatistic, x_obs,
                       cfg: AbcConfig) -> AbcResult:
    """Rejection ABC on ``||S(X') - S(x_obs)||`` with fixed or quantile tolerance."""
    s_obs = summary(np.asarray(x_obs))
    theta, stats, _ = simulate_proposals(prior, model, {"s": summary}, cfg.n_proposals,
                                         cfg.seed, cfg.threads)
    res = select(theta, stats["s"], s_obs, cfg)
    res.meta["summary"] = summary.source
    return res
