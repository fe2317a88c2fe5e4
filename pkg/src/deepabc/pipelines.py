"""End-to-end experiment flows used by the CLI and the reproduction tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn, semiauto
from .core import Dataset, PriorSpec, RngStream
from .evaluation import PosteriorMoments, ReplicateReport, moments, replicate_mse
from .models import ma2
from .rejection import (AbcConfig, AbcResult, SummaryStatistic, dnn_summary, linear_summary,
                        select, simulate_proposals)

DNN_HIDDEN = (100, 100, 100)
FFNN_HIDDEN = (100,)


@dataclass
class FittedSummary:
    label: str
    summary: SummaryStatistic
    train_rmse: np.ndarray
    test_rmse: np.ndarray
    seconds: float
    report: nn.TrainReport | None = None
    model: object = None

    def table_row(self) -> list:
        return [self.label, *self.train_rmse, *self.test_rmse, self.seconds]


def fit_network(ds: Dataset, hidden, cfg: nn.TrainConfig, label: str, init_seed: int = 0,
                log=None) -> FittedSummary:
    sizes = [ds.p, *hidden, ds.q]
    model, report = nn.train(nn.MLP.initialize(sizes, seed=init_seed), ds, cfg, log=log)
    return FittedSummary(label, dnn_summary(model), report.train_rmse, report.test_rmse,
                         report.wall_time_seconds, report, model)


def fit_semiauto(ds: Dataset, basis: semiauto.CandidateBasis, label="Semi-automatic") -> FittedSummary:
    from .evaluation import rmse

    start = time.perf_counter()
    ls = semiauto.fit_linear_summary(ds, basis)
    seconds = time.perf_counter() - start
    tr, te = ds.subset("train"), ds.subset("test")
    return FittedSummary(label, linear_summary(ls), rmse(ls.predict(tr.x), tr.theta),
                         rmse(ls.predict(te.x), te.theta), seconds, model=ls)


def observe(model, theta, seed: int, stream_id: int = 0) -> np.ndarray:
    return model.simulate(theta, RngStream(seed, stream_id))


@dataclass
class Comparison:
    """Exact posterior moments next to ABC posteriors for one observation."""

    x_obs: np.ndarray
    exact: PosteriorMoments
    results: dict[str, AbcResult] = field(default_factory=dict)
    abc: dict[str, PosteriorMoments] = field(default_factory=dict)


def ma2_compare(x_obs, summaries: dict[str, SummaryStatistic], prior: PriorSpec, model,
                abc_cfg: AbcConfig, resolution: int = 200) -> Comparison:
    """ABC under each summary on one shared proposal pool, plus the grid oracle."""
    exact = ma2.exact_posterior(x_obs, resolution).moments()
    theta, stats, _ = simulate_proposals(prior, model, summaries, abc_cfg.n_proposals,
                                         abc_cfg.seed, abc_cfg.threads)
    cmp = Comparison(np.asarray(x_obs), exact)
    for label, s in summaries.items():
        res = select(theta, stats[label], s(np.asarray(x_obs)), abc_cfg)
        res.meta["summary"] = label
        cmp.results[label] = res
        cmp.abc[label] = moments(res.accepted)
    return cmp


def ma2_replicates(summaries: dict[str, SummaryStatistic], prior: PriorSpec, model,
                   abc_cfg: AbcConfig, n_replicates: int, obs_seed: int,
                   resolution: int = 200, log=None) -> tuple[dict[str, ReplicateReport], list]:
    """Repeat :func:`ma2_compare` for observations drawn from prior parameters.

    Replicate ``r`` draws its true theta and x_obs from ``RngStream(obs_seed, r)``
    and its proposals from seed ``abc_cfg.seed + r``.
    """
    comparisons = []
    for r in range(n_replicates):
        gen = RngStream(obs_seed, r).generator()
        theta_true = prior.sample(gen)
        x_obs = model.simulate(theta_true, gen)
        cfg = AbcConfig(abc_cfg.n_proposals, abc_cfg.quantile, abc_cfg.epsilon,
                        abc_cfg.distance, abc_cfg.seed + r, abc_cfg.threads)
        cmp = ma2_compare(x_obs, summaries, prior, model, cfg, resolution)
        comparisons.append((theta_true, cmp))
        if log is not None:
            log(f"replicate {r}: theta={theta_true} exact mean={cmp.exact.mean}")
    reports = {
        label: replicate_mse([(c.exact, c.abc[label]) for _, c in comparisons])
        for label in summaries
    }
    return reports, comparisons
