"""Metrics and table exports for comparing summaries and posteriors."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .models import ising

# column names of the published tables
TABLE1_COLUMNS = ["Method", "Training RMSE", "Testing RMSE", "Time (s)"]
TABLE2_COLUMNS = [
    "Method",
    "Training RMSE theta1", "Training RMSE theta2",
    "Testing RMSE theta1", "Testing RMSE theta2",
    "Time (s)",
]
MOMENT_COLUMNS = ["mean(theta1)", "mean(theta2)", "std(theta1)", "std(theta2)", "cor(theta1,theta2)"]
TABLE3_COLUMNS = ["Posterior"] + MOMENT_COLUMNS
TABLE4_COLUMNS = ["Posterior"] + [f"MSE {c}" for c in MOMENT_COLUMNS]

UNDEFINED = "undefined"


def rmse(predictions, targets) -> np.ndarray:
    """Per-component root-mean-square error."""
    pred = np.asarray(predictions, dtype=np.float64)
    targ = np.asarray(targets, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if targ.ndim == 1:
        targ = targ[:, None]
    if pred.shape != targ.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {targ.shape}")
    if len(pred) == 0:
        raise ValueError("rmse of an empty set")
    return np.sqrt(np.mean((pred - targ) ** 2, axis=0))


@dataclass(frozen=True)
class PosteriorMoments:
    """Mean, standard deviation and (for two parameters) the correlation.

    ``cor`` is None when undefined (a component has zero variance, or q != 2).
    """

    mean: np.ndarray
    std: np.ndarray
    cor: float | None = None

    def row(self) -> list:
        vals = list(self.mean) + list(self.std)
        return vals + [self.cor if self.cor is not None else UNDEFINED]

    def as_vector(self) -> np.ndarray:
        """(mean..., std..., cor) with NaN standing in for an undefined correlation."""
        cor = np.nan if self.cor is None else self.cor
        return np.concatenate([self.mean, self.std, [cor]])


def moments(draws) -> PosteriorMoments:
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    if len(draws) < 2:
        raise ValueError("need at least two draws")
    mean = draws.mean(axis=0)
    std = draws.std(axis=0, ddof=1)
    cor = None
    if draws.shape[1] == 2 and np.all(std > 0):
        c = np.corrcoef(draws.T)[0, 1]
        cor = float(np.clip(c, -1.0, 1.0))
    return PosteriorMoments(mean, std, cor)


def spearman(a, b) -> float:
    return float(stats.spearmanr(a, b).statistic)


@dataclass
class MonotonicityResult:
    rho: float
    n_used: int
    table: list[tuple[float, float, int]]   # (S*, binned S, count)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["S_star", "S", "count"])
            for row in self.table:
                w.writerow([repr(float(row[0])), repr(float(row[1])), int(row[2])])


def monotonicity_diagnostic(summary_values, x=None, *, s_star=None, m: int | None = None,
                            exclude_saturated: bool = True, bins: int = 50) -> MonotonicityResult:
    """Spearman correlation between a learned summary and the Ising statistic S*.

    Pass either the Ising states ``x`` or precomputed ``s_star``. With
    ``exclude_saturated``, instances with S* in {2m^2 - 8, 2m^2} are dropped.
    The returned table is a heatmap of counts over (S*, binned summary).
    """
    s = np.asarray(summary_values, dtype=np.float64).reshape(-1)
    if s_star is None:
        x = np.asarray(x)
        s_star = ising.sufficient_stat(x)
        m = int(round(np.sqrt(x.shape[-1])))
    s_star = np.asarray(s_star, dtype=np.float64).reshape(-1)
    if len(s) != len(s_star):
        raise ValueError("summary values and states are not aligned")
    keep = np.ones(len(s), dtype=bool)
    if exclude_saturated:
        if m is None:
            raise ValueError("m is needed to exclude saturated states")
        keep &= ~np.isin(s_star, ising.saturated_values(m))
    s, s_star = s[keep], s_star[keep]
    rho = spearman(s, s_star) if len(s) > 1 else float("nan")
    table = []
    if len(s):
        edges = np.linspace(s.min(), s.max(), bins + 1) if s.max() > s.min() else \
            np.array([s.min() - 0.5, s.min() + 0.5])
        centres = 0.5 * (edges[:-1] + edges[1:])
        which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(centres) - 1)
        for v in np.unique(s_star):
            counts = np.bincount(which[s_star == v], minlength=len(centres))
            table.extend((v, centres[j], int(c)) for j, c in enumerate(counts) if c)
    return MonotonicityResult(rho, int(keep.sum()), table)


@dataclass
class ReplicateReport:
    n_replicates: int
    exact: list[PosteriorMoments]
    abc: list[PosteriorMoments]
    mse: np.ndarray     # same layout as PosteriorMoments.as_vector

    def mse_row(self, label: str) -> list:
        return [label] + [float(v) for v in self.mse]


def replicate_mse(replicates) -> ReplicateReport:
    """Mean squared difference of each moment between exact and ABC posteriors.

    Replicates where a correlation is undefined are skipped for that column.
    """
    replicates = list(replicates)
    if len(replicates) < 2:
        raise ValueError("need at least two replicates")
    ex = np.array([e.as_vector() for e, _ in replicates])
    ab = np.array([a.as_vector() for _, a in replicates])
    sq = (ex - ab) ** 2
    with np.errstate(invalid="ignore"):
        mse = np.array([np.nanmean(col) if np.any(np.isfinite(col)) else np.nan for col in sq.T])
    return ReplicateReport(len(replicates), [e for e, _ in replicates],
                           [a for _, a in replicates], mse)


def write_table(path, columns, rows, comments=()) -> None:
    """CSV with a header row; ``comments`` become leading ``# key=value`` lines."""
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_table(path) -> tuple[dict, list[str], list[list[str]]]:
    comments, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                comments[k] = v
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: empty table")
    return comments, rows[0], rows[1:]
