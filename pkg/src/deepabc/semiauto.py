"""Linear-regression summary statistics (the semi-automatic baseline)."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import Dataset
from .nn import CheckpointError, read_container, write_container

log = logging.getLogger(__name__)

_CHUNK = 8192


@dataclass(frozen=True)
class CandidateBasis:
    """Candidate statistics: the raw components, or their powers 1..max_degree."""

    kind: str = "raw"
    max_degree: int = 1

    def __post_init__(self):
        if self.kind not in ("raw", "poly"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "CandidateBasis":
        if text == "raw":
            return cls("raw")
        if text.startswith("poly"):
            return cls("poly", int(text[4:] or 1))
        raise ValueError(f"cannot parse basis {text!r}")

    def __str__(self) -> str:
        return "raw" if self.kind == "raw" else f"poly{self.max_degree}"

    def size(self, p: int) -> int:
        return p if self.kind == "raw" else p * self.max_degree


def expand_basis(x, basis: CandidateBasis) -> np.ndarray:
    """(x, x**2, ..., x**d) concatenated along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if basis.kind == "raw":
        return x
    return np.concatenate([x ** k for k in range(1, basis.max_degree + 1)], axis=-1)


@dataclass(frozen=True)
class LinearSummary:
    intercept: np.ndarray       # (q,)
    coefficients: np.ndarray    # (q, K)
    basis: CandidateBasis

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 1:
            return expand_basis(x, self.basis) @ self.coefficients.T + self.intercept
        if len(x) == 0:
            return np.empty((0, len(self.intercept)))
        return np.concatenate([
            expand_basis(x[i:i + _CHUNK], self.basis) @ self.coefficients.T + self.intercept
            for i in range(0, len(x), _CHUNK)
        ])

    __call__ = predict


def fit_linear_summary(data, basis: CandidateBasis, theta=None) -> LinearSummary:
    """Least-squares regression of theta on the expanded candidate statistics.

    ``data`` is a :class:`Dataset` (its train split is used) or an input
    matrix, in which case ``theta`` must be given. Features are standardised
    and the normal equations solved by Cholesky; a rank-deficient Gram
    matrix falls back to a ridge of ``1e-8 * trace``.
    """
    if isinstance(data, Dataset):
        tr = data.subset("train") if data.has_split("train") else data
        x, theta = tr.inputs(), tr.theta
    else:
        x = np.asarray(data, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64).reshape(len(x), -1)
    n = len(x)
    k = basis.size(x.shape[1])
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")

    # pass 1: feature means and scales
    s1 = np.zeros(k)
    s2 = np.zeros(k)
    for i in range(0, n, _CHUNK):
        f = expand_basis(x[i:i + _CHUNK], basis)
        s1 += f.sum(axis=0)
        s2 += (f * f).sum(axis=0)
    mu = s1 / n
    sd = np.sqrt(np.maximum(s2 / n - mu * mu, 0.0))
    sd[sd == 0] = 1.0
    theta_mu = theta.mean(axis=0)

    # pass 2: Gram matrix and cross products of the standardised features
    gram = np.zeros((k, k))
    cross = np.zeros((k, theta.shape[1]))
    for i in range(0, n, _CHUNK):
        f = (expand_basis(x[i:i + _CHUNK], basis) - mu) / sd
        gram += f.T @ f
        cross += f.T @ (theta[i:i + _CHUNK] - theta_mu)

    try:
        if n <= k:
            raise linalg.LinAlgError("fewer samples than candidate statistics")
        factor = linalg.cho_factor(gram, check_finite=True)
        if np.linalg.cond(gram) > 1e12:
            raise linalg.LinAlgError("ill-conditioned Gram matrix")
        beta = linalg.cho_solve(factor, cross)
    except linalg.LinAlgError as exc:
        ridge = 1e-8 * np.trace(gram)
        msg = f"rank-deficient regression ({exc}); using ridge {ridge:.3g}"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        beta = linalg.solve(gram + ridge * np.eye(k), cross, assume_a="pos")

    coef = (beta / sd[:, None]).T
    intercept = theta_mu - coef @ mu
    return LinearSummary(intercept=intercept, coefficients=coef, basis=basis)


def save_linear_summary(summary: LinearSummary, path, **meta) -> None:
    header = {
        "model_tag": "linear-summary",
        "basis": str(summary.basis),
        "q": int(summary.coefficients.shape[0]),
        "k": int(summary.coefficients.shape[1]),
        **meta,
    }
    write_container(path, header, {"intercept": summary.intercept,
                                   "coefficients": summary.coefficients})


def load_linear_summary(path) -> LinearSummary:
    header, arrays = read_container(path)
    if header.get("model_tag") != "linear-summary":
        raise CheckpointError(f"{path}: model tag {header.get('model_tag')!r} is not a linear summary")
    coef, icpt = arrays.get("coefficients"), arrays.get("intercept")
    if coef is None or icpt is None or coef.shape != (header["q"], header["k"]) or icpt.shape != (header["q"],):
        raise CheckpointError(f"{path}: arrays disagree with header shape")
    return LinearSummary(icpt, coef, CandidateBasis.parse(header["basis"]))
