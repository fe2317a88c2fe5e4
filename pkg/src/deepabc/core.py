"""Priors, random streams and on-disk datasets shared by the other modules.

Parameter points and data instances are plain 1-D float arrays (batches are
2-D, one row per instance). Everything random is drawn from an
``RngStream``: a (seed, stream_id) pair mapped onto a counter-based Philox
generator, so instance ``i`` of a simulation batch is reproducible no matter
how the batch is chunked or parallelised.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

SPLITS = ("train", "validation", "test")
DEFAULT_SPLIT_RATIO = (10, 1, 1)

# critical coupling of the infinite square-lattice Ising model; the Ising
# experiments use an exponential prior with this mean
ISING_CRITICAL_POINT = 0.4406
ISING_PRIOR_RATE = 1.0 / ISING_CRITICAL_POINT

# vertices of the MA(2) identifiability triangle
MA2_TRIANGLE = np.array([[-2.0, 1.0], [2.0, 1.0], [0.0, -1.0]])

_MASK64 = (1 << 64) - 1


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


# --------------------------------------------------------------------------
# random streams


@dataclass(frozen=True)
class RngStream:
    """Identifies one independent random stream.

    Two streams with equal ``(seed, stream_id)`` produce identical draws.
    Each call to :meth:`generator` returns a fresh generator positioned at
    the start of the stream.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & _MASK64) | ((int(self.stream_id) & _MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def generators(seed: int, stream_ids) -> list[np.random.Generator]:
    return [RngStream(seed, int(s)).generator() for s in stream_ids]


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


# --------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class ExponentialPrior:
    """Exponential prior on a scalar parameter with the given rate."""

    rate: float = ISING_PRIOR_RATE
    dim = 1
    kind = "exponential"

    def __post_init__(self):
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ValueError(f"rate must be positive, got {self.rate}")

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        return np.array([gen.exponential(1.0 / self.rate)])

    def mean(self) -> np.ndarray:
        return np.array([1.0 / self.rate])

    def logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.where(theta >= 0, np.log(self.rate) - self.rate * theta, -np.inf)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class TrianglePrior:
    """Uniform prior on the MA(2) triangle.

    Support: theta1 in [-2, 2], theta2 in [-1, 1], theta2 + theta1 >= -1 and
    theta2 - theta1 >= -1.
    """

    dim = 2
    kind = "ma2-triangle"

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        u, v = gen.random(2)
        # fold the unit square onto the unit simplex
        if u + v > 1.0:
            u, v = 1.0 - u, 1.0 - v
        a, b, c = MA2_TRIANGLE
        return a + u * (b - a) + v * (c - a)

    def mean(self) -> np.ndarray:
        return MA2_TRIANGLE.mean(axis=0)

    def contains(self, theta, atol: float = 0.0):
        theta = np.asarray(theta, dtype=float)
        t1, t2 = theta[..., 0], theta[..., 1]
        return (
            (np.abs(t1) <= 2 + atol)
            & (np.abs(t2) <= 1 + atol)
            & (t2 + t1 >= -1 - atol)
            & (t2 - t1 >= -1 - atol)
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind}


PriorSpec = Union[ExponentialPrior, TrianglePrior]


def prior_from_dict(d: dict) -> PriorSpec:
    kind = d.get("kind")
    if kind == "exponential":
        if "rate" in d and "mean" in d:
            raise ValueError("give either rate or mean for an exponential prior, not both")
        if "mean" in d:
            mean = float(d["mean"])
            if not mean > 0:
                raise ValueError(f"mean must be positive, got {mean}")
            return ExponentialPrior(1.0 / mean)
        return ExponentialPrior(float(d.get("rate", ISING_PRIOR_RATE)))
    if kind in ("ma2-triangle", "triangle"):
        return TrianglePrior()
    raise ValueError(f"unknown prior kind {kind!r}")


def draw_prior(prior: PriorSpec, rng) -> np.ndarray:
    """Draw one parameter vector from ``prior``.

    ``rng`` is an :class:`RngStream` (drawn from the start of the stream) or
    an already-positioned numpy ``Generator``.
    """
    return prior.sample(as_generator(rng))


# --------------------------------------------------------------------------
# datasets


@dataclass(eq=False)
class Dataset:
    """Aligned (theta, x) pairs with per-pair split labels.

    ``split`` holds indices into :data:`SPLITS`.
    """

    theta: np.ndarray
    x: np.ndarray
    split: np.ndarray
    seed: int
    model_tag: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim == 1:
            self.theta = self.theta[:, None]
        self.x = np.asarray(self.x)
        if self.x.dtype not in (np.int8, np.float64):
            self.x = self.x.astype(np.float64)
        self.split = np.asarray(self.split, dtype=np.uint8)
        n = len(self.theta)
        if n == 0:
            raise ValueError("dataset must contain at least one pair")
        if self.x.ndim != 2 or len(self.x) != n or self.split.shape != (n,):
            raise ValueError("theta, x and split must be aligned")
        if self.split.max() >= len(SPLITS):
            raise ValueError("split labels must index SPLITS")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite entries")

    def __len__(self) -> int:
        return len(self.theta)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.model_tag == other.model_tag
            and self.x.dtype == other.x.dtype
            and np.array_equal(self.theta, other.theta)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.split, other.split)
        )

    @property
    def q(self) -> int:
        return self.theta.shape[1]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, name: str) -> "Dataset":
        mask = self.split == SPLITS.index(name)
        if not mask.any():
            raise ValueError(f"dataset has no {name!r} pairs")
        return Dataset(self.theta[mask], self.x[mask], self.split[mask],
                       self.seed, self.model_tag, dict(self.meta))

    def has_split(self, name: str) -> bool:
        return bool(np.any(self.split == SPLITS.index(name)))

    def inputs(self) -> np.ndarray:
        return self.x.astype(np.float64, copy=False)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.theta, self.x, self.split):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def concat_datasets(parts: list[Dataset]) -> Dataset:
    first = parts[0]
    return Dataset(
        np.concatenate([d.theta for d in parts]),
        np.concatenate([d.x for d in parts]),
        np.concatenate([d.split for d in parts]),
        first.seed,
        first.model_tag,
        dict(first.meta),
    )


def split_sizes(n_total: int, ratio=DEFAULT_SPLIT_RATIO) -> tuple[int, int, int]:
    total = sum(ratio)
    n_val = n_total * ratio[1] // total
    n_test = n_total * ratio[2] // total
    return n_total - n_val - n_test, n_val, n_test


DATASET_FORMAT = "deepabc-dataset"
DATASET_SCHEMA_VERSION = 1
_X_DTYPES = {"<f8": np.dtype("<f8"), "|i1": np.dtype("i1")}


def _record_dtype(q: int, p: int, x_dtype: np.dtype) -> np.dtype:
    return np.dtype([
        ("split", "u1"),
        ("theta", "<f8", (q,)),
        ("x", x_dtype, (p,)),
        ("crc", "<u4"),
    ])


def save_dataset(ds: Dataset, path) -> None:
    """Write ``ds`` as a JSON header line followed by fixed-size binary records.

    Each record is ``split (u1) | theta (q x f8) | x (p x f8 or i1) | crc32``,
    the checksum covering the preceding bytes of the record.
    """
    x_dtype = np.dtype("i1") if ds.x.dtype == np.int8 else np.dtype("<f8")
    rec_dtype = _record_dtype(ds.q, ds.p, x_dtype)
    recs = np.zeros(len(ds), dtype=rec_dtype)
    recs["split"] = ds.split
    recs["theta"] = ds.theta
    recs["x"] = ds.x
    raw = recs.view(np.uint8).reshape(len(ds), rec_dtype.itemsize)
    body = rec_dtype.itemsize - 4
    recs["crc"] = [zlib.crc32(row[:body].tobytes()) for row in raw]
    header = {
        "format": DATASET_FORMAT,
        "schema_version": DATASET_SCHEMA_VERSION,
        "q": ds.q,
        "p": ds.p,
        "n": len(ds),
        "model_tag": ds.model_tag,
        "seed": int(ds.seed),
        "x_dtype": x_dtype.str,
        "record_size": rec_dtype.itemsize,
        "meta": ds.meta,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(recs.tobytes())


def load_dataset(path) -> Dataset:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise DatasetFormatError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:nl])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: header is not valid JSON ({exc})") from None
    if header.get("format") != DATASET_FORMAT:
        raise DatasetFormatError(f"{path}: not a dataset file")
    if header.get("schema_version") != DATASET_SCHEMA_VERSION:
        raise DatasetFormatError(
            f"{path}: schema version {header.get('schema_version')} "
            f"is not supported (expected {DATASET_SCHEMA_VERSION})"
        )
    try:
        q, p, n = int(header["q"]), int(header["p"]), int(header["n"])
        x_dtype = _X_DTYPES[header["x_dtype"]]
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: bad header field {exc}") from None
    rec_dtype = _record_dtype(q, p, x_dtype)
    if header.get("record_size") != rec_dtype.itemsize:
        raise DatasetFormatError(f"{path}: record size does not match q={q}, p={p}")
    body = memoryview(blob)[nl + 1:]
    size = rec_dtype.itemsize
    complete = len(body) // size
    if complete < n:
        raise DatasetFormatError(
            f"{path}: record {complete} is truncated "
            f"(file holds {complete} of {n} records)"
        )
    if len(body) > n * size:
        raise DatasetFormatError(f"{path}: trailing bytes after record {n - 1}")
    recs = np.frombuffer(body, dtype=rec_dtype, count=n)
    raw = np.frombuffer(body, dtype=np.uint8).reshape(n, size)
    for i in range(n):
        if zlib.crc32(raw[i, :size - 4].tobytes()) != recs["crc"][i]:
            raise DatasetFormatError(f"{path}: record {i} is corrupt (checksum mismatch)")
    split = recs["split"].copy()
    bad = np.flatnonzero(split >= len(SPLITS))
    if bad.size:
        raise DatasetFormatError(f"{path}: record {bad[0]} has invalid split label")
    theta = recs["theta"].reshape(n, q).astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(theta), axis=1))
    if bad.size:
        raise DatasetFormatError(f"{path}: record {bad[0]} has non-finite theta")
    x = recs["x"].reshape(n, p)
    x = x.astype(np.int8) if x_dtype == np.int8 else x.astype(np.float64)
    return Dataset(theta, x, split, int(header["seed"]), header["model_tag"],
                   header.get("meta", {}))
