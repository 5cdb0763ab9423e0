"""Shared data model, seeded randomness, permutation sampling, and order statistics."""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "PermutationPlan",
    "RngStream",
    "all_permutations",
    "order_statistics",
    "read_csv",
    "sample_permutations",
]


class DataError(Exception):
    """Input data could not be parsed or violates basic shape requirements."""


@dataclass(frozen=True)
class Dataset:
    """An n x p numeric design matrix with named columns and a length-n response.

    Immutable after construction: arrays are stored read-only so instances can
    be shared freely across worker processes. Requires n >= 2, p >= 1, finite
    entries, and unique column names.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    response: np.ndarray

    def __post_init__(self) -> None:
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.response, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need at least 2 rows and 1 feature, got {n}x{p}")
        if y.shape != (n,):
            raise ValueError(f"response has shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains non-finite entries")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise ValueError(f"{len(names)} feature names for {p} columns")
        if len(set(names)) != p:
            raise ValueError("feature names must be unique")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def take_rows(self, rows: np.ndarray) -> "Dataset":
        """A new dataset restricted to the given row indices."""
        return Dataset(self.features[rows], self.feature_names, self.response[rows])

    def with_response(self, response: np.ndarray) -> "Dataset":
        """Same design matrix, different response vector."""
        return Dataset(self.features, self.feature_names, response)


def _key_hash(tag: str) -> int:
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass(frozen=True)
class RngStream:
    """Deterministic counter-based random stream with keyed substreams.

    A child stream is a pure function of (seed, derivation path): deriving
    ``child("perm", 3)`` yields the same stream whether or not any sibling was
    derived first, so results never depend on execution schedule.
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def child(self, tag: str, index: int = 0) -> "RngStream":
        if index < 0:
            raise ValueError("child index must be non-negative")
        return RngStream(self.seed, self.path + (_key_hash(tag), int(index)))

    def generator(self) -> np.random.Generator:
        """A fresh generator; repeated calls restart the identical stream."""
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    def draw_seed(self) -> int:
        """A 31-bit integer seed, e.g. for libraries that take one."""
        return int(self.generator().integers(0, 2**31 - 1))


@dataclass(frozen=True)
class PermutationPlan:
    """K feature orderings, each row a permutation of 0..p-1.

    ``seed`` records the stream that sampled the plan (None for plans built
    from explicit orderings).
    """

    perms: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        P = np.array(self.perms, dtype=np.int64, copy=True)
        if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
            raise ValueError("perms must be a non-empty K x p array")
        ref = np.arange(P.shape[1])
        for k, row in enumerate(P):
            if not np.array_equal(np.sort(row), ref):
                raise ValueError(f"row {k} is not a permutation of 0..{P.shape[1] - 1}")
        P.setflags(write=False)
        object.__setattr__(self, "perms", P)

    @property
    def n_perms(self) -> int:
        return self.perms.shape[0]

    @property
    def p(self) -> int:
        return self.perms.shape[1]


def sample_permutations(p: int, n_perms: int, rng: RngStream) -> PermutationPlan:
    """Sample ``n_perms`` orderings of 0..p-1 i.i.d. uniformly, with replacement.

    Duplicates are kept: independent draws are what make the per-ordering
    test statistics independent. Deterministic in the stream's seed, and
    ordering k depends only on the child keyed by k.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if n_perms < 1:
        raise ValueError(f"n_perms must be >= 1, got {n_perms}")
    perms = np.empty((n_perms, p), dtype=np.int64)
    for k in range(n_perms):
        perms[k] = rng.child("perm", k).generator().permutation(p)
    return PermutationPlan(perms, seed=rng.seed)


def all_permutations(p: int) -> PermutationPlan:
    """Every ordering of 0..p-1, in lexicographic order. Only for small p."""
    if not 1 <= p <= 8:
        raise ValueError(f"exhaustive enumeration supported for 1 <= p <= 8, got {p}")
    perms = np.array(list(itertools.permutations(range(p))), dtype=np.int64)
    return PermutationPlan(perms)


def order_statistics(values) -> tuple[np.ndarray, np.ndarray]:
    """Sort ascending and return (sorted values, rank -> original index map).

    The index map lets callers look up quantities paired with each order
    statistic. Ties keep the lower original index first (stable sort).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("values contain non-finite entries")
    order = np.argsort(v, kind="stable")
    return v[order], order


def read_csv(path, response: str) -> Dataset:
    """Load a headered CSV; ``response`` names the y column, all others are floats.

    Comma-separated, UTF-8, '.' decimal point. Parse failures abort with the
    offending row and column named.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if response not in header:
            raise DataError(f"{path}: no column named {response!r} in header {header}")
        y_col = header.index(response)
        names = tuple(h for i, h in enumerate(header) if i != y_col)
        feature_rows: list[list[float]] = []
        ys: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            vals: list[float] = []
            for i, cell in enumerate(row):
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {header[i]!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(x):
                    raise DataError(
                        f"{path}: row {lineno}, column {header[i]!r}: non-finite value {cell!r}"
                    )
                vals.append(x)
            ys.append(vals[y_col])
            feature_rows.append([v for i, v in enumerate(vals) if i != y_col])
    if not feature_rows:
        raise DataError(f"{path}: no data rows")
    try:
        return Dataset(np.asarray(feature_rows), names, np.asarray(ys))
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None
