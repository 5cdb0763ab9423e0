"""Learner contract: fit a predictor on a feature subset, score it by MSE.

Two built-in learners. Ridge solves the normal equations in closed form (a
tiny default penalty keeps near-singular designs well conditioned), so its
behaviour is exactly checkable. Gradient-boosted regression trees use
squared-error loss with mean-leaf values; depth, shrinkage, and row
subsampling are the only regularizers.

Evaluation modes: ``refit`` retrains a model per feature subset; ``dropout``
trains the full model once and scores a subset by mean-imputing the excluded
columns before prediction. ``holdout_fraction = 0`` evaluates on the
training rows (plug-in); a positive fraction scores on held-out rows
instead, which avoids the optimism of flexible learners.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from .core import Dataset, RngStream

__all__ = [
    "BOOSTED_DEFAULTS",
    "FittedModel",
    "LearnerError",
    "LearnerSpec",
    "RIDGE_DEFAULTS",
    "dropout_value",
    "fit",
    "split_rows",
    "value",
]

RIDGE_DEFAULTS = {"lam": 1e-8}
BOOSTED_DEFAULTS = {"n_trees": 300, "max_depth": 3, "learning_rate": 0.1, "subsample": 0.8}

KINDS = ("ridge", "boosted-trees")
EVAL_MODES = ("refit", "dropout")


class LearnerError(RuntimeError):
    """A fit or evaluation failed; the message names the offending subset."""


@dataclass(frozen=True)
class LearnerSpec:
    """Configuration of a learner plus how subset values are evaluated."""

    kind: str
    hyperparams: dict = field(default_factory=dict)
    eval_mode: str = "refit"
    holdout_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}, expected one of {KINDS}")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"unknown eval_mode {self.eval_mode!r}, expected one of {EVAL_MODES}")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError(f"holdout_fraction must be in [0, 1), got {self.holdout_fraction}")
        defaults = RIDGE_DEFAULTS if self.kind == "ridge" else BOOSTED_DEFAULTS
        unknown = set(self.hyperparams) - set(defaults)
        if unknown:
            raise ValueError(f"unknown hyperparams for {self.kind}: {sorted(unknown)}")
        hp = {**defaults, **self.hyperparams}
        if self.kind == "ridge" and hp["lam"] < 0:
            raise ValueError("ridge penalty must be >= 0")
        if self.kind == "boosted-trees":
            if hp["n_trees"] < 1 or hp["max_depth"] < 1:
                raise ValueError("n_trees and max_depth must be >= 1")
            if not 0.0 < hp["subsample"] <= 1.0:
                raise ValueError("subsample must be in (0, 1]")
            if hp["learning_rate"] <= 0:
                raise ValueError("learning_rate must be > 0")
        object.__setattr__(self, "hyperparams", hp)

    @classmethod
    def ridge(cls, lam: float = 1e-8, **kwargs) -> "LearnerSpec":
        return cls("ridge", {"lam": lam}, **kwargs)

    @classmethod
    def boosted_trees(
        cls,
        n_trees: int = 300,
        max_depth: int = 3,
        learning_rate: float = 0.1,
        subsample: float = 0.8,
        **kwargs,
    ) -> "LearnerSpec":
        hp = {
            "n_trees": n_trees,
            "max_depth": max_depth,
            "learning_rate": learning_rate,
            "subsample": subsample,
        }
        return cls("boosted-trees", hp, **kwargs)

    def with_eval(self, eval_mode: str | None = None, holdout_fraction: float | None = None):
        changes = {}
        if eval_mode is not None:
            changes["eval_mode"] = eval_mode
        if holdout_fraction is not None:
            changes["holdout_fraction"] = holdout_fraction
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "hyperparams": dict(self.hyperparams),
            "eval_mode": self.eval_mode,
            "holdout_fraction": self.holdout_fraction,
        }

    @classmethod
    def from_json(cls, obj: dict | str) -> "LearnerSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            kind=obj["kind"],
            hyperparams=dict(obj.get("hyperparams", {})),
            eval_mode=obj.get("eval_mode", "refit"),
            holdout_fraction=float(obj.get("holdout_fraction", 0.0)),
        )


class NullPredictor:
    """Constant prediction at the training mean of the response."""

    def __init__(self, mean: float):
        self.mean = float(mean)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.mean)


class RidgePredictor:
    """Linear predictor on a fixed column subset, intercept unpenalized."""

    def __init__(self, columns: tuple[int, ...], coef: np.ndarray, intercept: float):
        self.columns = columns
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.columns] @ self.coef + self.intercept


class BoostedTreesPredictor:
    """Sum of shrunken regression trees on a fixed column subset."""

    def __init__(self, columns: tuple[int, ...], init: float, learning_rate: float, trees: list):
        self.columns = columns
        self.init = float(init)
        self.learning_rate = float(learning_rate)
        self.trees = trees

    def predict(self, X: np.ndarray) -> np.ndarray:
        Xs = np.ascontiguousarray(X[:, self.columns], dtype=np.float32)
        out = np.full(Xs.shape[0], self.init)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(Xs, check_input=False)
        return out


@dataclass(frozen=True)
class FittedModel:
    """An immutable fitted predictor plus everything needed to score it.

    ``predictor.predict`` consumes only the columns in ``subset``; in dropout
    mode ``train_column_means`` (one per dataset column) supports imputing
    excluded columns.
    """

    subset: tuple[int, ...]
    predictor: object
    spec: LearnerSpec
    p_fit: int
    n_fit: int
    train_idx: np.ndarray
    eval_idx: np.ndarray
    train_column_means: np.ndarray | None = None


def split_rows(n: int, holdout_fraction: float, rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Partition row indices into (train, eval); identical when fraction is 0."""
    if holdout_fraction == 0.0:
        rows = np.arange(n)
        return rows, rows
    n_eval = int(round(holdout_fraction * n))
    if n_eval < 2 or n - n_eval < 2:
        raise ValueError(
            f"holdout_fraction {holdout_fraction} leaves too few rows from n={n}"
        )
    perm = rng.generator().permutation(n)
    return np.sort(perm[n_eval:]), np.sort(perm[:n_eval])


def _validate_subset(subset: Iterable[int], p: int) -> tuple[int, ...]:
    cols = tuple(sorted(int(j) for j in subset))
    if len(set(cols)) != len(cols):
        raise ValueError(f"duplicate feature indices in subset {cols}")
    if cols and (cols[0] < 0 or cols[-1] >= p):
        raise ValueError(f"subset {cols} out of range for p={p}")
    return cols


def _fit_ridge(X: np.ndarray, y: np.ndarray, columns: tuple[int, ...], lam: float) -> RidgePredictor:
    Xs = X[:, columns]
    q = Xs.shape[1]
    A = np.column_stack([Xs, np.ones(Xs.shape[0])])
    G = A.T @ A
    penalty = np.zeros(q + 1)
    penalty[:q] = lam
    G[np.diag_indices(q + 1)] += penalty
    beta = np.linalg.solve(G, A.T @ y)
    return RidgePredictor(columns, beta[:q], beta[q])


def _fit_boosted(
    X: np.ndarray, y: np.ndarray, columns: tuple[int, ...], hp: dict, rng: RngStream
) -> BoostedTreesPredictor:
    Xs = np.ascontiguousarray(X[:, columns], dtype=np.float32)
    n = Xs.shape[0]
    init = float(y.mean())
    pred = np.full(n, init)
    gen = rng.child("boost").generator()
    lr = hp["learning_rate"]
    n_sub = max(1, int(round(hp["subsample"] * n)))
    trees = []
    for _ in range(hp["n_trees"]):
        resid = y - pred
        if n_sub < n:
            rows = gen.permutation(n)[:n_sub]
            X_fit, r_fit = Xs[rows], resid[rows]
        else:
            X_fit, r_fit = Xs, resid
        tree = DecisionTreeRegressor(
            criterion="squared_error",
            max_depth=hp["max_depth"],
            random_state=int(gen.integers(0, 2**31 - 1)),
        )
        tree.fit(X_fit, r_fit, check_input=False)
        pred += lr * tree.predict(Xs, check_input=False)
        trees.append(tree)
    return BoostedTreesPredictor(columns, init, lr, trees)


def fit(
    spec: LearnerSpec,
    data: Dataset,
    subset: Iterable[int],
    rng: RngStream,
    *,
    split: tuple[np.ndarray, np.ndarray] | None = None,
) -> FittedModel:
    """Fit ``spec``'s learner on the given feature subset.

    The empty subset yields the null model predicting the training mean of
    the response (defined even for a zero-variance response). ``split``
    overrides the holdout split so several fits can share evaluation rows;
    by default it is drawn from ``rng``.
    """
    cols = _validate_subset(subset, data.p)
    if split is None:
        split = split_rows(data.n, spec.holdout_fraction, rng.child("split"))
    train_idx, eval_idx = split
    X_tr = data.features[train_idx]
    y_tr = data.response[train_idx]
    means = X_tr.mean(axis=0) if spec.eval_mode == "dropout" else None
    try:
        if not cols:
            predictor: object = NullPredictor(y_tr.mean())
        elif spec.kind == "ridge":
            predictor = _fit_ridge(X_tr, y_tr, cols, spec.hyperparams["lam"])
        else:
            predictor = _fit_boosted(X_tr, y_tr, cols, spec.hyperparams, rng)
    except LearnerError:
        raise
    except Exception as e:
        raise LearnerError(f"{spec.kind} fit failed on subset {cols}: {e}") from e
    return FittedModel(
        subset=cols,
        predictor=predictor,
        spec=spec,
        p_fit=data.p,
        n_fit=data.n,
        train_idx=train_idx,
        eval_idx=eval_idx,
        train_column_means=means,
    )


def _eval_rows(model: FittedModel, data: Dataset) -> np.ndarray:
    # The stored split refers to the fitted dataset; a dataset of another
    # length is external, so score every row.
    if data.n == model.n_fit:
        return model.eval_idx
    return np.arange(data.n)


def value(model: FittedModel, data: Dataset) -> tuple[float, np.ndarray]:
    """Mean squared error on the evaluation rows, plus the squared residuals."""
    if data.p != model.p_fit:
        raise ValueError(f"dataset has {data.p} columns, model was fitted with {model.p_fit}")
    rows = _eval_rows(model, data)
    pred = model.predictor.predict(data.features[rows])
    sq = (data.response[rows] - pred) ** 2
    return float(sq.mean()), sq


def dropout_value(
    full_model: FittedModel, data: Dataset, subset: Iterable[int]
) -> tuple[float, np.ndarray]:
    """Score a subset by mean-imputing every excluded column of the full model.

    Columns outside ``subset`` are replaced by their training means before
    prediction with the pre-trained full model; the return contract matches
    :func:`value`.
    """
    if full_model.train_column_means is None:
        raise LearnerError(
            "dropout evaluation needs stored column means; fit with eval_mode='dropout'"
        )
    if data.p != full_model.p_fit:
        raise ValueError(f"dataset has {data.p} columns, model was fitted with {full_model.p_fit}")
    if len(full_model.subset) != full_model.p_fit:
        raise LearnerError("dropout evaluation requires a model fitted on all features")
    cols = _validate_subset(subset, data.p)
    rows = _eval_rows(full_model, data)
    X = np.array(data.features[rows], copy=True)
    keep = np.zeros(data.p, dtype=bool)
    keep[list(cols)] = True
    X[:, ~keep] = full_model.train_column_means[~keep]
    pred = full_model.predictor.predict(X)
    sq = (data.response[rows] - pred) ** 2
    return float(sq.mean()), sq
