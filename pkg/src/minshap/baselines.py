"""Comparison selectors: leave-one-covariate-out, the residual-covariance
test, lasso with a cross-validated penalty path, and a subsample-and-vote
stability wrapper usable around any selector."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np

from .core import Dataset, RngStream
from .dist import norm_sf, two_sided_p
from .learners import LearnerSpec, fit

__all__ = [
    "BaselineResult",
    "gcm",
    "lasso_select",
    "loco",
    "stability_select",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineResult:
    method: str
    selected: tuple[int, ...]
    diagnostics: dict
    runtime: float


def _refit_spec(spec: LearnerSpec) -> LearnerSpec:
    # Baselines manage their own splits; models are always plain refits.
    return replace(spec, eval_mode="refit", holdout_fraction=0.0)


def loco(data: Dataset, spec: LearnerSpec, alpha: float, rng: RngStream) -> BaselineResult:
    """Leave-one-covariate-out with a paired one-sided error-increase test.

    The data are split 50/50; the full model and each drop-one model are fit
    on the training half, and the per-row increase in squared test error
    d = e2_without - e2_full is tested for positive mean via
    z = sqrt(m) * mean(d) / sd(d).
    """
    if data.n < 20:
        raise ValueError(f"loco needs n >= 20, got {data.n}")
    started = time.perf_counter()
    spec = _refit_spec(spec)
    perm = rng.child("split").generator().permutation(data.n)
    half = data.n // 2
    train = data.take_rows(np.sort(perm[:half]))
    test_rows = np.sort(perm[half:])
    X_test = data.features[test_rows]
    y_test = data.response[test_rows]
    m = len(test_rows)

    full = fit(spec, train, range(data.p), rng.child("full"))
    e2_full = (y_test - full.predictor.predict(X_test)) ** 2
    pvalues = np.empty(data.p)
    for j in range(data.p):
        rest = [i for i in range(data.p) if i != j]
        reduced = fit(spec, train, rest, rng.child("drop", j))
        e2_red = (y_test - reduced.predictor.predict(X_test)) ** 2
        d = e2_red - e2_full
        sd = d.std(ddof=1)
        if sd == 0.0:
            pvalues[j] = 0.0 if d.mean() > 0 else 1.0
        else:
            pvalues[j] = norm_sf(math.sqrt(m) * d.mean() / sd)
    selected = tuple(int(j) for j in np.flatnonzero(pvalues < alpha))
    return BaselineResult(
        "loco", selected, {"pvalues": pvalues.tolist()}, time.perf_counter() - started
    )


def gcm(data: Dataset, spec: LearnerSpec, alpha: float, rng: RngStream) -> BaselineResult:
    """Residual-covariance conditional independence test, one per feature.

    Regress the response and the candidate feature on the remaining
    covariates, then test whether the product of the two residual series has
    zero mean: T = sqrt(n) mean(R) / sqrt(mean(R^2) - mean(R)^2).
    """
    if data.n < 20:
        raise ValueError(f"gcm needs n >= 20, got {data.n}")
    started = time.perf_counter()
    spec = _refit_spec(spec)
    X = data.features
    y = data.response
    n = data.n
    pvalues = np.empty(data.p)
    for j in range(data.p):
        rest = [i for i in range(data.p) if i != j]
        f_y = fit(spec, data, rest, rng.child("resp", j))
        f_x = fit(spec, data.with_response(X[:, j]), rest, rng.child("feat", j))
        eps = y - f_y.predictor.predict(X)
        xi = X[:, j] - f_x.predictor.predict(X)
        R = eps * xi
        denom_sq = float((R**2).mean() - R.mean() ** 2)
        if denom_sq <= 0.0:
            pvalues[j] = 1.0
        else:
            T = math.sqrt(n) * R.mean() / math.sqrt(denom_sq)
            pvalues[j] = two_sided_p(T)
    selected = tuple(int(j) for j in np.flatnonzero(pvalues < alpha))
    return BaselineResult(
        "gcm", selected, {"pvalues": pvalues.tolist()}, time.perf_counter() - started
    )


def _soft_threshold(rho: float, lam: float) -> float:
    return math.copysign(max(abs(rho) - lam, 0.0), rho)


def _cd_solve(
    G: np.ndarray, c: np.ndarray, lam: float, beta: np.ndarray, tol: float = 1e-10,
    max_sweeps: int = 1000,
) -> np.ndarray:
    """Coordinate descent for (1/2n)||y - Xb||^2 + lam ||b||_1 on the Gram
    form: G = X'X/n, c = X'y/n. ``beta`` is the warm start (updated in place)."""
    p = len(c)
    diag = np.diag(G)
    for _ in range(max_sweeps):
        max_step = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                continue
            rho = c[j] - G[j] @ beta + diag[j] * beta[j]
            new = _soft_threshold(rho, lam) / diag[j]
            step = abs(new - beta[j])
            if step > max_step:
                max_step = step
            beta[j] = new
        if max_step < tol:
            break
    return beta


def lasso_select(data: Dataset, folds: int, rng: RngStream) -> BaselineResult:
    """Lasso over a 100-point log-spaced penalty path, penalty chosen by
    k-fold cross-validated validation MSE; selects the nonzero coefficients.

    Features are standardized to zero mean and unit variance internally;
    constant columns are forced to zero."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    started = time.perf_counter()
    X = data.features
    y = data.response
    n, p = X.shape
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    keep = sd > 0
    scale = np.where(keep, sd, 1.0)
    Xs = (X - mu) / scale
    Xs[:, ~keep] = 0.0
    yc = y - y.mean()

    lam_max = float(np.abs(Xs.T @ yc).max() / n)
    if lam_max == 0.0:
        return BaselineResult(
            "lasso",
            (),
            {"coefficients": [0.0] * p, "lambda": 0.0},
            time.perf_counter() - started,
        )
    path = np.geomspace(lam_max, lam_max * 1e-3, 100)

    assignment = rng.child("cv").generator().permutation(n)
    fold_rows = np.array_split(assignment, folds)
    cv_mse = np.zeros(len(path))
    for rows in fold_rows:
        mask = np.ones(n, dtype=bool)
        mask[rows] = False
        X_tr, y_tr = Xs[mask], yc[mask]
        X_va, y_va = Xs[rows], yc[rows]
        n_tr = X_tr.shape[0]
        G = X_tr.T @ X_tr / n_tr
        c = X_tr.T @ y_tr / n_tr
        beta = np.zeros(p)
        for i, lam in enumerate(path):
            _cd_solve(G, c, lam, beta)
            resid = y_va - X_va @ beta
            cv_mse[i] += float((resid**2).mean())
    cv_mse /= folds
    best = int(np.argmin(cv_mse))
    lam_star = float(path[best])

    G = Xs.T @ Xs / n
    c = Xs.T @ yc / n
    beta = np.zeros(p)
    for lam in path[: best + 1]:
        _cd_solve(G, c, lam, beta)
    selected = tuple(int(j) for j in np.flatnonzero(beta != 0.0))
    return BaselineResult(
        "lasso",
        selected,
        {"coefficients": beta.tolist(), "lambda": lam_star},
        time.perf_counter() - started,
    )


def stability_select(
    base: Callable[[Dataset, RngStream], Iterable[int]],
    data: Dataset,
    n_subsamples: int,
    rate: float,
    threshold: float,
    rng: RngStream,
    method: str = "stability",
) -> BaselineResult:
    """Run ``base`` on random row subsamples and keep features selected in at
    least ``threshold`` of them. A failed subsample counts as selecting
    nothing (logged), never as an aborted run."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if n_subsamples < 1:
        raise ValueError(f"n_subsamples must be >= 1, got {n_subsamples}")
    started = time.perf_counter()
    n_rows = int(math.floor(rate * data.n))
    counts = np.zeros(data.p)
    failures = 0
    for b in range(n_subsamples):
        rows = np.sort(rng.child("rows", b).generator().permutation(data.n)[:n_rows])
        sub = data.take_rows(rows)
        try:
            picked = list(base(sub, rng.child("base", b)))
        except Exception:
            log.warning("stability subsample %d failed; counted as empty", b, exc_info=True)
            failures += 1
            picked = []
        if picked:
            counts[picked] += 1
    freq = counts / n_subsamples
    selected = tuple(int(j) for j in np.flatnonzero(counts >= threshold * n_subsamples - 1e-9))
    return BaselineResult(
        method,
        selected,
        {"frequencies": freq.tolist(), "failures": failures},
        time.perf_counter() - started,
    )
