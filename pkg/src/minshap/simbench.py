"""Synthetic benchmark generators, selection metrics, and the experiment runner.

Generators cover a correlated linear model, a non-additive nonlinear model, a
conditional interaction model, a noisy-sigmoid model, the three-variable
chain used as an analytic sanity case, and high-dimensional variants of the
first two. Signal patterns can repeat across contiguous feature blocks to
densify the support.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from joblib import Parallel, delayed

from .baselines import gcm, lasso_select, loco, stability_select
from .core import Dataset, RngStream, sample_permutations
from .learners import LearnerSpec
from .seltest import screen_u, selected_features, run_all_tests
from .shapley import build_vi_matrix, reduce_stats

__all__ = [
    "ALL_METHODS",
    "BenchResult",
    "GroundTruth",
    "Metrics",
    "MethodSummary",
    "SHAPLEY_METHODS",
    "SimConfig",
    "confusion_metrics",
    "generate",
    "jaccard_stability",
    "response_surface",
    "run_experiment",
    "support_set",
]

MODELS = ("a", "b", "c", "d", "chain", "highdim-linear", "highdim-nonlinear")

SHAPLEY_METHODS = ("minshap", "maxp", "pcht-bonferroni", "pcht-stouffer", "pcht-fisher")
BASELINE_METHODS = ("loco", "gcm", "lasso")
STABILITY_METHODS = ("stability-loco", "stability-gcm", "stability-lasso")
ALL_METHODS = SHAPLEY_METHODS + BASELINE_METHODS + STABILITY_METHODS

METRIC_NAMES = ("accuracy", "f1", "type1", "type2", "fdr")

# (base model, block width, default p, noise sd)
_MODEL_INFO = {
    "a": ("a", 8, 20, 1.0),
    "b": ("b", 8, 20, 1.0),
    "c": ("c", 10, 20, 1.0),
    "d": ("d", 8, 20, 0.1),
    "chain": ("chain", 1, 3, 1.0),
    "highdim-linear": ("a", 8, 200, 1.0),
    "highdim-nonlinear": ("b", 8, 200, 1.0),
}


@dataclass(frozen=True)
class SimConfig:
    """One benchmark scenario: which model, at what size, with which seed."""

    model: str
    n: int
    p: int = 0
    repeat_factor: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.repeat_factor < 1:
            raise ValueError(f"repeat_factor must be >= 1, got {self.repeat_factor}")
        base, width, default_p, _ = _MODEL_INFO[self.model]
        p = self.p if self.p else default_p
        repeat = 2 if self.model.startswith("highdim") else self.repeat_factor
        if base == "chain":
            if p != 3 or repeat != 1:
                raise ValueError("the chain model is fixed at p=3, repeat_factor=1")
        elif p < width * repeat:
            raise ValueError(
                f"p={p} is too small for {repeat} repeats of a width-{width} pattern"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "repeat_factor", repeat)

    @property
    def base_model(self) -> str:
        return _MODEL_INFO[self.model][0]


@dataclass(frozen=True)
class GroundTruth:
    """The true support: features the response actually depends on."""

    support: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", frozenset(int(j) for j in self.support))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1: float
    type1: float
    type2: float
    fdr: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def support_set(model: str, p: int, repeat_factor: int = 1) -> frozenset[int]:
    """0-based indices of the features entering the response formula."""
    base, width, _, _ = _MODEL_INFO[model]
    if base == "chain":
        return frozenset({2})
    per_block = 10 if base == "c" else 8
    out: set[int] = set()
    for r in range(repeat_factor):
        out.update(range(r * width, r * width + per_block))
    if max(out) >= p:
        raise ValueError(f"support exceeds p={p}")
    return frozenset(out)


def _block_signal(base: str, X: np.ndarray, start: int) -> np.ndarray:
    c = [X[:, start + i] for i in range(10 if base == "c" else 8)]
    if base == "a":
        return 4 * c[0] + 4 * c[1] + 3 * c[2] * c[3] + 3 * c[4] + 2 * c[5] + 2 * c[4] * c[5] + c[6] + c[7]
    if base == "b":
        return (
            2 * np.sin(c[0])
            + 2 * np.log(np.abs(c[1]) + 1)
            + c[0] * c[1]
            + 3 * np.cos(c[2] + c[3])
            + np.maximum(0.0, c[4])
            + c[5] * c[6] * c[7]
        )
    if base == "c":
        return (
            1.5 * c[0] * c[1] * (c[2] > 0)
            + c[3] * c[4] * (c[2] < 0)
            + 3 * c[5] * c[6] * (c[7] > 0)
            + c[8] * c[9] * (c[7] < 0)
        )
    if base == "d":
        lin = 2.5 * c[0] + 2.5 * c[1] + 2 * c[2] * c[3] + 1.5 * c[4] + 1.5 * c[5] + c[6] ** 2 + c[7] ** 3
        return 1.0 / (1.0 + np.exp(-lin))
    raise ValueError(f"no formula for model {base!r}")


def response_surface(model: str, X: np.ndarray, repeat_factor: int = 1) -> np.ndarray:
    """The noiseless response for a design matrix, pattern repeated as asked."""
    base, width, _, _ = _MODEL_INFO[model]
    if base == "chain":
        return np.asarray(X)[:, 2].copy()
    X = np.asarray(X)
    out = np.zeros(X.shape[0])
    for r in range(repeat_factor):
        out += _block_signal(base, X, r * width)
    return out


def _covariance(model: str, p: int, repeat_factor: int) -> np.ndarray:
    base, width, _, _ = _MODEL_INFO[model]
    sigma = np.eye(p)

    def put(i: int, j: int, rho: float) -> None:
        if i < p and j < p:
            sigma[i, j] = sigma[j, i] = rho

    if base == "a":
        for r in range(repeat_factor):
            put(r * width + 2, r * width + 3, 0.5)
    elif base == "b":
        # Contiguous blocks of 5 with within-block correlations cycling
        # through (0, 0.2, 0.5, 0.8) across the whole feature range.
        rhos = (0.0, 0.2, 0.5, 0.8)
        for b in range(math.ceil(p / 5)):
            rho = rhos[b % 4]
            lo, hi = 5 * b, min(5 * (b + 1), p)
            for i in range(lo, hi):
                for j in range(i + 1, hi):
                    put(i, j, rho)
    elif base == "c":
        for r in range(repeat_factor):
            put(r * width + 0, r * width + 1, 0.9)
            put(r * width + 5, r * width + 6, 0.9)
            put(r * width + 3, r * width + 4, 0.5)
            put(r * width + 8, r * width + 9, 0.5)
    elif base == "d":
        for r in range(repeat_factor):
            put(r * width + 0, r * width + 1, 0.5)
    return sigma


def generate(config: SimConfig, rng: RngStream) -> tuple[Dataset, GroundTruth]:
    """Draw one dataset from the configured model.

    Correlated designs are sampled as N(0, Sigma) through the lower-triangular
    Cholesky factor of Sigma; the chain model follows its structural
    equations directly.
    """
    gen = rng.child("gen").generator()
    n, p = config.n, config.p
    names = tuple(f"X{j + 1}" for j in range(p))
    if config.base_model == "chain":
        x1 = gen.standard_normal(n)
        x2 = x1 + gen.standard_normal(n)
        x3 = x2 + gen.standard_normal(n)
        y = x3 + gen.standard_normal(n)
        data = Dataset(np.column_stack([x1, x2, x3]), names, y)
        return data, GroundTruth(frozenset({2}))
    sigma = _covariance(config.model, p, config.repeat_factor)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"covariance for {config.model!r} is not positive definite") from e
    X = gen.standard_normal((n, p)) @ L.T
    noise_sd = _MODEL_INFO[config.model][3]
    y = response_surface(config.model, X, config.repeat_factor) + noise_sd * gen.standard_normal(n)
    truth = GroundTruth(support_set(config.model, p, config.repeat_factor))
    return Dataset(X, names, y), truth


def confusion_metrics(selected: Iterable[int], truth: GroundTruth, p: int) -> Metrics:
    """Set-comparison metrics against the true support."""
    sel = set(int(j) for j in selected)
    if sel and (min(sel) < 0 or max(sel) >= p):
        raise ValueError(f"selected features out of range for p={p}")
    sup = set(truth.support)
    tp = len(sel & sup)
    fp = len(sel - sup)
    fn = len(sup - sel)
    tn = p - tp - fp - fn
    n_null = p - len(sup)
    f1_den = 2 * tp + fp + fn
    return Metrics(
        accuracy=(tp + tn) / p,
        f1=2 * tp / f1_den if f1_den else 0.0,
        type1=fp / n_null if n_null else 0.0,
        type2=fn / len(sup) if sup else 0.0,
        fdr=fp / max(1, len(sel)),
    )


def jaccard_stability(selections: Sequence[Iterable[int]]) -> float:
    """Mean pairwise intersection-over-union of the selected sets.

    Two empty sets count as perfectly similar (J = 1)."""
    sets = [frozenset(int(j) for j in s) for s in selections]
    if len(sets) < 2:
        raise ValueError(f"need at least 2 selections, got {len(sets)}")
    total = 0.0
    pairs = 0
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            union = sets[i] | sets[j]
            total += len(sets[i] & sets[j]) / len(union) if union else 1.0
            pairs += 1
    return total / pairs


@dataclass(frozen=True)
class MethodSummary:
    method: str
    metric_mean: dict[str, float]
    metric_sd: dict[str, float]
    jaccard: float
    runtime_mean: float
    failures: int
    selections: tuple[tuple[int, ...], ...]
    runtimes: tuple[float, ...]


@dataclass(frozen=True)
class BenchResult:
    config: SimConfig
    alpha: float
    n_perms: int
    reps: int
    summaries: dict[str, MethodSummary] = field(default_factory=dict)

    def to_csv(self, path) -> None:
        cols = ["method"]
        for name in METRIC_NAMES:
            cols += [f"{name}_mean", f"{name}_sd"]
        cols += ["jaccard", "runtime_mean", "failures"]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for method, s in self.summaries.items():
                cells = [method]
                for name in METRIC_NAMES:
                    cells.append(repr(s.metric_mean[name]))
                    cells.append(repr(s.metric_sd[name]))
                cells += [repr(s.jaccard), repr(s.runtime_mean), str(s.failures)]
                fh.write(",".join(cells) + "\n")

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "model": self.config.model,
                "n": self.config.n,
                "p": self.config.p,
                "repeat_factor": self.config.repeat_factor,
                "seed": self.config.seed,
            },
            "alpha": self.alpha,
            "K": self.n_perms,
            "reps": self.reps,
            "methods": {
                method: {
                    "metric_mean": s.metric_mean,
                    "metric_sd": s.metric_sd,
                    "jaccard": s.jaccard,
                    "runtime_mean": s.runtime_mean,
                    "failures": s.failures,
                    "selections": [list(sel) for sel in s.selections],
                    "runtimes": list(s.runtimes),
                }
                for method, s in self.summaries.items()
            },
        }


def _run_rep(config, methods, alpha, n_perms, u_range, learner, lasso_folds, stability, rep_rng):
    data, truth = generate(config, rep_rng.child("data"))
    results: dict[str, object] = {}

    shap = [m for m in methods if m in SHAPLEY_METHODS]
    if shap:
        try:
            t0 = time.perf_counter()
            plan = sample_permutations(data.p, n_perms, rep_rng.child("plan"))
            matrix = build_vi_matrix(data, learner, plan, rep_rng.child("engine"))
            stats = reduce_stats(matrix)
            records = run_all_tests(stats, matrix, alpha, u=n_perms)
            engine_time = time.perf_counter() - t0
        except Exception as e:  # recorded, not raised: other methods still run
            for meth in shap:
                results[meth] = e
        else:
            for meth in shap:
                t1 = time.perf_counter()
                if meth in ("minshap", "maxp"):
                    sel = tuple(selected_features(records, meth))
                else:
                    agg = meth.split("-", 1)[1]
                    adj = np.vstack([r.adjusted[agg] for r in records])
                    u_best = screen_u(adj, u_range, alpha, truth=truth.support)
                    sel = tuple(int(j) for j in np.flatnonzero(adj[:, u_best - 1] < alpha))
                results[meth] = (sel, engine_time + time.perf_counter() - t1)

    n_sub, rate, thr = stability
    for meth in methods:
        if meth in SHAPLEY_METHODS:
            continue
        try:
            if meth == "loco":
                r = loco(data, learner, alpha, rep_rng.child("loco"))
            elif meth == "gcm":
                r = gcm(data, learner, alpha, rep_rng.child("gcm"))
            elif meth == "lasso":
                r = lasso_select(data, lasso_folds, rep_rng.child("lasso"))
            elif meth == "stability-lasso":
                r = stability_select(
                    lambda sub, s: lasso_select(sub, lasso_folds, s).selected,
                    data, n_sub, rate, thr, rep_rng.child(meth), method=meth,
                )
            elif meth == "stability-loco":
                r = stability_select(
                    lambda sub, s: loco(sub, learner, alpha, s).selected,
                    data, n_sub, rate, thr, rep_rng.child(meth), method=meth,
                )
            elif meth == "stability-gcm":
                r = stability_select(
                    lambda sub, s: gcm(sub, learner, alpha, s).selected,
                    data, n_sub, rate, thr, rep_rng.child(meth), method=meth,
                )
            else:  # pre-validated in run_experiment
                raise ValueError(f"unknown method {meth!r}")
            results[meth] = (r.selected, r.runtime)
        except Exception as e:
            results[meth] = e
    return truth, results


def run_experiment(
    config: SimConfig,
    methods: Sequence[str],
    reps: int,
    alpha: float,
    n_perms: int,
    rng: RngStream,
    *,
    learner: LearnerSpec | None = None,
    u_range: Iterable[int] | None = None,
    lasso_folds: int = 5,
    stability: tuple[int, float, float] = (50, 0.5, 0.8),
    workers: int = 1,
) -> BenchResult:
    """Run every method over ``reps`` independent datasets and aggregate.

    Each replication uses its own keyed substream, so results do not depend
    on worker count or scheduling. The shapley-based methods share one
    contribution matrix per replication; partial-conjunction methods pick
    their level from ``u_range`` (default: 0.7K..K) by F1 against the truth.
    Replication failures are counted per method and excluded from the
    aggregates, never silently dropped.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}, expected from {ALL_METHODS}")
    if learner is None:
        learner = LearnerSpec.boosted_trees(eval_mode="dropout", holdout_fraction=0.25)
    if u_range is None:
        u_range = range(max(1, math.ceil(0.7 * n_perms)), n_perms + 1)
    u_range = list(u_range)

    args = [
        (config, list(methods), alpha, n_perms, u_range, learner, lasso_folds,
         stability, rng.child("rep", i))
        for i in range(reps)
    ]
    if workers > 1:
        rep_results = Parallel(n_jobs=workers)(delayed(_run_rep)(*a) for a in args)
    else:
        rep_results = [_run_rep(*a) for a in args]

    summaries = {}
    p = config.p
    for meth in methods:
        metrics: list[dict[str, float]] = []
        selections: list[tuple[int, ...]] = []
        runtimes: list[float] = []
        failures = 0
        for truth, res in rep_results:
            r = res[meth]
            if isinstance(r, Exception):
                failures += 1
                continue
            sel, rt = r
            metrics.append(confusion_metrics(sel, truth, p).as_dict())
            selections.append(tuple(sel))
            runtimes.append(rt)
        mean = {name: float(np.mean([m[name] for m in metrics])) if metrics else float("nan")
                for name in METRIC_NAMES}
        if len(metrics) > 1:
            sd = {name: float(np.std([m[name] for m in metrics], ddof=1)) for name in METRIC_NAMES}
        else:
            sd = {name: 0.0 for name in METRIC_NAMES}
        summaries[meth] = MethodSummary(
            method=meth,
            metric_mean=mean,
            metric_sd=sd,
            jaccard=jaccard_stability(selections) if len(selections) > 1 else float("nan"),
            runtime_mean=float(np.mean(runtimes)) if runtimes else float("nan"),
            failures=failures,
            selections=tuple(selections),
            runtimes=tuple(runtimes),
        )
    return BenchResult(config, alpha, n_perms, reps, summaries)
