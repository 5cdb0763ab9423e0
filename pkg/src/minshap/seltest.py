"""Decision layer: minimum-contribution threshold test, per-ordering z-scores
and p-values, the max-p rule, partial-conjunction aggregations with Holm
monotonization, screening of the conjunction level, and the recommended
number of orderings.

All p-values are two-sided, 2 * (1 - Phi(|z|)). A degenerate variance of
(numerically) zero maps to z = 0 and p = 1: a zero-variance cell with zero
contribution is direct evidence of conditional independence, so the test
must not reject there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .dist import chi2_sf, norm_cdf, two_sided_p
from .shapley import ShapleyStats, VIMatrix

__all__ = [
    "FeatureTestRecord",
    "PCHT_METHODS",
    "TEST_NAMES",
    "holm_adjust",
    "max_p",
    "minshap_threshold",
    "pcht_pvalue",
    "perm_pvalues",
    "recommend_k",
    "run_all_tests",
    "screen_u",
]

PCHT_METHODS = ("bonferroni", "stouffer", "fisher")
TEST_NAMES = ("minshap", "maxp", "pcht-bonferroni", "pcht-stouffer", "pcht-fisher")

_VAR_FLOOR = 1e-15


@dataclass(frozen=True)
class FeatureTestRecord:
    """Everything the tests computed for one feature, plus the decisions."""

    feature: int
    shapley_min: float
    var_at_min: float
    threshold: float
    z: np.ndarray
    pvals: np.ndarray
    p_max: float
    adjusted: dict[str, np.ndarray]
    decisions: dict[str, bool]


def minshap_threshold(var_at_min: float, alpha: float) -> float:
    """Rejection threshold sqrt(-2 ln(alpha) * var); reject when the minimum
    contribution is at or above it."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if var_at_min < 0.0:
        raise ValueError(f"variance must be >= 0, got {var_at_min}")
    return math.sqrt(-2.0 * math.log(alpha) * var_at_min)


def perm_pvalues(vi, est_var) -> tuple[np.ndarray, np.ndarray]:
    """z-scores vi / sqrt(var) and two-sided p-values, one per ordering."""
    vi = np.asarray(vi, dtype=np.float64)
    var = np.asarray(est_var, dtype=np.float64)
    if vi.shape != var.shape or vi.ndim != 1:
        raise ValueError("vi and est_var must be 1-d vectors of equal length")
    if np.any(var < 0):
        raise ValueError("variances must be >= 0")
    z = np.zeros_like(vi)
    ok = var >= _VAR_FLOOR
    z[ok] = vi[ok] / np.sqrt(var[ok])
    pvals = np.array([two_sided_p(zz) for zz in z])
    pvals[~ok] = 1.0
    z[~ok] = 0.0
    return z, pvals


def max_p(pvals) -> float:
    """The largest per-ordering p-value; reject when it is below alpha."""
    pvals = np.asarray(pvals, dtype=np.float64)
    if pvals.ndim != 1 or pvals.size == 0:
        raise ValueError("pvals must be a non-empty 1-d vector")
    return float(pvals.max())


def pcht_pvalue(method: str, pvals, absz, u: int) -> float:
    """Partial-conjunction p-value for "at least u of K alternatives hold".

    With m = K - u + 1: Bonferroni takes m times the u-th smallest p-value
    (capped at 1); Stouffer sums the m smallest |z| scaled by sqrt(m);
    Fisher sends minus twice the log of the m largest p-values to a
    chi-square tail with 2m degrees of freedom.
    """
    if method not in PCHT_METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {PCHT_METHODS}")
    pvals = np.asarray(pvals, dtype=np.float64)
    absz = np.asarray(absz, dtype=np.float64)
    K = pvals.size
    if not 1 <= u <= K:
        raise ValueError(f"u must be in [1, {K}], got {u}")
    m = K - u + 1
    if method == "bonferroni":
        p_sorted = np.sort(pvals)
        return min(1.0, m * float(p_sorted[u - 1]))
    if method == "stouffer":
        z_sorted = np.sort(np.abs(absz))
        z_stat = float(z_sorted[:m].sum()) / math.sqrt(m)
        return two_sided_p(z_stat)
    p_sorted = np.sort(pvals)
    tail = p_sorted[u - 1 :]
    if np.any(tail == 0.0):
        return 0.0
    stat = -2.0 * float(np.log(tail).sum())
    return chi2_sf(stat, 2 * m)


def holm_adjust(raw) -> np.ndarray:
    """Running-maximum monotonization over u, capped at 1."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise ValueError("raw must be a non-empty 1-d vector")
    out = np.empty_like(raw)
    out[0] = raw[0]
    for u in range(1, raw.size):
        out[u] = min(1.0, max(out[u - 1], raw[u]))
    return out


def recommend_k(n_significant: int, failure_prob: float) -> int:
    """Smallest number of orderings K with (s/(s+1))^K <= failure_prob.

    With s significant features, each sampled ordering places the target
    after a blocking set with probability at least 1/(s+1), so K draws miss
    every such ordering with probability at most (s/(s+1))^K.
    """
    if not 0.0 < failure_prob < 1.0:
        raise ValueError(f"failure_prob must be in (0, 1), got {failure_prob}")
    if n_significant < 0:
        raise ValueError(f"n_significant must be >= 0, got {n_significant}")
    if n_significant == 0:
        return 1
    q = n_significant / (n_significant + 1.0)
    k = max(1, math.ceil(math.log(failure_prob) / math.log(q)))
    while q**k > failure_prob:
        k += 1
    while k > 1 and q ** (k - 1) <= failure_prob:
        k -= 1
    return k


def _f1_score(selected: set[int], support: set[int]) -> float:
    tp = len(selected & support)
    denom = 2 * tp + len(selected - support) + len(support - selected)
    return 2.0 * tp / denom if denom else 0.0


def screen_u(
    adjusted: np.ndarray,
    u_range: Iterable[int],
    alpha: float,
    *,
    truth: Iterable[int] | None = None,
    evaluator: Callable[[set[int]], float] | None = None,
) -> int:
    """Pick the conjunction level u from a candidate range.

    ``adjusted`` is the p x K matrix of Holm-adjusted p-values for one
    aggregation method; level u selects {j : adjusted[j, u-1] < alpha}.
    With ``truth`` the u maximizing F1 wins; with ``evaluator`` (a selected
    set -> held-out loss callable) the minimizer wins. Ties go to the
    larger, more conservative u.
    """
    adjusted = np.asarray(adjusted, dtype=np.float64)
    candidates = sorted(set(int(u) for u in u_range))
    if not candidates:
        raise ValueError("u_range is empty")
    if candidates[0] < 1 or candidates[-1] > adjusted.shape[1]:
        raise ValueError(f"u_range must lie within [1, {adjusted.shape[1]}]")
    if (truth is None) == (evaluator is None):
        raise ValueError("provide exactly one of truth or evaluator")
    support = set(int(j) for j in truth) if truth is not None else None
    best_u, best_score = None, None
    for u in candidates:
        selected = set(np.flatnonzero(adjusted[:, u - 1] < alpha).tolist())
        if support is not None:
            score = _f1_score(selected, support)
        else:
            score = -evaluator(selected)
        if best_score is None or score >= best_score:
            best_u, best_score = u, score
    return best_u


def run_all_tests(
    stats: ShapleyStats, m: VIMatrix, alpha: float, u: int
) -> list[FeatureTestRecord]:
    """Apply every test to every feature at level alpha and conjunction level u.

    The threshold rule rejects when the minimum contribution reaches the
    feature's threshold; max-p and the partial-conjunction tests reject when
    their p-value is below alpha.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    K = m.n_perms
    if not 1 <= u <= K:
        raise ValueError(f"u must be in [1, {K}], got {u}")
    records = []
    for j in range(m.p):
        z, pvals = perm_pvalues(m.vi[j], m.est_var[j])
        threshold = minshap_threshold(float(stats.var_at_min[j]), alpha)
        pmax = max_p(pvals)
        absz = np.abs(z)
        adjusted = {
            method: holm_adjust(
                [pcht_pvalue(method, pvals, absz, uu) for uu in range(1, K + 1)]
            )
            for method in PCHT_METHODS
        }
        decisions = {
            "minshap": bool(stats.shapley_min[j] >= threshold),
            "maxp": bool(pmax < alpha),
        }
        for method in PCHT_METHODS:
            decisions[f"pcht-{method}"] = bool(adjusted[method][u - 1] < alpha)
        records.append(
            FeatureTestRecord(
                feature=j,
                shapley_min=float(stats.shapley_min[j]),
                var_at_min=float(stats.var_at_min[j]),
                threshold=threshold,
                z=z,
                pvals=pvals,
                p_max=pmax,
                adjusted=adjusted,
                decisions=decisions,
            )
        )
    return records


def selected_features(records: Sequence[FeatureTestRecord], test: str) -> list[int]:
    """Indices of features the named test rejects."""
    if test not in TEST_NAMES:
        raise ValueError(f"unknown test {test!r}, expected one of {TEST_NAMES}")
    return [r.feature for r in records if r.decisions[test]]
