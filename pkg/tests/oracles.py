"""Independent oracles the tests check the package against.

Everything here is deliberately written from first principles (series,
closed forms, brute-force set arithmetic, covariance algebra) and never
calls into the code paths under test.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

_SQRT_PI = math.sqrt(math.pi)


def erf_series(x: float, terms: int = 200) -> float:
    """Taylor series erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)).

    Converges quickly for |x| <= ~6, which covers every z-score the tests
    exercise against it.
    """
    total = 0.0
    term = x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
        if abs(term) < 1e-18:
            break
    return 2.0 / _SQRT_PI * total


def norm_cdf_series(x: float) -> float:
    return 0.5 * (1.0 + erf_series(x / math.sqrt(2.0)))


def two_sided_p_series(z: float) -> float:
    return 2.0 * (1.0 - norm_cdf_series(abs(z)))


def chi2_sf_even_closed(x: float, dof: int) -> float:
    """Closed-form upper tail for even dof: e^(-x/2) * sum_{i<m} (x/2)^i / i!."""
    if dof % 2 != 0:
        raise ValueError("closed form needs even dof")
    m = dof // 2
    half = x / 2.0
    term = 1.0
    total = 1.0
    for i in range(1, m):
        term *= half / i
        total += term
    return math.exp(-half) * total


def gaussian_conditional_variance(sample: np.ndarray, y: np.ndarray, subset) -> float:
    """Var(Y | X_S) for jointly Gaussian data, from the empirical covariance.

    Sigma_yy - Sigma_yS Sigma_SS^{-1} Sigma_Sy, i.e. the best achievable MSE
    of any predictor using exactly the columns in ``subset``.
    """
    cols = list(subset)
    stacked = np.column_stack([y, sample[:, cols]])
    cov = np.cov(stacked, rowvar=False, ddof=1)
    if not cols:
        return float(np.atleast_2d(cov)[0, 0])
    s_yy = cov[0, 0]
    s_ys = cov[0, 1:]
    s_ss = cov[1:, 1:]
    return float(s_yy - s_ys @ np.linalg.solve(s_ss, s_ys))


def confusion_counts(selected, support, p: int) -> dict[str, int]:
    """Brute-force confusion table by iterating every feature index."""
    sel = set(selected)
    sup = set(support)
    out = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for j in range(p):
        if j in sel and j in sup:
            out["tp"] += 1
        elif j in sel:
            out["fp"] += 1
        elif j in sup:
            out["fn"] += 1
        else:
            out["tn"] += 1
    return out


def confusion_metrics_bruteforce(selected, support, p: int) -> dict[str, float]:
    c = confusion_counts(selected, support, p)
    n_null = p - len(set(support))
    f1_den = 2 * c["tp"] + c["fp"] + c["fn"]
    return {
        "accuracy": (c["tp"] + c["tn"]) / p,
        "f1": 2 * c["tp"] / f1_den if f1_den else 0.0,
        "type1": c["fp"] / n_null if n_null else 0.0,
        "type2": c["fn"] / len(set(support)) if support else 0.0,
        "fdr": c["fp"] / max(1, len(set(selected))),
    }


def jaccard_bruteforce(selections) -> Fraction:
    """Exact mean pairwise intersection-over-union as a rational number."""
    sets = [set(s) for s in selections]
    total = Fraction(0)
    pairs = 0
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            union = sets[i] | sets[j]
            total += Fraction(len(sets[i] & sets[j]), len(union)) if union else Fraction(1)
            pairs += 1
    return total / pairs


def soft_threshold_closed(rho: float, lam: float) -> float:
    """S(rho, lam) = sign(rho) * max(|rho| - lam, 0)."""
    if rho > lam:
        return rho - lam
    if rho < -lam:
        return rho + lam
    return 0.0


def smallest_k_bruteforce(s: int, eps: float, k_max: int = 100000) -> int:
    """Linear scan for the smallest K with (s/(s+1))^K <= eps."""
    if s == 0:
        return 1
    q = s / (s + 1)
    k = 1
    while q**k > eps:
        k += 1
        if k > k_max:
            raise RuntimeError("no K found")
    return k
