"""Permutation-walk engine for per-(feature, ordering) marginal contributions.

For one ordering, the predecessor set grows one feature at a time; each
step's contribution is the drop in MSE when that feature joins, and its
variance estimate is the sample variance of the per-row squared-residual
differences divided by the number of evaluation rows. Because consecutive
values share the intermediate model, the contributions within one ordering
telescope exactly from the null-model MSE down to the full-model MSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .core import Dataset, PermutationPlan, RngStream
from .learners import FittedModel, LearnerError, LearnerSpec, dropout_value, fit, split_rows, value

__all__ = [
    "EvalContext",
    "ShapleyStats",
    "VIMatrix",
    "build_vi_matrix",
    "evaluate_permutation",
    "prepare_context",
    "read_vi_csv",
    "reduce_stats",
    "write_vi_csv",
]


@dataclass(frozen=True)
class VIMatrix:
    """p x K grid of marginal contributions and their variance estimates."""

    vi: np.ndarray
    est_var: np.ndarray
    plan: PermutationPlan
    n_eval: int

    def __post_init__(self) -> None:
        vi = np.asarray(self.vi, dtype=np.float64)
        var = np.asarray(self.est_var, dtype=np.float64)
        if vi.shape != (self.plan.p, self.plan.n_perms) or var.shape != vi.shape:
            raise ValueError("vi and est_var must both be p x K matching the plan")
        if np.any(var < 0):
            raise ValueError("variance estimates must be non-negative")
        object.__setattr__(self, "vi", vi)
        object.__setattr__(self, "est_var", var)

    @property
    def p(self) -> int:
        return self.vi.shape[0]

    @property
    def n_perms(self) -> int:
        return self.vi.shape[1]


@dataclass(frozen=True)
class ShapleyStats:
    """Mean and minimum contribution per feature, with the variance paired
    to the minimizing ordering (ties resolved to the lowest ordering index)."""

    shapley_mean: np.ndarray
    shapley_min: np.ndarray
    var_at_min: np.ndarray
    argmin_perm: np.ndarray


@dataclass(frozen=True)
class EvalContext:
    """Per-run shared state: the row split, the base (empty-set) value, and
    the fitted full model when dropout evaluation is active."""

    split: tuple[np.ndarray, np.ndarray]
    base_value: float
    base_sq: np.ndarray
    full_model: FittedModel | None


def prepare_context(data: Dataset, spec: LearnerSpec, rng: RngStream) -> EvalContext:
    """Fit the run-level models every ordering shares.

    In refit mode that is the null model; in dropout mode the full model is
    fitted once here and every subsequent value is an imputed prediction.
    """
    split = split_rows(data.n, spec.holdout_fraction, rng.child("split"))
    if spec.eval_mode == "dropout":
        full = fit(spec, data, range(data.p), rng.child("full-fit"), split=split)
        base_value, base_sq = dropout_value(full, data, ())
        return EvalContext(split, base_value, base_sq, full)
    null = fit(spec, data, (), rng.child("null-fit"), split=split)
    base_value, base_sq = value(null, data)
    return EvalContext(split, base_value, base_sq, None)


def _dropout_chain(
    full_model: FittedModel, data: Dataset, perm: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Values and squared residuals for every prefix of one ordering.

    Builds the (p+1) imputed copies of the evaluation rows in one stacked
    matrix so the predictor runs once per ordering instead of once per step.
    """
    rows = full_model.eval_idx
    X = data.features[rows]
    y = data.response[rows]
    m, p = X.shape
    means = full_model.train_column_means
    stacked = np.broadcast_to(means, (p + 1, m, p)).copy()
    for s in range(1, p + 1):
        cols = perm[:s]
        stacked[s][:, cols] = X[:, cols]
    preds = full_model.predictor.predict(stacked.reshape((p + 1) * m, p))
    sq = (y[np.newaxis, :] - preds.reshape(p + 1, m)) ** 2
    return sq.mean(axis=1), sq


def evaluate_permutation(
    data: Dataset,
    spec: LearnerSpec,
    perm: np.ndarray,
    rng: RngStream,
    ctx: EvalContext | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Walk one ordering and return (vi, est_var), each of length p.

    ``vi[j]`` is the value drop at the step introducing feature j;
    ``est_var[j]`` is Var(e2_before - e2_after) / n over the evaluation rows
    (unbiased sample variance). Pass ``ctx`` to share the split and base
    models across orderings; otherwise one is prepared from ``rng``.
    """
    perm = np.asarray(perm, dtype=np.int64)
    if not np.array_equal(np.sort(perm), np.arange(data.p)):
        raise ValueError(f"perm must be a permutation of 0..{data.p - 1}")
    if ctx is None:
        ctx = prepare_context(data, spec, rng.child("setup"))
    p = data.p
    vi = np.empty(p)
    est_var = np.empty(p)
    n_eval = len(ctx.base_sq)

    if spec.eval_mode == "dropout":
        values, sq = _dropout_chain(ctx.full_model, data, perm)
        # Step 0 of the chain is the all-imputed model: identical to the
        # context's base by construction.
        for s, j in enumerate(perm):
            vi[j] = values[s] - values[s + 1]
            diff = sq[s] - sq[s + 1]
            est_var[j] = diff.var(ddof=1) / n_eval
        return vi, est_var

    v_cur = ctx.base_value
    sq_cur = ctx.base_sq
    prefix: list[int] = []
    for step, j in enumerate(perm):
        prefix.append(int(j))
        try:
            model = fit(spec, data, prefix, rng.child("fit", step), split=ctx.split)
            v_new, sq_new = value(model, data)
        except LearnerError:
            raise
        except Exception as e:
            raise LearnerError(f"evaluation failed at prefix {prefix}: {e}") from e
        vi[j] = v_cur - v_new
        diff = sq_cur - sq_new
        est_var[j] = diff.var(ddof=1) / n_eval
        v_cur, sq_cur = v_new, sq_new
    return vi, est_var


def _column(data, spec, perm, rng, ctx, k):
    try:
        return evaluate_permutation(data, spec, perm, rng, ctx)
    except LearnerError as e:
        raise LearnerError(f"ordering {k}: {e}") from e


def build_vi_matrix(
    data: Dataset,
    spec: LearnerSpec,
    plan: PermutationPlan,
    rng: RngStream,
    workers: int = 1,
) -> VIMatrix:
    """Evaluate every ordering in the plan; column k comes from the child
    stream keyed by k, so results are identical for any worker count."""
    if plan.p != data.p:
        raise ValueError(f"plan is for p={plan.p}, dataset has p={data.p}")
    ctx = prepare_context(data, spec, rng.child("setup"))
    tasks = [
        (data, spec, plan.perms[k], rng.child("col", k), ctx, k)
        for k in range(plan.n_perms)
    ]
    if workers > 1:
        results = Parallel(n_jobs=workers)(delayed(_column)(*t) for t in tasks)
    else:
        results = [_column(*t) for t in tasks]
    vi = np.column_stack([r[0] for r in results])
    est_var = np.column_stack([r[1] for r in results])
    return VIMatrix(vi, est_var, plan, n_eval=len(ctx.base_sq))


def reduce_stats(m: VIMatrix) -> ShapleyStats:
    """Mean and minimum over orderings, with the minimizing ordering's
    variance attached; argmin ties break to the lowest ordering index."""
    argmin = np.argmin(m.vi, axis=1)
    rows = np.arange(m.p)
    return ShapleyStats(
        shapley_mean=m.vi.mean(axis=1),
        shapley_min=m.vi[rows, argmin],
        var_at_min=m.est_var[rows, argmin],
        argmin_perm=argmin,
    )


def write_vi_csv(m: VIMatrix, path, feature_names=None) -> None:
    """Rows are features; each ordering contributes a (vi, var) column pair
    whose headers carry the ordering itself."""
    names = feature_names if feature_names is not None else [f"f{j}" for j in range(m.p)]
    header = ["feature"]
    for k in range(m.n_perms):
        tag = "-".join(str(int(i)) for i in m.plan.perms[k])
        header.append(f"vi_k{k}_{tag}")
        header.append(f"var_k{k}_{tag}")
    with open(path, "w", encoding="utf-8") as fh:
        seed = "" if m.plan.seed is None else m.plan.seed
        fh.write(f"# n_eval={m.n_eval} seed={seed}\n")
        fh.write(",".join(header) + "\n")
        for j in range(m.p):
            cells = [str(names[j])]
            for k in range(m.n_perms):
                cells.append(repr(float(m.vi[j, k])))
                cells.append(repr(float(m.est_var[j, k])))
            fh.write(",".join(cells) + "\n")


def read_vi_csv(path) -> tuple[VIMatrix, list[str]]:
    """Inverse of :func:`write_vi_csv`; returns the matrix and feature names."""
    with open(path, encoding="utf-8") as fh:
        meta = fh.readline().strip()
        if not meta.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        fields = dict(kv.split("=", 1) for kv in meta[1:].split())
        n_eval = int(fields["n_eval"])
        seed = int(fields["seed"]) if fields.get("seed") else None
        header = fh.readline().strip().split(",")
        perms = []
        for name in header[1::2]:
            if not name.startswith("vi_k"):
                raise ValueError(f"{path}: unexpected column {name!r}")
            perms.append([int(i) for i in name.split("_", 2)[2].split("-")])
        names, rows = [], []
        for line in fh:
            cells = line.strip().split(",")
            if not cells or cells == [""]:
                continue
            names.append(cells[0])
            rows.append([float(c) for c in cells[1:]])
    grid = np.asarray(rows)
    vi = grid[:, 0::2]
    est_var = grid[:, 1::2]
    plan = PermutationPlan(np.asarray(perms), seed=seed)
    return VIMatrix(vi, est_var, plan, n_eval=n_eval), names
