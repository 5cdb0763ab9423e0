"""Command-line front end.

Subcommands: ``select`` runs the full selection pipeline on a CSV and writes
a JSON report; ``shapley`` dumps the raw contribution matrix and summary
statistics without testing; ``simulate`` writes a synthetic benchmark CSV;
``bench`` runs method comparisons and writes a CSV table plus JSON summary.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .core import DataError, Dataset, PermutationPlan, RngStream, read_csv, sample_permutations
from .learners import LearnerError, LearnerSpec, fit
from .report import build_selection_report, validate_report
from .seltest import PCHT_METHODS, TEST_NAMES, run_all_tests, screen_u
from .shapley import build_vi_matrix, read_vi_csv, reduce_stats, write_vi_csv
from .simbench import ALL_METHODS, SimConfig, generate, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file supplying any subset of flags")
    parser.add_argument("--seed", type=int, help="RNG seed (fallback: MINSHAP_SEED, then 0)")
    parser.add_argument("--workers", type=int, help="worker pool size (default 1)")
    parser.add_argument("--output", help="output path")


def _add_learner_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--learner",
        help="learner kind ('ridge' or 'boosted-trees'), inline JSON, or a JSON file path",
    )
    parser.add_argument("--eval-mode", choices=["refit", "dropout"], dest="eval_mode")
    parser.add_argument("--holdout", type=float, help="holdout fraction in [0, 1)")


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", help="input CSV path")
    parser.add_argument("--response", help="name of the response column")
    parser.add_argument("--K", type=int, dest="K", help="number of sampled orderings")
    parser.add_argument("--perms-file", dest="perms_file", help="explicit orderings, one per line")
    _add_learner_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minshap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sel = sub.add_parser("select", help="run all selection tests on CSV data")
    _add_engine_flags(p_sel)
    p_sel.add_argument("--alpha", type=float, help="significance level in (0, 1]")
    p_sel.add_argument("--test", choices=list(TEST_NAMES) + ["all"], help="which decision to report")
    p_sel.add_argument("--u", type=int, help="partial-conjunction level (default K)")
    p_sel.add_argument("--u-range", dest="u_range", help="screen u over LO:HI on a held-out split")
    p_sel.add_argument("--from-matrix", dest="from_matrix",
                       help="reuse a matrix CSV written by the shapley command")
    p_sel.add_argument("--dump-matrix", dest="dump_matrix", action="store_true",
                       help="embed the full matrix in the report")
    _add_common(p_sel)

    p_shap = sub.add_parser("shapley", help="write the contribution matrix and statistics")
    _add_engine_flags(p_shap)
    _add_common(p_shap)

    p_sim = sub.add_parser("simulate", help="write a synthetic benchmark dataset as CSV")
    p_sim.add_argument("--model", choices=["a", "b", "c", "d", "chain",
                                           "highdim-linear", "highdim-nonlinear"])
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--p", type=int)
    p_sim.add_argument("--repeat-factor", type=int, dest="repeat_factor")
    p_sim.add_argument("--truth-output", dest="truth_output", help="write the support as JSON")
    _add_common(p_sim)

    p_bench = sub.add_parser("bench", help="run a method comparison on a synthetic model")
    p_bench.add_argument("--model", choices=["a", "b", "c", "d", "chain",
                                             "highdim-linear", "highdim-nonlinear"])
    p_bench.add_argument("--n", type=int)
    p_bench.add_argument("--p", type=int)
    p_bench.add_argument("--repeat-factor", type=int, dest="repeat_factor")
    p_bench.add_argument("--methods", help="comma-separated method names")
    p_bench.add_argument("--reps", type=int)
    p_bench.add_argument("--K", type=int, dest="K")
    p_bench.add_argument("--alpha", type=float)
    p_bench.add_argument("--u-range", dest="u_range")
    _add_learner_flags(p_bench)
    _add_common(p_bench)
    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset flags from the JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, encoding="utf-8") as fh:
            values = json.load(fh)
    except OSError as e:
        raise ValueError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise ValueError(f"config file is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ValueError("config file must hold a JSON object")
    for key, val in values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"config key {key!r} is not a known flag")
        if getattr(args, attr) is None:
            setattr(args, attr, val)


def _resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("MINSHAP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"MINSHAP_SEED={env!r} is not an integer") from None
    return 0


def _resolve_learner(args: argparse.Namespace) -> LearnerSpec:
    raw = getattr(args, "learner", None) or "boosted-trees"
    if raw.strip().startswith("{"):
        spec = LearnerSpec.from_json(raw)
    elif raw in ("ridge", "boosted-trees"):
        spec = LearnerSpec(raw)
    elif os.path.exists(raw):
        with open(raw, encoding="utf-8") as fh:
            spec = LearnerSpec.from_json(json.load(fh))
    else:
        raise ValueError(f"--learner {raw!r}: not a learner kind, JSON object, or file")
    return spec.with_eval(
        eval_mode=getattr(args, "eval_mode", None),
        holdout_fraction=getattr(args, "holdout", None),
    )


def _read_perms_file(path: str, p: int) -> PermutationPlan:
    perms = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                perms.append([int(x) for x in parts])
            except ValueError:
                raise DataError(f"{path}:{lineno}: cannot parse ordering {line!r}") from None
    if not perms:
        raise DataError(f"{path}: no orderings found")
    try:
        plan = PermutationPlan(np.asarray(perms))
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None
    if plan.p != p:
        raise DataError(f"{path}: orderings are for p={plan.p}, data has p={p}")
    return plan


def _parse_u_range(raw: str, k: int) -> range:
    try:
        lo, hi = (int(x) for x in raw.split(":"))
    except ValueError:
        raise ValueError(f"--u-range {raw!r}: expected LO:HI") from None
    if not 1 <= lo <= hi <= k:
        raise ValueError(f"--u-range {raw!r} out of bounds for K={k}")
    return range(lo, hi + 1)


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError(f"--{name.replace('_', '-')} is required")


def _tuning_loss_evaluator(data: Dataset, spec: LearnerSpec, rng: RngStream):
    """Data-mode screening: held-out MSE of a refit on the candidate set."""
    perm = rng.generator().permutation(data.n)
    n_test = max(2, data.n // 4)
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    train_data = data.take_rows(train)
    X_test, y_test = data.features[test], data.response[test]
    refit = spec.with_eval(eval_mode="refit", holdout_fraction=0.0)

    def evaluate(selected: set[int]) -> float:
        model = fit(refit, train_data, sorted(selected), rng.child("refit"))
        pred = model.predictor.predict(X_test)
        return float(((y_test - pred) ** 2).mean())

    return evaluate


def _cmd_select(args: argparse.Namespace) -> int:
    _require(args, "input", "response")
    seed = _resolve_seed(args)
    rng = RngStream(seed)
    spec = _resolve_learner(args)
    alpha = args.alpha if args.alpha is not None else 0.05
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"--alpha must be in (0, 1], got {alpha}")
    workers = args.workers or 1
    test = args.test or "all"
    started = time.perf_counter()

    data = read_csv(args.input, args.response)
    if args.from_matrix:
        matrix, names = read_vi_csv(args.from_matrix)
        if list(names) != list(data.feature_names):
            raise DataError(f"{args.from_matrix}: feature names do not match the input CSV")
        k = matrix.n_perms
    else:
        if args.perms_file:
            plan = _read_perms_file(args.perms_file, data.p)
        else:
            k = args.K if args.K is not None else 50
            if k < 1:
                raise ValueError(f"--K must be >= 1, got {k}")
            plan = sample_permutations(data.p, k, rng.child("plan"))
        matrix = build_vi_matrix(data, spec, plan, rng.child("engine"), workers=workers)
        k = matrix.n_perms
    stats = reduce_stats(matrix)

    u_screened = False
    if args.u_range:
        u_range = _parse_u_range(args.u_range, k)
        screen_method = test.split("-", 1)[1] if test.startswith("pcht-") else "stouffer"
        probe = run_all_tests(stats, matrix, alpha, u=k)
        adj = np.vstack([r.adjusted[screen_method] for r in probe])
        evaluator = _tuning_loss_evaluator(data, spec, rng.child("tune"))
        u = screen_u(adj, u_range, alpha, evaluator=evaluator)
        u_screened = True
    else:
        u = args.u if args.u is not None else k
    if not 1 <= u <= k:
        raise ValueError(f"--u must be in [1, {k}], got {u}")

    records = run_all_tests(stats, matrix, alpha, u=u)
    tests = list(TEST_NAMES) if test == "all" else [test]
    report = build_selection_report(
        command="select",
        metadata={
            "package_version": __version__,
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_clock_seconds": time.perf_counter() - started,
            "alpha": alpha,
            "K": k,
            "u": u,
            "u_screened": u_screened,
            "seed": seed,
            "workers": workers,
            "input": args.input,
            "response": args.response,
            "learner": spec.to_json(),
        },
        feature_names=data.feature_names,
        stats=stats,
        records=records,
        tests=tests,
        matrix=matrix if args.dump_matrix else None,
    )
    validate_report(report)
    payload = json.dumps(report, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return EXIT_OK


def _cmd_shapley(args: argparse.Namespace) -> int:
    _require(args, "input", "response", "output")
    seed = _resolve_seed(args)
    rng = RngStream(seed)
    spec = _resolve_learner(args)
    workers = args.workers or 1

    data = read_csv(args.input, args.response)
    if args.perms_file:
        plan = _read_perms_file(args.perms_file, data.p)
    else:
        k = args.K if args.K is not None else 50
        if k < 1:
            raise ValueError(f"--K must be >= 1, got {k}")
        plan = sample_permutations(data.p, k, rng.child("plan"))
    matrix = build_vi_matrix(data, spec, plan, rng.child("engine"), workers=workers)
    stats = reduce_stats(matrix)

    write_vi_csv(matrix, args.output, feature_names=data.feature_names)
    stats_path = args.output + ".stats.json"
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "feature_names": list(data.feature_names),
                "shapley_mean": stats.shapley_mean.tolist(),
                "shapley_min": stats.shapley_min.tolist(),
                "var_at_min": stats.var_at_min.tolist(),
                "argmin_perm": stats.argmin_perm.tolist(),
                "seed": seed,
                "learner": spec.to_json(),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "model", "n", "output")
    seed = _resolve_seed(args)
    config = SimConfig(
        model=args.model,
        n=args.n,
        p=args.p or 0,
        repeat_factor=args.repeat_factor or 1,
        seed=seed,
    )
    data, truth = generate(config, RngStream(seed))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(",".join(list(data.feature_names) + ["y"]) + "\n")
        for i in range(data.n):
            row = [repr(float(v)) for v in data.features[i]] + [repr(float(data.response[i]))]
            fh.write(",".join(row) + "\n")
    if args.truth_output:
        with open(args.truth_output, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "support_indices": sorted(truth.support),
                    "support_names": [data.feature_names[j] for j in sorted(truth.support)],
                },
                fh,
                indent=2,
            )
            fh.write("\n")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    _require(args, "model", "n", "output")
    seed = _resolve_seed(args)
    config = SimConfig(
        model=args.model,
        n=args.n,
        p=args.p or 0,
        repeat_factor=args.repeat_factor or 1,
        seed=seed,
    )
    methods = (args.methods or "minshap,maxp").split(",")
    methods = [m.strip() for m in methods if m.strip()]
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
    reps = args.reps if args.reps is not None else 10
    k = args.K if args.K is not None else 50
    alpha = args.alpha if args.alpha is not None else 0.05
    spec = _resolve_learner(args)
    u_range = _parse_u_range(args.u_range, k) if args.u_range else None
    result = run_experiment(
        config,
        methods,
        reps=reps,
        alpha=alpha,
        n_perms=k,
        rng=RngStream(seed),
        learner=spec,
        u_range=u_range,
        workers=args.workers or 1,
    )
    result.to_csv(args.output + ".csv")
    with open(args.output + ".json", "w", encoding="utf-8") as fh:
        json.dump(result.to_json_dict(), fh, indent=2)
        fh.write("\n")
    return EXIT_OK


_COMMANDS = {
    "select": _cmd_select,
    "shapley": _cmd_shapley,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return _COMMANDS[args.command](args)
    except (ValueError, json.JSONDecodeError) as e:
        print(f"minshap: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"minshap: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (LearnerError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"minshap: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
