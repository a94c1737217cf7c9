"""Command-line interface: ``amol {simulate,fit,evaluate,cv,bench}``.

Every command echoes its resolved configuration as JSON on stderr.  Exit
status is 2 for usage errors and 1 for failures while running.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from .benchmark import ScenarioSpec, run_benchmark
from .io import (DatasetSchema, load_csv, load_regimen, load_schema, save_json, write_csv)
from .kernels import KernelSpec
from .learners import DEFAULT_COST_GRID, FITTERS, METHODS, LearnerConfig, fit_methods
from .simulation import make_generator
from .value import estimate_value

log = logging.getLogger("amol")


def _cost_grid(text: str) -> tuple:
    try:
        grid = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse cost grid {text!r}") from None
    if not grid or any(not c > 0 for c in grid):
        raise argparse.ArgumentTypeError("costs must be positive")
    return grid


def _kernel(text: str) -> KernelSpec:
    try:
        return KernelSpec.parse(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _methods(text: str) -> tuple:
    ms = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in ms if m not in METHODS]
    if bad or not ms:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {list(METHODS)}")
    return ms


def _schema_path(data_path: str) -> str:
    stem = data_path[:-4] if data_path.endswith(".csv") else data_path
    return stem + ".schema.json"


def _add_learner_args(p):
    p.add_argument("--data", required=True, help="wide CSV file")
    p.add_argument("--schema", help="schema JSON (default: <data>.schema.json)")
    p.add_argument("--kernel", type=_kernel, default=KernelSpec.linear(),
                   help="linear, gaussian or gaussian:<sigma> (default linear)")
    p.add_argument("--cost-grid", type=_cost_grid, default=DEFAULT_COST_GRID,
                   help="comma-separated costs (default 2^-5,2^-3,...,2^9)")
    p.add_argument("--folds", type=_positive, default=4, help="cost cross-validation folds")
    p.add_argument("--lasso-folds", type=_positive, default=5)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amol", description="Multi-stage treatment regimen learning.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a dataset from a simulation setting")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--population-seed", type=int, default=None,
                   help="setting 2 group means (default: --seed)")
    p.add_argument("--out", required=True, help="CSV path; the schema goes to <out>.schema.json")

    p = sub.add_parser("fit", help="estimate a regimen")
    p.add_argument("--method", choices=METHODS, required=True)
    _add_learner_args(p)
    p.add_argument("--out", required=True, help="fit report JSON")

    p = sub.add_parser("evaluate", help="inverse-probability-weighted value of a fitted regimen")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema")

    p = sub.add_parser("cv", help="per-stage cost cross-validation scores of a fit")
    p.add_argument("--method", choices=tuple(m for m in METHODS if m != "qlearn"), required=True)
    _add_learner_args(p)

    p = sub.add_parser("bench", help="replicated simulation benchmark")
    p.add_argument("--setting", type=int, choices=(1, 2), required=True)
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--replicates", type=_positive, default=100)
    p.add_argument("--test-n", type=_positive, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", type=_methods, default=METHODS)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--out", required=True, help="output prefix for <out>.csv and <out>.json")
    return parser


def _echo_config(args):
    cfg = {k: (v.to_dict() if hasattr(v, "to_dict") else list(v) if isinstance(v, tuple) else v)
           for k, v in sorted(vars(args).items())}
    print(json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _load(args):
    schema = load_schema(args.schema or _schema_path(args.data))
    return load_csv(args.data, schema)


def _config(args) -> LearnerConfig:
    return LearnerConfig(kernel=args.kernel, cost_grid=args.cost_grid, cost_folds=args.folds,
                         lasso_folds=args.lasso_folds, seed=args.seed)


def cmd_simulate(args):
    gen = make_generator(args.setting, args.seed if args.population_seed is None else args.population_seed)
    data, _ = gen.simulate(args.n, np.random.default_rng(args.seed))
    schema = write_csv(args.out, data, DatasetSchema.default(data.feature_dims, eligibility=False))
    save_json(schema, _schema_path(args.out))


def cmd_fit(args):
    report = fit_methods(_load(args), [args.method], _config(args))[args.method]
    save_json(report, args.out)


def cmd_evaluate(args):
    est = estimate_value(load_regimen(args.model), _load(args))
    print(json.dumps(est.to_dict(), sort_keys=True))


def cmd_cv(args):
    report = FITTERS[args.method](_load(args), _config(args))
    rows = [{"stage": d.stage, "n_used": d.n_used, "cost": d.cost,
             "grid": list(args.cost_grid) if d.cv_scores is not None else None,
             "scores": None if d.cv_scores is None else list(d.cv_scores)}
            for d in report.diagnostics]
    print(json.dumps({"method": args.method, "stages": rows}, sort_keys=True))


def cmd_bench(args):
    spec = ScenarioSpec(args.setting, args.n, args.test_n, args.replicates, args.seed)
    report = run_benchmark(spec, args.methods, LearnerConfig(), n_jobs=args.threads)
    report.write(args.out)
    log.info("benchmark finished in %.1f s", report.runtime)
    print(json.dumps(report.summary(), sort_keys=True))


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "evaluate": cmd_evaluate,
            "cv": cmd_cv, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _echo_config(args)
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as err:
        print(f"amol {args.command}: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
