"""
Command-line driver: ``python -m gsca <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import config
from .exceptions import DataError, GscaError, NumericError
from .experiments import EXPERIMENTS, SCALES, ExperimentSettings, run_experiment
from .links_losses import LinkKind
from .matrix_io import (load_coupled, load_truth, write_fit, write_json, write_manifest,
                        write_table, write_truth)
from .model_selection import GridSpec, fit_path, lambda_grid, lambda_path, rmse_path
from .penalties import PenaltyFamily, PenaltySpec
from .preprocessing import read_and_clean_blocks
from .simulation import (SimParams, drop_uninformative_binary_columns, load_marginals,
                         marginals_to_offsets, simulate_coupled)
from .solver import FitConfig, fit_exact_rank, fit_gsca

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _add_data_args(parser):
    parser.add_argument("--x1", required=True, type=Path, help="binary block CSV")
    parser.add_argument("--x2", required=True, type=Path, help="quantitative block CSV")


def _add_fit_args(parser, penalty=True):
    if penalty:
        parser.add_argument("--penalty", choices=[f.value for f in PenaltyFamily],
                            default=PenaltyFamily.GDP.value)
        parser.add_argument("--lambda", dest="lam", type=float, default=1.0)
        parser.add_argument("--gamma", "--q", "--hyper", dest="hyper", type=float,
                            default=None, help="q for lq, gamma for scad and gdp")
    parser.add_argument("--link", choices=[k.value for k in LinkKind],
                        default=LinkKind.LOGIT.value)
    parser.add_argument("--eps", type=float, default=config.EPS_F,
                        help="relative change stopping criterion")
    parser.add_argument("--max-iter", type=int, default=config.MAX_ITER)
    parser.add_argument("--seed", type=int, default=0)


def _add_grid_args(parser):
    parser.add_argument("--n-lambdas", type=int, default=config.DEFAULT_N_LAMBDAS)
    parser.add_argument("--lambda-max", type=float, default=None)
    parser.add_argument("--lambda-min", type=float, default=None)
    parser.add_argument("--lambdas", type=float, nargs="+", default=None,
                        help="explicit lambda grid")


def _add_common_args(parser):
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default $GSCA_OUTPUT_DIR or ./results)")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="gsca", description="Penalized GSCA of coupled binary and "
                                              "quantitative data.")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="simulate coupled data with ground truth")
    defaults = SimParams()
    sim.add_argument("--I", type=int, default=defaults.I)
    sim.add_argument("--J1", type=int, default=defaults.J1)
    sim.add_argument("--J2", type=int, default=defaults.J2)
    sim.add_argument("--R", type=int, default=defaults.R)
    sim.add_argument("--snr1", type=float, default=defaults.snr1)
    sim.add_argument("--snr2", type=float, default=defaults.snr2)
    sim.add_argument("--sigma2", type=float, default=defaults.sigma2)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise-scaling", choices=["expected", "realized"], default="expected")
    sim.add_argument("--balanced", action="store_true", help="mu1 = 0")
    sim.add_argument("--marginals", type=Path, default=None,
                     help="one-column CSV of binary marginal probabilities")
    sim.add_argument("--drop-uninformative", action="store_true",
                     help="remove binary columns without variation")
    _add_common_args(sim)

    fit = commands.add_parser("fit", help="penalized fit at one lambda")
    _add_data_args(fit)
    _add_fit_args(fit)
    _add_common_args(fit)

    exact = commands.add_parser("exact-rank", help="unpenalized fit with rank(Z) = R")
    _add_data_args(exact)
    exact.add_argument("--rank", type=int, required=True)
    _add_fit_args(exact, penalty=False)
    _add_common_args(exact)

    cv = commands.add_parser("cv", help="K-fold CV over a lambda grid and refit")
    _add_data_args(cv)
    _add_fit_args(cv)
    _add_grid_args(cv)
    cv.add_argument("--folds", "-K", type=int, default=config.DEFAULT_FOLDS)
    cv.add_argument("--no-warm-start", action="store_true")
    cv.add_argument("--jobs", type=int, default=config.default_jobs())
    _add_common_args(cv)

    path = commands.add_parser("path", help="fits along a lambda grid without CV")
    _add_data_args(path)
    _add_fit_args(path)
    _add_grid_args(path)
    path.add_argument("--truth", type=Path, default=None,
                      help="directory written by simulate, adds RMSE columns")
    _add_common_args(path)

    rep = commands.add_parser("reproduce", help="run a simulation experiment")
    rep.add_argument("experiment", help="one of: %s" % ", ".join(EXPERIMENTS))
    rep.add_argument("--scale", choices=sorted(SCALES), default="small")
    rep.add_argument("--seeds", type=int, nargs="+", default=[0])
    rep.add_argument("--marginals", type=Path, default=None)
    rep.add_argument("--excel", action="store_true", help="also write .xlsx tables")
    rep.add_argument("--jobs", type=int, default=config.default_jobs())
    _add_common_args(rep)

    clean = commands.add_parser("clean", help="prepare real coupled data")
    _add_data_args(clean)
    clean.add_argument("--n-top", type=int, default=None,
                       help="keep the quantitative columns of largest variance")
    clean.add_argument("--no-scale", action="store_true")
    _add_common_args(clean)
    return parser


def _penalty(args):
    return PenaltySpec(family=args.penalty, lam=args.lam, hyper=args.hyper)


def _fit_config(args, penalty=None):
    return FitConfig(penalty=penalty or PenaltySpec(), link=args.link, eps_f=args.eps,
                     max_iter=args.max_iter, seed=args.seed)


def _grid_spec(args):
    return GridSpec(n_lambdas=args.n_lambdas, lambda_max=args.lambda_max,
                    lambda_min=args.lambda_min, values=args.lambdas)


def cmd_simulate(args, out_dir):
    mu1, J1 = None, args.J1
    if args.marginals is not None:
        p = load_marginals(args.marginals)
        J1, mu1 = len(p), marginals_to_offsets(p, args.I).tolist()
    params = SimParams(I=args.I, J1=J1, J2=args.J2, R=args.R, snr1=args.snr1,
                       snr2=args.snr2, sigma2=args.sigma2, mu1=mu1, seed=args.seed,
                       noise_scaling=args.noise_scaling, balanced=args.balanced)
    truth = simulate_coupled(params)
    if args.drop_uninformative:
        _, _, kept = drop_uninformative_binary_columns(
            truth.X1, np.ones_like(truth.X1, dtype=bool))
        truth = truth.select_binary_columns(kept)
    written = write_truth(truth, out_dir)
    inputs = [args.marginals] if args.marginals is not None else []
    return params.model_dump(mode="json"), args.seed, inputs, written


def cmd_fit(args, out_dir):
    data, columns1, columns2 = load_coupled(args.x1, args.x2)
    cfg = _fit_config(args, _penalty(args))
    fit = fit_gsca(data, cfg)
    written = write_fit(fit, out_dir, columns1, columns2)
    print("Fit of rank %d after %d iterations; saved results in '%s'."
          % (fit.rank, fit.iterations, out_dir))
    return cfg.model_dump(mode="json", exclude={"init"}), args.seed, [args.x1, args.x2], written


def cmd_exact_rank(args, out_dir):
    data, columns1, columns2 = load_coupled(args.x1, args.x2)
    cfg = _fit_config(args)
    fit = fit_exact_rank(data, args.rank, cfg)
    written = write_fit(fit, out_dir, columns1, columns2)
    print("Rank %d fit after %d iterations; saved results in '%s'."
          % (args.rank, fit.iterations, out_dir))
    params = cfg.model_dump(mode="json", exclude={"init", "penalty"})
    params["rank"] = args.rank
    return params, args.seed, [args.x1, args.x2], written


def cmd_cv(args, out_dir):
    data, columns1, columns2 = load_coupled(args.x1, args.x2)
    cfg = _fit_config(args, _penalty(args))
    grid_spec = _grid_spec(args)
    log_path = out_dir / "cv_log.csv"
    if log_path.exists():
        log_path.unlink()
    result = lambda_path(data, cfg, grid_spec, K=args.folds, seed=args.seed,
                         warm_start=not args.no_warm_start, n_jobs=args.jobs,
                         log_path=log_path)
    write_json(out_dir / "cv.json", result.to_dict())
    written = [out_dir / "cv.json", log_path]
    written += write_fit(result.refit, out_dir, columns1, columns2)
    print("Selected lambda %.6g (CV error %.6g, rank %d); saved results in '%s'."
          % (result.best_lambda, result.cv_error[result.best_index],
             result.refit.rank, out_dir))
    params = cfg.model_dump(mode="json", exclude={"init"})
    params.update(folds=args.folds, grid=grid_spec.model_dump(mode="json"),
                  warm_start=not args.no_warm_start)
    return params, args.seed, [args.x1, args.x2], written


def cmd_path(args, out_dir):
    data, _, _ = load_coupled(args.x1, args.x2)
    cfg = _fit_config(args, _penalty(args))
    grid_spec = _grid_spec(args)
    grid = lambda_grid(data, cfg, grid_spec)
    inputs = [args.x1, args.x2]
    if args.truth is not None:
        truth = load_truth(args.truth)
        frame, _ = rmse_path(data, truth, cfg, grid)
        inputs.append(args.truth / "truth.json")
    else:
        frame, _ = fit_path(data, cfg, grid)
    path = out_dir / "path.csv"
    write_table(frame, path)
    print("Path of %d lambdas saved in '%s'." % (len(frame), path))
    params = cfg.model_dump(mode="json", exclude={"init"})
    params["grid"] = grid_spec.model_dump(mode="json")
    return params, args.seed, inputs, [path]


def cmd_reproduce(args, out_dir):
    settings = ExperimentSettings(scale=SCALES[args.scale], seeds=args.seeds,
                                  n_jobs=args.jobs, marginals=args.marginals,
                                  excel=args.excel)
    written = run_experiment(args.experiment, settings, out_dir)
    print("Saved results in '%s'." % out_dir)
    params = {"experiment": args.experiment, "scale": args.scale, "seeds": args.seeds,
              "jobs": args.jobs, "excel": args.excel}
    inputs = [args.marginals] if args.marginals is not None else []
    return params, args.seeds[0], inputs, written


def cmd_clean(args, out_dir):
    written = read_and_clean_blocks(args.x1, args.x2, out_dir, args.n_top,
                                    scale=not args.no_scale)
    params = {"n_top": args.n_top, "scale": not args.no_scale}
    return params, None, [args.x1, args.x2], list(written)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "exact-rank": cmd_exact_rank,
    "cv": cmd_cv,
    "path": cmd_path,
    "reproduce": cmd_reproduce,
    "clean": cmd_clean,
}


def configure_logging(verbosity):
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = config.default_log_level()
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv=None):
    config.load_settings()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return exit_.code if isinstance(exit_.code, int) else 1
    configure_logging(args.verbose)
    out_dir = args.out if args.out is not None else config.default_output_dir()
    started = time.time()
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        params, seed, inputs, written = COMMANDS[args.command](args, out_dir)
        write_manifest(out_dir, args.command, params, seed, inputs, started, written)
    except GscaError as err:
        print("error: %s" % err, file=sys.stderr)
        return err.exit_code
    except ValidationError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as err:
        print("error: linear algebra failure: %s" % err, file=sys.stderr)
        return NumericError.exit_code
    except OSError as err:
        print("error: %s" % err, file=sys.stderr)
        return DataError.exit_code
    return 0
