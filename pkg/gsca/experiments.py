"""
Simulation experiments of the ``reproduce`` command.

Every experiment returns tidy tables (one observation per row) keyed by the
file stem they are written under. Penalized models are selected at the
minimum RMSE(Theta) along a lambda grid unless cross-validation is named.
"""
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from .config import EPS_F
from .evaluation import bayes_error, evaluate_estimates, evaluate_fit
from .exceptions import InvalidArgumentError
from .matrix_io import write_table
from .model_selection import GridSpec, lambda_grid, lambda_path, rmse_path
from .penalties import PenaltyFamily, PenaltySpec, thresholding_curve
from .simulation import (SimParams, drop_uninformative_binary_columns, load_marginals,
                         marginals_to_offsets, sca_full_information, simulate_coupled)
from .solver import FitConfig, fit_exact_rank

logger = logging.getLogger(__name__)

FULL_INFORMATION = "full information"


class Scale(BaseModel):
    """Problem sizes and sweep grids of one reproduction scale."""

    model_config = ConfigDict(frozen=True)

    name: str
    I: int = Field(ge=2)
    J1: int = Field(ge=1)
    J2: int = Field(ge=1)
    R: int = Field(ge=1)
    n_lambdas: int = Field(ge=1)
    folds: int = Field(ge=2)
    eps_f: float = Field(gt=0.0)
    cv_eps_f: float = Field(gt=0.0)
    snr_values: List[float]
    q_values: List[float]
    scad_gammas: List[float]
    gdp_gammas: List[float]
    n_singular_values: int = Field(default=15, ge=1)
    overfit_rank: int = Field(default=3, ge=1)
    overfit_eps: List[float] = [1e-5, 1e-8]
    overfit_max_iter: int = Field(default=50000, ge=1)


SCALES = {
    "small": Scale(name="small", I=30, J1=20, J2=40, R=3, n_lambdas=6, folds=3,
                   eps_f=1e-6, cv_eps_f=1e-4,
                   snr_values=[0.1, 1.0, 10.0],
                   q_values=[0.1, 0.5, 1.0],
                   scad_gammas=[3.0, 5.0, 10.0],
                   gdp_gammas=[0.1, 1.0, 10.0],
                   n_singular_values=10, overfit_eps=[1e-4, 1e-7],
                   overfit_max_iter=5000),
    "full": Scale(name="full", I=160, J1=410, J2=1000, R=10, n_lambdas=30, folds=7,
                   eps_f=EPS_F, cv_eps_f=1e-5,
                   snr_values=np.geomspace(0.1, 100.0, 20).tolist(),
                   q_values=np.round(np.arange(1, 11) / 10.0, 10).tolist(),
                   scad_gammas=[2.5, 3.0, 3.7, 5.0, 7.5, 10.0, 15.0, 20.0],
                   gdp_gammas=np.geomspace(1e-2, 1e2, 9).tolist()),
}


class ExperimentSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    scale: Scale = SCALES["small"]
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    n_jobs: int = Field(default=1)
    marginals: Optional[Path] = None
    excel: bool = False


TABLE2_PENALTIES = (
    PenaltySpec(family=PenaltyFamily.NUCLEAR),
    PenaltySpec(family=PenaltyFamily.LQ, hyper=0.1),
    PenaltySpec(family=PenaltyFamily.SCAD, hyper=5.0),
    PenaltySpec(family=PenaltyFamily.GDP, hyper=1.0),
)
SNR_PENALTIES = (
    PenaltySpec(family=PenaltyFamily.NUCLEAR),
    PenaltySpec(family=PenaltyFamily.LQ, hyper=0.1),
    PenaltySpec(family=PenaltyFamily.GDP, hyper=1.0),
)
_REPORT_COLUMNS = ["rmse_theta", "rmse_theta1", "rmse_theta2", "rmse_mu",
                   "rmse_z", "rmse_z1", "rmse_z2", "rank_hat"]


def simulate_for(settings, seed, snr=1.0):
    """Simulated truth at the settings' scale, uninformative binary columns removed."""
    scale = settings.scale
    J1, mu1 = scale.J1, None
    if settings.marginals is not None:
        p = load_marginals(settings.marginals)
        J1, mu1 = len(p), marginals_to_offsets(p, scale.I).tolist()
    params = SimParams(I=scale.I, J1=J1, J2=scale.J2, R=scale.R, snr1=snr, snr2=snr,
                       mu1=mu1, seed=seed)
    truth = simulate_coupled(params)
    _, _, kept = drop_uninformative_binary_columns(truth.X1, np.ones_like(truth.X1, dtype=bool))
    return truth.select_binary_columns(kept)


def best_rmse_fit(truth, penalty, scale, eps_f=None, seed=0):
    """
    Fit along the lambda grid of ``penalty`` and keep the minimum RMSE(Theta).

    Returns (path table, best fit, best row).
    """
    data = truth.data
    config = FitConfig(penalty=penalty, eps_f=eps_f or scale.eps_f, seed=seed)
    grid = lambda_grid(data, config, GridSpec(n_lambdas=scale.n_lambdas))
    frame, fits = rmse_path(data, truth, config, grid)
    best = int(frame["rmse_theta"].idxmin())
    return frame, fits[best], frame.iloc[best]


def best_full_information(truth, max_rank=None):
    """SCA on [X1* X2] at the rank of minimum RMSE(Theta). Returns (report, rank)."""
    I, J = truth.X2.shape[0], truth.J1 + truth.X2.shape[1]
    max_rank = max_rank or min(2 * truth.D.size, I - 1, J)
    best = None
    for R in range(1, max_rank + 1):
        Theta_hat, mu_hat, Z_hat = sca_full_information(truth.X1_star, truth.X2, R)
        report = evaluate_estimates(Theta_hat, mu_hat, Z_hat, truth)
        if best is None or report.rmse_theta < best[0].rmse_theta:
            best = report, R
    return best


def _run_parallel(settings, function, items):
    if settings.n_jobs == 1:
        return [function(*item) for item in items]
    return Parallel(n_jobs=settings.n_jobs)(delayed(function)(*item) for item in items)


def _best_row(truth, penalty, scale, eps_f=None):
    _, fit, row = best_rmse_fit(truth, penalty, scale, eps_f)
    return fit, row


def table2(settings):
    """Best RMSEs and rank per penalty and for the full-information model."""
    scale = settings.scale
    rows = []
    for seed in settings.seeds:
        truth = simulate_for(settings, seed)
        results = _run_parallel(settings, _best_row,
                                [(truth, p, scale) for p in TABLE2_PENALTIES])
        for penalty, (_, row) in zip(TABLE2_PENALTIES, results):
            entry = {"model": penalty.label, "seed": seed, "lambda": row["lambda"]}
            entry.update({c: row[c] for c in _REPORT_COLUMNS})
            rows.append(entry)
        report, _ = best_full_information(truth)
        entry = {"model": FULL_INFORMATION, "seed": seed, "lambda": np.nan}
        entry.update(report.model_dump(include=set(_REPORT_COLUMNS)))
        rows.append(entry)
        logger.info("table2 seed %d done", seed)
    return {"table2": pd.DataFrame(rows)}


def fig1(settings):
    """Thresholding curves eta(z) of the scalar proximal map, lambda = 1."""
    z = np.linspace(0.0, 10.0, 201)
    specs = (PenaltySpec(family=PenaltyFamily.NUCLEAR, lam=1.0),
             PenaltySpec(family=PenaltyFamily.LQ, lam=1.0, hyper=0.5),
             PenaltySpec(family=PenaltyFamily.LQ, lam=1.0, hyper=0.1),
             PenaltySpec(family=PenaltyFamily.SCAD, lam=1.0, hyper=5.0),
             PenaltySpec(family=PenaltyFamily.GDP, lam=1.0, hyper=1.0))
    frames = [pd.DataFrame({"penalty": spec.label, "lambda": spec.lam, "z": z,
                            "eta": thresholding_curve(spec, z)})
              for spec in specs]
    return {"fig1": pd.concat(frames, ignore_index=True)}


def fig2_overfit(settings):
    """Exact-rank fits without penalty at two stopping criteria from one initialization."""
    scale = settings.scale
    seed = settings.seeds[0]
    data = simulate_for(settings, seed).data
    summary, loadings = [], []
    for eps in scale.overfit_eps:
        config = FitConfig(eps_f=eps, max_iter=scale.overfit_max_iter, seed=seed)
        fit = fit_exact_rank(data, scale.overfit_rank, config)
        summary.append({"eps_f": eps, "iterations": fit.iterations,
                        "converged": fit.converged, "loss": fit.loss_trace[-1],
                        "sigma2": fit.sigma2, "max_abs_B1": float(np.max(np.abs(fit.B1))),
                        "max_abs_B2": float(np.max(np.abs(fit.B2)))})
        J1, R = fit.B1.shape
        loadings.append(pd.DataFrame({
            "eps_f": eps,
            "variable": np.repeat(np.arange(1, J1 + 1), R),
            "component": np.tile(np.arange(1, R + 1), J1),
            "loading": fit.B1.ravel()}))
    return {"fig2-overfit": pd.DataFrame(summary),
            "fig2-overfit-loadings": pd.concat(loadings, ignore_index=True)}


def fig3(settings):
    """Nuclear norm path: RMSEs, sigma^2 and rank against lambda."""
    frames = []
    for seed in settings.seeds:
        truth = simulate_for(settings, seed)
        frame, _, _ = best_rmse_fit(truth, TABLE2_PENALTIES[0], settings.scale)
        frame.insert(0, "seed", seed)
        frame["selected"] = frame.index == frame["rmse_theta"].idxmin()
        frames.append(frame)
    return {"fig3": pd.concat(frames, ignore_index=True)}


def _hyper_items(scale):
    items = [PenaltySpec(family=PenaltyFamily.LQ, hyper=q) for q in scale.q_values]
    items += [PenaltySpec(family=PenaltyFamily.SCAD, hyper=g) for g in scale.scad_gammas]
    items += [PenaltySpec(family=PenaltyFamily.GDP, hyper=g) for g in scale.gdp_gammas]
    return items


def fig4(settings):
    """Minimum RMSE(Theta) and matching RMSE(mu), RMSE(Z) per hyper-parameter."""
    scale = settings.scale
    rows = []
    for seed in settings.seeds:
        truth = simulate_for(settings, seed)
        penalties = _hyper_items(scale)
        results = _run_parallel(settings, _best_row, [(truth, p, scale) for p in penalties])
        for penalty, (_, row) in zip(penalties, results):
            rows.append({"family": penalty.family.value, "hyper": penalty.hyper,
                         "seed": seed, "lambda": row["lambda"],
                         "rmse_theta": row["rmse_theta"], "rmse_mu": row["rmse_mu"],
                         "rmse_z": row["rmse_z"], "rank_hat": row["rank_hat"]})
    return {"fig4": pd.DataFrame(rows)}


def fig5(settings):
    """Leading singular values of the truth, the noise and each selected model."""
    scale = settings.scale
    n = scale.n_singular_values
    seed = settings.seeds[0]
    truth = simulate_for(settings, seed)

    def head(values):
        values = np.asarray(values, dtype=float)[:n]
        return pd.DataFrame({"index": np.arange(1, values.size + 1), "value": values})

    sources = {"true": np.linalg.svd(truth.Z, compute_uv=False),
               "noise": np.linalg.svd(np.hstack([truth.E1, truth.E2]), compute_uv=False)}
    results = _run_parallel(settings, _best_row,
                            [(truth, p, scale) for p in TABLE2_PENALTIES])
    for penalty, (fit, _) in zip(TABLE2_PENALTIES, results):
        sources[penalty.label] = fit.singular_values
    report, _ = best_full_information(truth)
    sources[FULL_INFORMATION] = report.singular_values
    frames = []
    for name, values in sources.items():
        frame = head(values)
        frame.insert(0, "source", name)
        frames.append(frame)
    return {"fig5": pd.concat(frames, ignore_index=True)}


def fig7(settings):
    """Selected-model RMSEs and rank over log-spaced SNR levels."""
    scale = settings.scale
    rows = []
    for seed in settings.seeds:
        for snr in scale.snr_values:
            truth = simulate_for(settings, seed, snr)
            results = _run_parallel(settings, _best_row,
                                    [(truth, p, scale) for p in SNR_PENALTIES])
            entries = [(p.label, row) for p, (_, row) in zip(SNR_PENALTIES, results)]
            report, _ = best_full_information(truth)
            entries.append((FULL_INFORMATION, report.model_dump()))
            for model, row in entries:
                entry = {"snr": snr, "seed": seed, "model": model}
                entry.update({c: row[c] for c in _REPORT_COLUMNS})
                rows.append(entry)
            logger.info("fig7 snr %.4g done", snr)
    return {"fig7": pd.DataFrame(rows)}


def _gamma_row(truth, gamma, scale, seed):
    penalty = PenaltySpec(family=PenaltyFamily.GDP, hyper=gamma)
    frame, _, row = best_rmse_fit(truth, penalty, scale, eps_f=scale.cv_eps_f)
    config = FitConfig(penalty=penalty, eps_f=scale.cv_eps_f, seed=seed)
    cv = lambda_path(truth.data, config, GridSpec(values=frame["lambda"].tolist()),
                     K=scale.folds, seed=seed)
    return {"gamma": gamma, "seed": seed,
            "min_rmse_theta": row["rmse_theta"], "lambda_rmse": row["lambda"],
            "min_cv_error": cv.cv_error[cv.best_index], "cv_se": cv.cv_se[cv.best_index],
            "lambda_cv": cv.best_lambda, "rank_refit": int(cv.rank_refit[cv.best_index])}


def fig8(settings):
    """GDP gamma sweep: minimum RMSE(Theta) and minimum CV error with its standard error."""
    scale = settings.scale
    rows = []
    for seed in settings.seeds:
        truth = simulate_for(settings, seed)
        rows += _run_parallel(settings, _gamma_row,
                              [(truth, g, scale, seed) for g in scale.gdp_gammas])
    return {"fig8": pd.DataFrame(rows)}


def fig9(settings):
    """CV error, RMSE(Theta) and ranks along the lambda path of GDP(1)."""
    scale = settings.scale
    frames = []
    for seed in settings.seeds:
        truth = simulate_for(settings, seed)
        data = truth.data
        config = FitConfig(penalty=TABLE2_PENALTIES[3], eps_f=scale.cv_eps_f, seed=seed)
        grid = lambda_grid(data, config, GridSpec(n_lambdas=scale.n_lambdas))
        cv = lambda_path(data, config, GridSpec(values=grid.tolist()), K=scale.folds,
                         seed=seed, n_jobs=settings.n_jobs)
        reports = [evaluate_fit(fit, truth) for fit in cv.refits]
        frames.append(pd.DataFrame({
            "seed": seed,
            "lambda": cv.lambda_grid,
            "cv_error": cv.cv_error,
            "cv_se": cv.cv_se,
            "rmse_theta": [r.rmse_theta for r in reports],
            "rank_cv": cv.rank_cv,
            "rank_refit": cv.rank_refit,
            "bayes_error": bayes_error(data, truth.theta, truth.sigma2),
            "selected": np.arange(cv.lambda_grid.size) == cv.best_index,
        }))
    return {"fig9": pd.concat(frames, ignore_index=True)}


EXPERIMENTS = {
    "table2": table2,
    "fig1": fig1,
    "fig2-overfit": fig2_overfit,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig7": fig7,
    "fig8": fig8,
    "fig9": fig9,
}


def run_experiment(name, settings, out_dir):
    """Run experiment ``name`` and write its tables in ``out_dir``. Returns the paths."""
    if name not in EXPERIMENTS:
        raise InvalidArgumentError("unknown experiment %r; valid ids: %s"
                                   % (name, ", ".join(EXPERIMENTS)))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info("running %s at %s scale, seeds %s", name, settings.scale.name, settings.seeds)
    written = []
    for stem, frame in EXPERIMENTS[name](settings).items():
        path = out_dir / ("%s.csv" % stem)
        write_table(frame, path, settings.excel)
        written.append(path)
        if settings.excel:
            written.append(path.with_suffix(".xlsx"))
    return written
