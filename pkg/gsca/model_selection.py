"""
Model selection for the penalized GSCA model.

Element-wise K-fold cross-validation: the observed entries of each block are
split into K folds along wrapped diagonals, each fold is held out as missing
in turn, and the held-out negative log-likelihood per entry is the fold
error. The penalty strength is rescaled by the fraction of observed entries
so that fits on partial data are penalized comparably to full-data fits.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field

from .config import DEFAULT_FOLDS, DEFAULT_N_LAMBDAS, FOLD_RETRIES, LOW_PRECISION_EPS
from .evaluation import evaluate_fit
from .exceptions import InvalidArgumentError, NumericError, SaturationWarning
from .links_losses import joint_nll
from .matrix_io import append_rows_csv
from .penalties import PenaltyFamily
from .solver import fit_gsca

logger = logging.getLogger(__name__)

_MAX_BOUND_STEPS = 60


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index of every entry of [X1 X2]; -1 marks an unobserved entry."""

    fold_of_entry: np.ndarray
    K: int
    J1: int

    def test_masks(self, k):
        """Boolean masks (Q1, Q2) of the entries held out in fold k."""
        held = self.fold_of_entry == k
        return held[:, :self.J1], held[:, self.J1:]

    def held_out_count(self, k):
        return int(np.sum(self.fold_of_entry == k))

    def fold_sizes(self):
        """Sizes per fold as a (2, K) array: binary block, quantitative block."""
        f1, f2 = self.fold_of_entry[:, :self.J1], self.fold_of_entry[:, self.J1:]
        return np.array([[np.sum(f1 == k) for k in range(self.K)],
                         [np.sum(f2 == k) for k in range(self.K)]])


def _block_folds(Q, K, rng):
    I, Jb = Q.shape
    offsets = rng.permutation(Jb) % K
    rows, cols = np.nonzero(Q)
    # Observed entries sorted by wrapped diagonal (i + p_j) mod K, then by
    # row and column, are dealt to the folds in turn; fold sizes differ by
    # at most one whatever the missing pattern.
    order = np.lexsort((cols, rows, (rows + offsets[cols]) % K))
    folds = np.full((I, Jb), -1, dtype=int)
    folds[rows[order], cols[order]] = np.arange(rows.size) % K
    return folds


def _covers_rows_and_columns(folds, K):
    observed = folds >= 0
    for axis in (0, 1):
        n_obs = observed.sum(axis=axis)
        low = np.where(observed, folds, K).min(axis=axis)
        high = np.where(observed, folds, -1).max(axis=axis)
        if np.any((n_obs >= 2) & (low == high)):
            return False
    return True


def diagonal_folds(data, K=DEFAULT_FOLDS, seed=0):
    """
    Assign every observed entry of each block to one of K folds.

    The observed entries are ordered along the wrapped diagonals
    (i + p(j)) mod K, with seeded random column offsets p, and dealt to the
    folds round-robin, so fold sizes within a block differ by at most one.
    Rows and columns with at least two observed entries never fall in a
    single fold.
    """
    K = int(K)
    if K < 2:
        raise InvalidArgumentError("K must be at least 2, got %d" % K)
    for name, Q in (("X1", data.Q1), ("X2", data.Q2)):
        if K > int(Q.sum()):
            raise InvalidArgumentError(
                "K = %d exceeds the %d observed entries of %s" % (K, int(Q.sum()), name))
    rng = np.random.default_rng(seed)
    blocks = []
    for Q in (data.Q1, data.Q2):
        for attempt in range(FOLD_RETRIES):
            folds = _block_folds(Q, K, rng)
            if _covers_rows_and_columns(folds, K):
                break
        else:
            raise NumericError("no fold pattern covering every row and column "
                               "after %d attempts" % FOLD_RETRIES)
        blocks.append(folds)
    return FoldAssignment(fold_of_entry=np.hstack(blocks), K=K, J1=data.J1)


def effective_lambda(lam, n_observed, I, J):
    """lambda * n_observed / (I * J)."""
    if not 0 <= n_observed <= I * J:
        raise InvalidArgumentError("n_observed must lie in [0, I*J]")
    return lam * n_observed / (I * J)


def _warm_start_allowed(penalty):
    # Lq thresholds a zero singular value at infinity, so a warm start can
    # never gain rank; paths over lambda use cold starts for it.
    return penalty.family is not PenaltyFamily.LQ


@dataclass
class CvErrorResult:
    mean: float
    per_fold: np.ndarray
    held_out: np.ndarray
    ranks: np.ndarray
    iterations: np.ndarray
    saturated: np.ndarray
    fits: list = field(repr=False, default_factory=list)

    def __iter__(self):
        # Unpacks as (mean, per-fold values)
        return iter((self.mean, self.per_fold))


def _fit_fold(data, folds, k, lam, config):
    T1, T2 = folds.test_masks(k)
    train = data.with_mask(~T1, ~T2)
    eff = effective_lambda(lam, train.n_observed, data.I, data.J)
    cfg = config.replace(penalty=config.penalty.with_lambda(eff))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        fit = fit_gsca(train, cfg)
    n_test = folds.held_out_count(k)
    if fit.warned_saturated:
        error = np.inf
    else:
        test = data.with_mask(T1, T2)
        error = joint_nll(test, fit.theta, fit.sigma2, config.link) / n_test
    logger.debug("fold %d: %d held out, rank %d, error %.6g", k, n_test, fit.rank, error)
    return fit, error, n_test


def cv_error(data, folds, lam, config, inits=None, n_jobs=1):
    """
    K-fold CV error at penalty strength ``lam``.

    ``inits`` holds one warm start per fold, None for a cold start;
    ``config.init`` is ignored. A fold only ever starts from a fit of the same fold, which
    never saw its held-out entries, so the folds are independent and may
    run in parallel.
    """
    K = folds.K
    inits = list(inits) if inits is not None else [None] * K
    if len(inits) != K:
        raise InvalidArgumentError("need %d fold warm starts, got %d" % (K, len(inits)))
    configs = [config.replace(init=init) for init in inits]
    if n_jobs == 1:
        results = [_fit_fold(data, folds, k, lam, configs[k]) for k in range(K)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_fit_fold)(data, folds, k, lam, configs[k]) for k in range(K))
    fits = [r[0] for r in results]
    per_fold = np.array([r[1] for r in results], dtype=float)
    saturated = np.array([f.warned_saturated for f in fits])
    if saturated.any():
        logger.info("lambda %.4g: %d saturated folds", lam, int(saturated.sum()))
    return CvErrorResult(mean=float(np.mean(per_fold)), per_fold=per_fold,
                         held_out=np.array([r[2] for r in results]),
                         ranks=np.array([f.rank for f in fits]),
                         iterations=np.array([f.iterations for f in fits]),
                         saturated=saturated, fits=fits)


class GridSpec(BaseModel):
    """Lambda grid: explicit ``values`` or ``n_lambdas`` log-spaced between bounds."""

    model_config = ConfigDict(frozen=True)

    n_lambdas: int = Field(default=DEFAULT_N_LAMBDAS, ge=1)
    lambda_max: Optional[float] = Field(default=None, gt=0.0)
    lambda_min: Optional[float] = Field(default=None, gt=0.0)
    values: Optional[List[float]] = None
    bound_eps: float = Field(default=LOW_PRECISION_EPS, gt=0.0)


@dataclass
class CvResult:
    lambda_grid: np.ndarray
    cv_error: np.ndarray
    cv_se: np.ndarray
    rank_cv: np.ndarray
    rank_refit: np.ndarray
    best_lambda: float
    best_index: int
    fold_errors: np.ndarray
    refits: list = field(repr=False, default_factory=list)

    @property
    def refit(self):
        """Full-data refit at the selected lambda."""
        return self.refits[self.best_index]

    def to_dict(self):
        def clean(values):
            return [None if not np.isfinite(v) else float(v) for v in values]
        return {
            "lambda_grid": self.lambda_grid.tolist(),
            "cv_error": clean(self.cv_error),
            "cv_se": clean(self.cv_se),
            "rank_cv": self.rank_cv.tolist(),
            "rank_refit": self.rank_refit.tolist(),
            "best_lambda": float(self.best_lambda),
            "best_index": int(self.best_index),
        }


def _rank_at(data, config, lam):
    cfg = config.replace(penalty=config.penalty.with_lambda(lam))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SaturationWarning)
        fit = fit_gsca(data, cfg)
    return fit.rank, fit.warned_saturated


def lambda_bounds(data, config, eps=LOW_PRECISION_EPS, start=1.0):
    """
    (lambda_0, lambda_t) from low precision fits.

    lambda_0 is the smallest power-of-two multiple of ``start`` giving rank
    at most 1; lambda_t is reached by halving until the fit has rank
    min(I, J) - 1 or saturates.
    """
    cfg = config.replace(eps_f=eps, init=None)
    full_rank = min(data.I, data.J) - 1
    lam = float(start)
    rank, _ = _rank_at(data, cfg, lam)
    steps = 0
    if rank > 1:
        while rank > 1:
            lam *= 2.0
            rank, _ = _rank_at(data, cfg, lam)
            steps += 1
            if steps > _MAX_BOUND_STEPS:
                raise NumericError("no lambda up to %.3g gives rank <= 1 (last rank %d)"
                                   % (lam, rank))
        lam_max = lam
    else:
        while rank <= 1:
            lam_max = lam
            lam /= 2.0
            rank, _ = _rank_at(data, cfg, lam)
            steps += 1
            if steps > _MAX_BOUND_STEPS:
                raise NumericError("no lambda down to %.3g gives rank > 1" % lam)
    lam = lam_max
    steps = 0
    while True:
        lam /= 2.0
        rank, saturated = _rank_at(data, cfg, lam)
        steps += 1
        if rank >= full_rank or saturated:
            break
        if steps > _MAX_BOUND_STEPS:
            raise NumericError("no lambda down to %.3g reaches rank %d (last rank %d)"
                               % (lam, full_rank, rank))
    logger.info("lambda bounds: [%.4g, %.4g]", lam, lam_max)
    return lam_max, lam


def lambda_grid(data, config, grid_spec):
    """Descending lambda grid for ``grid_spec``."""
    if grid_spec.values:
        return np.sort(np.asarray(grid_spec.values, dtype=float))[::-1]
    lam_max, lam_min = grid_spec.lambda_max, grid_spec.lambda_min
    if lam_max is None or lam_min is None:
        found_max, found_min = lambda_bounds(data, config, grid_spec.bound_eps)
        lam_max = lam_max if lam_max is not None else found_max
        lam_min = lam_min if lam_min is not None else found_min
    if lam_min > lam_max:
        raise InvalidArgumentError("lambda_min %.4g exceeds lambda_max %.4g"
                                   % (lam_min, lam_max))
    if grid_spec.n_lambdas == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_min, grid_spec.n_lambdas)


def lambda_path(data, config, grid_spec=None, K=DEFAULT_FOLDS, seed=0,
                warm_start=True, n_jobs=1, log_path=None):
    """
    Cross-validate every lambda of the grid, largest first, and refit.

    With ``warm_start`` every fold starts from its own fit at the previous
    lambda and the largest lambda starts cold. Each lambda is followed by a
    full-data refit started from the last fold fit; the refit at the lambda
    of minimum CV error is returned as ``CvResult.refit``.
    """
    grid_spec = grid_spec or GridSpec()
    grid = lambda_grid(data, config, grid_spec)
    folds = diagonal_folds(data, K, seed)
    warm = warm_start and _warm_start_allowed(config.penalty)
    errors, ses, rank_cv, rank_refit, fold_errors, refits = [], [], [], [], [], []
    inits = [None] * K
    for lam in grid:
        result = cv_error(data, folds, lam, config, inits=inits, n_jobs=n_jobs)
        finite = result.per_fold[np.isfinite(result.per_fold)]
        se = (float(np.std(result.per_fold, ddof=1) / np.sqrt(K))
              if finite.size == K else np.inf)
        last = result.fits[-1]
        refit_cfg = config.replace(penalty=config.penalty.with_lambda(lam),
                                   init=last if not last.warned_saturated else None)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SaturationWarning)
            refit = fit_gsca(data, refit_cfg)
        errors.append(result.mean)
        ses.append(se)
        rank_cv.append(float(np.mean(result.ranks)))
        rank_refit.append(refit.rank)
        fold_errors.append(result.per_fold)
        refits.append(refit)
        logger.info("lambda %.4g: cv error %.6g (se %.3g), rank cv %.1f, refit %d",
                    lam, result.mean, se, rank_cv[-1], refit.rank)
        if log_path is not None:
            append_rows_csv(log_path, [
                {"lambda": lam, "fold": k, "error": result.per_fold[k],
                 "held_out": int(result.held_out[k]), "rank": int(result.ranks[k]),
                 "iterations": int(result.iterations[k]),
                 "saturated": bool(result.saturated[k])}
                for k in range(K)])
        if warm:
            inits = [None if fit.warned_saturated else fit for fit in result.fits]
    errors = np.asarray(errors)
    if not np.any(np.isfinite(errors)):
        raise NumericError("every lambda of the grid saturated")
    best = int(np.argmin(errors))
    return CvResult(lambda_grid=grid, cv_error=errors, cv_se=np.asarray(ses),
                    rank_cv=np.asarray(rank_cv), rank_refit=np.asarray(rank_refit),
                    best_lambda=float(grid[best]), best_index=best,
                    fold_errors=np.vstack(fold_errors), refits=refits)


def lambda_for_rank(data, config, target_rank, max_steps=40):
    """
    Bisection in log(lambda) for a fit of rank ``target_rank``.

    Meant for exploratory two or three component models, where lambda only
    has to give the requested number of components. Returns (lambda, fit).
    """
    target_rank = int(target_rank)
    if not 1 <= target_rank < min(data.I, data.J):
        raise InvalidArgumentError("target rank out of range: %d" % target_rank)
    hi, lo = lambda_bounds(data, config)
    for _ in range(max_steps):
        lam = float(np.sqrt(hi * lo))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SaturationWarning)
            fit = fit_gsca(data, config.replace(penalty=config.penalty.with_lambda(lam)))
        if fit.rank == target_rank and not fit.warned_saturated:
            return lam, fit
        if fit.rank > target_rank or fit.warned_saturated:
            lo = lam
        else:
            hi = lam
    raise NumericError("no lambda in [%.4g, %.4g] gives rank %d" % (lo, hi, target_rank))


def fit_path(data, config, grid, warm_start=True):
    """
    Fit along a descending lambda grid, each fit warm-started from the last.

    Returns a table (lambda, rank, sigma2, loss, iterations, converged,
    saturated) and the list of fits.
    """
    rows, fits = [], []
    warm = warm_start and _warm_start_allowed(config.penalty)
    cfg = config
    for lam in np.sort(np.asarray(grid, dtype=float))[::-1]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SaturationWarning)
            fit = fit_gsca(data, cfg.replace(penalty=config.penalty.with_lambda(lam)))
        rows.append({"lambda": lam, "rank": fit.rank, "sigma2": fit.sigma2,
                     "loss": fit.loss_trace[-1], "iterations": fit.iterations,
                     "converged": fit.converged, "saturated": fit.warned_saturated})
        fits.append(fit)
        logger.debug("lambda %.4g: rank %d, sigma2 %.4g", lam, fit.rank, fit.sigma2)
        if warm and not fit.warned_saturated:
            cfg = config.replace(init=fit)
    return pd.DataFrame(rows), fits


def rmse_path(data, truth, config, grid, warm_start=True):
    """
    fit_path with every fit evaluated against the simulation truth.

    The table gains the EvalReport columns (rmse_*, rank_hat, sigma2_hat).
    """
    frame, fits = fit_path(data, config, grid, warm_start)
    reports = [evaluate_fit(fit, truth, config.rank_tol).model_dump(exclude={"singular_values"})
               for fit in fits]
    frame = pd.concat([frame, pd.DataFrame(reports)], axis=1)
    best = int(frame["rmse_theta"].idxmin())
    logger.info("minimum rmse(theta) %.4f at lambda %.4g, rank %d",
                frame.at[best, "rmse_theta"], frame.at[best, "lambda"],
                frame.at[best, "rank_hat"])
    return frame, fits
