"""
Majorization-minimization fit of the penalized GSCA model.

Each iteration majorizes the joint negative log-likelihood by an isotropic
quadratic around the current Theta and the concave penalty by a linear
function of the singular values, then updates mu, Z and sigma^2 in closed
form. The recorded loss is the true penalized objective, which is
nonincreasing along the iterations.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import EPS_F, MAX_ITER, RANK_TOL, SIGMA2_FLOOR
from .exceptions import DataError, InvalidArgumentError, NumericError, SaturationWarning
from .links_losses import LinkKind, joint_gradient, joint_nll, lipschitz_bound
from .penalties import PenaltySpec, penalty_value, supergradient, svd, weighted_svt_parts

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelFit:
    """Estimated parameters of one GSCA fit, with factors and diagnostics."""

    mu: np.ndarray
    Z: np.ndarray
    sigma2: float
    singular_values: np.ndarray
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    loss_trace: np.ndarray
    iterations: int
    converged: bool
    warned_saturated: bool
    penalty: Optional[PenaltySpec] = None
    link: LinkKind = LinkKind.LOGIT
    exact_rank: Optional[int] = None

    @property
    def J1(self):
        return self.B1.shape[0]

    @property
    def rank(self):
        return self.A.shape[1]

    @property
    def theta(self):
        return self.mu[None, :] + self.Z

    @property
    def theta1(self):
        return self.theta[:, :self.J1]

    @property
    def theta2(self):
        return self.theta[:, self.J1:]

    def to_dict(self):
        """JSON-ready summary (matrices are written separately)."""
        return {
            "penalty": None if self.penalty is None else self.penalty.family.value,
            "lambda": None if self.penalty is None else self.penalty.lam,
            "hyper": None if self.penalty is None else self.penalty.hyper,
            "exact_rank": self.exact_rank,
            "link": LinkKind(self.link).value,
            "mu": self.mu.tolist(),
            "sigma2": float(self.sigma2),
            "singular_values": self.singular_values.tolist(),
            "rank": int(self.rank),
            "loss_trace": self.loss_trace.tolist(),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "warned_saturated": bool(self.warned_saturated),
        }


class FitConfig(BaseModel):
    """Settings of one fit. ``init`` set to a ModelFit means a warm start."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    penalty: PenaltySpec = Field(default_factory=PenaltySpec)
    link: LinkKind = LinkKind.LOGIT
    eps_f: float = Field(default=EPS_F, gt=0.0)
    max_iter: int = Field(default=MAX_ITER, ge=1)
    sigma2_floor: float = Field(default=SIGMA2_FLOOR, ge=0.0)
    rank_tol: float = Field(default=RANK_TOL, ge=0.0)
    seed: Optional[int] = 0
    init: Optional[ModelFit] = None

    def replace(self, **changes):
        values = {name: getattr(self, name) for name in type(self).model_fields}
        values.update(changes)
        return FitConfig(**values)


def majorization_target(Theta_k, grads, L):
    """H^k = Theta^k - (Q * grad f(Theta^k)) / L."""
    if not L > 0:
        raise InvalidArgumentError("L must be positive")
    return np.asarray(Theta_k, dtype=float) - np.asarray(grads, dtype=float) / L


def update_mu(H):
    """Column means of H."""
    return np.asarray(H, dtype=float).mean(axis=0)


def _center(H):
    H = np.asarray(H, dtype=float)
    return H - H.mean(axis=0, keepdims=True)


def _update_Z_parts(H, spec, weights, L):
    U, s, Vt = weighted_svt_parts(_center(H), weights, spec.lam / L)
    return (U * s) @ Vt, s


def update_Z(H, spec, weights, L):
    """Weighted singular value thresholding of the column-centered H."""
    if not L > 0:
        raise InvalidArgumentError("L must be positive")
    Z, _ = _update_Z_parts(H, spec, weights, L)
    return Z


def update_sigma2(X2, Theta2, Q2):
    """Mean squared residual over the observed quantitative entries."""
    Q2 = np.asarray(Q2, dtype=bool)
    n_obs = int(Q2.sum())
    if n_obs == 0:
        raise DataError("no observed quantitative entries")
    resid = np.where(Q2, np.asarray(X2, dtype=float) - Theta2, 0.0)
    return float(np.sum(resid ** 2) / n_obs)


def objective(data, Theta, sigma2, singular_values, penalty, link=LinkKind.LOGIT):
    """Penalized loss f1 + f2 + sum_r g(xi_r)."""
    value = joint_nll(data, Theta, sigma2, link)
    if penalty is not None:
        value += float(np.sum(penalty_value(penalty, singular_values)))
    return value


def quadratic_majorizer(data, Theta, Theta_k, sigma2, link=LinkKind.LOGIT):
    """
    f(Theta^k) + <Q * grad f(Theta^k), Theta - Theta^k> + L/2 ||Theta - Theta^k||^2.

    Touches f at Theta^k and lies above it everywhere; its minimiser over an
    unconstrained Theta is the majorization target H^k.
    """
    Theta = np.asarray(Theta, dtype=float)
    Theta_k = np.asarray(Theta_k, dtype=float)
    grads = joint_gradient(data, Theta_k, sigma2, link)
    L = lipschitz_bound(link, sigma2)
    diff = Theta - Theta_k
    return (joint_nll(data, Theta_k, sigma2, link) + float(np.sum(grads * diff))
            + 0.5 * L * float(np.sum(diff ** 2)))


def decompose_Z(Z, J1, rank_tol=RANK_TOL):
    """
    Factor Z = A [B1 B2]^T with A^T A = I * Identity.

    Singular values at or below ``rank_tol`` times the largest one are
    dropped. Returns (A, B1, B2, singular_values) where singular_values is
    the full nonincreasing spectrum of Z.
    """
    Z = np.asarray(Z, dtype=float)
    n_rows = Z.shape[0]
    U, s, Vt = svd(Z)
    R = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    scale = np.sqrt(n_rows)
    A = scale * U[:, :R]
    B = Vt[:R].T * s[:R] / scale
    return A, B[:J1], B[J1:], s


def _truncate(Z, rank):
    U, s, Vt = svd(Z)
    return (U[:, :rank] * s[:rank]) @ Vt[:rank]


def _initial_state(data, cfg, exact_rank=None):
    if cfg.init is not None:
        init = cfg.init
        if init.Z.shape != (data.I, data.J):
            raise DataError("warm start has shape %s, data is %d x %d"
                            % (init.Z.shape, data.I, data.J))
        mu = np.array(init.mu, dtype=float)
        Z = np.array(init.Z, dtype=float)
        sigma2 = float(init.sigma2)
    else:
        rng = np.random.default_rng(cfg.seed)
        Z = rng.uniform(size=(data.I, data.J))
        # Move the column offset of Z into mu; Theta is unchanged
        mu = Z.mean(axis=0)
        Z = Z - mu
        sigma2 = 1.0
    if exact_rank is not None:
        Z = _truncate(Z, exact_rank)
    return mu, Z, sigma2


def _run(data, cfg, exact_rank=None):
    penalty = None if exact_rank is not None else cfg.penalty
    link = cfg.link
    mu, Z, sigma2 = _initial_state(data, cfg, exact_rank)
    Theta = mu[None, :] + Z
    sv = svd(Z)[1]
    f_prev = objective(data, Theta, sigma2, sv, penalty, link)
    trace = [f_prev]
    converged = saturated = False
    k = 0
    for k in range(1, cfg.max_iter + 1):
        grads = joint_gradient(data, Theta, sigma2, link)
        L = lipschitz_bound(link, sigma2)
        H = majorization_target(Theta, grads, L)
        mu = update_mu(H)
        if exact_rank is None:
            weights = supergradient(penalty, sv)
            Z, sv = _update_Z_parts(H, penalty, weights, L)
        else:
            U, s, Vt = svd(_center(H))
            Z = (U[:, :exact_rank] * s[:exact_rank]) @ Vt[:exact_rank]
            sv = np.concatenate([s[:exact_rank], np.zeros(s.size - exact_rank)])
        Theta = mu[None, :] + Z
        if not np.all(np.isfinite(Theta)):
            raise NumericError("non-finite parameters at iteration %d" % k)
        sigma2 = update_sigma2(data.X2, Theta[:, data.J1:], data.Q2)
        if sigma2 < cfg.sigma2_floor:
            saturated = True
            if sigma2 > 0:
                trace.append(objective(data, Theta, sigma2, sv, penalty, link))
            message = ("sigma2 = %.4g fell below %.4g at iteration %d; "
                       "no low rank estimate was achieved" % (sigma2, cfg.sigma2_floor, k))
            logger.warning(message)
            warnings.warn(message, SaturationWarning, stacklevel=3)
            break
        f = objective(data, Theta, sigma2, sv, penalty, link)
        trace.append(f)
        rel = (f_prev - f) / abs(f_prev) if f_prev != 0 else 0.0
        if k % 100 == 0:
            logger.debug("iteration %d: loss %.10g, relative change %.3g", k, f, rel)
        if rel <= cfg.eps_f:
            converged = True
            break
        f_prev = f
    if not converged and not saturated:
        logger.warning("no convergence after %d iterations", cfg.max_iter)

    A, B1, B2, sv = decompose_Z(Z, data.J1, cfg.rank_tol)
    logger.info("fit finished: %d iterations, rank %d, sigma2 %.4g",
                k, A.shape[1], sigma2)
    return ModelFit(mu=mu, Z=Z, sigma2=sigma2, singular_values=sv, A=A, B1=B1, B2=B2,
                    loss_trace=np.asarray(trace), iterations=k, converged=converged,
                    warned_saturated=saturated, penalty=penalty, link=link,
                    exact_rank=exact_rank)


def fit_gsca(data, config):
    """Fit the penalized GSCA model with the MM algorithm."""
    return _run(data, config)


def fit_exact_rank(data, R, config):
    """Fit GSCA with rank(Z) = R and no penalty (truncated SVD Z update)."""
    R = int(R)
    if not 1 <= R < min(data.I, data.J):
        raise InvalidArgumentError(
            "R must satisfy 1 <= R < min(I, J) = %d, got %d" % (min(data.I, data.J), R))
    return _run(data, config, exact_rank=R)
