"""Error metrics and rank diagnostics for fits against simulated ground truth."""
from typing import List

import numpy as np
from pydantic import BaseModel, Field

from .config import RANK_TOL
from .exceptions import DataError, InvalidArgumentError
from .links_losses import LinkKind, joint_nll


class EvalReport(BaseModel):
    rmse_theta: float = Field(ge=0.0)
    rmse_theta1: float = Field(ge=0.0)
    rmse_theta2: float = Field(ge=0.0)
    rmse_mu: float = Field(ge=0.0)
    rmse_z: float = Field(ge=0.0)
    rmse_z1: float = Field(ge=0.0)
    rmse_z2: float = Field(ge=0.0)
    rank_hat: int = Field(ge=0)
    sigma2_hat: float
    singular_values: List[float]


def rmse(truth, estimate):
    """Relative squared Frobenius error ||T - T_hat||^2 / ||T||^2."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise DataError("shape mismatch: %s vs %s" % (truth.shape, estimate.shape))
    denom = float(np.sum(truth ** 2))
    if denom == 0.0:
        raise InvalidArgumentError("truth has zero norm")
    return float(np.sum((truth - estimate) ** 2)) / denom


def estimated_rank(singular_values, rank_tol=RANK_TOL):
    """Number of singular values above ``rank_tol`` times the largest."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        return 0
    top = float(np.max(s))
    if top <= 0.0:
        return 0
    return int(np.sum(s > rank_tol * top))


def evaluate_estimates(Theta_hat, mu_hat, Z_hat, truth, sigma2_hat=float("nan"),
                       rank_tol=RANK_TOL):
    """EvalReport of any estimate (mu_hat, Z_hat, Theta_hat) against the truth."""
    J1 = truth.J1
    Z_hat = np.asarray(Z_hat, dtype=float)
    Theta_hat = np.asarray(Theta_hat, dtype=float)
    if Z_hat.shape != truth.Z.shape:
        raise DataError("estimate is %s, truth is %s" % (Z_hat.shape, truth.Z.shape))
    s = np.linalg.svd(Z_hat, compute_uv=False)
    return EvalReport(
        rmse_theta=rmse(truth.theta, Theta_hat),
        rmse_theta1=rmse(truth.Theta1, Theta_hat[:, :J1]),
        rmse_theta2=rmse(truth.Theta2, Theta_hat[:, J1:]),
        rmse_mu=rmse(truth.mu, mu_hat),
        rmse_z=rmse(truth.Z, Z_hat),
        rmse_z1=rmse(truth.Z[:, :J1], Z_hat[:, :J1]),
        rmse_z2=rmse(truth.Z[:, J1:], Z_hat[:, J1:]),
        rank_hat=estimated_rank(s, rank_tol),
        sigma2_hat=float(sigma2_hat),
        singular_values=s.tolist(),
    )


def evaluate_fit(fit, truth, rank_tol=RANK_TOL):
    """Compare a ModelFit with the simulation ground truth."""
    if fit.J1 != truth.J1:
        raise DataError("fit has J1 = %d, truth has J1 = %d" % (fit.J1, truth.J1))
    return evaluate_estimates(fit.theta, fit.mu, fit.Z, truth, fit.sigma2, rank_tol)


def bayes_error(data, Theta, sigma2, link=LinkKind.LOGIT):
    """Negative log-likelihood per observed entry at the true parameters."""
    n_obs = data.n_observed
    if n_obs == 0:
        raise DataError("no observed entries")
    return joint_nll(data, Theta, sigma2, link) / n_obs
