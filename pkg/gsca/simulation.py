"""
Simulation of coupled binary and quantitative data from the GSCA model.

The common structure is built in SVD form, Z1 = U D1 V1^T and
Z2 = U D2 V2^T, with D1 = c1 D and D2 = c2 D scaled to reach the requested
latent signal-to-noise ratios. Binary entries are Bernoulli draws through
the logit link, quantitative entries carry Gaussian noise.
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg
from scipy.special import expit, logit
from scipy.stats import logistic

from .exceptions import DataError, InvalidArgumentError, NumericError
from .links_losses import CoupledData

logger = logging.getLogger(__name__)

LOGISTIC_VARIANCE = float(logistic.var())
_QR_RETRIES = 10


class SimParams(BaseModel):
    """Parameters of one simulated data set. Defaults are the full-scale setting."""

    model_config = ConfigDict(frozen=True)

    I: int = Field(default=160, ge=2)
    J1: int = Field(default=410, ge=1)
    J2: int = Field(default=1000, ge=1)
    R: int = Field(default=10, ge=1)
    snr1: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    snr2: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    sigma2: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    mu1: Optional[List[float]] = None
    mu2: Optional[List[float]] = None
    seed: int = 0
    noise_scaling: Literal["expected", "realized"] = "expected"
    balanced: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.R > min(self.I - 1, self.J1, self.J2):
            raise ValueError("R must be <= min(I - 1, J1, J2) = %d"
                             % min(self.I - 1, self.J1, self.J2))
        if self.mu1 is not None and len(self.mu1) != self.J1:
            raise ValueError("mu1 needs %d values, got %d" % (self.J1, len(self.mu1)))
        if self.mu2 is not None and len(self.mu2) != self.J2:
            raise ValueError("mu2 needs %d values, got %d" % (self.J2, len(self.mu2)))
        return self


@dataclass(frozen=True)
class SimGroundTruth:
    """Simulated data with every parameter used to generate it."""

    X1: np.ndarray
    X2: np.ndarray
    Theta1: np.ndarray
    Theta2: np.ndarray
    mu: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    D: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    c1: float
    c2: float
    snr1: float
    snr2: float
    sigma2: float
    params: SimParams
    binary_columns: np.ndarray

    @property
    def J1(self):
        return self.X1.shape[1]

    @property
    def theta(self):
        return np.hstack([self.Theta1, self.Theta2])

    @property
    def X1_star(self):
        """Latent quantitative matrix behind X1."""
        return self.Theta1 + self.E1

    @property
    def data(self):
        return CoupledData.from_arrays(self.X1, self.X2)

    def select_binary_columns(self, kept):
        """Ground truth restricted to the binary columns ``kept``."""
        kept = np.asarray(kept, dtype=int)
        J1 = self.J1
        columns = np.concatenate([kept, np.arange(J1, J1 + self.X2.shape[1])])
        return replace(self, X1=self.X1[:, kept], Theta1=self.Theta1[:, kept],
                       mu=self.mu[columns], Z=self.Z[:, columns], V1=self.V1[kept],
                       E1=self.E1[:, kept],
                       binary_columns=self.binary_columns[kept])

    def manifest(self):
        return {
            "I": int(self.X1.shape[0]),
            "J1": int(self.J1),
            "J2": int(self.X2.shape[1]),
            "R": int(self.D.size),
            "seed": self.params.seed,
            "target_snr1": self.params.snr1,
            "target_snr2": self.params.snr2,
            "realized_snr1": self.snr1,
            "realized_snr2": self.snr2,
            "sigma2": self.sigma2,
            "c1": self.c1,
            "c2": self.c2,
            "noise_scaling": self.params.noise_scaling,
            "balanced": self.params.balanced,
            "D": self.D.tolist(),
            "binary_columns": self.binary_columns.tolist(),
        }


def marginals_to_offsets(p, I):
    """Logit of marginal probabilities clamped to [1/(2I), 1 - 1/(2I)]."""
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InvalidArgumentError("marginal probabilities must lie in [0, 1]")
    bound = 1.0 / (2.0 * I)
    return logit(np.clip(p, bound, 1.0 - bound))


def load_marginals(path):
    """Read a one-column CSV of marginal probabilities."""
    frame = pd.read_csv(path)
    if frame.shape[1] != 1:
        raise DataError("%s: expected one column, found %d" % (path, frame.shape[1]))
    values = pd.to_numeric(frame.iloc[:, 0], errors="coerce").to_numpy()
    if np.any(np.isnan(values)):
        raise DataError("%s: non-numeric marginal probability" % path)
    return values


def expected_logistic_energy(I, J1):
    """E ||E1||_F^2 for I x J1 standard logistic noise."""
    return I * J1 * LOGISTIC_VARIANCE


def _orthonormal(rng, n_rows, R):
    for _ in range(_QR_RETRIES):
        Q, Rmat = linalg.qr(rng.standard_normal((n_rows, R)), mode="economic")
        if np.min(np.abs(np.diag(Rmat))) > 1e-10:
            return Q
    raise NumericError("QR of a Gaussian matrix was rank deficient %d times" % _QR_RETRIES)


def simulate_coupled(params):
    """Draw X1, X2 and the ground truth for ``params``."""
    rng = np.random.default_rng(params.seed)
    I, J1, J2, R = params.I, params.J1, params.J2, params.R

    U = _orthonormal(rng, I, R)
    V1 = _orthonormal(rng, J1, R)
    V2 = _orthonormal(rng, J2, R)
    D = np.sort(np.abs(rng.standard_normal(R)))[::-1]

    if params.mu1 is not None:
        mu1 = np.asarray(params.mu1, dtype=float)
    elif params.balanced:
        mu1 = np.zeros(J1)
    else:
        # Imbalanced binary data, mean marginal probability 1/15
        mu1 = marginals_to_offsets(rng.beta(2.0, 28.0, size=J1), I)
    mu2 = (np.asarray(params.mu2, dtype=float) if params.mu2 is not None
           else rng.standard_normal(J2))

    E2 = np.sqrt(params.sigma2) * rng.standard_normal((I, J2))
    uniforms = rng.uniform(size=(I, J1))

    energy_d = float(np.sum(D ** 2))
    c1 = np.sqrt(params.snr1 * expected_logistic_energy(I, J1) / energy_d)
    noise2 = (I * J2 * params.sigma2 if params.noise_scaling == "expected"
              else float(np.sum(E2 ** 2)))
    c2 = np.sqrt(params.snr2 * noise2 / energy_d)
    D1, D2 = c1 * D, c2 * D

    Z1 = (U * D1) @ V1.T
    Z2 = (U * D2) @ V2.T
    Theta1 = mu1[None, :] + Z1
    Theta2 = mu2[None, :] + Z2

    X1 = (uniforms < expit(Theta1)).astype(float)
    # Latent logistic noise consistent with X1: x1 = 1 exactly when Theta1 + E1 > 0
    with np.errstate(divide="ignore"):
        E1 = -logit(uniforms)
    X2 = Theta2 + E2

    Z = np.hstack([Z1, Z2])
    offset = Z.mean(axis=0)
    mu = np.concatenate([mu1, mu2]) + offset
    Z = Z - offset

    snr1 = float(np.sum(Z1 ** 2)) / expected_logistic_energy(I, J1)
    snr2 = float(np.sum(Z2 ** 2)) / float(np.sum(E2 ** 2))
    logger.info("simulated %d x (%d + %d), rank %d, c1 %.4g, c2 %.4g",
                I, J1, J2, R, c1, c2)
    return SimGroundTruth(X1=X1, X2=X2, Theta1=Theta1, Theta2=Theta2, mu=mu, Z=Z,
                          U=U, V1=V1, V2=V2, D=D, D1=D1, D2=D2, E1=E1, E2=E2,
                          c1=float(c1), c2=float(c2), snr1=snr1, snr2=snr2,
                          sigma2=params.sigma2, params=params,
                          binary_columns=np.arange(J1))


def drop_uninformative_binary_columns(X1, Q1):
    """
    Remove binary columns whose observed entries are all equal.

    Returns (X1', Q1', kept) where ``kept`` indexes the surviving columns.
    Columns without any observed entry are removed as well.
    """
    X1 = np.asarray(X1, dtype=float)
    Q1 = np.asarray(Q1, dtype=bool)
    col_min = np.min(np.where(Q1, X1, np.inf), axis=0)
    col_max = np.max(np.where(Q1, X1, -np.inf), axis=0)
    kept = np.flatnonzero(Q1.any(axis=0) & (col_min != col_max))
    dropped = X1.shape[1] - kept.size
    if dropped:
        logger.info("dropped %d binary columns without variation", dropped)
    return X1[:, kept], Q1[:, kept], kept


def sca_full_information(X1_star, X2, R):
    """
    PCA on [X1* X2]: column means as mu, the rank-R truncated SVD of the
    centered concatenation as Z. Returns (Theta_hat, mu_hat, Z_hat).
    """
    X = np.hstack([np.asarray(X1_star, dtype=float), np.asarray(X2, dtype=float)])
    R = int(R)
    if R < 0 or R > min(X.shape):
        raise InvalidArgumentError("R must lie in [0, %d], got %d" % (min(X.shape), R))
    mu = X.mean(axis=0)
    Xc = X - mu
    if R == 0:
        Z = np.zeros_like(Xc)
    else:
        U, s, Vt = linalg.svd(Xc, full_matrices=False)
        Z = (U[:, :R] * s[:R]) @ Vt[:R]
    return mu[None, :] + Z, mu, Z
