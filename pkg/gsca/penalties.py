"""
Concave spectral penalties on singular values.

Each penalty g(eta) acts on one singular value eta >= 0; the penalty on a
matrix is the sum over its singular values. The supergradient column gives
the weights of the linear majorizer used by the solver.
"""
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg
from scipy.optimize import minimize_scalar

from . import config
from .exceptions import InvalidArgumentError, NumericError


class PenaltyFamily(str, Enum):
    NUCLEAR = "nuclear"
    LQ = "lq"
    SCAD = "scad"
    GDP = "gdp"


_DEFAULT_HYPER = {
    PenaltyFamily.NUCLEAR: None,
    PenaltyFamily.LQ: config.DEFAULT_LQ_Q,
    PenaltyFamily.SCAD: config.DEFAULT_SCAD_GAMMA,
    PenaltyFamily.GDP: config.DEFAULT_GDP_GAMMA,
}


class PenaltySpec(BaseModel):
    """
    Penalty family with its tuning parameter ``lam`` and hyper-parameter.

    ``hyper`` is q for Lq and gamma for SCAD and GDP; it is filled with the
    family default when omitted and ignored for the nuclear norm.
    """

    model_config = ConfigDict(frozen=True)

    family: PenaltyFamily = PenaltyFamily.GDP
    lam: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    hyper: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_hyper(cls, values):
        if isinstance(values, dict) and values.get("hyper") is None:
            family = PenaltyFamily(values.get("family", PenaltyFamily.GDP))
            values = {**values, "hyper": _DEFAULT_HYPER[family]}
        return values

    @model_validator(mode="after")
    def _check_hyper(self):
        h = self.hyper
        if self.family is PenaltyFamily.LQ and not 0.0 < h <= 1.0:
            raise ValueError("Lq needs 0 < q <= 1, got %r" % h)
        if self.family is PenaltyFamily.SCAD and not h > 2.0:
            raise ValueError("SCAD needs gamma > 2, got %r" % h)
        if self.family is PenaltyFamily.GDP and not h > 0.0:
            raise ValueError("GDP needs gamma > 0, got %r" % h)
        return self

    def with_lambda(self, lam):
        return PenaltySpec(family=self.family, lam=lam, hyper=self.hyper)

    @property
    def label(self):
        if self.family is PenaltyFamily.NUCLEAR:
            return "L1"
        if self.family is PenaltyFamily.LQ:
            return "L%g" % self.hyper
        return "%s(%g)" % (self.family.value.upper(), self.hyper)


def _eta_array(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(np.isnan(eta)) or np.any(eta < 0):
        raise InvalidArgumentError("eta must be nonnegative")
    return eta


def _scalar_or_array(value):
    return float(value) if np.ndim(value) == 0 else value


def penalty_value(spec, eta):
    """g(eta) for a singular value or an array of them."""
    eta = _eta_array(eta)
    lam, h = spec.lam, spec.hyper
    family = spec.family
    if family is PenaltyFamily.NUCLEAR:
        value = lam * eta
    elif family is PenaltyFamily.LQ:
        value = lam * eta ** h
    elif family is PenaltyFamily.SCAD:
        middle = (-eta ** 2 + 2.0 * h * lam * eta - lam ** 2) / (2.0 * (h - 1.0))
        value = np.where(eta <= lam, lam * eta,
                         np.where(eta <= h * lam, middle,
                                  lam ** 2 * (h + 1.0) / 2.0))
    else:
        value = lam * np.log1p(eta / h)
    return _scalar_or_array(value)


def supergradient(spec, eta):
    """Supergradient of g at eta; Lq returns +inf at eta = 0."""
    eta = _eta_array(eta)
    lam, h = spec.lam, spec.hyper
    family = spec.family
    if family is PenaltyFamily.NUCLEAR:
        omega = np.full_like(eta, lam)
    elif family is PenaltyFamily.LQ:
        if lam == 0.0:
            omega = np.zeros_like(eta)
        else:
            with np.errstate(divide="ignore"):
                omega = np.where(eta > 0, lam * h * eta ** (h - 1.0), np.inf)
    elif family is PenaltyFamily.SCAD:
        omega = np.where(eta <= lam, lam,
                         np.where(eta <= h * lam, (h * lam - eta) / (h - 1.0), 0.0))
    else:
        omega = lam / (h + eta)
    return _scalar_or_array(np.asarray(omega, dtype=float))


def svd(M):
    """Thin SVD with a fallback LAPACK driver."""
    try:
        return linalg.svd(M, full_matrices=False, lapack_driver="gesdd")
    except linalg.LinAlgError:
        try:
            return linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
        except linalg.LinAlgError as err:
            raise NumericError("SVD did not converge: %s" % err) from err


def thresholds(weights, step, n):
    """Per-singular-value thresholds step * omega_r for the first n values."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape[0] < n:
        raise InvalidArgumentError(
            "need at least %d weights, got %d" % (n, weights.shape[0]))
    weights = weights[:n]
    if step == 0.0:
        return np.zeros(n)
    # An infinite weight keeps a zero singular value at zero
    return np.where(np.isinf(weights), np.inf, step * weights)


def weighted_svt_parts(M, weights, step):
    """Weighted singular value thresholding returning (U, s_thresholded, Vt)."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError("matrix has non-finite entries")
    if step < 0:
        raise InvalidArgumentError("step must be nonnegative")
    U, s, Vt = svd(M)
    s_new = np.maximum(s - thresholds(weights, step, s.shape[0]), 0.0)
    return U, s_new, Vt


def weighted_svt(M, weights, step):
    """U diag((s_r - step * omega_r)_+) V^T for the SVD U diag(s) V^T of M."""
    U, s_new, Vt = weighted_svt_parts(M, weights, step)
    return (U * s_new) @ Vt


def _prox_objective(spec, z):
    return lambda eta: 0.5 * (z - eta) ** 2 + penalty_value(spec, eta)


def scalar_prox(spec, z):
    """
    argmin over eta >= 0 of 0.5 (z - eta)^2 + g(eta), by brute force.

    A dense grid on [0, z] locates the basin; a bounded scalar search around
    the best grid point refines it. Only for thresholding curves and tests.
    """
    if not z >= 0:
        raise InvalidArgumentError("z must be nonnegative, got %r" % (z,))
    z = float(z)
    if z == 0.0:
        return 0.0
    objective = _prox_objective(spec, z)
    step = 1e-4 * max(1.0, z)
    n = int(np.ceil(z / step)) + 1
    grid = np.linspace(0.0, z, n)
    values = 0.5 * (z - grid) ** 2 + penalty_value(spec, grid)
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, n - 1)]
    candidates = [grid[best]]
    if hi > lo:
        refined = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
        candidates.append(float(refined.x))
    return float(min(candidates, key=objective))


def thresholding_curve(spec, z_values):
    """scalar_prox evaluated on each z of ``z_values``."""
    return np.array([scalar_prox(spec, z) for z in np.asarray(z_values, dtype=float)])
