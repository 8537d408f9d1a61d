"""
Link functions, per-block negative log-likelihoods and their gradients.

The binary block X1 is modelled through a logit or probit link, the
quantitative block X2 through a Gaussian with common variance sigma^2.
Missing entries are carried by the masks Q1, Q2 (1 = observed) and never
enter any sum, whatever value is stored at their position.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .exceptions import DataError, InvalidArgumentError

_MACHINE_EPS = np.finfo(float).eps
_LOG_2PI = np.log(2.0 * np.pi)


class LinkKind(str, Enum):
    LOGIT = "logit"
    PROBIT = "probit"


@dataclass(frozen=True)
class CoupledData:
    """
    Binary block X1 and quantitative block X2 measured on the same I rows.

    Missing values are stored as 0 in ``X1``/``X2`` and flagged by 0 in the
    masks ``Q1``/``Q2``.
    """

    X1: np.ndarray
    X2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray

    def __post_init__(self):
        X1 = np.asarray(self.X1, dtype=float)
        X2 = np.asarray(self.X2, dtype=float)
        Q1 = np.asarray(self.Q1, dtype=bool)
        Q2 = np.asarray(self.Q2, dtype=bool)
        if X1.ndim != 2 or X2.ndim != 2:
            raise DataError("X1 and X2 must be 2-d matrices")
        if X1.shape != Q1.shape or X2.shape != Q2.shape:
            raise DataError("masks must have the shape of their block")
        if X1.shape[0] != X2.shape[0]:
            raise DataError(
                "X1 has %d rows but X2 has %d" % (X1.shape[0], X2.shape[0]))
        if X1.shape[0] < 2 or X1.shape[1] < 1 or X2.shape[1] < 1:
            raise DataError("need I >= 2, J1 >= 1 and J2 >= 1, got %s and %s"
                            % (X1.shape, X2.shape))
        X1 = np.where(Q1, X1, 0.0)
        X2 = np.where(Q2, X2, 0.0)
        if not np.all(np.isfinite(X1)) or not np.all(np.isfinite(X2)):
            raise DataError("observed entries must be finite")
        if np.any((X1 != 0.0) & (X1 != 1.0)):
            raise DataError("observed binary entries must be 0 or 1")
        for name, value in (("X1", X1), ("X2", X2), ("Q1", Q1), ("Q2", Q2)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @classmethod
    def from_arrays(cls, X1, X2):
        """Build from two arrays where NaN marks a missing entry."""
        X1 = np.asarray(X1, dtype=float)
        X2 = np.asarray(X2, dtype=float)
        return cls(X1=X1, X2=X2, Q1=~np.isnan(X1), Q2=~np.isnan(X2))

    def with_mask(self, Q1, Q2):
        """Same data with the masks intersected with ``Q1``/``Q2``."""
        return CoupledData(X1=self.X1, X2=self.X2,
                           Q1=self.Q1 & np.asarray(Q1, dtype=bool),
                           Q2=self.Q2 & np.asarray(Q2, dtype=bool))

    @property
    def I(self):
        return self.X1.shape[0]

    @property
    def J1(self):
        return self.X1.shape[1]

    @property
    def J2(self):
        return self.X2.shape[1]

    @property
    def J(self):
        return self.J1 + self.J2

    @property
    def X(self):
        return np.hstack([self.X1, self.X2])

    @property
    def Q(self):
        return np.hstack([self.Q1, self.Q2])

    @property
    def n_observed(self):
        return int(self.Q1.sum() + self.Q2.sum())

    def split(self, M):
        """Split an I x J matrix into its binary and quantitative parts."""
        M = np.asarray(M)
        if M.shape[-1] != self.J:
            raise DataError("expected %d columns, got %d" % (self.J, M.shape[-1]))
        return M[..., :self.J1], M[..., self.J1:]


def _check_shapes(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise DataError("shape mismatch: %s vs %s" % (shape, np.shape(a)))


def inverse_link(kind, theta):
    """phi(theta) for the logit or probit link, kept inside the open (0, 1)."""
    kind = LinkKind(kind)
    theta_arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta_arr)):
        raise InvalidArgumentError("theta must be finite")
    p = expit(theta_arr) if kind is LinkKind.LOGIT else ndtr(theta_arr)
    p = np.clip(p, _MACHINE_EPS, 1.0 - _MACHINE_EPS)
    return float(p) if p.ndim == 0 else p


def _bernoulli_terms(X1, Theta1, kind):
    # Per-entry -[x log phi + (1 - x) log(1 - phi)]
    if kind is LinkKind.LOGIT:
        return np.logaddexp(0.0, Theta1) - X1 * Theta1
    return -(X1 * log_ndtr(Theta1) + (1.0 - X1) * log_ndtr(-Theta1))


def binary_nll(X1, Theta1, Q1, kind=LinkKind.LOGIT):
    """Negative log-likelihood f1 of the observed binary entries."""
    kind = LinkKind(kind)
    _check_shapes(X1, Theta1, Q1)
    Q1 = np.asarray(Q1, dtype=bool)
    X1 = np.where(Q1, X1, 0.0)
    terms = _bernoulli_terms(X1, np.asarray(Theta1, dtype=float), kind)
    return float(np.sum(np.where(Q1, terms, 0.0)))


def quantitative_nll(X2, Theta2, sigma2, Q2):
    """Gaussian negative log-likelihood f2 including the log normaliser."""
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be positive, got %r" % (sigma2,))
    _check_shapes(X2, Theta2, Q2)
    Q2 = np.asarray(Q2, dtype=bool)
    resid = np.where(Q2, np.asarray(X2, dtype=float) - Theta2, 0.0)
    n_obs = int(Q2.sum())
    return float(0.5 * np.sum(resid ** 2) / sigma2
                 + 0.5 * n_obs * (_LOG_2PI + np.log(sigma2)))


def joint_nll(data, Theta, sigma2, kind=LinkKind.LOGIT):
    """f1 + f2 over the column split Theta = [Theta1 Theta2]."""
    Theta1, Theta2 = data.split(Theta)
    if Theta1.shape != data.X1.shape or Theta2.shape != data.X2.shape:
        raise DataError("Theta must be %d x %d" % (data.I, data.J))
    return (binary_nll(data.X1, Theta1, data.Q1, kind)
            + quantitative_nll(data.X2, Theta2, sigma2, data.Q2))


def grad_f1(X1, Theta1, Q1, kind=LinkKind.LOGIT):
    """Entrywise derivative of f1, zero at missing entries."""
    kind = LinkKind(kind)
    _check_shapes(X1, Theta1, Q1)
    Q1 = np.asarray(Q1, dtype=bool)
    Theta1 = np.asarray(Theta1, dtype=float)
    X1 = np.where(Q1, X1, 0.0)
    if kind is LinkKind.LOGIT:
        grad = expit(Theta1) - X1
    else:
        # phi'(phi - x) / (phi (1 - phi)), in log space for both outcomes
        log_pdf = -0.5 * Theta1 ** 2 - 0.5 * _LOG_2PI
        grad = np.where(X1 > 0.5,
                        -np.exp(log_pdf - log_ndtr(Theta1)),
                        np.exp(log_pdf - log_ndtr(-Theta1)))
    return np.where(Q1, grad, 0.0)


def grad_f2(X2, Theta2, Q2, sigma2):
    """Entrywise derivative of f2 with respect to Theta2, zero at missing entries."""
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be positive, got %r" % (sigma2,))
    _check_shapes(X2, Theta2, Q2)
    Q2 = np.asarray(Q2, dtype=bool)
    return np.where(Q2, (np.asarray(Theta2, dtype=float) - X2) / sigma2, 0.0)


def joint_gradient(data, Theta, sigma2, kind=LinkKind.LOGIT):
    """Q * grad f(Theta) for the concatenated parameter matrix."""
    Theta1, Theta2 = data.split(Theta)
    return np.hstack([grad_f1(data.X1, Theta1, data.Q1, kind),
                      grad_f2(data.X2, Theta2, data.Q2, sigma2)])


def lipschitz_bound(kind, sigma2):
    """
    Upper bound L on the second derivative of every per-entry loss.

    The Bernoulli curvature is at most 0.25 under the logit link and at most
    1 under the probit link; the Gaussian curvature is 1 / sigma^2.
    """
    kind = LinkKind(kind)
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be positive, got %r" % (sigma2,))
    binary_curvature = 0.25 if kind is LinkKind.LOGIT else 1.0
    return max(binary_curvature, 1.0 / sigma2)
