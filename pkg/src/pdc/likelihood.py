"""Gaussian log-likelihoods attached to the predictive cost.

Under isotropic Gaussian noise of width sigma in both the reduced
dynamics and the complement embedding, the data log-likelihood is an
affine, decreasing function of the predictive cost, so likelihood
ranking and cost ranking coincide for any fixed sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ContractViolation, ReducedModel, TimeSeries, evaluate_cost,
    predicted_reduced, project_series,
)


@dataclass(frozen=True)
class IsotropicNoise:
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ContractViolation("sigma must be positive")


@dataclass(frozen=True)
class GeneralNoise:
    """Separate SPD covariances for the reduced dynamics and the complement."""

    sigma_x: np.ndarray
    sigma_y: np.ndarray

    def __post_init__(self):
        for name, S in (("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)):
            S = np.asarray(S, dtype=float)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise ContractViolation(f"{name} must be square")
            if np.linalg.norm(S - S.T) > 1e-10 * max(np.trace(S), 1.0):
                raise ContractViolation(f"{name} must be symmetric")
            if np.linalg.eigvalsh(S).min() <= 1e-12 * np.trace(S):
                raise ContractViolation(f"{name} must be positive-definite")
            object.__setattr__(self, name, S)


GaussianNoiseSpec = IsotropicNoise | GeneralNoise


def _residuals(model: ReducedModel, series: TimeSeries):
    X, Y, slot_of = project_series(model, series)
    J, Xhat = predicted_reduced(model, X, slot_of)
    rx = X[:, J + 1] - Xhat
    ry = Y[:, J + 1] - model.ybar[slot_of[J + 1]].T
    return rx, ry


def isotropic_loglik(model: ReducedModel, series: TimeSeries, sigma: float) -> float:
    """Log-likelihood under width-sigma isotropic Gaussian noise.

    Equals -(N - r) [n/2 log(2 pi) + n log sigma] - c_total / (2 sigma^2),
    so for fixed sigma it is maximized exactly where the cost is minimized.
    """
    if sigma <= 0:
        raise ContractViolation("sigma must be positive")
    rx, ry = _residuals(model, series)
    n = model.n
    terms = np.sum(rx * rx, axis=0) + np.sum(ry * ry, axis=0)
    const = 0.5 * n * np.log(2.0 * np.pi) + n * np.log(sigma)
    return float(np.sum(-const - terms / (2.0 * sigma ** 2)))


def optimal_sigma(model: ReducedModel, series: TimeSeries):
    """The noise width maximizing the isotropic log-likelihood.

    sigma = sqrt(c / n) with c the normalized cost.  A zero cost makes
    the likelihood unbounded; the degenerate flag is then set and 0.0
    returned.
    """
    _, normalized = evaluate_cost(model, series)
    if normalized == 0.0:
        return 0.0, True
    return float(np.sqrt(normalized / model.n)), False


def general_loglik(model: ReducedModel, series: TimeSeries,
                   spec: GeneralNoise) -> float:
    """Log-likelihood with separate covariances for dynamics and embedding.

    Reduces to the isotropic value when both covariances are sigma^2 I.
    """
    if not isinstance(spec, GeneralNoise):
        raise ContractViolation("spec must be a GeneralNoise")
    m, n = model.m, model.n
    if spec.sigma_x.shape != (m, m) or spec.sigma_y.shape != (n - m, n - m):
        raise ContractViolation("covariance shapes do not match the model")
    rx, ry = _residuals(model, series)
    sign_x, logdet_x = np.linalg.slogdet(spec.sigma_x)
    sign_y, logdet_y = np.linalg.slogdet(spec.sigma_y)
    qx = np.sum(rx * np.linalg.solve(spec.sigma_x, rx), axis=0)
    qy = np.sum(ry * np.linalg.solve(spec.sigma_y, ry), axis=0)
    const = 0.5 * (n * np.log(2.0 * np.pi) + logdet_x + logdet_y)
    return float(np.sum(-const - 0.5 * (qx + qy)))


def coordinate_ranking(spec: GeneralNoise):
    """Eigen-decompositions of the two covariances, largest variance first.

    Returns ((vals_x, vecs_x), (vals_y, vecs_y)); the eigenvectors rank
    the reduced and complement coordinates by noise variance.
    """
    out = []
    for S in (spec.sigma_x, spec.sigma_y):
        vals, vecs = np.linalg.eigh(S)
        order = np.argsort(vals)[::-1]
        out.append((vals[order], vecs[:, order]))
    return tuple(out)
