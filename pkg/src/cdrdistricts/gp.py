"""Gaussian-process regression with a squared-exponential ARD kernel plus
additive white noise.

Hyperparameters maximize the log marginal likelihood by L-BFGS-B on log
parameters with analytic gradients, from a heuristic start plus seeded
random restarts.  Cholesky factorizations escalate jitter before giving
up.  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from .errors import DimensionMismatch, IllConditionedKernel


@dataclass(frozen=True)
class GpConfig:
    n_restarts: int = 5
    max_iter: int = 200
    noise_floor_rel: float = 1e-8  # relative to var(y)
    lengthscale_bounds_rel: tuple[float, float] = (1e-2, 1e2)  # relative to span
    signal_bounds_rel: tuple[float, float] = (1e-4, 1e3)  # relative to var(y)


@dataclass
class GpModel:
    X: np.ndarray
    y: np.ndarray
    y_mean: float
    signal_var: float
    lengthscales: np.ndarray
    noise_var: float
    log_marginal_likelihood: float
    best_so_far: list[float] = field(default_factory=list)
    seed: int = 0
    _chol: Optional[np.ndarray] = None
    _alpha: Optional[np.ndarray] = None


def _se_cross(Xa: np.ndarray, Xb: np.ndarray, ls: np.ndarray) -> np.ndarray:
    d = (Xa[:, None, :] - Xb[None, :, :]) / ls
    return np.exp(-0.5 * (d * d).sum(axis=2))


def _chol_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    scale = float(np.mean(np.diag(K))) or 1.0
    jitter = 0.0
    while True:
        try:
            L = sla.cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except sla.LinAlgError:
            jitter = 1e-10 * scale if jitter == 0.0 else jitter * 100.0
            if jitter > 1e-2 * scale:
                raise IllConditionedKernel(
                    f"Cholesky failed even with jitter {jitter:g}"
                ) from None


def _nlml_and_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray):
    n, d = X.shape
    s = np.exp(theta[0])
    ls = np.exp(theta[1 : 1 + d])
    g = np.exp(theta[1 + d])
    E = _se_cross(X, X, ls)
    K = s * E + g * np.eye(n)
    L, _ = _chol_with_jitter(K)
    alpha = sla.cho_solve((L, True), y)
    nlml = (
        0.5 * float(y @ alpha)
        + float(np.log(np.diag(L)).sum())
        + 0.5 * n * np.log(2.0 * np.pi)
    )
    Kinv = sla.cho_solve((L, True), np.eye(n))
    W = Kinv - np.outer(alpha, alpha)
    grad = np.empty_like(theta)
    grad[0] = 0.5 * float((W * (s * E)).sum())
    for j in range(d):
        diff = X[:, j, None] - X[None, :, j]
        dK = s * E * (diff * diff) / (ls[j] ** 2)
        grad[1 + j] = 0.5 * float((W * dK).sum())
    grad[1 + d] = 0.5 * float(np.trace(W) * g)
    return nlml, grad


def gp_fit(
    X: np.ndarray,
    y: Sequence[float],
    config: GpConfig | None = None,
    seed: int = 0,
) -> GpModel:
    """Fit kernel hyperparameters by marginal-likelihood maximization.

    The target is centered internally; inputs are expected standardized
    (any scale works, the ARD lengthscales absorb it).
    """
    config = config or GpConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < 2:
        raise DimensionMismatch("gp_fit needs at least 2 observations")
    y_mean = float(y.mean())
    yc = y - y_mean
    vy = max(float(yc.var()), 1e-12)
    span = np.maximum(X.max(axis=0) - X.min(axis=0), 1e-8)

    lo = np.concatenate(
        [
            [np.log(config.signal_bounds_rel[0] * vy)],
            np.log(config.lengthscale_bounds_rel[0] * span),
            [np.log(config.noise_floor_rel * vy)],
        ]
    )
    hi = np.concatenate(
        [
            [np.log(config.signal_bounds_rel[1] * vy)],
            np.log(config.lengthscale_bounds_rel[1] * span),
            [np.log(10.0 * vy)],
        ]
    )
    bounds = list(zip(lo, hi))
    theta0 = np.concatenate(
        [[np.log(vy)], np.log(span / 3.0), [np.log(max(1e-2 * vy, np.exp(lo[-1])))]]
    )
    theta0 = np.clip(theta0, lo, hi)

    rng = np.random.default_rng(seed)
    starts = [theta0]
    for _ in range(max(0, config.n_restarts - 1)):
        starts.append(rng.uniform(lo, hi))

    best_theta = None
    best_nlml = np.inf
    best_so_far: list[float] = []
    for start in starts:
        res = minimize(
            _nlml_and_grad,
            start,
            args=(X, yc),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": config.max_iter},
        )
        if res.fun < best_nlml:
            best_nlml = float(res.fun)
            best_theta = res.x
        best_so_far.append(-best_nlml)

    s = float(np.exp(best_theta[0]))
    ls = np.exp(best_theta[1 : 1 + d])
    g = float(np.exp(best_theta[1 + d]))
    K = s * _se_cross(X, X, ls) + g * np.eye(n)
    L, _ = _chol_with_jitter(K)
    alpha = sla.cho_solve((L, True), yc)
    model = GpModel(
        X=X,
        y=y,
        y_mean=y_mean,
        signal_var=s,
        lengthscales=ls,
        noise_var=g,
        log_marginal_likelihood=-best_nlml,
        best_so_far=best_so_far,
        seed=seed,
    )
    model._chol = L
    model._alpha = alpha
    return model


def gp_predict(model: GpModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (noise-free) variance per query row.

    Far from the data the variance approaches the prior signal variance.
    """
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    if Xs.shape[1] != model.X.shape[1]:
        raise DimensionMismatch(
            f"expected {model.X.shape[1]} input dims, got {Xs.shape[1]}"
        )
    Ks = model.signal_var * _se_cross(model.X, Xs, model.lengthscales)
    mean = model.y_mean + Ks.T @ model._alpha
    v = sla.solve_triangular(model._chol, Ks, lower=True)
    var = np.clip(model.signal_var - (v * v).sum(axis=0), 0.0, None)
    return mean, var
