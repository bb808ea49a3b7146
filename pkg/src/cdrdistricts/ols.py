"""Closed-form ordinary least squares with the diagnostics the regression
table needs: coefficient standard errors, p-values, R^2, adjusted R^2, BIC.

BIC uses the Gaussian-likelihood convention n*ln(RSS/n) + k*ln(n) with k
counting every estimated coefficient (intercept included), so only BIC
differences across models on the same data are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import SingularDesign


@dataclass(frozen=True)
class OlsFit:
    names: tuple[str, ...]
    beta: tuple[float, ...]
    se: tuple[float, ...]
    t_stat: tuple[float, ...]
    p_value: tuple[float, ...]
    r_squared: float
    adj_r_squared: float
    bic: float
    n: int
    rss: float

    def coefficient(self, name: str) -> tuple[float, float]:
        """(beta, se) for a named column."""
        i = self.names.index(name)
        return self.beta[i], self.se[i]


def ols_fit(
    X: np.ndarray,
    y: Sequence[float],
    names: Optional[Sequence[str]] = None,
    add_intercept: bool = True,
) -> OlsFit:
    """Fit y = X beta + e by the normal equations.

    ``X`` is (n, p); an intercept column is appended unless disabled.
    Raises :class:`SingularDesign` when the design has deficient rank.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if names is None:
        names = tuple(f"x{i}" for i in range(p))
    names = tuple(names)
    if len(names) != p:
        raise ValueError(f"{len(names)} names for {p} columns")
    if add_intercept:
        X = np.hstack([X, np.ones((n, 1))])
        names = names + ("intercept",)
    k = X.shape[1]
    if n <= k:
        raise SingularDesign(f"n={n} observations for k={k} coefficients")
    if np.linalg.matrix_rank(X) < k:
        raise SingularDesign("design matrix is rank deficient")
    xtx = X.T @ X
    xty = X.T @ y
    try:
        beta = np.linalg.solve(xtx, xty)
        xtx_inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError as err:
        raise SingularDesign(str(err)) from err
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = n - k
    sigma2 = rss / dof
    se = np.sqrt(np.clip(np.diag(xtx_inv) * sigma2, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stat = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p_value = 2.0 * sps.t.sf(np.abs(t_stat), dof)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if tss == 0.0 else 1.0 - rss / tss
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    bic = n * np.log(rss / n) + k * np.log(n) if rss > 0 else -np.inf
    return OlsFit(
        names=names,
        beta=tuple(float(b) for b in beta),
        se=tuple(float(s) for s in se),
        t_stat=tuple(float(t) for t in t_stat),
        p_value=tuple(float(q) for q in p_value),
        r_squared=float(r2),
        adj_r_squared=float(adj),
        bic=float(bic),
        n=n,
        rss=rss,
    )
