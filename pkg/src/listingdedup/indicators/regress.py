"""Linear models with absorbed fixed effects and fixed-effect logits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.optimize import linprog


class RankDeficiencyError(ValueError):
    pass


class SeparationError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class RegressionResult:
    """Coefficients of the non-absorbed regressors.

    Standard errors are conventional (homoskedastic for OLS, inverse
    information for logit); no clustering.
    """

    names: list
    coef: np.ndarray
    se: np.ndarray
    n_obs: int
    absorbed: int = 0
    dof: int = 0
    kind: str = "ols"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.all(np.isfinite(self.coef)) and np.all(np.isfinite(self.se))):
            raise ValueError("non-finite estimates")

    def __getitem__(self, name) -> float:
        return float(self.coef[self.names.index(name)])

    def stderr(self, name) -> float:
        return float(self.se[self.names.index(name)])

    def tstat(self, name) -> float:
        return self[name] / self.stderr(name)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({"term": self.names, "coef": self.coef, "se": self.se,
                             "t": self.coef / self.se})


def _codes(series) -> np.ndarray:
    return pd.factorize(series, sort=True)[0]


def demean(M: np.ndarray, groups: Sequence[np.ndarray], tol=1e-10, max_iter=10_000) -> np.ndarray:
    """Remove group means for every grouping, alternating until the change is below ``tol``."""
    M = np.array(M, dtype=float, copy=True)
    if not groups:
        return M
    counts = [np.bincount(g).astype(float) for g in groups]
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    for _ in range(max_iter):
        change = 0.0
        for g, n in zip(groups, counts):
            for j in range(M.shape[1]):
                means = np.bincount(g, weights=M[:, j], minlength=len(n)) / n
                step = means[g]
                M[:, j] -= step
                change = max(change, float(np.max(np.abs(step))))
        if len(groups) == 1 or change <= tol * scale:
            return M
    raise NonConvergenceError("fixed-effect demeaning did not converge")


def _prepare(rows: pd.DataFrame, response, regressors, fe):
    cols = [response, *regressors, *fe]
    missing = [c for c in cols if c not in rows.columns]
    if missing:
        raise KeyError(f"missing columns: {missing}")
    data = rows[cols].dropna()
    if len(data) == 0:
        raise ValueError("no complete observations")
    return data


def fit_ols_fe(rows: pd.DataFrame, response: str, regressors: Sequence[str], fe: Sequence[str] = (),
               intercept: bool = True, tol: float = 1e-10) -> RegressionResult:
    """Least squares of ``response`` on ``regressors`` with the ``fe`` groupings absorbed.

    Rows with missing values are dropped. Without fixed effects an intercept
    (``const``) is added unless ``intercept=False``. Coefficients equal those
    of the full dummy-variable regression.
    """
    regressors, fe = list(regressors), list(fe)
    data = _prepare(rows, response, regressors, fe)
    y = data[response].to_numpy(dtype=float)
    X = data[regressors].to_numpy(dtype=float).reshape(len(data), len(regressors))
    names = list(regressors)
    groups = [_codes(data[f]) for f in fe]
    if not fe and intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["const"] + names
    absorbed = 0
    for k, g in enumerate(groups):
        n_g = int(g.max()) + 1
        absorbed += n_g if k == 0 else n_g - 1
    Z = demean(np.column_stack([y, X]), groups, tol=tol)
    yt, Xt = Z[:, 0], Z[:, 1:]
    k = Xt.shape[1]
    if k == 0:
        raise ValueError("no regressors")
    norms = np.linalg.norm(X, axis=0)
    tnorms = np.linalg.norm(Xt, axis=0)
    weak = tnorms <= 1e-9 * np.maximum(norms, 1.0)
    if weak.any():
        bad = [names[j] for j in np.nonzero(weak)[0]]
        raise RankDeficiencyError(f"regressors absorbed by fixed effects or constant: {bad}")
    if np.linalg.matrix_rank(Xt / tnorms) < k:
        raise RankDeficiencyError("collinear regressors")
    dof = len(y) - k - absorbed
    if dof <= 0:
        raise RankDeficiencyError("not enough observations for the regressors and fixed effects")
    coef, *_ = np.linalg.lstsq(Xt, yt, rcond=None)
    resid = yt - Xt @ coef
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(Xt.T @ Xt)
    tss = float(yt @ yt)
    return RegressionResult(
        names, coef, np.sqrt(np.diag(cov)), len(y), absorbed, dof, "ols",
        {"r2_within": 1.0 - float(resid @ resid) / tss if tss > 0 else float("nan"), "sigma2": sigma2},
    )


# --- logit ------------------------------------------------------------------


def _drop_constant_groups(data, response, fe):
    while True:
        keep = np.ones(len(data), dtype=bool)
        for f in fe:
            rate = data.groupby(f, sort=False)[response].transform("mean").to_numpy()
            keep &= (rate > 0) & (rate < 1)
        if keep.all():
            return data
        data = data[keep]
        if len(data) == 0:
            return data


def separated(X: np.ndarray, y: np.ndarray) -> bool:
    """True when some direction ``d`` separates the classes (completely or quasi-completely).

    Solves ``max sum(s_i x_i d)`` subject to ``s_i x_i d >= 0``, ``-1 <= d <= 1``
    with ``s_i = +1`` for positives and ``-1`` for negatives.
    """
    S = np.where(y[:, None] == 1, X, -X)
    res = linprog(-S.sum(axis=0), A_ub=-S, b_ub=np.zeros(len(S)), bounds=[(-1, 1)] * X.shape[1],
                  method="highs")
    if res.status != 0:
        return False
    return -res.fun > 1e-7 * max(1.0, np.abs(S).sum(axis=1).mean())


def fit_logit(rows: pd.DataFrame, response: str, regressors: Sequence[str], fe: Sequence[str] = (),
              tol: float = 1e-8, max_iter: int = 100) -> RegressionResult:
    """Maximum-likelihood logit with fixed effects entered as dummies.

    Groups in which the outcome never varies carry no information about the
    slopes and are dropped first. Newton steps (with step halving) run until
    the gradient norm falls below ``tol``. Only the intercept and the
    ``regressors`` are reported.
    """
    regressors, fe = list(regressors), list(fe)
    data = _prepare(rows, response, regressors, fe)
    y_all = data[response].to_numpy(dtype=float)
    if not np.isin(y_all, (0.0, 1.0)).all():
        raise ValueError("logit response must be 0/1")
    n_before = len(data)
    data = _drop_constant_groups(data, response, fe)
    if len(data) == 0 or data[response].nunique() < 2:
        raise ValueError("both outcome classes are needed")
    y = data[response].to_numpy(dtype=float)
    blocks = [np.ones((len(data), 1)), data[regressors].to_numpy(dtype=float).reshape(len(data), -1)]
    for f in fe:
        codes = _codes(data[f])
        D = np.zeros((len(data), int(codes.max()) + 1))
        D[np.arange(len(data)), codes] = 1.0
        blocks.append(D[:, 1:])
    X = np.hstack(blocks)
    names = ["const"] + regressors
    k = X.shape[1]
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficiencyError("collinear regressors or fixed effects")
    if separated(X, y):
        raise SeparationError("outcome is (quasi-)separated by the regressors; estimates unbounded")

    beta = np.zeros(k)
    beta[0] = np.log(y.mean() / (1 - y.mean()))

    def loglik(b):
        eta = X @ b
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))

    ll = loglik(beta)
    for it in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        grad = X.T @ (y - p)
        if np.linalg.norm(grad) < tol:
            break
        H = (X * (p * (1 - p))[:, None]).T @ X
        step = np.linalg.solve(H, grad)
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = loglik(cand)
            if ll_new >= ll - 1e-12 or t < 1e-8:
                break
            t /= 2
        beta, ll = cand, ll_new
    else:
        raise NonConvergenceError("logit Newton iterations did not converge")
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    H = (X * (p * (1 - p))[:, None]).T @ X
    cov = np.linalg.inv(H)
    r = len(names)
    return RegressionResult(
        names, beta[:r], np.sqrt(np.diag(cov))[:r], len(y), k - r, len(y) - k, "logit",
        {"loglik": ll, "iterations": it, "dropped_rows": n_before - len(y)},
    )


def odds_ratio(result: RegressionResult, name: str, delta: float = 1.0) -> float:
    """Multiplicative change in the odds for a ``delta`` change in ``name``."""
    return float(np.exp(result[name] * delta))
