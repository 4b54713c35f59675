"""Binary logit by iteratively reweighted least squares."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.optimize import linprog
from scipy.special import expit, log_expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import DataError, EmptySample, NoConvergence, PerfectSeparation
from .linear import sandwich
from .results import RegressionResult
from .spec import ModelSpec, build_design, check_rank, frame_for, normalize_se_type

MAX_ITER = 100
TOL = 1e-10
SATURATION = 30.0


def loglik(beta, X, y):
    eta = X @ beta
    return float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))


def is_separable(X, y):
    """True if some coefficient vector classifies every row with margin 1.

    Solved as an LP feasibility problem: ``(2y - 1) * x_i @ b >= 1`` for all i.
    """
    sign = 2 * y - 1
    A = -(X * sign[:, None])
    res = linprog(
        np.zeros(X.shape[1]),
        A_ub=A,
        b_ub=-np.ones(len(y)),
        bounds=[(None, None)] * X.shape[1],
        method="highs",
    )
    return res.status == 0


def fit_logit(X, y, names=None, se_type="classical", groups=None, max_iter=MAX_ITER, tol=TOL):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("logit outcome must be binary")
    if y.min() == y.max():
        raise PerfectSeparation("outcome has no variation")
    check_rank(X, names)
    if is_separable(X, y):
        raise PerfectSeparation("outcome is perfectly separated by the covariates")

    beta = np.zeros(k)
    ll = loglik(beta, X, y)
    converged = False
    for n_iter in range(1, max_iter + 1):
        p = expit(X @ beta)
        w = p * (1 - p)
        grad = X.T @ (y - p)
        hess = (X * w[:, None]).T @ X
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = loglik(cand, X, y)
            if ll_new >= ll - 1e-12 or t < 1e-8:
                break
            t /= 2
        beta, ll_old, ll = cand, ll, ll_new
        if abs(ll - ll_old) < tol:
            converged = True
            break
    if not converged:
        raise NoConvergence(f"logit did not converge in {max_iter} iterations", n_iter=max_iter)
    eta = X @ beta
    if np.abs(eta).max() > SATURATION:
        raise PerfectSeparation("fitted probabilities saturate at 0 or 1 (quasi-complete separation)")

    p = expit(eta)
    hess = (X * (p * (1 - p))[:, None]).T @ X
    bread = np.linalg.inv(hess)
    bread = (bread + bread.T) / 2
    n_clusters = None
    if se_type == "classical":
        cov = bread
    else:
        cov, n_clusters = sandwich(bread, X * (y - p)[:, None], se_type, n, k, groups)
    ybar = y.mean()
    ll0 = n * (ybar * np.log(ybar) + (1 - ybar) * np.log(1 - ybar))
    return RegressionResult(
        model="logit",
        names=names,
        coef=beta,
        cov=cov,
        se_type=se_type,
        nobs=n,
        df_resid=n - k,
        stat_dist="normal",
        pseudo_r2=1 - ll / ll0,
        loglik=ll,
        bic=-2 * ll + k * np.log(n),
        n_clusters=n_clusters,
        converged=converged,
        n_iter=n_iter,
        resid=y - p,
    )


def drop_constant_groups(frame, fe_cols, outcome="__y__"):
    """Drop fixed-effect groups whose outcome never varies, until none remain."""
    dropped = {fe: [] for fe in fe_cols}
    while True:
        changed = False
        for fe in fe_cols:
            col = f"__fe__{fe}"
            spread = frame.groupby(col, sort=True)[outcome].agg(["min", "max"])
            flat = spread.index[spread["min"] == spread["max"]]
            if len(flat):
                dropped[fe] += [str(g) for g in flat]
                frame = frame[~frame[col].isin(flat)]
                changed = True
        if not changed or frame.empty:
            return frame, {k: sorted(v) for k, v in dropped.items() if v}


def logit(spec: ModelSpec, data: pd.DataFrame) -> RegressionResult:
    """Logit for a :class:`ModelSpec`; fixed effects as dummies.

    Fixed-effect groups with an all-0 or all-1 outcome carry no information
    and would diverge, so they are removed (repeatedly) before estimation and
    listed in ``dropped_groups``.
    """
    dropped = {}
    if spec.fixed_effects:
        frame, _ = frame_for(spec, data)
        frame, dropped = drop_constant_groups(frame, spec.fixed_effects)
        if frame.empty:
            raise EmptySample("every fixed-effect group lacks outcome variation")
        data = data.loc[frame.index]
    d = build_design(spec, data)
    res = fit_logit(d.X, d.y, d.names, spec.se_type, d.groups)
    res.dropped_groups = dropped
    if d.n_dropped:
        res.notes.append(f"{d.n_dropped} incomplete rows dropped")
    return res


class Logit(ClassifierMixin, BaseEstimator):
    """Unpenalized binary logit fitted by IRLS.

    Parameters
    ----------
    fit_intercept : bool, default=True
    cov_type : {"classical", "HC1", "cluster"}, default="classical"
    max_iter : int, default=100
    tol : float, default=1e-10
        Convergence threshold on the change in log-likelihood.
    """

    def __init__(self, fit_intercept=True, cov_type="classical", max_iter=MAX_ITER, tol=TOL):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        kind, _ = normalize_se_type(self.cov_type, cluster="groups" if groups is not None else None)
        design = np.column_stack([np.ones(len(y)), X]) if self.fit_intercept else X
        names = (["const"] if self.fit_intercept else []) + [f"x{i}" for i in range(X.shape[1])]
        self.result_ = fit_logit(design, y, names, kind, groups, self.max_iter, self.tol)
        offset = int(self.fit_intercept)
        self.coef_ = self.result_.coef[offset:]
        self.intercept_ = float(self.result_.coef[0]) if self.fit_intercept else 0.0
        self.classes_ = np.array([0.0, 1.0])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.float64)
