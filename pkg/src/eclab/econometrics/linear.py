"""Least squares with classical, HC1 and cluster-robust (CR1) covariance."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import TooFewObservations, ValidationError
from .results import RegressionResult
from .spec import ModelSpec, build_design, check_rank, normalize_se_type


def cluster_scores(scores, groups):
    """Per-cluster sums of the rows of ``scores``, clusters in sorted order."""
    codes, uniques = pd.factorize(pd.Series(groups).astype(str), sort=True)
    out = np.zeros((len(uniques), scores.shape[1]))
    np.add.at(out, codes, scores)
    return out


def sandwich(bread, scores, se_type, nobs, k, groups=None):
    """``bread @ meat @ bread`` with the HC1 or CR1 finite-sample factor.

    ``scores`` are the per-observation score rows (``x_i * e_i`` for least
    squares). Returns (covariance, number of clusters or None).
    """
    if se_type == "HC1":
        meat = scores.T @ scores
        return nobs / (nobs - k) * bread @ meat @ bread, None
    if se_type == "cluster":
        s = cluster_scores(scores, groups)
        g = s.shape[0]
        if g < 2:
            raise ValidationError("clustered standard errors need at least two clusters")
        factor = g / (g - 1) * (nobs - 1) / (nobs - k)
        return factor * bread @ (s.T @ s) @ bread, g
    raise ValidationError(f"no sandwich for SE type {se_type!r}")


def fit_ols(X, y, names=None, se_type="HC1", groups=None, check=True, model="ols"):
    """OLS on arrays. ``X`` must already contain any intercept column."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if n <= k:
        raise TooFewObservations(n, k)
    if check:
        check_rank(X, names)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    bread = np.linalg.inv(X.T @ X)
    bread = (bread + bread.T) / 2
    ssr = float(resid @ resid)
    n_clusters = None
    if se_type == "classical":
        cov = ssr / (n - k) * bread
    else:
        cov, n_clusters = sandwich(bread, X * resid[:, None], se_type, n, k, groups)
    has_const = bool(np.any(np.all(X == 1.0, axis=0)))
    tss = float(((y - y.mean()) ** 2).sum()) if has_const else float(y @ y)
    r2 = 1 - ssr / tss if tss > 0 else np.nan
    adj = 1 - (1 - r2) * (n - has_const) / (n - k)
    df = (n_clusters - 1) if n_clusters else n - k
    return RegressionResult(
        model=model,
        names=names,
        coef=coef,
        cov=cov,
        se_type=se_type,
        nobs=n,
        df_resid=df,
        stat_dist="t",
        r2=r2,
        adj_r2=adj,
        n_clusters=n_clusters,
        resid=resid,
    )


def ols(spec: ModelSpec, data: pd.DataFrame) -> RegressionResult:
    """Least squares for a :class:`ModelSpec` on a DataFrame.

    Fixed effects enter as dummies (first sorted level dropped) next to a
    single intercept; incomplete rows are dropped listwise. With fixed
    effects the within R2 (relative to the dummies-only fit) is reported as
    ``within_r2``; ``r2`` is the overall R2 of the dummy regression.
    """
    d = build_design(spec, data)
    res = fit_ols(d.X, d.y, d.names, spec.se_type, d.groups)
    if d.n_fe_columns:
        keep = [i for i, n in enumerate(d.names) if n == "const" or "[" in n]
        Xfe = d.X[:, keep]
        coef_fe, *_ = np.linalg.lstsq(Xfe, d.y, rcond=None)
        ssr_fe = float(((d.y - Xfe @ coef_fe) ** 2).sum())
        ssr = float(res.resid @ res.resid)
        res.within_r2 = 1 - ssr / ssr_fe if ssr_fe > 0 else np.nan
    if d.n_dropped:
        res.notes.append(f"{d.n_dropped} incomplete rows dropped")
    return res


class OLS(RegressorMixin, BaseEstimator):
    """Least-squares regressor with econometric standard errors.

    Parameters
    ----------
    fit_intercept : bool, default=True
    cov_type : {"classical", "HC1", "robust", "cluster"}, default="HC1"
        ``cluster`` needs ``groups`` in :meth:`fit`.

    Attributes
    ----------
    coef_, intercept_, bse_, result_
    """

    def __init__(self, fit_intercept=True, cov_type="HC1"):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        kind, _ = normalize_se_type(self.cov_type, cluster="groups" if groups is not None else None)
        design = np.column_stack([np.ones(len(y)), X]) if self.fit_intercept else X
        names = (["const"] if self.fit_intercept else []) + [f"x{i}" for i in range(X.shape[1])]
        self.result_ = fit_ols(design, y, names, kind, groups)
        offset = int(self.fit_intercept)
        self.coef_ = self.result_.coef[offset:]
        self.intercept_ = float(self.result_.coef[0]) if self.fit_intercept else 0.0
        self.bse_ = self.result_.bse
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_
