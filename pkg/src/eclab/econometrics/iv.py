"""Two-stage least squares with one endogenous regressor and one instrument."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import ValidationError, WeakInstrumentWarning
from ..specialization import SpecializationMatrix
from .linear import fit_ols, sandwich
from .results import IvResult
from .spec import ModelSpec, build_design, check_rank, normalize_se_type

WEAK_F = 10.0


def fit_tsls(y, exog, endog, instrument, exog_names, endog_name="endog", instrument_name="instrument",
             se_type="HC1", groups=None):
    """2SLS on arrays; ``exog`` holds the intercept and included controls.

    Second-stage covariance uses the structural residuals ``y - X b`` with
    the projected regressors in the bread and meat. The weak-instrument F is
    the squared robust (or clustered) t statistic of the instrument in the
    first stage. The Durbin-Wu-Hausman test adds the first-stage residual to
    the structural equation and tests it with the same covariance type.
    """
    y = np.asarray(y, dtype=np.float64)
    exog = np.asarray(exog, dtype=np.float64).reshape(len(y), -1)
    d = np.asarray(endog, dtype=np.float64)
    z = np.asarray(instrument, dtype=np.float64)
    names = list(exog_names) + [endog_name]
    X = np.column_stack([exog, d])
    Z = np.column_stack([exog, z])
    n, k = X.shape
    check_rank(X, names)
    check_rank(Z, list(exog_names) + [instrument_name])

    first = fit_ols(Z, d, list(exog_names) + [instrument_name], se_type, groups, model="first-stage")
    d_hat = Z @ first.coef
    v_hat = d - d_hat
    stat_z = first.stat[-1]
    weak_f = float(stat_z**2) if np.isfinite(stat_z) else np.inf

    X_hat = np.column_stack([exog, d_hat])
    coef, *_ = np.linalg.lstsq(X_hat, y, rcond=None)
    resid = y - X @ coef
    bread = np.linalg.inv(X_hat.T @ X_hat)
    bread = (bread + bread.T) / 2
    n_clusters = None
    if se_type == "classical":
        cov = float(resid @ resid) / (n - k) * bread
    else:
        cov, n_clusters = sandwich(bread, X_hat * resid[:, None], se_type, n, k, groups)

    notes = ["R2 computed from structural residuals; not an OLS R2"]
    if np.linalg.norm(v_hat) <= 1e-10 * max(np.linalg.norm(d), 1.0):
        dwh_stat, dwh_p = 0.0, 1.0
        notes.append("instrument spans the endogenous regressor; DWH test degenerate")
    else:
        cf = fit_ols(np.column_stack([X, v_hat]), y, names + ["first_stage_resid"], se_type, groups)
        dwh_stat = float(cf.stat[-1])
        dwh_p = float(cf.pvalues[-1])

    if weak_f < WEAK_F:
        warnings.warn(f"first-stage F = {weak_f:.2f} < {WEAK_F:g}", WeakInstrumentWarning, stacklevel=2)

    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1 - float(resid @ resid) / tss
    return IvResult(
        model="2sls",
        names=names,
        coef=coef,
        cov=cov,
        se_type=se_type,
        nobs=n,
        df_resid=(n_clusters - 1) if n_clusters else n - k,
        stat_dist="t",
        r2=r2,
        adj_r2=1 - (1 - r2) * (n - 1) / (n - k),
        n_clusters=n_clusters,
        notes=notes,
        resid=resid,
        first_stage=first,
        endogenous=endog_name,
        instrument=instrument_name,
        weak_f=weak_f,
        dwh_stat=dwh_stat,
        dwh_p=dwh_p,
    )


def tsls(spec: ModelSpec, endogenous, instrument, data: pd.DataFrame) -> IvResult:
    """2SLS for a :class:`ModelSpec` whose covariates include ``endogenous``.

    The instrument is excluded from the structural equation. Rows incomplete
    on any variable (instrument included) are dropped, so both stages share
    one sample.
    """
    if endogenous not in spec.covariates:
        raise ValidationError(f"endogenous {endogenous!r} is not among the covariates", field="endog")
    if instrument in spec.covariates:
        raise ValidationError("instrument must be excluded from the structural equation", field="instrument")
    exog_spec = ModelSpec(
        outcome=spec.outcome,
        covariates=[c for c in spec.covariates if c != endogenous],
        fixed_effects=spec.fixed_effects,
        se_type=spec.se_type,
        cluster=spec.cluster,
        sample=spec.sample,
        intercept=spec.intercept,
        name=spec.name,
    )
    design = build_design(exog_spec, data, extra_terms=[endogenous, instrument])
    exog = design.X[:, :-2]
    names = design.names[:-2]
    res = fit_tsls(
        design.y, exog, design.X[:, -2], design.X[:, -1], names, endogenous, instrument,
        spec.se_type, design.groups,
    )
    order = [res.names.index(n) for n in _structural_order(spec, names, endogenous)]
    res = _reorder(res, order)
    if design.n_dropped:
        res.notes.append(f"{design.n_dropped} incomplete rows dropped")
    return res


def _structural_order(spec, exog_names, endogenous):
    lead = ["const"] if spec.intercept else []
    rest = [n for n in exog_names if n not in lead]
    covs = [c for c in spec.covariates]
    ordered = lead + [c for c in covs if c == endogenous or c in rest]
    return ordered + [n for n in rest if n not in ordered]


def _reorder(res, order):
    res.names = [res.names[i] for i in order]
    res.coef = res.coef[order]
    res.cov = res.cov[np.ix_(order, order)]
    res.bse, res.stat, res.pvalues = res.bse[order], res.stat[order], res.pvalues[order]
    return res


class TwoStageLeastSquares(RegressorMixin, BaseEstimator):
    """Just-identified 2SLS: the last column of ``X`` is endogenous, ``Z`` its instrument.

    Parameters
    ----------
    fit_intercept : bool, default=True
    cov_type : {"classical", "HC1", "cluster"}, default="HC1"
    """

    def __init__(self, fit_intercept=True, cov_type="HC1"):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type

    def fit(self, X, y, Z, groups=None):
        X = check_array(X, dtype=np.float64)
        Z = np.asarray(Z, dtype=np.float64).ravel()
        y = np.asarray(y, dtype=np.float64).ravel()
        kind, _ = normalize_se_type(self.cov_type, cluster="groups" if groups is not None else None)
        exog = X[:, :-1]
        names = [f"x{i}" for i in range(exog.shape[1])]
        if self.fit_intercept:
            exog = np.column_stack([np.ones(len(y)), exog])
            names = ["const"] + names
        self.result_ = fit_tsls(y, exog, X[:, -1], Z, names, f"x{X.shape[1] - 1}", "z", kind, groups)
        offset = int(self.fit_intercept)
        self.coef_ = self.result_.coef[offset:]
        self.intercept_ = float(self.result_.coef[0]) if self.fit_intercept else 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


@dataclass(frozen=True)
class InstrumentResult:
    values: pd.Series
    peers: dict
    dropped: list


def country_similarity(M):
    """Co-specialization count over the larger diversity, for every country pair."""
    M = np.asarray(M, dtype=np.float64)
    k = M.sum(axis=1)
    return (M @ M.T) / np.maximum.outer(k, k)


def build_similarity_instrument(scores, m: SpecializationMatrix, graph, k=3) -> InstrumentResult:
    """Mean ECI of each country's ``k`` most similar non-neighboring peers.

    Eligible peers are other countries with positive similarity that do not
    share a border. Ties in similarity go to the smaller country code. When
    fewer than ``k`` peers are eligible the mean runs over those available;
    countries with none are dropped and listed.
    """
    if k < 1:
        raise ValidationError("k must be >= 1", field="k")
    if hasattr(scores, "eci_z"):
        eci = pd.Series(scores.eci_z, index=list(scores.countries))
    else:
        eci = pd.Series(scores)
    sim = country_similarity(m.values)
    countries = list(m.countries)
    values, peers, dropped = {}, {}, []
    for i, c in enumerate(countries):
        cands = [
            (-sim[i, j], other)
            for j, other in enumerate(countries)
            if j != i and sim[i, j] > 0 and not graph.are_neighbors(c, other) and other in eci.index
        ]
        cands.sort()
        chosen = [other for _, other in cands[:k]]
        if not chosen:
            dropped.append(c)
            continue
        peers[c] = chosen
        values[c] = float(np.mean([eci[o] for o in chosen]))
    return InstrumentResult(pd.Series(values, dtype=np.float64), peers, dropped)
