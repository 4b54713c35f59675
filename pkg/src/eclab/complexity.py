"""Economic complexity (ECI) and activity complexity (PCI) scores.

Two routes compute the same quantity: alternating the country and activity
averaging maps to their standardized fixed point, or taking the eigenvector
of the second-largest eigenvalue of the row-stochastic country-country
matrix ``(1/k_c) sum_l M_cl M_c'l / k_l``. Scores are z-scored with the
population standard deviation and oriented so ECI correlates nonnegatively
with diversity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary, check_vector, split_frame, standardize
from .exceptions import (
    ConstantSeries,
    DegenerateMatrix,
    DegenerateSpectrum,
    DisconnectedGraphWarning,
    NoConvergence,
    RepeatedEigenvalue,
    ValidationError,
)
from .specialization import SpecializationMatrix

DENSE_LIMIT = 2000
REPEAT_TOL = 1e-10


@dataclass(frozen=True)
class ComplexityScores:
    countries: tuple
    activities: tuple
    eci: np.ndarray
    eci_z: np.ndarray
    pci: np.ndarray
    pci_z: np.ndarray
    method: str
    n_iter: int = 0
    residual: float = 0.0
    eigenvalue: float | None = None

    def eci_frame(self):
        return _score_frame(self.countries, self.eci, self.eci_z)

    def pci_frame(self):
        return _score_frame(self.activities, self.pci, self.pci_z)

    def metadata(self):
        return {
            "method": self.method,
            "iterations": int(self.n_iter),
            "residual": float(self.residual),
            "eigenvalue": None if self.eigenvalue is None else float(self.eigenvalue),
        }


@dataclass(frozen=True)
class RescaledScores:
    values: np.ndarray
    source_min: float
    source_max: float


def _score_frame(labels, raw, z):
    frame = pd.DataFrame({"entity": list(labels), "raw": raw, "z": z})
    frame["rescaled"] = rescale_minmax(z).values
    ranks = rank_table(pd.Series(z, index=list(labels)))
    frame["rank"] = frame["entity"].map(dict(zip(ranks["entity"], ranks["rank"])))
    return frame.sort_values("rank", kind="mergesort").reset_index(drop=True)


def _as_matrix(m):
    if isinstance(m, SpecializationMatrix):
        return m.values.astype(np.float64), m.countries, m.activities
    values, rows, cols = split_frame(m)
    values = check_binary(values).astype(np.float64)
    rows = tuple(rows) if rows is not None else tuple(f"c{i}" for i in range(values.shape[0]))
    cols = tuple(cols) if cols is not None else tuple(f"a{i}" for i in range(values.shape[1]))
    return values, rows, cols


def _check_structure(M):
    kc = M.sum(axis=1)
    kl = M.sum(axis=0)
    if (kc == 0).any() or (kl == 0).any():
        raise DegenerateMatrix("specialization matrix has an empty row or column")
    if M.shape[0] < 2 or (M == M[0]).all():
        raise DegenerateSpectrum("all countries have identical specialization; ECI undefined")
    adjacency = csr_matrix((M @ M.T) > 0)
    n_comp, _ = connected_components(adjacency, directed=False)
    if n_comp > 1:
        warnings.warn(
            f"country graph has {n_comp} components; ECI reflects the component split",
            DisconnectedGraphWarning,
            stacklevel=3,
        )
    return kc, kl


def _orient(eci_z, kc, mean_ubiquity):
    """Sign so ECI correlates nonnegatively with diversity.

    When that correlation is numerically zero (e.g. constant diversity) the
    fallbacks, in order, are: nonpositive correlation with the mean ubiquity
    of each country's activities, positive skew, first nonzero entry
    positive. All but the last are invariant to row order.
    """
    for ref, want in ((kc, 1.0), (mean_ubiquity, -1.0), (eci_z**2, 1.0)):
        ref_c = ref - ref.mean()
        corr = float(eci_z @ ref_c)
        scale = np.linalg.norm(eci_z) * np.linalg.norm(ref_c)
        if scale > 0 and abs(corr) > 1e-9 * scale:
            return want if corr > 0 else -want
    nz = np.flatnonzero(np.abs(eci_z) > 1e-12)
    return -1.0 if nz.size and eci_z[nz[0]] < 0 else 1.0


def _standardize_or_fail(v, what):
    sd = v.std()
    if not sd > 1e-14 * max(1.0, np.abs(v).max()):
        raise DegenerateSpectrum(f"{what} has zero variance")
    return (v - v.mean()) / sd


def _pci_from_eci(M, kl, eci_z):
    raw = M.T @ eci_z / kl
    return raw, _standardize_or_fail(raw, "PCI")


def compute_complexity_fixed_point(m, tol=1e-9, max_iter=1000) -> ComplexityScores:
    """Iterate the averaging maps, re-standardizing each step.

    Starts from standardized diversity (a fixed descending ramp when diversity
    is constant) and stops when the largest change in standardized ECI falls
    below ``tol``. Raises NoConvergence after ``max_iter`` rounds; the
    exception carries the iteration count, residual and last scores.
    """
    M, countries, activities = _as_matrix(m)
    kc, kl = _check_structure(M)

    if np.ptp(kc) > 0:
        eci = standardize(kc)
    else:
        eci = standardize(np.linspace(1.0, -1.0, M.shape[0]))

    residual = np.inf
    raw = eci
    for n_iter in range(1, max_iter + 1):
        pci = _standardize_or_fail(M.T @ eci / kl, "PCI")
        raw = M @ pci / kc
        new = _standardize_or_fail(raw, "ECI")
        residual = float(np.max(np.abs(new - eci)))
        eci = new
        if residual < tol:
            break
    else:
        err = NoConvergence(
            f"no convergence after {max_iter} iterations (residual {residual:.3g})",
            n_iter=max_iter,
            residual=residual,
        )
        err.scores = _finish(M, kc, kl, countries, activities, raw, eci, "fixed-point", max_iter, residual)
        raise err

    return _finish(M, kc, kl, countries, activities, raw, eci, "fixed-point", n_iter, residual)


def _finish(M, kc, kl, countries, activities, eci_raw, eci_z, method, n_iter, residual, eigenvalue=None):
    sign = _orient(eci_z, kc, M @ kl / kc)
    eci_z = sign * eci_z
    eci_raw = sign * eci_raw
    pci_raw, pci_z = _pci_from_eci(M, kl, eci_z)
    return ComplexityScores(
        countries, activities, eci_raw, eci_z, pci_raw, pci_z, method, n_iter, residual, eigenvalue
    )


def country_transition_matrix(M):
    """Row-stochastic ``(1/k_c) sum_l M_cl M_c'l / k_l``."""
    M = np.asarray(M, dtype=np.float64)
    return (M / M.sum(axis=1)[:, None]) @ (M / M.sum(axis=0)).T


def _second_eigenpair_dense(M, kc, kl):
    d = 1.0 / np.sqrt(kc)
    A = M * d[:, None]
    S = (A / kl) @ A.T
    t = np.sqrt(kc) / np.linalg.norm(np.sqrt(kc))
    S = S - np.outer(t, t)
    S = (S + S.T) / 2
    w, U = np.linalg.eigh(S)
    lam1, lam2 = w[-1], w[-2] if len(w) > 1 else -np.inf
    return lam1, lam2, d * U[:, -1]


def _sparse_deflated(M, kc, kl):
    """Top two eigenpairs of the deflated symmetric operator via ARPACK.

    The start vector is fixed (deflated standardized diversity, or a ramp) so
    repeated runs give identical output.
    """
    Ms = csr_matrix(M)
    n = M.shape[0]
    d = 1.0 / np.sqrt(kc)
    t = np.sqrt(kc) / np.linalg.norm(np.sqrt(kc))

    def apply(x):
        x = np.ravel(x)
        x = x - t * (t @ x)
        y = d * (Ms @ ((Ms.T @ (d * x)) / kl))
        return y - t * (t @ y)

    v0 = standardize(kc) if np.ptp(kc) > 0 else np.linspace(1.0, -1.0, n)
    v0 = v0 - t * (t @ v0) + 1e-3 * np.linspace(-1.0, 1.0, n)
    op = LinearOperator((n, n), matvec=apply, dtype=np.float64)
    try:
        w, U = eigsh(op, k=2, which="LA", v0=v0, tol=0, maxiter=100 * n)
    except ArpackNoConvergence as exc:
        raise NoConvergence("ARPACK did not converge", n_iter=100 * n) from exc
    order = np.argsort(w)[::-1]
    return w[order[0]], w[order[1]], d * U[:, order[0]]


def compute_complexity_eigen(m, dense_limit=DENSE_LIMIT) -> ComplexityScores:
    """Second eigenvector of the country-country transition matrix.

    The constant eigenvector (eigenvalue 1) is deflated explicitly so a
    disconnected country graph yields the component indicator rather than an
    arbitrary vector. PCI is one application of the activity map to the
    final ECI. Above ``dense_limit`` countries ARPACK on the deflated operator
    replaces the dense symmetric eigensolver.
    """
    M, countries, activities = _as_matrix(m)
    kc, kl = _check_structure(M)
    if M.shape[0] <= max(dense_limit, 3):
        lam1, lam2, v = _second_eigenpair_dense(M, kc, kl)
    else:
        lam1, lam2, v = _sparse_deflated(M, kc, kl)
    if lam1 < 1e-12:
        raise DegenerateSpectrum("no nontrivial eigenvalue; ECI undefined")
    if abs(lam1 - lam2) < REPEAT_TOL:
        raise RepeatedEigenvalue(
            f"second eigenvalue {lam1:.12g} has multiplicity > 1; eigenvector not unique"
        )
    v = v / np.linalg.norm(v)
    eci_z = _standardize_or_fail(v, "ECI")
    return _finish(M, kc, kl, countries, activities, v, eci_z, "eigen", 0, 0.0, float(lam1))


def compute_complexity(m, method="eigen", tol=1e-9, max_iter=1000):
    if method == "eigen":
        return compute_complexity_eigen(m)
    if method in ("iterate", "fixed-point"):
        return compute_complexity_fixed_point(m, tol=tol, max_iter=max_iter)
    raise ValidationError(f"unknown method {method!r}", field="method")


def rescale_minmax(scores) -> RescaledScores:
    """Affine map of a series onto [-1, 1]: ``2 (v - min) / (max - min) - 1``."""
    index = scores.index if isinstance(scores, pd.Series) else None
    v = check_vector(scores, name="scores")
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        raise ConstantSeries("cannot rescale a constant series")
    out = 2.0 * (v - lo) / (hi - lo) - 1.0
    if index is not None:
        out = pd.Series(out, index=index)
    return RescaledScores(out, lo, hi)


def rank_table(scores) -> pd.DataFrame:
    """1-based ranking by descending score, ties by entity label."""
    if isinstance(scores, ComplexityScores):
        scores = pd.Series(scores.eci_z, index=list(scores.countries))
    series = pd.Series(scores)
    order = sorted(series.index, key=lambda e: (-series[e], str(e)))
    return pd.DataFrame(
        {"entity": order, "z": [series[e] for e in order], "rank": range(1, len(order) + 1)}
    )


class EconomicComplexity(TransformerMixin, BaseEstimator):
    """Estimator wrapper around the ECI/PCI computation.

    ``fit`` takes a binary country x activity matrix (array, DataFrame or
    :class:`SpecializationMatrix`). ``transform`` places countries on the fitted
    scale by averaging the fitted PCI over their specializations and applying
    the affine map that sends the fit sample onto its ECI z-scores, so
    ``fit_transform(M)`` equals ``eci_``.

    Parameters
    ----------
    method : {"eigen", "iterate"}
    tol, max_iter : used by the iterative method only.
    """

    def __init__(self, method="eigen", tol=1e-9, max_iter=1000):
        self.method = method
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        scores = compute_complexity(X, self.method, self.tol, self.max_iter)
        M, _, _ = _as_matrix(X)
        self.scores_ = scores
        self.eci_ = scores.eci_z
        self.pci_ = scores.pci_z
        self.eigenvalue_ = scores.eigenvalue
        self.n_iter_ = scores.n_iter
        self.n_features_in_ = M.shape[1]
        avg = M @ self.pci_ / M.sum(axis=1)
        slope, intercept = np.polyfit(self.eci_, avg, 1)
        self.map_slope_, self.map_intercept_ = float(slope), float(intercept)
        return self

    def transform(self, X):
        check_is_fitted(self, "pci_")
        M, _, _ = _as_matrix(X)
        if M.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {M.shape[1]} activities, fitted with {self.n_features_in_}")
        k = M.sum(axis=1)
        if (k == 0).any():
            raise DegenerateMatrix("country without specializations cannot be scored")
        return (M @ self.pci_ / k - self.map_intercept_) / self.map_slope_
