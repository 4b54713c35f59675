"""Count matrices, revealed comparative advantage and binary specialization.

The functional API (:func:`rca`, :func:`binarize`, ...) works on labelled
matrix containers. :class:`RevealedComparativeAdvantage` wraps the same
computation as a scikit-learn transformer for plain arrays and DataFrames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_labels, check_binary, check_counts, check_positive_margins, split_frame
from .exceptions import DegenerateMatrix, EmptyMatrix, ValidationError, YearNotFound
from .ingest import YearlyCounts


def _order_by_total(totals, labels):
    """Indices sorting by descending total, ties by label."""
    return sorted(range(len(labels)), key=lambda i: (-totals[i], labels[i]))


@dataclass(frozen=True)
class CountMatrix:
    """Nonnegative country x activity counts with no all-zero row or column."""

    countries: tuple
    activities: tuple
    values: np.ndarray
    period: object = None
    dropped_countries: tuple = ()
    dropped_activities: tuple = ()

    def __post_init__(self):
        values = check_counts(self.values).copy()
        if values.shape != (len(self.countries), len(self.activities)):
            raise ValidationError("label lists do not match matrix shape")
        check_positive_margins(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, countries=None, activities=None, period=None):
        """Build from a raw array, dropping all-zero rows and columns."""
        values = check_counts(values)
        countries = as_labels(countries, values.shape[0], "c")
        activities = as_labels(activities, values.shape[1], "a")
        rows = values.sum(axis=1) > 0
        cols = values.sum(axis=0) > 0
        if not rows.any() or not cols.any():
            raise EmptyMatrix("count matrix has no nonzero entries")
        return cls(
            tuple(c for c, k in zip(countries, rows) if k),
            tuple(a for a, k in zip(activities, cols) if k),
            values[np.ix_(rows, cols)].copy(),
            period,
            tuple(c for c, k in zip(countries, rows) if not k),
            tuple(a for a, k in zip(activities, cols) if not k),
        )

    @property
    def shape(self):
        return self.values.shape

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.countries), columns=list(self.activities))


@dataclass(frozen=True)
class RcaMatrix:
    countries: tuple
    activities: tuple
    values: np.ndarray
    period: object = None

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.countries), columns=list(self.activities))


@dataclass(frozen=True)
class SpecializationMatrix:
    """Binary country x activity matrix with cached diversity and ubiquity."""

    countries: tuple
    activities: tuple
    values: np.ndarray
    period: object = None
    diversity: np.ndarray = field(init=False, repr=False)
    ubiquity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = check_binary(self.values)
        if values.shape != (len(self.countries), len(self.activities)):
            raise ValidationError("label lists do not match matrix shape")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "diversity", values.sum(axis=1))
        object.__setattr__(self, "ubiquity", values.sum(axis=0))

    @classmethod
    def from_array(cls, values, countries=None, activities=None, period=None):
        values = np.asarray(values)
        return cls(
            as_labels(countries, values.shape[0], "c"),
            as_labels(activities, values.shape[1], "a"),
            values,
            period,
        )

    @property
    def shape(self):
        return self.values.shape

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.countries), columns=list(self.activities))


@dataclass(frozen=True)
class NestedOrder:
    matrix: SpecializationMatrix
    row_permutation: np.ndarray
    column_permutation: np.ndarray


def build_count_matrix(y: YearlyCounts, year) -> CountMatrix:
    """Pivot one year of long counts into a matrix.

    Rows and columns are ordered by descending total, ties lexicographic.
    All-zero rows and columns are dropped and listed on the result.
    """
    frame = y.frame
    available = set(int(v) for v in frame["year"].unique())
    if int(year) not in available:
        raise YearNotFound(year, available)
    sub = frame[frame["year"] == int(year)]
    wide = sub.pivot_table(
        index="country", columns="language", values="developers", aggfunc="sum", fill_value=0.0
    )
    values = wide.to_numpy(dtype=np.float64)
    countries = [str(c) for c in wide.index]
    activities = [str(a) for a in wide.columns]
    row_order = _order_by_total(values.sum(axis=1), countries)
    col_order = _order_by_total(values.sum(axis=0), activities)
    values = values[np.ix_(row_order, col_order)]
    return CountMatrix.from_array(
        values,
        [countries[i] for i in row_order],
        [activities[j] for j in col_order],
        period=int(year),
    )


def rca_array(X):
    """Balassa index ``X_cl * X / (X_c * X_l)`` for a raw array."""
    X = check_positive_margins(check_counts(X))
    row = X.sum(axis=1)
    col = X.sum(axis=0)
    total = row.sum()
    return X * total / np.outer(row, col)


def rca(x: CountMatrix) -> RcaMatrix:
    values = rca_array(x.values)
    values.setflags(write=False)
    return RcaMatrix(x.countries, x.activities, values, x.period)


def binarize(r: RcaMatrix, threshold=1.0) -> SpecializationMatrix:
    """``M = 1`` where ``R >= threshold``.

    Raises DegenerateMatrix when a country or activity ends up with no
    specialization at all, since diversity or ubiquity would be zero.
    """
    if not threshold > 0:
        raise ValidationError("threshold must be > 0", field="threshold")
    values = (np.asarray(r.values) >= threshold).astype(np.int64)
    empty_rows = [c for c, k in zip(r.countries, values.sum(axis=1)) if k == 0]
    empty_cols = [a for a, k in zip(r.activities, values.sum(axis=0)) if k == 0]
    if empty_rows or empty_cols:
        raise DegenerateMatrix(
            f"zero diversity for {empty_rows}, zero ubiquity for {empty_cols} "
            f"at threshold {threshold}"
        )
    return SpecializationMatrix(r.countries, r.activities, values, r.period)


def margins(m: SpecializationMatrix):
    """(diversity per country, ubiquity per activity) as integer arrays."""
    return m.diversity.copy(), m.ubiquity.copy()


def nested_sort(m: SpecializationMatrix) -> NestedOrder:
    """Reorder rows by descending diversity and columns by descending ubiquity.

    Ties are broken lexicographically by label. The permutations index into
    the original order.
    """
    rows = np.array(_order_by_total(m.diversity, m.countries), dtype=np.int64)
    cols = np.array(_order_by_total(m.ubiquity, m.activities), dtype=np.int64)
    ordered = SpecializationMatrix(
        tuple(m.countries[i] for i in rows),
        tuple(m.activities[j] for j in cols),
        m.values[np.ix_(rows, cols)],
        m.period,
    )
    return NestedOrder(ordered, rows, cols)


class RevealedComparativeAdvantage(TransformerMixin, BaseEstimator):
    """Transformer from a count matrix to RCA values or a binary specialization matrix.

    Parameters
    ----------
    threshold : float, default=1.0
        Entries with RCA at or above this value count as specialized.
    binary : bool, default=True
        If True, ``transform`` returns the 0/1 matrix, otherwise raw RCA.

    Attributes
    ----------
    rca_ : ndarray of shape (n_countries, n_activities)
        RCA of the matrix passed to ``fit``.
    diversity_, ubiquity_ : ndarray
        Margins of the binarized fit matrix.
    """

    def __init__(self, threshold=1.0, binary=True):
        self.threshold = threshold
        self.binary = binary

    def fit(self, X, y=None):
        values, rows, cols = split_frame(X)
        if not self.threshold > 0:
            raise ValidationError("threshold must be > 0", field="threshold")
        self.rca_ = rca_array(values)
        m = self.rca_ >= self.threshold
        self.diversity_ = m.sum(axis=1)
        self.ubiquity_ = m.sum(axis=0)
        self.n_features_in_ = self.rca_.shape[1]
        if cols is not None:
            self.feature_names_in_ = np.asarray(cols, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "rca_")
        values, rows, cols = split_frame(X)
        values = check_counts(values)
        if values.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {values.shape[1]} activities, fitted with {self.n_features_in_}"
            )
        out = rca_array(values)
        if self.binary:
            out = (out >= self.threshold).astype(np.int64)
        if isinstance(X, pd.DataFrame):
            return pd.DataFrame(out, index=X.index, columns=X.columns)
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "rca_")
        if input_features is not None:
            return np.asarray(input_features, dtype=object)
        if hasattr(self, "feature_names_in_"):
            return self.feature_names_in_
        return np.asarray([f"a{i}" for i in range(self.n_features_in_)], dtype=object)
