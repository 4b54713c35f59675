"""Model specifications and design-matrix assembly from a DataFrame."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg

from ..exceptions import EmptySample, MissingColumn, RankDeficient, TooFewObservations, ValidationError

_TERM = re.compile(r"^\s*(?:(log)\((?P<inner>[^()]+)\)|(?P<bare>[^()^]+?))\s*(?P<sq>\^2)?\s*$")
SE_TYPES = ("classical", "HC1", "cluster")


def normalize_se_type(se_type, cluster=None):
    """Map user spellings to (kind, cluster column).

    Accepts ``classical``, ``robust``/``HC1`` and ``cluster``/``clustered`` or
    ``clustered(col)``.
    """
    s = str(se_type).strip()
    m = re.fullmatch(r"clustered?\((\w+)\)", s)
    if m:
        return "cluster", m.group(1)
    low = s.lower()
    if low in ("classical", "nonrobust", "homoskedastic"):
        return "classical", None
    if low in ("robust", "hc1"):
        return "HC1", None
    if low in ("cluster", "clustered"):
        if not cluster:
            raise ValidationError("clustered standard errors need a cluster column", field="cluster")
        return "cluster", cluster
    raise ValidationError(f"unknown SE type {se_type!r}", field="se_type")


def parse_term(term):
    """``"log(x)^2"`` -> ("x", True, True); ``"x"`` -> ("x", False, False)."""
    m = _TERM.match(term)
    if not m:
        raise ValidationError(f"cannot parse term {term!r}", field="covariates")
    if m.group(1):
        return m.group("inner").strip(), True, bool(m.group("sq"))
    return m.group("bare").strip(), False, bool(m.group("sq"))


def evaluate_term(term, data: pd.DataFrame) -> pd.Series:
    column, use_log, square = parse_term(term)
    if column not in data.columns:
        raise MissingColumn(column)
    values = pd.to_numeric(data[column], errors="coerce").astype(np.float64)
    if use_log:
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.log(values.where(values > 0))
    if square:
        values = values**2
    return values


@dataclass
class ModelSpec:
    """One regression: outcome, covariate terms, fixed effects and SE choice.

    Terms are column names optionally wrapped as ``log(col)`` and/or
    suffixed with ``^2``. ``sample`` names a column whose truthy rows form
    the estimation sample.
    """

    outcome: str
    covariates: list
    fixed_effects: list = field(default_factory=list)
    se_type: str = "HC1"
    cluster: str | None = None
    sample: str | None = None
    intercept: bool = True
    name: str | None = None

    def __post_init__(self):
        self.covariates = list(self.covariates)
        self.fixed_effects = list(self.fixed_effects)
        if self.outcome in self.covariates:
            raise ValidationError("outcome appears among covariates", field="covariates")
        self.se_type, self.cluster = normalize_se_type(self.se_type, self.cluster)

    @classmethod
    def from_dict(cls, d):
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValidationError(f"unknown spec fields {sorted(unknown)}")
        if "outcome" not in known or "covariates" not in known:
            raise ValidationError("spec needs 'outcome' and 'covariates'")
        return cls(**known)

    def to_dict(self):
        return asdict(self)

    def variables(self):
        cols = [parse_term(self.outcome)[0]] + [parse_term(t)[0] for t in self.covariates]
        cols += list(self.fixed_effects)
        if self.cluster:
            cols.append(self.cluster)
        return list(dict.fromkeys(cols))


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    names: list
    index: pd.Index
    groups: np.ndarray | None = None
    n_fe_columns: int = 0
    fe_levels: dict = field(default_factory=dict)
    n_dropped: int = 0

    @property
    def nobs(self):
        return self.X.shape[0]


def fe_dummies(values: pd.Series, name):
    """Dummy columns for all levels but the first (sorted) one."""
    levels = sorted(values.astype(str).unique())
    codes = values.astype(str)
    cols = {f"{name}[{lvl}]": (codes == lvl).to_numpy(dtype=np.float64) for lvl in levels[1:]}
    return cols, levels


def frame_for(spec: ModelSpec, data: pd.DataFrame, extra_terms=()):
    """Evaluate every term, apply the sample filter and listwise deletion."""
    if spec.sample:
        if spec.sample not in data.columns:
            raise MissingColumn(spec.sample)
        data = data[data[spec.sample].astype(bool)]
    cols = {"__y__": evaluate_term(spec.outcome, data)}
    for term in list(spec.covariates) + list(extra_terms):
        cols[term] = evaluate_term(term, data)
    for fe in spec.fixed_effects:
        if fe not in data.columns:
            raise MissingColumn(fe)
        cols[f"__fe__{fe}"] = data[fe]
    if spec.cluster:
        if spec.cluster not in data.columns:
            raise MissingColumn(spec.cluster)
        cols["__cluster__"] = data[spec.cluster]
    frame = pd.DataFrame(cols, index=data.index)
    numeric = frame.select_dtypes(include=[np.number])
    ok = frame.notna().all(axis=1) & np.isfinite(numeric).all(axis=1)
    kept = frame[ok]
    if kept.empty:
        raise EmptySample(f"no complete rows for model {spec.name or spec.outcome!r}")
    return kept, int((~ok).sum())


def build_design(spec: ModelSpec, data: pd.DataFrame, extra_terms=()) -> Design:
    frame, n_dropped = frame_for(spec, data, extra_terms)
    names, columns = [], []
    if spec.intercept:
        names.append("const")
        columns.append(np.ones(len(frame)))
    for term in list(spec.covariates) + list(extra_terms):
        names.append(term)
        columns.append(frame[term].to_numpy(dtype=np.float64))
    n_fe, levels = 0, {}
    for fe in spec.fixed_effects:
        dummies, lv = fe_dummies(frame[f"__fe__{fe}"], fe)
        levels[fe] = lv
        for name, col in dummies.items():
            names.append(name)
            columns.append(col)
            n_fe += 1
    X = np.column_stack(columns) if columns else np.empty((len(frame), 0))
    groups = frame["__cluster__"].astype(str).to_numpy() if spec.cluster else None
    return Design(
        X, frame["__y__"].to_numpy(dtype=np.float64), names, frame.index, groups, n_fe, levels, n_dropped
    )


def check_rank(X, names):
    """Raise RankDeficient naming the columns a pivoted QR finds redundant."""
    if X.shape[0] < X.shape[1]:
        raise TooFewObservations(*X.shape)
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    if rank < X.shape[1]:
        raise RankDeficient(sorted(names[p] for p in piv[rank:]))
