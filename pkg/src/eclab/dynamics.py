"""Yearly specialization panels, entry/exit events and transition datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import (
    EmptyAtRiskSet,
    InsufficientOverlap,
    MissingColumn,
    UnparsableRow,
    ValidationError,
    WindowOverlap,
    YearMissing,
)
from .ingest import YearlyCounts
from .relatedness import proximity, relatedness_density
from .specialization import binarize, build_count_matrix, rca

AT_RISK_RULES = ("none", "nonzero-count", "rca-positive")
UBIQUITY_TRANSFORMS = ("raw", "z", "log")


@dataclass(frozen=True)
class SpecializationPanel:
    """Specialization matrices for several years on a shared label registry.

    ``m``, ``counts`` and ``rca`` have shape (years, countries, activities).
    A country or activity missing from a year contributes zeros there and is
    listed in ``absent``.
    """

    years: tuple
    countries: tuple
    activities: tuple
    m: np.ndarray
    counts: np.ndarray | None = None
    rca: np.ndarray | None = None
    matrices: dict = field(default_factory=dict, repr=False)
    absent: tuple = ()

    def __post_init__(self):
        if list(self.years) != sorted(set(self.years)):
            raise ValidationError("panel years must be strictly increasing")
        if self.m.shape != (len(self.years), len(self.countries), len(self.activities)):
            raise ValidationError("panel array does not match label registries")

    @classmethod
    def from_matrices(cls, matrices, counts=None):
        """Align ``{year: SpecializationMatrix}`` (and optional count matrices)."""
        years = tuple(sorted(matrices))
        countries = tuple(sorted(set().union(*(matrices[y].countries for y in years))))
        activities = tuple(sorted(set().union(*(matrices[y].activities for y in years))))
        ci = {c: i for i, c in enumerate(countries)}
        ai = {a: j for j, a in enumerate(activities)}
        shape = (len(years), len(countries), len(activities))
        m = np.zeros(shape, dtype=np.int64)
        x = np.zeros(shape) if counts is not None else None
        r = np.zeros(shape) if counts is not None else None
        absent = []
        for t, year in enumerate(years):
            mat = matrices[year]
            rows = [ci[c] for c in mat.countries]
            cols = [ai[a] for a in mat.activities]
            m[t][np.ix_(rows, cols)] = mat.values
            absent += [(year, "country", c) for c in countries if c not in set(mat.countries)]
            absent += [(year, "activity", a) for a in activities if a not in set(mat.activities)]
            if counts is not None:
                cm = counts[year]
                x[t][np.ix_([ci[c] for c in cm.countries], [ai[a] for a in cm.activities])] = cm.values
                rm = rca(cm)
                r[t][np.ix_([ci[c] for c in rm.countries], [ai[a] for a in rm.activities])] = rm.values
        return cls(years, countries, activities, m, x, r, dict(matrices), tuple(absent))

    def year_index(self, year):
        try:
            return self.years.index(year)
        except ValueError:
            raise YearMissing(f"year {year} not in panel {list(self.years)}") from None


def build_panel(yearly: YearlyCounts, years=None, threshold=1.0) -> SpecializationPanel:
    """Count, RCA and specialization matrices for each year, aligned."""
    years = yearly.years if years is None else sorted(int(y) for y in years)
    matrices, counts = {}, {}
    for year in years:
        cm = build_count_matrix(yearly, year)
        counts[year] = cm
        matrices[year] = binarize(rca(cm), threshold)
    return SpecializationPanel.from_matrices(matrices, counts)


@dataclass(frozen=True)
class EventTable:
    frame: pd.DataFrame
    base_years: tuple
    post_years: tuple

    def __len__(self):
        return len(self.frame)

    def pairs(self, event):
        sub = self.frame[self.frame["event"] == event]
        return set(zip(sub["country"], sub["activity"]))


def _check_windows(panel, base_years, post_years):
    base, post = tuple(int(y) for y in base_years), tuple(int(y) for y in post_years)
    if not base or not post:
        raise ValidationError("base and post windows must be nonempty")
    if set(base) & set(post):
        raise WindowOverlap(f"years {sorted(set(base) & set(post))} in both windows")
    for y in base + post:
        panel.year_index(y)
    return base, post


def classify_pattern(base_values, post_values):
    """'entry', 'exit' or None for one pair's base/post specialization values."""
    base_values, post_values = np.asarray(base_values), np.asarray(post_values)
    if (base_values == 0).all() and (post_values == 1).all():
        return "entry"
    if (base_values == 1).all() and (post_values == 0).all():
        return "exit"
    return None


def detect_events(panel: SpecializationPanel, base_years, post_years) -> EventTable:
    """Entry: unspecialized in every base year and specialized in every post year.

    Exit is the mirror image. Rows are ordered by country, then activity.
    """
    base, post = _check_windows(panel, base_years, post_years)
    mb = panel.m[[panel.year_index(y) for y in base]]
    mp = panel.m[[panel.year_index(y) for y in post]]
    entry = (mb == 0).all(axis=0) & (mp == 1).all(axis=0)
    exit_ = (mb == 1).all(axis=0) & (mp == 0).all(axis=0)
    rows = []
    base_s = ";".join(map(str, base))
    post_s = ";".join(map(str, post))
    for i, c in enumerate(panel.countries):
        for j, a in enumerate(panel.activities):
            if entry[i, j]:
                rows.append((c, a, "entry", base_s, post_s))
            elif exit_[i, j]:
                rows.append((c, a, "exit", base_s, post_s))
    frame = pd.DataFrame(rows, columns=["country", "activity", "event", "base_years", "post_years"])
    return EventTable(frame, base, post)


@dataclass(frozen=True)
class TransitionDataset:
    frame: pd.DataFrame
    metadata: dict

    def __len__(self):
        return len(self.frame)


def transform_ubiquity(ubiquity: pd.Series, how="z") -> pd.Series:
    """Raw, z-scored (population std, across activities) or log ubiquity."""
    u = ubiquity.astype(np.float64)
    if how == "raw":
        return u
    if how == "z":
        return (u - u.mean()) / u.std(ddof=0)
    if how == "log":
        if (u <= 0).any():
            raise ValidationError("log ubiquity needs positive ubiquity", field="ubiquity")
        return np.log(u)
    raise ValidationError(f"unknown ubiquity transform {how!r}", field="ubiquity")


def build_transition_dataset(
    panel: SpecializationPanel,
    events: EventTable,
    kind="entry",
    density=None,
    ubiquity=None,
    at_risk="nonzero-count",
    ubiquity_transform="z",
    include_self=True,
) -> TransitionDataset:
    """Rows at risk of an entry (or exit) with outcome, base-year density and ubiquity.

    Entry rows are pairs unspecialized in every base year that also pass the
    ``at_risk`` floor: ``"none"``, ``"nonzero-count"`` (positive developer
    count in every base year) or ``"rca-positive"`` (positive RCA in every base
    year; identical to the count floor wherever RCA is defined). Exit rows
    are pairs specialized in every base year. ``density`` and ``ubiquity``
    default to values computed from the first base year's matrix; pairs the
    density does not cover are dropped and counted in the metadata.
    """
    if kind not in ("entry", "exit"):
        raise ValidationError(f"kind must be entry or exit, got {kind!r}", field="type")
    if at_risk not in AT_RISK_RULES:
        raise ValidationError(f"unknown at-risk rule {at_risk!r}", field="at_risk")
    base, post = events.base_years, events.post_years
    t0 = base[0]
    if density is None or ubiquity is None:
        m0 = panel.matrices[t0]
        if density is None:
            density = relatedness_density(m0, proximity(m0), include_self=include_self)
        if ubiquity is None:
            ubiquity = pd.Series(m0.ubiquity, index=list(m0.activities))
    dens = density.to_frame() if hasattr(density, "to_frame") else pd.DataFrame(density)
    ubi = transform_ubiquity(pd.Series(ubiquity), ubiquity_transform)

    idx = [panel.year_index(y) for y in base]
    mb = panel.m[idx]
    if kind == "entry":
        mask = (mb == 0).all(axis=0)
        if at_risk != "none":
            source = panel.counts if at_risk == "nonzero-count" else panel.rca
            if source is None:
                raise ValidationError(f"at-risk rule {at_risk!r} needs count data in the panel")
            mask &= (source[idx] > 0).all(axis=0)
    else:
        mask = (mb == 1).all(axis=0)

    hits = events.pairs(kind)
    country_id = {c: i for i, c in enumerate(panel.countries)}
    activity_id = {a: j for j, a in enumerate(panel.activities)}
    rows, n_missing = [], 0
    for i, j in zip(*np.nonzero(mask)):
        c, a = panel.countries[i], panel.activities[j]
        if c not in dens.index or a not in dens.columns or a not in ubi.index:
            n_missing += 1
            continue
        rows.append(
            (c, a, int((c, a) in hits), float(dens.at[c, a]), float(ubi[a]), country_id[c], activity_id[a])
        )
    if not rows:
        raise EmptyAtRiskSet(f"no {kind} at-risk pairs under rule {at_risk!r}")
    frame = pd.DataFrame(
        rows,
        columns=["country", "activity", "outcome", "density", "ubiquity", "country_id", "activity_id"],
    )
    metadata = {
        "kind": kind,
        "at_risk": at_risk if kind == "entry" else "specialized-in-base",
        "ubiquity_transform": ubiquity_transform,
        "base_years": list(base),
        "post_years": list(post),
        "include_self": include_self,
        "n_rows": len(frame),
        "n_events": int(frame["outcome"].sum()),
        "n_dropped_missing_density": n_missing,
    }
    return TransitionDataset(frame, metadata)


@dataclass(frozen=True)
class CorrelationReport:
    n: int
    pearson_r: float
    pearson_p: float
    spearman_rho: float
    spearman_p: float
    unmatched: list

    def to_dict(self):
        return {
            "n": self.n,
            "pearson_r": self.pearson_r,
            "pearson_p": self.pearson_p,
            "spearman_rho": self.spearman_rho,
            "spearman_p": self.spearman_p,
            "unmatched": list(self.unmatched),
        }


def load_external_scores(path) -> pd.Series:
    """``language,impact_score`` CSV as a Series indexed by language."""
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in ("language", "impact_score"):
        if col not in raw.columns:
            raise MissingColumn(col, path)
    values = {}
    for i, (lang, score) in enumerate(zip(raw["language"], raw["impact_score"])):
        try:
            values[lang.strip()] = float(score)
        except ValueError:
            raise UnparsableRow(i + 2, f"cannot parse impact_score={score!r}") from None
    return pd.Series(values, dtype=np.float64)


def correlate_ubiquity_external(ubiquity, external) -> CorrelationReport:
    """Pearson and Spearman correlation between ubiquity and an external score.

    Matching is by activity label; labels present on only one side are
    reported in ``unmatched``.
    """
    if not isinstance(external, pd.Series):
        external = load_external_scores(external)
    ubiquity = pd.Series(ubiquity, dtype=np.float64)
    common = sorted(set(ubiquity.index) & set(external.index))
    unmatched = sorted(set(ubiquity.index) ^ set(external.index))
    if len(common) < 3:
        raise InsufficientOverlap(f"only {len(common)} activities in common; need >= 3")
    u = ubiquity[common].to_numpy()
    e = external[common].to_numpy()
    pr = stats.pearsonr(u, e)
    sr = stats.spearmanr(u, e)
    return CorrelationReport(
        len(common), float(pr.statistic), float(pr.pvalue), float(sr.statistic), float(sr.pvalue), unmatched
    )
