"""Readers and cleaning steps for raw contributor counts and country files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import (
    DuplicateKey,
    EmptyAfterFilter,
    MissingColumn,
    SelfLoop,
    UnparsableRow,
    ValidationError,
)

#: Canonical field -> column name in the published GHIG ``languages.csv``.
GHIG_COLUMNS = {
    "year": "year",
    "quarter": "quarter",
    "country": "iso2_code",
    "language": "language",
    "developers": "num_pushers",
}

INDICATOR_COLUMNS = [
    "gdp_pc",
    "population",
    "natural_resources",
    "gini_avg",
    "emissions_per_gdp",
    "exports_usd",
    "patents",
]
OPTIONAL_INDICATOR_COLUMNS = ["eci_trade", "eci_tech", "eci_research"]

KEY = ["year", "quarter", "country", "language"]


@dataclass(frozen=True)
class QuarterlyCounts:
    """Long table of (year, quarter, country, language, developers)."""

    frame: pd.DataFrame
    n_dropped: int = 0

    def __post_init__(self):
        dup = self.frame.duplicated(KEY)
        if dup.any():
            row = self.frame.loc[dup].iloc[0]
            raise DuplicateKey(tuple(row[k] for k in KEY))
        if (self.frame["developers"] < 0).any():
            raise ValidationError("developers must be nonnegative")

    def __len__(self):
        return len(self.frame)


@dataclass(frozen=True)
class YearlyCounts:
    """Long table of (year, country, language, developers) with quarterly means."""

    frame: pd.DataFrame

    def __len__(self):
        return len(self.frame)

    @property
    def years(self):
        return sorted(int(y) for y in self.frame["year"].unique())

    @property
    def languages(self):
        return sorted(self.frame["language"].unique())


@dataclass(frozen=True)
class CountryIndicators:
    """Country-level covariates indexed by country code; absent values are NaN."""

    frame: pd.DataFrame

    def __len__(self):
        return len(self.frame)

    def get(self, country, column):
        value = self.frame.at[country, column] if country in self.frame.index else np.nan
        return None if pd.isna(value) else float(value)


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected country adjacency (shared land or maritime border)."""

    pairs: frozenset = field(default_factory=frozenset)

    def are_neighbors(self, a, b):
        return frozenset((a, b)) in self.pairs

    def neighbors(self, country):
        out = set()
        for pair in self.pairs:
            if country in pair:
                out |= pair - {country}
        return out

    def directed_pairs(self):
        """All ordered (a, b) pairs, i.e. the symmetric closure, sorted."""
        out = []
        for pair in self.pairs:
            a, b = sorted(pair)
            out += [(a, b), (b, a)]
        return sorted(out)

    def __len__(self):
        return len(self.pairs)


@dataclass(frozen=True)
class SampleFilterResult:
    included: list
    excluded: dict  # country -> reason


def _read_csv(path, **kwargs):
    return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, **kwargs)


def _parse_number(value, row, column, kind=float):
    try:
        number = kind(value)
    except (TypeError, ValueError):
        raise UnparsableRow(row, f"cannot parse {column}={value!r}") from None
    if isinstance(number, float) and not math.isfinite(number):
        raise UnparsableRow(row, f"non-finite {column}={value!r}")
    return number


def parse_ghig(path, column_map=None) -> QuarterlyCounts:
    """Read a GHIG-style quarterly languages file.

    Rows with a blank country or language are dropped and counted in
    ``n_dropped``. Row numbers in errors are 1-based file lines (the header is
    line 1).
    """
    cmap = dict(GHIG_COLUMNS)
    if column_map:
        cmap.update(column_map)
    raw = _read_csv(path)
    for name in cmap.values():
        if name not in raw.columns:
            raise MissingColumn(name, path)

    records = []
    dropped = 0
    seen = {}
    for i, rec in enumerate(raw[list(cmap.values())].itertuples(index=False, name=None)):
        line = i + 2
        values = dict(zip(cmap.keys(), (v.strip() for v in rec)))
        if not values["country"] or not values["language"]:
            dropped += 1
            continue
        year = _parse_number(values["year"], line, "year", int)
        quarter = _parse_number(values["quarter"], line, "quarter", int)
        if quarter not in (1, 2, 3, 4):
            raise UnparsableRow(line, f"quarter {quarter} not in 1..4")
        developers = _parse_number(values["developers"], line, "developers", float)
        if developers < 0:
            raise UnparsableRow(line, f"negative developer count {developers}")
        key = (year, quarter, values["country"], values["language"])
        if key in seen:
            raise DuplicateKey(key, line)
        seen[key] = line
        records.append(key + (developers,))

    frame = pd.DataFrame.from_records(records, columns=KEY + ["developers"])
    frame = frame.astype({"year": "int64", "quarter": "int64", "developers": "float64"})
    return QuarterlyCounts(frame, dropped)


def default_exclusions():
    """Data-format and markup languages removed before the top-N cut."""
    text = resources.files("eclab").joinpath("data/exclusions.txt").read_text(encoding="utf-8")
    return _parse_exclusion_lines(text.splitlines())


def _parse_exclusion_lines(lines):
    out = []
    for line in lines:
        name = line.split("#", 1)[0].strip()
        if name:
            out.append(name)
    return out


def load_exclusions(path):
    return _parse_exclusion_lines(Path(path).read_text(encoding="utf-8").splitlines())


def rank_languages(frame: pd.DataFrame) -> pd.DataFrame:
    """Rank languages by mean total contributors per period.

    Every (year, quarter) present anywhere in ``frame`` counts as a period; a
    language missing from a period contributes zero there. Ties go to the
    larger grand total, then to the lexicographically smaller name.
    """
    n_periods = len(frame[["year", "quarter"]].drop_duplicates())
    totals = frame.groupby("language", sort=True)["developers"].sum()
    table = pd.DataFrame({"language": totals.index, "total": totals.to_numpy()})
    table["mean"] = table["total"] / n_periods
    table = table.sort_values(
        ["mean", "total", "language"], ascending=[False, False, True], kind="mergesort"
    )
    return table.reset_index(drop=True)


def clean_filter_aggregate(q: QuarterlyCounts, exclusions=None, top_n=150) -> YearlyCounts:
    """Drop excluded languages, keep the ``top_n`` largest, average quarters per year.

    Exclusion matching is case-insensitive and exact. Years with fewer than four
    quarters present are averaged over the quarters that are present.
    """
    if top_n < 1:
        raise ValidationError("top_n must be >= 1", field="top_n")
    if exclusions is None:
        exclusions = default_exclusions()
    banned = {name.casefold() for name in exclusions}
    frame = q.frame
    frame = frame[~frame["language"].str.casefold().isin(banned)]
    if frame.empty:
        raise EmptyAfterFilter("no language survives the exclusion list")

    keep = rank_languages(frame)["language"].head(top_n)
    frame = frame[frame["language"].isin(set(keep))]

    yearly = (
        frame.groupby(["year", "country", "language"], sort=True)["developers"]
        .mean()
        .reset_index()
    )
    return YearlyCounts(yearly)


def load_indicators(path) -> CountryIndicators:
    """Read the country indicators CSV; blank cells become NaN (absent)."""
    raw = _read_csv(path)
    for name in ["country"] + INDICATOR_COLUMNS:
        if name not in raw.columns:
            raise MissingColumn(name, path)
    numeric = INDICATOR_COLUMNS + [c for c in OPTIONAL_INDICATOR_COLUMNS if c in raw.columns]

    data = {c: [] for c in numeric}
    countries = []
    for i, row in enumerate(raw.to_dict("records")):
        line = i + 2
        country = row["country"].strip()
        if not country:
            raise UnparsableRow(line, "blank country code")
        countries.append(country)
        for col in numeric:
            cell = row[col].strip()
            value = np.nan if cell == "" else _parse_number(cell, line, col)
            if col == "population" and not np.isnan(value) and value <= 0:
                raise UnparsableRow(line, f"population must be > 0, got {value}")
            data[col].append(value)

    frame = pd.DataFrame(data, index=pd.Index(countries, name="country"), dtype="float64")
    for col in OPTIONAL_INDICATOR_COLUMNS:
        if col not in frame.columns:
            frame[col] = np.nan
    if frame.index.duplicated().any():
        raise DuplicateKey(frame.index[frame.index.duplicated()][0])
    return CountryIndicators(frame)


def load_adjacency(path) -> NeighborGraph:
    """Read ``country_a,country_b`` pairs; the relation is symmetrized."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return NeighborGraph(frozenset())
    raw = _read_csv(path)
    for name in ("country_a", "country_b"):
        if name not in raw.columns:
            raise MissingColumn(name, path)
    pairs = set()
    for a, b in zip(raw["country_a"].str.strip(), raw["country_b"].str.strip()):
        if a == b:
            raise SelfLoop(a)
        pairs.add(frozenset((a, b)))
    return NeighborGraph(frozenset(pairs))


def apply_sample_filters(
    ind: CountryIndicators,
    min_population=1e6,
    min_exports=1e9,
    min_patents=4,
) -> SampleFilterResult:
    """Countries with population and exports above, and patents at least, the thresholds.

    Countries missing any of the three fields are excluded with the reason
    recorded.
    """
    included, excluded = [], {}
    for country, row in ind.frame.sort_index().iterrows():
        missing = [c for c in ("population", "exports_usd", "patents") if pd.isna(row[c])]
        if missing:
            excluded[country] = "missing " + ",".join(missing)
        elif not row["population"] > min_population:
            excluded[country] = f"population {row['population']:g} <= {min_population:g}"
        elif not row["exports_usd"] > min_exports:
            excluded[country] = f"exports {row['exports_usd']:g} <= {min_exports:g}"
        elif not row["patents"] >= min_patents:
            excluded[country] = f"patents {row['patents']:g} < {min_patents:g}"
        else:
            included.append(country)
    return SampleFilterResult(included, excluded)
