"""The full grid of cross-country and entry/exit specifications."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..exceptions import EclabError
from .iv import tsls
from .linear import ols
from .logit import logit
from .results import format_table
from .spec import ModelSpec, evaluate_term

ECI_COLUMNS = ["eci_software", "eci_trade", "eci_tech", "eci_research"]
ECI_SETS = [
    ["eci_software"],
    ["eci_trade"],
    ["eci_tech"],
    ["eci_research"],
    ["eci_software", "eci_trade"],
    ["eci_software", "eci_tech"],
    ["eci_software", "eci_research"],
    ["eci_software", "eci_trade", "eci_tech", "eci_research"],
]

MACRO_TABLES = {
    "gdp": {
        "title": "GDP per capita (log)",
        "outcome": "log(gdp_pc)",
        "controls": ["log(population)", "log(natural_resources)"],
    },
    "gini": {
        "title": "Gini coefficient",
        "outcome": "gini_avg",
        "controls": ["log(gdp_pc)", "log(gdp_pc)^2", "log(population)", "log(natural_resources)"],
    },
    "emissions": {
        "title": "Emissions per GDP",
        "outcome": "emissions_per_gdp",
        "controls": ["log(gdp_pc)", "log(population)", "log(natural_resources)"],
    },
}

# (covariates, country FE, language FE)
TRANSITION_COLUMNS = [
    (["density"], False, False),
    (["density"], True, False),
    (["density"], False, True),
    (["density"], True, True),
    (["ubiquity"], False, False),
    (["density", "ubiquity"], False, False),
    (["density", "ubiquity"], True, False),
]

LABELS = {
    "eci_software": "ECI software",
    "eci_trade": "ECI trade",
    "eci_tech": "ECI technology",
    "eci_research": "ECI research",
    "log(population)": "Population (log)",
    "log(natural_resources)": "Natural resources (log)",
    "log(gdp_pc)": "GDP per capita (log)",
    "log(gdp_pc)^2": "GDP per capita (log)^2",
    "density": "Relatedness density",
    "ubiquity": "Ubiquity",
}


@dataclass
class ModelEntry:
    table: str
    column: int
    spec: ModelSpec
    estimator: str
    result: object = None
    error: str | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "table": self.table,
            "column": self.column,
            "estimator": self.estimator,
            "spec": self.spec.to_dict(),
        }
        if self.error:
            out["error"] = self.error
        else:
            out["result"] = self.result.to_dict()
        if self.warnings:
            out["warnings"] = self.warnings
        return out


@dataclass
class ResultBundle:
    entries: list
    titles: dict

    def tables(self):
        out = {}
        for e in self.entries:
            out.setdefault(e.table, []).append(e)
        return out

    def to_dict(self):
        return {
            "tables": {
                name: {"title": self.titles.get(name, name), "models": [e.to_dict() for e in entries]}
                for name, entries in self.tables().items()
            }
        }

    def to_json(self):
        return json.dumps(rounded(self.to_dict()), indent=2, sort_keys=False) + "\n"

    def to_text(self):
        parts = []
        for name, entries in self.tables().items():
            cols = [f"({e.column})" for e in entries]
            results = [e.result for e in entries]
            rows = []
            if name.startswith(("entry", "exit")):
                rows.append(("Country FE", ["Yes" if "country" in e.spec.fixed_effects else "No" for e in entries]))
                rows.append(("Language FE", ["Yes" if "activity" in e.spec.fixed_effects else "No" for e in entries]))
            if name.endswith("_iv"):
                rows.append(("Instrument", ["Yes" if e.estimator == "2sls" else "No" for e in entries]))
            parts.append(format_table(self.titles.get(name, name), cols, results, LABELS, rows))
            for e in entries:
                if e.error:
                    parts.append(f"  ({e.column}) not estimated: {e.error}\n")
        return "\n".join(parts)


def rounded(obj, digits=12):
    """Round floats to ``digits`` significant figures for stable serialization."""
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}") if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v, digits) for v in obj]
    return obj


def merge_country_table(indicators, eci, instrument=None, sample=None):
    """Indicators joined with software ECI (and its instrument) by country code.

    ``sample`` is an optional list of countries; membership lands in the
    boolean ``in_sample`` column.
    """
    frame = indicators.frame.copy() if hasattr(indicators, "frame") else indicators.copy()
    frame.index.name = "country"
    eci = pd.Series(eci, dtype=np.float64, name="eci_software")
    frame = frame.join(eci, how="outer")
    if instrument is not None:
        frame = frame.join(pd.Series(instrument, dtype=np.float64, name="eci_software_iv"), how="left")
    frame["in_sample"] = frame.index.isin(sample) if sample is not None else True
    return frame.sort_index()


def _common_sample(data, terms, base_sample=None):
    ok = pd.Series(True, index=data.index)
    if base_sample is not None and base_sample in data.columns:
        ok &= data[base_sample].astype(bool)
    for t in terms:
        v = evaluate_term(t, data)
        ok &= v.notna() & np.isfinite(v)
    return ok


def _run(entry, fn, *args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            entry.result = fn(*args)
        except EclabError as exc:
            entry.error = f"{type(exc).__name__}: {exc}"
    entry.warnings = [f"{w.category.__name__}: {w.message}" for w in caught]
    return entry


def macro_entries(data, se_type="HC1", instrument_col="eci_software_iv", sample_col="in_sample", tables=None):
    tables = tables or MACRO_TABLES
    data = data.copy()
    entries = []
    have_iv = instrument_col in data.columns and data[instrument_col].notna().any()
    for key, tdef in tables.items():
        terms = [tdef["outcome"]] + tdef["controls"] + ECI_COLUMNS
        if have_iv:
            terms.append(instrument_col)
        mask_col = f"__sample_{key}__"
        data[mask_col] = _common_sample(data, terms, sample_col)
        variants = [("ols", key)]
        if have_iv:
            variants.append(("iv", f"{key}_iv"))
        for kind, table in variants:
            for i, ecis in enumerate(ECI_SETS, start=1):
                spec = ModelSpec(
                    outcome=tdef["outcome"],
                    covariates=ecis + tdef["controls"],
                    se_type=se_type,
                    sample=mask_col,
                    name=f"{table}_{i}",
                )
                if kind == "iv" and "eci_software" in ecis:
                    entry = ModelEntry(table, i, spec, "2sls")
                    entries.append(_run(entry, tsls, spec, "eci_software", instrument_col, data))
                else:
                    entry = ModelEntry(table, i, spec, "ols")
                    entries.append(_run(entry, ols, spec, data))
    return entries


def transition_entries(frame, kind, estimator="ols", cluster="country"):
    entries = []
    table = f"{kind}_{'lpm' if estimator == 'ols' else 'logit'}"
    for i, (covs, country_fe, lang_fe) in enumerate(TRANSITION_COLUMNS, start=1):
        fes = (["country"] if country_fe else []) + (["activity"] if lang_fe else [])
        spec = ModelSpec(
            outcome="outcome",
            covariates=covs,
            fixed_effects=fes,
            se_type="cluster",
            cluster=cluster,
            name=f"{table}_{i}",
        )
        entry = ModelEntry(table, i, spec, estimator)
        entries.append(_run(entry, ols if estimator == "ols" else logit, spec, frame))
    return entries


TITLES = {
    "gdp": "GDP per capita (log), OLS, robust SEs",
    "gini": "Gini coefficient, OLS, robust SEs",
    "emissions": "Emissions per GDP, OLS, robust SEs",
    "gdp_iv": "GDP per capita (log), 2SLS where ECI software is instrumented",
    "gini_iv": "Gini coefficient, 2SLS where ECI software is instrumented",
    "emissions_iv": "Emissions per GDP, 2SLS where ECI software is instrumented",
    "entry_lpm": "Entry, linear probability models, country-clustered SEs",
    "exit_lpm": "Exit, linear probability models, country-clustered SEs",
    "entry_logit": "Entry, logit, country-clustered SEs",
    "exit_logit": "Exit, logit, country-clustered SEs",
}


def run_paper_models(country_data=None, entry=None, exit=None, config=None) -> ResultBundle:
    """Estimate every table specification that the supplied data supports.

    ``country_data`` is a merged country table (see
    :func:`merge_country_table`); ``entry``/``exit`` are transition datasets or
    their frames. A column whose estimator fails (too few observations,
    separation, ...) is recorded with its error instead of stopping the grid,
    unless ``config["strict"]`` is set.
    """
    config = dict(config or {})
    entries = []
    if country_data is not None:
        entries += macro_entries(
            country_data,
            se_type=config.get("macro_se", "HC1"),
            tables=config.get("macro_tables"),
        )
    for kind, ds in (("entry", entry), ("exit", exit)):
        if ds is None:
            continue
        frame = ds.frame if hasattr(ds, "frame") else ds
        entries += transition_entries(frame, kind, "ols")
        if config.get("logit", True):
            entries += transition_entries(frame, kind, "logit")
    if config.get("strict"):
        failed = [e for e in entries if e.error]
        if failed:
            raise EclabError(f"{failed[0].spec.name}: {failed[0].error}")
    return ResultBundle(entries, TITLES)
