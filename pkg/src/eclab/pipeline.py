"""End-to-end run from raw counts to every output file, with a manifest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import platform
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy
import sklearn

from . import __version__
from .complexity import compute_complexity
from .dynamics import (
    AT_RISK_RULES,
    UBIQUITY_TRANSFORMS,
    build_panel,
    build_transition_dataset,
    correlate_ubiquity_external,
    detect_events,
)
from .econometrics.iv import build_similarity_instrument
from .econometrics.paper_models import merge_country_table, rounded, run_paper_models
from .econometrics.spec import normalize_se_type
from .exceptions import EclabError, StageError, ValidationError
from .ingest import (
    NeighborGraph,
    apply_sample_filters,
    clean_filter_aggregate,
    default_exclusions,
    load_adjacency,
    load_exclusions,
    load_indicators,
    parse_ghig,
)
from .io import sha256_file, write_csv, write_json, write_matrix
from .relatedness import backbone, proximity, relatedness_density
from .specialization import CountMatrix, nested_sort, rca

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ARTIFACTS = (
    "rca.csv",
    "m.csv",
    "eci.csv",
    "pci.csv",
    "phi.csv",
    "density.csv",
    "backbone.csv",
    "backbone.dot",
    "events.csv",
    "transitions_entry.csv",
    "transitions_exit.csv",
    "results.json",
    "nested_matrix.csv",
)

INPUT_FIELDS = ("languages", "exclusions", "indicators", "adjacency", "impact_scores")

# Choices fixed in code that still shape the outputs; echoed in the manifest.
FIXED_KNOBS = {
    "rca_rule": "R >= threshold",
    "standardization": "population std (ddof=0)",
    "eci_sign": "nonnegative correlation with diversity; then nonpositive with mean ubiquity, positive skew",
    "sort_ties": "descending total, then label",
    "proximity": "co-occurrence / max(ubiquity)",
    "backbone": "maximum spanning forest plus edges with phi >= threshold",
    "transition_se": "cluster by country (CR1, t with G-1 df)",
    "transition_density_year": "first base year",
    "macro_sample": "common sample across every variable of a table",
    "float_format": "%.12g in CSV; 12 significant figures in JSON",
}


@dataclass
class PipelineConfig:
    """Every input path and tunable for :func:`run_pipeline`.

    ``base_years``/``post_years`` default to the first and second half of the
    panel years; ``year`` (the cross-section for RCA, complexity and
    relatedness) defaults to the first base year. ``exclusions=None`` uses
    the bundled list.
    """

    languages: str
    output_dir: str = "eclab-output"
    exclusions: str | None = None
    indicators: str | None = None
    adjacency: str | None = None
    impact_scores: str | None = None
    column_map: dict | None = None
    top_n: int = 150
    years: list | None = None
    year: int | None = None
    base_years: list | None = None
    post_years: list | None = None
    rca_threshold: float = 1.0
    complexity_method: str = "eigen"
    complexity_tol: float = 1e-9
    complexity_max_iter: int = 1000
    include_self: bool = True
    backbone_threshold: float = 0.5
    at_risk: str = "nonzero-count"
    ubiquity_transform: str = "z"
    min_population: float = 1e6
    min_exports: float = 1e9
    min_patents: float = 4
    instrument_k: int = 3
    macro_se: str = "HC1"
    logit: bool = True

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown config field {unknown[0]!r}", field=unknown[0])
        if "languages" not in d:
            raise ValidationError("config needs an input 'languages' path", field="languages")
        return cls(**d)

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self):
        """Raise :class:`ValidationError` naming the first offending field."""
        for name in INPUT_FIELDS:
            value = getattr(self, name)
            if value is None:
                if name == "languages":
                    raise ValidationError("input 'languages' is required", field=name)
                continue
            if not Path(value).is_file():
                raise ValidationError(f"{name}: file not found: {value}", field=name)
        checks = [
            ("top_n", isinstance(self.top_n, int) and self.top_n >= 1, "must be an integer >= 1"),
            ("rca_threshold", _number(self.rca_threshold) and self.rca_threshold > 0, "must be > 0"),
            ("complexity_method", self.complexity_method in ("eigen", "iterate", "fixed-point"),
             "must be eigen or iterate"),
            ("complexity_tol", _number(self.complexity_tol) and self.complexity_tol > 0, "must be > 0"),
            ("complexity_max_iter", isinstance(self.complexity_max_iter, int) and self.complexity_max_iter >= 1,
             "must be an integer >= 1"),
            ("include_self", isinstance(self.include_self, bool), "must be true or false"),
            ("backbone_threshold", _number(self.backbone_threshold) and 0 <= self.backbone_threshold <= 1,
             "must be in [0, 1]"),
            ("at_risk", self.at_risk in AT_RISK_RULES, f"must be one of {list(AT_RISK_RULES)}"),
            ("ubiquity_transform", self.ubiquity_transform in UBIQUITY_TRANSFORMS,
             f"must be one of {list(UBIQUITY_TRANSFORMS)}"),
            ("min_population", _number(self.min_population) and self.min_population >= 0, "must be >= 0"),
            ("min_exports", _number(self.min_exports) and self.min_exports >= 0, "must be >= 0"),
            ("min_patents", _number(self.min_patents) and self.min_patents >= 0, "must be >= 0"),
            ("instrument_k", isinstance(self.instrument_k, int) and self.instrument_k >= 1,
             "must be an integer >= 1"),
            ("logit", isinstance(self.logit, bool), "must be true or false"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ValidationError(f"{name} {why}, got {getattr(self, name)!r}", field=name)
        try:
            normalize_se_type(self.macro_se)
        except ValidationError as exc:
            raise ValidationError(str(exc), field="macro_se") from None
        if normalize_se_type(self.macro_se)[0] == "cluster":
            raise ValidationError("macro_se must be classical or HC1", field="macro_se")
        for name in ("years", "base_years", "post_years"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, list) or not value
                                      or not all(isinstance(y, int) for y in value)):
                raise ValidationError(f"{name} must be a nonempty list of integer years", field=name)
        if (self.base_years is None) != (self.post_years is None):
            raise ValidationError("set both base_years and post_years or neither", field="base_years")
        if self.base_years and set(self.base_years) & set(self.post_years):
            raise ValidationError("base_years and post_years overlap", field="post_years")
        if self.column_map is not None and not isinstance(self.column_map, dict):
            raise ValidationError("column_map must be a table of name -> header", field="column_map")
        if not self.output_dir:
            raise ValidationError("output_dir is required", field="output_dir")
        return self


def _number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def load_config(path, overrides=None) -> PipelineConfig:
    """Read a TOML (or ``.json``) config; ``overrides`` win over file values.

    Relative paths in the file resolve against the file's directory; paths
    in ``overrides`` are taken as given.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}", field="config")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}", field="config") from None
    for name in INPUT_FIELDS + ("output_dir",):
        if data.get(name) is not None and not os.path.isabs(data[name]):
            data[name] = str(path.parent / data[name])
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig.from_dict(data)


def config_digest(config: PipelineConfig):
    """SHA-256 of the effective config, output directory excluded."""
    d = config.to_dict()
    d.pop("output_dir")
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass
class PipelineResult:
    output_dir: Path
    manifest: dict
    warnings: list = field(default_factory=list)


class _Stages:
    """Runs named stages in order, wrapping failures with the stage name."""

    def __init__(self):
        self.warnings = []

    def run(self, name, fn, *args, **kwargs):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                out = fn(*args, **kwargs)
            except EclabError as exc:
                raise StageError(name, exc) from exc
        self.warnings += [f"{name}: {w.category.__name__}: {w.message}" for w in caught]
        return out


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Clean, specialize, score, relate, detect events and estimate.

    Files are written to a scratch directory next to ``output_dir`` and moved
    into place only when every stage succeeds; a failing stage raises
    :class:`~eclab.exceptions.StageError` and leaves nothing behind.
    """
    config.validate()
    out = Path(config.output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".eclab-", dir=out.parent))
    try:
        stages = _Stages()
        effective = _run_stages(config, stages, tmp)
        manifest = _manifest(config, effective, stages.warnings, tmp)
        write_json(manifest, tmp / "manifest.json")
        out.mkdir(parents=True, exist_ok=True)
        for f in sorted(tmp.iterdir()):
            os.replace(f, out / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return PipelineResult(out, manifest, stages.warnings)


def _run_stages(config, stages, tmp):
    effective = {}

    def clean():
        q = parse_ghig(config.languages, config.column_map)
        excl = load_exclusions(config.exclusions) if config.exclusions else default_exclusions()
        return q, clean_filter_aggregate(q, excl, config.top_n)

    q, yearly = stages.run("clean", clean)
    write_csv(yearly.frame, tmp / "yearly_counts.csv")
    effective["n_dropped_rows"] = int(q.n_dropped)
    effective["languages_kept"] = list(yearly.languages)

    panel = stages.run("specialization", build_panel, yearly, config.years, config.rca_threshold)
    base, post = config.base_years, config.post_years
    if base is None:
        if len(panel.years) < 2:
            raise StageError("events", ValidationError("need at least two years to split windows",
                                                       field="base_years"))
        half = len(panel.years) // 2
        base, post = list(panel.years[:half]), list(panel.years[half:])
    year = config.year if config.year is not None else base[0]
    if year not in panel.matrices:
        raise StageError("specialization", ValidationError(f"year {year} not in data {list(panel.years)}",
                                                           field="year"))
    effective.update({"years": list(panel.years), "year": year, "base_years": base, "post_years": post})

    m = panel.matrices[year]
    cm = stages.run("specialization", _counts_for, panel, year)
    write_matrix(rca(cm), tmp / "rca.csv")
    write_matrix(m, tmp / "m.csv")
    nested = stages.run("specialization", nested_sort, m)
    write_matrix(nested.matrix, tmp / "nested_matrix.csv")
    perm = pd.DataFrame(
        [("row", i, nested.matrix.countries[i], int(p)) for i, p in enumerate(nested.row_permutation)]
        + [("column", j, nested.matrix.activities[j], int(p)) for j, p in enumerate(nested.column_permutation)],
        columns=["axis", "position", "label", "original_index"],
    )
    write_csv(perm, tmp / "nested_permutation.csv")

    scores = stages.run(
        "complexity", compute_complexity, m, config.complexity_method, config.complexity_tol,
        config.complexity_max_iter,
    )
    write_csv(scores.eci_frame(), tmp / "eci.csv")
    write_csv(scores.pci_frame(), tmp / "pci.csv")
    write_json(rounded(scores.metadata()), tmp / "complexity.json")

    phi = stages.run("relatedness", proximity, m)
    omega = stages.run("relatedness", relatedness_density, m, phi, include_self=config.include_self)
    bb = stages.run("relatedness", backbone, phi, config.backbone_threshold)
    write_csv(phi.to_long(), tmp / "phi.csv")
    write_matrix(omega, tmp / "density.csv")
    write_csv(bb.edges, tmp / "backbone.csv")
    (tmp / "backbone.dot").write_text(bb.to_dot(), encoding="utf-8")

    events = stages.run("events", detect_events, panel, base, post)
    write_csv(events.frame, tmp / "events.csv")
    transitions = {}
    for kind in ("entry", "exit"):
        ds = stages.run(
            "transitions", build_transition_dataset, panel, events, kind,
            at_risk=config.at_risk, ubiquity_transform=config.ubiquity_transform,
            include_self=config.include_self,
        )
        write_csv(ds.frame, tmp / f"transitions_{kind}.csv")
        transitions[kind] = ds
        effective[f"transitions_{kind}"] = ds.metadata

    country_table = None
    extra = {}
    if config.indicators:
        ind = stages.run("regressions", load_indicators, config.indicators)
        graph = (stages.run("regressions", load_adjacency, config.adjacency)
                 if config.adjacency else NeighborGraph(frozenset()))
        sample = apply_sample_filters(ind, config.min_population, config.min_exports, config.min_patents)
        eci = pd.Series(scores.eci_z, index=list(scores.countries))
        inst = stages.run("regressions", build_similarity_instrument, scores, m, graph, config.instrument_k)
        country_table = merge_country_table(ind, eci, inst.values, sample.included)
        write_csv(country_table, tmp / "country_table.csv", index=True)
        extra["sample"] = {"included": list(sample.included), "excluded": dict(sample.excluded)}
        extra["instrument"] = {"peers": inst.peers, "dropped": list(inst.dropped)}

    bundle = stages.run(
        "regressions", run_paper_models, country_table, transitions["entry"], transitions["exit"],
        {"macro_se": config.macro_se, "logit": config.logit},
    )
    results = bundle.to_dict()
    results.update(extra)
    if config.impact_scores:
        ubiquity = pd.Series(m.ubiquity, index=list(m.activities))
        report = stages.run("correlation", correlate_ubiquity_external, ubiquity, config.impact_scores)
        results["ubiquity_impact_correlation"] = report.to_dict()
    write_json(rounded(results), tmp / "results.json")
    (tmp / "results.txt").write_text(bundle.to_text(), encoding="utf-8")
    return effective


def _counts_for(panel, year):
    t = panel.year_index(year)
    m = panel.matrices[year]
    rows = [panel.countries.index(c) for c in m.countries]
    cols = [panel.activities.index(a) for a in m.activities]
    return CountMatrix(m.countries, m.activities, panel.counts[t][np.ix_(rows, cols)], year)


def _manifest(config, effective, stage_warnings, tmp):
    cfg = config.to_dict()
    cfg.pop("output_dir")
    inputs = {
        name: {"path": getattr(config, name), "sha256": sha256_file(getattr(config, name))}
        for name in INPUT_FIELDS
        if getattr(config, name)
    }
    if not config.exclusions:
        inputs["exclusions"] = {"path": "<bundled>", "sha256": hashlib.sha256(
            "\n".join(default_exclusions()).encode()).hexdigest()}
    artifacts = {f.name: sha256_file(f) for f in sorted(tmp.iterdir())}
    missing = [a for a in ARTIFACTS if a not in artifacts]
    if missing:
        raise StageError("manifest", ValidationError(f"artifacts not produced: {missing}"))
    return rounded({
        "tool": "eclab",
        "version": __version__,
        "config": cfg,
        "config_sha256": config_digest(config),
        "effective": effective,
        "knobs": FIXED_KNOBS,
        "inputs": inputs,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "scikit-learn": sklearn.__version__,
        },
        "artifacts": artifacts,
        "warnings": stage_warnings,
    })
