"""Command-line entry point: ``eclab <command> ...``.

Exit codes: 0 success, 2 invalid arguments or config, 3 bad input data,
4 numerical failure. Every command accepts ``--seed``; no command draws
random numbers today, so it is recorded nowhere and has no effect.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from . import __version__
from .complexity import compute_complexity, rank_table, rescale_minmax
from .dynamics import (
    AT_RISK_RULES,
    UBIQUITY_TRANSFORMS,
    SpecializationPanel,
    build_panel,
    build_transition_dataset,
    correlate_ubiquity_external,
    detect_events,
)
from .econometrics.iv import tsls
from .econometrics.linear import ols
from .econometrics.logit import logit
from .econometrics.paper_models import ModelEntry, ResultBundle, rounded
from .econometrics.spec import ModelSpec
from .exceptions import EclabError, ValidationError, exit_code
from .ingest import clean_filter_aggregate, default_exclusions, load_exclusions, parse_ghig
from .io import (
    read_counts_matrix,
    read_matrix_frame,
    read_proximity,
    read_specialization,
    read_yearly,
    write_csv,
    write_json,
    write_matrix,
)
from .relatedness import backbone, proximity, relatedness_density
from .specialization import RcaMatrix, binarize, build_count_matrix, nested_sort, rca


def _years(text):
    try:
        return [int(y) for y in text.split(",") if y.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated years, got {text!r}") from None


def _existing(path, field):
    if path is not None and not Path(path).exists():
        raise ValidationError(f"--{field.replace('_', '-')}: not found: {path}", field=field)
    return path


def _sidecar(path, suffix):
    p = Path(path)
    return p.with_name(p.stem + suffix)


# --- commands ---------------------------------------------------------------


def cmd_clean(a):
    _existing(a.languages, "languages")
    _existing(a.exclusions, "exclusions")
    column_map = json.loads(a.column_map) if a.column_map else None
    q = parse_ghig(a.languages, column_map)
    excl = load_exclusions(a.exclusions) if a.exclusions else default_exclusions()
    y = clean_filter_aggregate(q, excl, a.top_n)
    write_csv(y.frame, a.out)
    print(f"{len(y.frame)} rows, {len(y.languages)} languages, {q.n_dropped} rows dropped", file=sys.stderr)


def cmd_rca(a):
    _existing(a.counts, "counts")
    cm = build_count_matrix(read_yearly(a.counts), a.year)
    write_matrix(rca(cm), a.out)


def _load_m(a):
    return read_specialization(_existing(a.m, "m"))


def cmd_m(a):
    if a.panel_dir:
        if not a.counts:
            raise ValidationError("--panel-dir needs --counts", field="counts")
        panel = build_panel(read_yearly(_existing(a.counts, "counts")), threshold=a.threshold)
        _write_panel(panel, Path(a.panel_dir))
        if not a.out:
            return
    if not a.out:
        raise ValidationError("pass --out (or --panel-dir)", field="out")
    if a.rca:
        frame = read_matrix_frame(_existing(a.rca, "rca"))
        r = RcaMatrix(tuple(frame.index), tuple(frame.columns), frame.to_numpy(dtype=float))
    elif a.counts and a.year is not None:
        r = rca(build_count_matrix(read_yearly(_existing(a.counts, "counts")), a.year))
    else:
        raise ValidationError("pass --rca, or --counts with --year", field="rca")
    m = binarize(r, a.threshold)
    write_matrix(m, a.out)
    if a.nested_out:
        _write_nested(m, a.nested_out)


def _write_nested(m, path):
    nested = nested_sort(m)
    write_matrix(nested.matrix, path)
    perm = pd.DataFrame(
        [("row", i, nested.matrix.countries[i], int(p)) for i, p in enumerate(nested.row_permutation)]
        + [("column", j, nested.matrix.activities[j], int(p)) for j, p in enumerate(nested.column_permutation)],
        columns=["axis", "position", "label", "original_index"],
    )
    write_csv(perm, _sidecar(path, "_permutation.csv"))


def _write_panel(panel, out):
    out.mkdir(parents=True, exist_ok=True)
    for t, year in enumerate(panel.years):
        write_matrix(panel.matrices[year], out / f"m_{year}.csv")
        if panel.counts is not None:
            frame = pd.DataFrame(panel.counts[t], index=list(panel.countries), columns=list(panel.activities))
            write_matrix(frame, out / f"counts_{year}.csv")


def _read_panel(directory):
    d = Path(_existing(directory, "panel_dir"))
    files = sorted(d.glob("m_*.csv"))
    if not files:
        raise ValidationError(f"no m_<year>.csv files in {d}", field="panel_dir")
    matrices, counts = {}, {}
    for f in files:
        year = int(f.stem.split("_", 1)[1])
        matrices[year] = read_specialization(f, year)
        cf = d / f"counts_{year}.csv"
        if cf.exists():
            counts[year] = read_counts_matrix(cf, year)
    return SpecializationPanel.from_matrices(matrices, counts if len(counts) == len(matrices) else None)


def _panel(a):
    if a.panel_dir:
        return _read_panel(a.panel_dir)
    if a.counts:
        return build_panel(read_yearly(_existing(a.counts, "counts")), threshold=a.threshold)
    raise ValidationError("pass --panel-dir or --counts", field="panel_dir")


def cmd_complexity(a):
    m = _load_m(a)
    scores = compute_complexity(m, a.method, a.tol, a.max_iter)
    write_csv(scores.eci_frame(), a.out)
    if a.pci_out:
        write_csv(scores.pci_frame(), a.pci_out)
    write_json(rounded(scores.metadata()), a.meta_out or _sidecar(a.out, ".json"))


def cmd_rank(a):
    frame = pd.read_csv(_existing(a.scores, "scores"), keep_default_na=False, dtype={"entity": str})
    for col in ("entity", a.column):
        if col not in frame.columns:
            raise ValidationError(f"{a.scores} has no column {col!r}", field="column")
    series = pd.Series(frame[a.column].astype(float).to_numpy(), index=frame["entity"])
    table = rank_table(series)
    table["rescaled"] = rescale_minmax(table.set_index("entity")["z"]).values.to_numpy()
    write_csv(table.rename(columns={"z": a.column})[["entity", a.column, "rescaled", "rank"]], a.out)


def cmd_proximity(a):
    write_csv(proximity(_load_m(a)).to_long(), a.out)


def cmd_density(a):
    m = _load_m(a)
    phi = read_proximity(_existing(a.phi, "phi")) if a.phi else proximity(m)
    if set(phi.activities) != set(m.activities):
        raise ValidationError("--phi activities differ from --m activities", field="phi")
    order = [phi.activities.index(x) for x in m.activities]
    phi = type(phi)(m.activities, phi.values[order][:, order])
    write_matrix(relatedness_density(m, phi, include_self=not a.exclude_self), a.out)


def cmd_backbone(a):
    bb = backbone(read_proximity(_existing(a.phi, "phi")), a.threshold)
    write_csv(bb.edges, a.out)
    if a.dot:
        Path(a.dot).write_text(bb.to_dot(), encoding="utf-8")


def cmd_events(a):
    events = detect_events(_panel(a), a.base, a.post)
    write_csv(events.frame, a.out)


def cmd_transitions(a):
    panel = _panel(a)
    events = detect_events(panel, a.base, a.post)
    ds = build_transition_dataset(
        panel, events, a.type, at_risk=a.at_risk, ubiquity_transform=a.ubiquity,
        include_self=not a.exclude_self,
    )
    write_csv(ds.frame, a.out)
    write_json(ds.metadata, a.meta_out or _sidecar(a.out, ".json"))


def _read_data(path):
    return pd.read_csv(_existing(path, "data"), keep_default_na=True)


def _read_specs(path):
    raw = json.loads(Path(_existing(path, "spec")).read_text(encoding="utf-8"))
    return raw if isinstance(raw, list) else [raw]


def _write_bundle(entries, a, title):
    """Write JSON (and text) results; failed models of a list are reported on stderr."""
    bundle = ResultBundle(entries, {"models": title})
    Path(a.out).write_text(bundle.to_json(), encoding="utf-8")
    if a.text:
        Path(a.text).write_text(bundle.to_text(), encoding="utf-8")
    for e in entries:
        if e.error:
            print(f"model {e.column}: {e.error}", file=sys.stderr)


def _run_entries(specs, data, fn):
    entries = []
    for i, d in enumerate(specs, start=1):
        d = dict(d)
        estimator = d.pop("estimator", "ols")
        spec = ModelSpec.from_dict(d)
        entry = ModelEntry("models", i, spec, estimator)
        try:
            entry.result = fn(estimator, spec, data)
        except EclabError as exc:
            if len(specs) == 1:
                raise
            entry.error = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    return entries


def cmd_regress(a):
    data = _read_data(a.data)

    def fit(estimator, spec, frame):
        if estimator == "ols":
            return ols(spec, frame)
        if estimator == "logit":
            return logit(spec, frame)
        raise ValidationError(f"estimator must be ols or logit, got {estimator!r}", field="estimator")

    _write_bundle(_run_entries(_read_specs(a.spec), data, fit), a, "Regressions")


def cmd_iv(a):
    data = _read_data(a.data)

    def fit(estimator, spec, frame):
        if a.endog not in spec.covariates:
            spec = ModelSpec(**{**spec.to_dict(), "covariates": [a.endog, *spec.covariates]})
        return tsls(spec, a.endog, a.instrument, frame)

    entries = _run_entries(_read_specs(a.spec), data, fit)
    for e in entries:
        e.estimator = "2sls"
    _write_bundle(entries, a, f"2SLS, {a.endog} instrumented by {a.instrument}")


def cmd_correlate(a):
    if a.m:
        m = read_specialization(_existing(a.m, "m"))
        ubiquity = pd.Series(m.ubiquity, index=list(m.activities))
    elif a.ubiquity:
        frame = pd.read_csv(_existing(a.ubiquity, "ubiquity"), keep_default_na=False, dtype={"language": str})
        ubiquity = pd.Series(frame["ubiquity"].astype(float).to_numpy(), index=frame["language"])
    else:
        raise ValidationError("pass --m or --ubiquity", field="m")
    report = correlate_ubiquity_external(ubiquity, _existing(a.scores, "scores"))
    write_json(rounded(report.to_dict()), a.out)


def cmd_pipeline(a):
    from .pipeline import PipelineConfig, load_config, run_pipeline

    overrides = {
        "languages": a.languages,
        "output_dir": a.out,
        "top_n": a.top_n,
        "year": a.year,
        "base_years": a.base,
        "post_years": a.post,
        "rca_threshold": a.rca_threshold,
        "complexity_method": a.method,
        "backbone_threshold": a.backbone_threshold,
        "at_risk": a.at_risk,
        "ubiquity_transform": a.ubiquity,
    }
    if a.config:
        config = load_config(a.config, overrides)
    else:
        config = PipelineConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    result = run_pipeline(config)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(str(result.output_dir))


# --- parser -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="eclab", description="Economic complexity and relatedness toolkit.")
    p.add_argument("--version", action="version", version=f"eclab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("--seed", type=int, default=None, help="accepted for forward compatibility; unused")
        sp.set_defaults(func=fn)
        return sp

    def add_m(sp):
        sp.add_argument("--m", required=True, help="binary specialization matrix CSV")

    def add_panel(sp):
        sp.add_argument("--panel-dir", help="directory of m_<year>.csv (and counts_<year>.csv) files")
        sp.add_argument("--counts", help="yearly long counts CSV (alternative to --panel-dir)")
        sp.add_argument("--threshold", type=float, default=1.0, help="RCA threshold when using --counts")
        sp.add_argument("--base", type=_years, required=True, help="base years, e.g. 2020,2021")
        sp.add_argument("--post", type=_years, required=True, help="post years, e.g. 2022,2023")

    sp = add("clean", cmd_clean, "Parse a GHIG languages file, drop excluded languages, keep the top N, average by year.")
    sp.add_argument("--languages", required=True)
    sp.add_argument("--exclusions", help="one language per line; default: bundled list")
    sp.add_argument("--top-n", type=int, default=150)
    sp.add_argument("--column-map", help='JSON object, e.g. {"country": "iso2_code"}')
    sp.add_argument("--out", required=True)

    sp = add("rca", cmd_rca, "Revealed comparative advantage matrix for one year.")
    sp.add_argument("--counts", required=True, help="yearly long counts CSV from 'clean'")
    sp.add_argument("--year", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = add("m", cmd_m, "Binary specialization matrix M = RCA >= threshold.")
    sp.add_argument("--rca", help="RCA matrix CSV from 'rca'")
    sp.add_argument("--counts", help="yearly long counts CSV (with --year, or with --panel-dir)")
    sp.add_argument("--year", type=int)
    sp.add_argument("--threshold", type=float, default=1.0)
    sp.add_argument("--out")
    sp.add_argument("--nested-out", help="also write the nested-sorted matrix (+ _permutation.csv sidecar)")
    sp.add_argument("--panel-dir", help="write m_<year>.csv and counts_<year>.csv for every year")

    sp = add("complexity", cmd_complexity, "ECI and PCI of a specialization matrix.")
    add_m(sp)
    sp.add_argument("--method", choices=["eigen", "iterate"], default="eigen")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.add_argument("--out", required=True)
    sp.add_argument("--pci-out")
    sp.add_argument("--meta-out", help="run metadata JSON; default: <out>.json")

    sp = add("rank", cmd_rank, "Rank entities by score and rescale to [-1, 1].")
    sp.add_argument("--scores", required=True, help="CSV with an 'entity' column, e.g. eci.csv")
    sp.add_argument("--column", default="z")
    sp.add_argument("--out", required=True)

    sp = add("proximity", cmd_proximity, "Pairwise activity proximity (long form l1,l2,phi).")
    add_m(sp)
    sp.add_argument("--out", required=True)

    sp = add("density", cmd_density, "Relatedness density of every country-activity pair.")
    add_m(sp)
    sp.add_argument("--phi", help="proximity CSV; default: computed from --m")
    sp.add_argument("--exclude-self", action="store_true", help="drop the own-activity term")
    sp.add_argument("--out", required=True)

    sp = add("backbone", cmd_backbone, "Maximum spanning tree plus strong edges of the proximity network.")
    sp.add_argument("--phi", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out", required=True)
    sp.add_argument("--dot")

    sp = add("events", cmd_events, "Entry and exit events between a base and a post window.")
    add_panel(sp)
    sp.add_argument("--out", required=True)

    sp = add("transitions", cmd_transitions, "At-risk pairs with outcome, density and ubiquity.")
    add_panel(sp)
    sp.add_argument("--type", choices=["entry", "exit"], required=True)
    sp.add_argument("--at-risk", choices=AT_RISK_RULES, default="nonzero-count")
    sp.add_argument("--ubiquity", choices=UBIQUITY_TRANSFORMS, default="z")
    sp.add_argument("--exclude-self", action="store_true")
    sp.add_argument("--out", required=True)
    sp.add_argument("--meta-out", help="dataset metadata JSON; default: <out>.json")

    sp = add("regress", cmd_regress, "OLS or logit models from a JSON spec.")
    sp.add_argument("--spec", required=True, help="JSON object or list; keys mirror ModelSpec plus 'estimator'")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--text")

    sp = add("iv", cmd_iv, "2SLS with one endogenous regressor and one instrument.")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--endog", required=True)
    sp.add_argument("--instrument", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--text")

    sp = add("correlate", cmd_correlate, "Correlate activity ubiquity with an external score.")
    sp.add_argument("--m", help="specialization matrix CSV (ubiquity = column sums)")
    sp.add_argument("--ubiquity", help="CSV language,ubiquity (alternative to --m)")
    sp.add_argument("--scores", required=True, help="CSV language,impact_score")
    sp.add_argument("--out", required=True)

    sp = add("pipeline", cmd_pipeline, "Run every stage and write all artifacts plus a manifest.")
    sp.add_argument("--config", help="TOML or JSON config; flags below override it")
    sp.add_argument("--languages")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--top-n", type=int)
    sp.add_argument("--year", type=int)
    sp.add_argument("--base", type=_years)
    sp.add_argument("--post", type=_years)
    sp.add_argument("--rca-threshold", type=float)
    sp.add_argument("--method", choices=["eigen", "iterate"])
    sp.add_argument("--backbone-threshold", type=float)
    sp.add_argument("--at-risk", choices=AT_RISK_RULES)
    sp.add_argument("--ubiquity", choices=UBIQUITY_TRANSFORMS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except EclabError as exc:
        field = getattr(exc, "field", None) or getattr(getattr(exc, "cause", None), "field", None)
        suffix = f" [field: {field}]" if field else ""
        print(f"eclab {args.command}: error: {exc}{suffix}", file=sys.stderr)
        return exit_code(exc)
    except (json.JSONDecodeError, OSError) as exc:
        print(f"eclab {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, json.JSONDecodeError) else 3


if __name__ == "__main__":
    sys.exit(main())
