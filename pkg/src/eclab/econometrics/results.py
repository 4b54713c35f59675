"""Result containers and plain-text regression tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats


def stars(p):
    if p is None or not np.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


@dataclass
class RegressionResult:
    model: str
    names: list
    coef: np.ndarray
    cov: np.ndarray
    se_type: str
    nobs: int
    df_resid: float
    stat_dist: str  # "t" or "normal"
    bse: np.ndarray = field(init=False)
    stat: np.ndarray = field(init=False)
    pvalues: np.ndarray = field(init=False)
    r2: float | None = None
    adj_r2: float | None = None
    within_r2: float | None = None
    pseudo_r2: float | None = None
    loglik: float | None = None
    bic: float | None = None
    n_clusters: int | None = None
    converged: bool = True
    n_iter: int = 0
    dropped_groups: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    resid: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        self.bse = np.sqrt(np.clip(np.diag(self.cov), 0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            self.stat = self.coef / self.bse
        if self.stat_dist == "t":
            self.pvalues = 2 * stats.t.sf(np.abs(self.stat), self.df_resid)
        else:
            self.pvalues = 2 * stats.norm.sf(np.abs(self.stat))

    @property
    def params(self):
        return pd.Series(self.coef, index=self.names)

    def __getitem__(self, name):
        return self.coef[self.names.index(name)]

    def se(self, name):
        return self.bse[self.names.index(name)]

    def pvalue(self, name):
        return self.pvalues[self.names.index(name)]

    def to_dict(self, include_fe=False):
        keep = [i for i, n in enumerate(self.names) if include_fe or "[" not in n]
        return {
            "model": self.model,
            "se_type": self.se_type,
            "nobs": int(self.nobs),
            "coefficients": {
                self.names[i]: {
                    "coef": _num(self.coef[i]),
                    "se": _num(self.bse[i]),
                    "stat": _num(self.stat[i]),
                    "p": _num(self.pvalues[i]),
                }
                for i in keep
            },
            "n_fixed_effect_columns": len(self.names) - len([n for n in self.names if "[" not in n]),
            "r2": _num(self.r2),
            "adj_r2": _num(self.adj_r2),
            "within_r2": _num(self.within_r2),
            "pseudo_r2": _num(self.pseudo_r2),
            "loglik": _num(self.loglik),
            "bic": _num(self.bic),
            "n_clusters": self.n_clusters,
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "dropped_groups": {k: list(v) for k, v in self.dropped_groups.items()},
            "notes": list(self.notes),
        }


@dataclass
class IvResult(RegressionResult):
    first_stage: RegressionResult | None = None
    endogenous: str | None = None
    instrument: str | None = None
    weak_f: float | None = None
    dwh_stat: float | None = None
    dwh_p: float | None = None

    def to_dict(self, include_fe=False):
        out = super().to_dict(include_fe)
        out.update(
            {
                "endogenous": self.endogenous,
                "instrument": self.instrument,
                "first_stage": self.first_stage.to_dict(include_fe) if self.first_stage else None,
                "weak_instrument_f": _num(self.weak_f),
                "dwh_stat": _num(self.dwh_stat),
                "dwh_p": _num(self.dwh_p),
            }
        )
        return out


def format_table(title, columns, results, labels=None, extra_rows=None):
    """Side-by-side coefficient table with SEs in parentheses and stars.

    ``results`` holds one RegressionResult (or None for a failed column) per
    column heading. Fixed-effect dummies and the intercept are omitted.
    ``extra_rows`` are ``(label, cells)`` pairs with one cell per column.
    """
    labels = labels or {}
    terms = []
    for res in results:
        if res is None:
            continue
        for n in res.names:
            if n != "const" and "[" not in n and n not in terms:
                terms.append(n)
    head = ["", *columns]
    body = []
    for t in terms:
        coef_row, se_row = [labels.get(t, t)], [""]
        for res in results:
            if res is None or t not in res.names:
                coef_row.append("")
                se_row.append("")
            else:
                i = res.names.index(t)
                coef_row.append(f"{res.coef[i]:.3f}{stars(res.pvalues[i])}")
                se_row.append(f"({res.bse[i]:.3f})")
        body += [coef_row, se_row]
    for label, cells in (extra_rows or []):
        body.append([label] + list(cells))
    body.append(["Observations"] + [str(r.nobs) if r is not None else "n/a" for r in results])
    fits = [("R2", "r2", "{:.3f}"), ("Adjusted R2", "adj_r2", "{:.3f}"),
            ("Pseudo R2", "pseudo_r2", "{:.3f}"), ("BIC", "bic", "{:.0f}")]
    for label, attr, pattern in fits:
        values = [None if r is None else getattr(r, attr) for r in results]
        if any(v is not None for v in values):
            body.append([label] + ["n/a" if r is None else "" if v is None else pattern.format(v)
                                   for r, v in zip(results, values)])
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = [title, ""]
    fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
    lines.append(fmt(head))
    lines.append("-" * len(lines[-1]))
    lines += [fmt(r) for r in body]
    lines.append("Significance: *p<0.1, **p<0.05, ***p<0.01")
    return "\n".join(lines) + "\n"
