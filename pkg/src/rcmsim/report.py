"""Analysis report: summary table, figure data and every hypothesis test.

The unit of pairing is the operator: per-operator mean targeting error and
total task time are compared between conditions. The condition x angle-band
ANOVA works on individual target records.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .sim.board import ANGLE_BANDS, angle_band
from .stats import (describe, histogram, kde_density, kde_grid, mann_whitney_u, paired_t_test,
                    shapiro_wilk, t_quantile, two_way_anova, wilcoxon_signed_rank)

REPORT_SCHEMA_VERSION = 1
CONDITIONS = ("manual", "robotic")
FIGURE_KINDS = ("histogram", "kde", "box", "violin", "angle_profile", "summary_bar")
ALPHA = 0.05


@dataclass(frozen=True)
class FigureData:
    """One figure's numbers: labelled series of equal-length numeric columns."""

    kind: str
    series: tuple  # of (label, {column: list})

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        for label, cols in self.series:
            lengths = {len(v) for v in cols.values()}
            if len(lengths) > 1:
                raise ValueError(f"series {label!r} of {self.kind} has unequal column lengths")

    def columns(self) -> list:
        names = []
        for _, cols in self.series:
            for c in cols:
                if c not in names:
                    names.append(c)
        return names

    def write_csv(self, path) -> None:
        names = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series", *names])
            for label, cols in self.series:
                n = len(next(iter(cols.values()))) if cols else 0
                for i in range(n):
                    w.writerow([label, *(_cell(cols[c][i]) if c in cols else "" for c in names)])


@dataclass(frozen=True)
class Report:
    document: dict
    figures: tuple

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "report.json"]
        paths[0].write_text(self.to_json())
        for fig in self.figures:
            p = out / f"fig_{fig.kind}.csv"
            fig.write_csv(p)
            paths.append(p)
        return paths


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return obj


def _mean_sd(values) -> dict:
    x = np.asarray(values, dtype=float)
    return {"n": int(x.size),
            "mean": float(x.mean()) if x.size else None,
            "sd": float(x.std(ddof=1)) if x.size >= 2 else None}


def _per_operator(records):
    """{(operator, condition): (mean error, total time)}."""
    groups = {}
    for r in records:
        groups.setdefault((r.operator_id, r.condition), []).append(r)
    return {k: (float(np.mean([r.error for r in v])), float(np.sum([r.time for r in v])))
            for k, v in sorted(groups.items())}


def _try(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs).to_dict()
    except ValueError as exc:
        return {"name": name, "skipped": str(exc)}


def _ci95(values):
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return None, None
    half = t_quantile(0.975, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size)
    return float(x.mean() - half), float(x.mean() + half)


def build_report(records, summaries=None) -> Report:
    """Report document plus figure data from trial records.

    ``summaries`` (per-operator dicts from the experiment runner) supply the
    ergonomic-cost proxy and solver diagnostics; without them those parts
    are reported as unavailable.
    """
    records = sorted(records, key=lambda r: (r.operator_id, r.condition, r.target_index))
    if not records:
        raise ValueError("no trial records to analyse")
    by_cond = {c: [r for r in records if r.condition == c] for c in CONDITIONS}
    per_op = _per_operator(records)
    paired_ops = sorted({op for op, c in per_op if c == "manual"}
                        & {op for op, c in per_op if c == "robotic"})
    erg = {}
    if summaries:
        for s in summaries:
            erg.setdefault(s["condition"], []).append((s["operator_id"], s["ergonomic_cost"]))

    doc = {"schema_version": REPORT_SCHEMA_VERSION,
           "n_records": len(records),
           "operators": {tier: len({r.operator_id for r in records if r.tier == tier})
                         for tier in ("expert", "novice")},
           "paired_operators": len(paired_ops)}

    # (a) summary table
    table = []
    for c in CONDITIONS:
        ops = [v for (op, cc), v in per_op.items() if cc == c]
        row = {"condition": c,
               "error": _mean_sd([r.error for r in by_cond[c]]),
               "time_per_task": _mean_sd([t for _, t in ops]),
               "ergonomic_cost": _mean_sd([v for _, v in sorted(erg.get(c, []))])
               if c in erg else None}
        table.append(row)
    doc["summary_table"] = table
    doc["descriptives"] = {c: {"error": describe([r.error for r in by_cond[c]]),
                               "time": describe([r.time for r in by_cond[c]])}
                           for c in CONDITIONS if by_cond[c]}

    # (c) error-vs-angle profile
    profile = []
    for c in CONDITIONS:
        for b, (lo, hi) in enumerate(ANGLE_BANDS):
            errs = [r.error for r in by_cond[c] if angle_band(r.insertion_angle) == b]
            ci = _ci95(errs)
            profile.append({"condition": c, "band": b, "band_lo": lo, "band_hi": hi,
                            "n": len(errs), "mean": float(np.mean(errs)) if errs else None,
                            "sd": float(np.std(errs, ddof=1)) if len(errs) >= 2 else None,
                            "ci95_lo": ci[0], "ci95_hi": ci[1]})
    doc["angle_profile"] = profile

    # (d) tests
    tests = {}
    m_err = [per_op[(op, "manual")][0] for op in paired_ops]
    r_err = [per_op[(op, "robotic")][0] for op in paired_ops]
    m_time = [per_op[(op, "manual")][1] for op in paired_ops]
    r_time = [per_op[(op, "robotic")][1] for op in paired_ops]
    tests["paired_t_error"] = _try("paired_t", paired_t_test, m_err, r_err)
    tests["paired_t_time"] = _try("paired_t", paired_t_test, m_time, r_time)
    tests["wilcoxon_error"] = _try("wilcoxon_signed_rank", wilcoxon_signed_rank, m_err, r_err)
    tests["wilcoxon_time"] = _try("wilcoxon_signed_rank", wilcoxon_signed_rank, m_time, r_time)
    tests["shapiro_error_diff"] = _try("shapiro_wilk", shapiro_wilk,
                                       np.subtract(m_err, r_err))
    tests["shapiro_time_diff"] = _try("shapiro_wilk", shapiro_wilk,
                                      np.subtract(m_time, r_time))
    if erg.get("manual") and erg.get("robotic"):
        tests["mann_whitney_ergonomic"] = _try(
            "mann_whitney_u", mann_whitney_u,
            [v for _, v in sorted(erg["manual"])], [v for _, v in sorted(erg["robotic"])])
    else:
        tests["mann_whitney_ergonomic"] = {"name": "mann_whitney_u",
                                           "skipped": "no per-operator ergonomic costs supplied"}
    tests.update(_anova(records))
    doc["tests"] = tests
    doc["primary_tests"] = {
        metric: _primary(tests[f"shapiro_{metric}_diff"], f"paired_t_{metric}", f"wilcoxon_{metric}")
        for metric in ("error", "time")}

    if summaries:
        doc["diagnostics"] = _diagnostics(summaries)
    figures = _figures(by_cond, profile, table)
    return Report(_clean(doc), figures)


def _primary(shapiro, t_name, w_name):
    """Paired t when the differences look normal, else the signed-rank test."""
    if "skipped" in shapiro:
        return t_name
    return t_name if shapiro["p_value"] >= ALPHA else w_name


def _anova(records):
    keys = ("anova_condition", "anova_angle_band", "anova_interaction")
    y = [r.error for r in records]
    fa = [r.condition for r in records]
    fb = [angle_band(r.insertion_angle) for r in records]
    cells = {}
    for a, b in zip(fa, fb):
        cells[(a, b)] = cells.get((a, b), 0) + 1
    reason = None
    if len(set(fa)) < 2 or len(set(fb)) < 2:
        reason = "need both conditions and at least two angle bands"
    elif len(cells) < len(set(fa)) * len(set(fb)):
        reason = "empty condition x angle-band cell"
    elif min(cells.values()) < 2:
        reason = "a condition x angle-band cell has fewer than 2 records"
    if reason:
        return {k: {"name": k, "skipped": reason} for k in keys}
    try:
        table = two_way_anova(y, fa, fb, names=("condition", "angle_band"))
    except ValueError as exc:
        return {k: {"name": k, "skipped": str(exc)} for k in keys}
    eff = table.effects
    pairs = zip(keys, ("condition", "angle_band", "conditionxangle_band"))
    return {k: replace(eff[e], name=k).to_dict() for k, e in pairs}


def _diagnostics(summaries):
    out = {}
    for c in CONDITIONS:
        ss = [s for s in summaries if s["condition"] == c]
        if not ss:
            continue
        flags = {}
        for s in ss:
            for k, v in s["flags"].items():
                flags[k] = flags.get(k, 0) + v
        out[c] = {"ticks": sum(s["ticks"] for s in ss),
                  "nonconverged_ticks": sum(s["nonconverged_ticks"] for s in ss),
                  "max_rcm_residual": max(s["max_rcm_residual"] for s in ss),
                  "damage_events": sum(s["damage_events"] for s in ss),
                  "clutch_cycles": sum(s["clutch_cycles"] for s in ss),
                  "flags": dict(sorted(flags.items()))}
    return out


def _figures(by_cond, profile, table):
    present = [c for c in CONDITIONS if by_cond[c]]
    errs = {c: np.array([r.error for r in by_cond[c]]) for c in present}
    all_err = np.concatenate([errs[c] for c in present])
    edges = np.histogram_bin_edges(all_err, bins="fd") if all_err.size > 1 else \
        np.array([all_err[0] - 0.5, all_err[0] + 0.5])
    hist, kde, box, violin = [], [], [], []
    for c in present:
        _, counts, dens = histogram(errs[c], edges=edges)
        hist.append((c, {"bin_lo": [float(v) for v in edges[:-1]],
                         "bin_hi": [float(v) for v in edges[1:]],
                         "count": [int(v) for v in counts],
                         "density": [float(v) for v in dens]}))
        d = describe(errs[c])
        iqr = d["q3"] - d["q1"]
        inside = errs[c][(errs[c] >= d["q1"] - 1.5 * iqr) & (errs[c] <= d["q3"] + 1.5 * iqr)]
        box.append((c, {"n": [d["n"]], "mean": [d["mean"]], "median": [d["median"]],
                        "q1": [d["q1"]], "q3": [d["q3"]], "min": [d["min"]], "max": [d["max"]],
                        "whisker_lo": [float(inside.min())], "whisker_hi": [float(inside.max())],
                        "n_outliers": [int(errs[c].size - inside.size)]}))
        try:
            grid = kde_grid(errs[c])
            dens = kde_density(errs[c], grid)
        except ValueError:
            continue
        kde.append((c, {"x": [float(v) for v in grid], "density": [float(v) for v in dens]}))
        keep = grid >= 0.0  # errors are non-negative; the violin is drawn on the support
        violin.append((c, {"y": [float(v) for v in grid[keep]],
                           "density": [float(v) for v in dens[keep]]}))
    prof = []
    for c in present:
        rows = [p for p in profile if p["condition"] == c]
        prof.append((c, {k: [_none(p[k]) for p in rows]
                         for k in ("band", "band_lo", "band_hi", "n", "mean", "ci95_lo", "ci95_hi")}))
    bars = []
    for row in table:
        cols = {"metric": [], "mean": [], "sd": [], "n": []}
        for metric in ("error", "time_per_task", "ergonomic_cost"):
            v = row[metric]
            if v is None:
                continue
            cols["metric"].append(metric)
            cols["mean"].append(_none(v["mean"]))
            cols["sd"].append(_none(v["sd"]))
            cols["n"].append(v["n"])
        if row["error"]["n"]:
            bars.append((row["condition"], cols))
    return (FigureData("histogram", tuple(hist)), FigureData("kde", tuple(kde)),
            FigureData("box", tuple(box)), FigureData("violin", tuple(violin)),
            FigureData("angle_profile", tuple(prof)), FigureData("summary_bar", tuple(bars)))


def _none(v):
    return "" if v is None else v
