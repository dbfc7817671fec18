import json

import numpy as np
import pytest

from rcmsim.report import FIGURE_KINDS, FigureData, build_report
from rcmsim.sim.trial import TrialRecord


def _synthetic(n_ops=6, seed=0):
    """Per-operator records: robotic error about half the manual one, error rising with angle."""
    rng = np.random.default_rng(seed)
    recs, summaries = [], []
    for k in range(n_ops):
        op = f"{'EN'[k % 2]}{k // 2 + 1:02d}"
        tier = ("expert", "novice")[k % 2]
        for cond, base in (("manual", 3.8), ("robotic", 1.9)):
            for t in range(10):
                angle = 3.0 * t
                slope = 0.1 if cond == "manual" else 0.02
                err = max(0.05, base + slope * (angle - 15) + rng.normal(0, 0.4))
                recs.append(TrialRecord(op, tier, cond, t, angle, err,
                                        rng.uniform(3, 8) * (0.65 if cond == "robotic" else 1),
                                        t, 1000 + k))
            summaries.append({"operator_id": op, "tier": tier, "condition": cond,
                              "ergonomic_cost": float(rng.uniform(1, 2) if cond == "manual"
                                                      else rng.uniform(0, 1)),
                              "ticks": 100, "nonconverged_ticks": 0, "max_rcm_residual": 0.0,
                              "damage_events": 0, "clutch_cycles": 0, "flags": {}})
    return recs, summaries


def test_report_contents():
    recs, summ = _synthetic()
    rep = build_report(recs, summ)
    doc = rep.document
    assert doc["n_records"] == 120 and doc["paired_operators"] == 6
    rows = {r["condition"]: r for r in doc["summary_table"]}
    assert rows["robotic"]["error"]["mean"] < rows["manual"]["error"]["mean"]
    assert rows["manual"]["ergonomic_cost"]["n"] == 6
    for key in ("paired_t_error", "paired_t_time", "wilcoxon_error", "shapiro_error_diff",
                "mann_whitney_ergonomic", "anova_condition", "anova_angle_band",
                "anova_interaction"):
        t = doc["tests"][key]
        assert "skipped" not in t, key
        assert 0.0 <= t["p_value"] <= 1.0
    assert doc["tests"]["anova_interaction"]["p_value"] < 0.05
    assert doc["primary_tests"]["error"] in ("paired_t_error", "wilcoxon_error")
    assert len(doc["angle_profile"]) == 6
    assert {f.kind for f in rep.figures} == set(FIGURE_KINDS)
    assert "diagnostics" in doc


def test_report_is_deterministic_and_json_safe(tmp_path):
    recs, summ = _synthetic()
    a, b = build_report(recs, summ), build_report(list(reversed(recs)), summ)
    assert a.to_json() == b.to_json()
    paths = a.write(tmp_path)
    assert sorted(p.name for p in paths) == sorted(
        ["report.json"] + [f"fig_{k}.csv" for k in FIGURE_KINDS])
    json.loads(paths[0].read_text())
    first = {p.name: p.read_bytes() for p in paths}
    build_report(recs, summ).write(tmp_path)
    assert first == {p.name: p.read_bytes() for p in paths}


def test_single_operator_skips_with_reason():
    recs, _ = _synthetic(n_ops=1)
    doc = build_report(recs).document
    assert "skipped" in doc["tests"]["wilcoxon_error"]
    assert "skipped" in doc["tests"]["paired_t_error"]
    assert "ergonomic" in doc["tests"]["mann_whitney_ergonomic"]["skipped"]
    assert doc["descriptives"]["manual"]["error"]["n"] == 10
    assert "diagnostics" not in doc


def test_report_from_simulation(small_dataset):
    doc = build_report(small_dataset.records, small_dataset.summaries).document
    assert doc["n_records"] == 40
    assert doc["diagnostics"]["robotic"]["ticks"] > 0
    assert "skipped" in doc["tests"]["wilcoxon_error"]


def test_figure_columns_equal_length(tmp_path):
    recs, summ = _synthetic()
    for fig in build_report(recs, summ).figures:
        for _, cols in fig.series:
            assert len({len(v) for v in cols.values()}) <= 1
    with pytest.raises(ValueError):
        FigureData("histogram", (("x", {"a": [1, 2], "b": [1]}),))
    with pytest.raises(ValueError):
        FigureData("pie", ())


def test_histogram_figure_consistent():
    recs, summ = _synthetic()
    hist = next(f for f in build_report(recs, summ).figures if f.kind == "histogram")
    for label, cols in hist.series:
        assert sum(cols["count"]) == 60
        widths = np.subtract(cols["bin_hi"], cols["bin_lo"])
        assert np.sum(np.multiply(cols["density"], widths)) == pytest.approx(1.0)


def test_empty_records_rejected():
    with pytest.raises(ValueError):
        build_report([])
