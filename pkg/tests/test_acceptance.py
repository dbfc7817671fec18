"""Acceptance criteria, one test each. Every test records a PASS/FAIL line with
the measured value and the tolerance; the lines are echoed in the pytest
terminal summary under "acceptance criteria"."""
import csv
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, BATCH_SECONDS, N_SEEDS
from rcmsim import checks
from rcmsim.cli import main
from rcmsim.kinematics import Pose
from rcmsim.rcm import pivot_calibrate, synthesize_pivot_poses
from rcmsim.sim import ConditionConfig
from rcmsim.sim.board import DEFAULT_FULCRUM
from rcmsim.sim.trial import RoboticPlant
from rcmsim.stats import paired_t_test, regularized_incomplete_beta, two_way_anova
from rcmsim.stats import wilcoxon_signed_rank
from rcmsim.teleop import IDENTITY_QUAT, TeleopConfig, TeleopPipeline

from test_stats import (WILCOXON_FIXTURES, _brute_anova, _brute_wilcoxon_p,
                        _integrated_t_sf_two_sided)
from test_teleop import _steady_amplitude


def record(number, name, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {number}. {name}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert passed, detail


def test_criterion_1_rcm_constraint(batch):
    outs = batch("robotic")
    seconds = BATCH_SECONDS.get(("robotic", 1.0, N_SEEDS), 0.0)
    ticks = sum(o.ticks for o in outs)
    bad = sum(o.nonconverged_ticks for o in outs)
    worst = max(o.max_rcm_residual for o in outs)
    frac = bad / ticks
    ok = len(outs) == 100 and worst <= 0.1 and frac < 1e-3 and seconds <= 120.0
    record(1, "RCM constraint", ok,
           f"{len(outs)} trials, {ticks} ticks, max residual {worst:.2e} mm (<= 0.1), "
           f"non-converged {frac:.3%} (< 0.1%), runtime {seconds:.0f} s (<= 120)")


def test_criterion_2_jacobian():
    t0 = time.perf_counter()
    ok, detail = checks.check_jacobian(n_states=1000)
    record(2, "Jacobian correctness", ok,
           f"1000 states, {detail}, {time.perf_counter() - t0:.1f} s")


def test_criterion_3_tremor_filter():
    from rcmsim.teleop import boxcar_gain
    g10, _ = _steady_amplitude(10.0)
    _, y20 = _steady_amplitude(20.0)
    g20 = float(np.max(np.abs(y20)))
    e10 = abs(g10 - float(boxcar_gain(10.0, 50, 1000.0)))
    e20 = abs(g20 - float(boxcar_gain(20.0, 50, 1000.0)))
    ok = e10 < 1e-6 and e20 < 1e-6
    record(3, "Tremor filter gains", ok,
           f"10 Hz measured {g10:.10f} (|err| {e10:.1e}), 20 Hz measured {g20:.1e} "
           f"(|err| {e20:.1e}), tolerance 1e-6")


def test_criterion_4_scaling(chain):
    cfg = TeleopConfig()
    fulcrum = np.array(DEFAULT_FULCRUM)
    worst_pipe = worst_tip = 0.0
    for d in ([1, 0, 0], [0, 1, 0], [0.6, -0.8, 0], [0.5, 0.5, -0.7071]):
        d = np.asarray(d, float) / np.linalg.norm(d)
        move = np.linspace(0, 50, 1001)[1:, None] * d
        pipe = TeleopPipeline(cfg, Pose(np.zeros(3), IDENTITY_QUAT))
        pipe.step_block(np.zeros((100, 3)))
        pipe.step_block(move)
        out = pipe.step_block(np.repeat(move[-1:], 100, axis=0))[-1]
        worst_pipe = max(worst_pipe, abs(50.0 / np.linalg.norm(out) - 5.0))
        plant = RoboticPlant(chain, fulcrum, ConditionConfig.robotic())
        start = plant.tip.copy()
        plant.step(np.zeros((10, 3)), True)
        for k in range(100):
            plant.step(move[10 * k:10 * k + 10], True)
        for _ in range(20):
            plant.step(np.repeat(move[-1:], 10, axis=0), True)
        worst_tip = max(worst_tip, abs(50.0 / np.linalg.norm(plant.tip - start) - 5.0))
    # clutched out: the master wanders, the tip must not move at all
    held = plant.tip.copy()
    rng = np.random.default_rng(0)
    drift = 0.0
    for _ in range(200):
        tip, _, _ = plant.step(rng.normal(0, 40, (10, 3)), False)
        drift = max(drift, float(np.max(np.abs(tip - held))))
    ok = worst_pipe <= 0.01 and worst_tip <= 0.01 and drift == 0.0
    record(4, "Motion scaling", ok,
           f"ratio error pipeline {worst_pipe:.1e}, robot tip {worst_tip:.1e} (<= 0.01); "
           f"clutched-out tip drift {drift:.1e} mm (exactly 0)")


def test_criterion_5_pivot_calibration():
    t, p = np.array([0.0, 0.0, 310.0]), np.array([100.0, 50.0, 200.0])
    clean = max(max(np.max(np.abs(r.pivot - p)), np.max(np.abs(r.tip_offset - t)))
                for r in (pivot_calibrate(synthesize_pivot_poses(t, p, 20, rng=s))
                          for s in range(20)))
    # 0.1 mm per axis (3D RMS 0.17 mm), the stricter reading of "0.1 mm noise"
    errs = [np.linalg.norm(pivot_calibrate(synthesize_pivot_poses(
        t, p, 20, rng=s, noise_mm=0.1 * math.sqrt(3))).pivot - p) for s in range(100)]
    p95 = float(np.percentile(errs, 95))
    ok = clean < 1e-9 and p95 < 0.15
    record(5, "Pivot calibration", ok,
           f"noiseless error {clean:.1e} mm (< 1e-9); 0.1 mm/axis noise: 95th percentile "
           f"pivot error {p95:.3f} mm over 100 seeds (< 0.15)")


def test_criterion_6_statistics_oracles():
    w = max(abs(wilcoxon_signed_rank(d, method="exact").p_value - _brute_wilcoxon_p(d))
            for d in WILCOXON_FIXTURES)
    rng = np.random.default_rng(6)
    t_err = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 30))
        a = rng.normal(0, 1, n)
        r = paired_t_test(a, a + rng.normal(0.3, 1, n))
        t_err = max(t_err, abs(r.p_value - _integrated_t_sf_two_sided(r.statistic, n - 1)))
    f_err = 0.0
    for seed in range(5):
        g = np.random.default_rng(seed)
        fa = np.repeat(["manual", "robotic"], 30)
        fb = np.tile(np.repeat([0, 1, 2], 10), 2)
        y = (fa == "manual") * 2.0 + fb * 0.7 + (fa == "manual") * fb * 0.9 + g.normal(0, 1, 60)
        tab = two_way_anova(y, fa, fb)
        for k, f in _brute_anova(y, fa, fb).items():
            f_err = max(f_err, abs(tab.effects[k].statistic - f) / f)
    b_err = 0.0
    for x in np.linspace(0, 1, 41):
        for a in (0.1, 0.5, 1.0, 2.5, 10.0, 60.0):
            for b in (0.1, 0.5, 1.0, 3.0, 25.0):
                s = regularized_incomplete_beta(x, a, b) + regularized_incomplete_beta(1 - x, b, a)
                b_err = max(b_err, abs(s - 1))
    ok = w < 1e-12 and t_err < 1e-6 and f_err < 1e-9 and b_err <= 1e-12
    record(6, "Statistics oracles", ok,
           f"Wilcoxon vs enumeration {w:.1e} over {len(WILCOXON_FIXTURES)} sets; paired-t vs "
           f"integrated CDF {t_err:.1e} (< 1e-6); ANOVA F rel {f_err:.1e} (< 1e-9); "
           f"I_x + I_1-x - 1 {b_err:.1e} (<= 1e-12)")


def _trials(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_criterion_7_calibrated_trends(default_run):
    """Calibration consistency with the frozen defaults, not independent validation."""
    rows = _trials(default_run.out / "trials.csv")
    doc = json.loads((default_run.out / "report.json").read_text())
    err = {c: np.array([float(r["error"]) for r in rows if r["condition"] == c])
           for c in ("manual", "robotic")}
    time_ = {c: sum(float(r["time"]) for r in rows if r["condition"] == c)
             for c in ("manual", "robotic")}
    ang = np.array([float(r["insertion_angle"]) for r in rows if r["condition"] == "manual"])
    m, r = err["manual"].mean(), err["robotic"].mean()
    ratio = time_["robotic"] / time_["manual"]
    low, high = err["manual"][ang < 10].mean(), err["manual"][ang >= 25].mean()
    p = doc["tests"]["paired_t_error"]["p_value"]
    parts = [abs(m - 3.8) <= 1.0, abs(r - 1.9) <= 0.6, 0.55 <= ratio <= 0.80,
             high >= 2 * low, p < 0.05, default_run.simulate_seconds <= 300]
    record(7, "Calibrated trends", all(parts),
           f"manual error {m:.2f} mm (3.8 +/- 1.0), robotic {r:.2f} mm (1.9 +/- 0.6), "
           f"time ratio {ratio:.3f} ([0.55, 0.80]), manual 25-30 deg band {high:.2f} vs "
           f"0-10 deg {low:.2f} (ratio {high / low:.2f} >= 2), paired-t p {p:.2g} (< 0.05), "
           f"simulate {default_run.simulate_seconds:.0f} s (<= 300)")


def test_criterion_8_determinism(default_run, tmp_path):
    out2 = tmp_path / "run2"
    assert main(["simulate", str(default_run.config), "--out", str(out2)]) == 0
    assert main(["analyze", str(out2 / "trials.csv")]) == 0
    same = {name: (default_run.out / name).read_bytes() == (out2 / name).read_bytes()
            for name in ("trials.csv", "report.json")}
    record(8, "Determinism", all(same.values()),
           ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
