"""Fast invariant battery behind ``rcmsim check``.

Each check returns a :class:`CheckResult`; none of them raise on failure.
Module functions are looked up at call time (``kinematics.geometric_jacobian``
rather than a bound name) so a patched implementation is what gets checked.
"""
from __future__ import annotations

import itertools
import math
import time
from typing import NamedTuple

import numpy as np

from . import kinematics, rcm, teleop
from .stats import inference, special


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _rel_err(A, B) -> float:
    return float(np.max(np.abs(A - B)) / max(1.0, float(np.max(np.abs(B)))))


def check_jacobian(n_states: int = 50, seed: int = 0) -> tuple:
    chain = kinematics.default_chain()
    rng = np.random.default_rng(seed)
    worst_g = worst_x = 0.0
    for q in kinematics.random_configuration(chain, rng, n_states):
        Jg = kinematics.geometric_jacobian(chain, q, chain.tip_frame, chain.tool)
        Jf = kinematics.finite_difference_jacobian(chain, q, chain.tip_frame, chain.tool)
        worst_g = max(worst_g, _rel_err(Jg, Jf))
        state = rcm.FullState(q, rng.uniform(0.05, 0.95))
        Jx = rcm.extended_jacobian(chain, state)
        worst_x = max(worst_x, _rel_err(Jx, _extended_fd(chain, state)))
    ok = worst_g < 1e-5 and worst_x < 1e-5
    return ok, f"max relative error geometric {worst_g:.2e}, extended {worst_x:.2e} (< 1e-5)"


def _extended_fd(chain, state, h: float = 1e-6, rot_scale: float = 100.0):
    """Central differences of (tip, rot_scale * rotation, RCM point) over (q, lam)."""
    x0 = state.as_vector()
    J = np.zeros((9, x0.size))

    def parts(x):
        T = kinematics.frame_transforms(chain, x[:-1])
        tip = kinematics.tip_position(chain, T)
        pw = T[chain.shaft_proximal_index, :3, 3]
        ps = T[chain.shaft_distal_index, :3, 3]
        return tip, T[chain.tip_frame, :3, :3], pw + x[-1] * (ps - pw)

    for j in range(x0.size):
        if j < chain.n and not chain.free[j]:
            continue
        dx = np.zeros(x0.size)
        dx[j] = h
        tp, Rp, cp = parts(x0 + dx)
        tm, Rm, cm = parts(x0 - dx)
        J[:3, j] = (tp - tm) / (2 * h)
        J[3:6, j] = rot_scale * kinematics.rotation_error(Rp, Rm) / (2 * h)
        J[6:, j] = (cp - cm) / (2 * h)
    return J


def check_rcm_hold(steps: int = 40, seed: int = 0) -> tuple:
    """Track a random smooth path (<= 2 mm/step) through the target region (30 degree cone, 80-150 mm deep)."""
    from .sim.board import DEFAULT_FULCRUM
    from .sim.trial import ready_state
    chain = kinematics.default_chain()
    fulcrum = np.array(DEFAULT_FULCRUM)
    con = rcm.RcmConstraint(fulcrum)
    state = ready_state(chain, fulcrum)
    pose = rcm.tip_pose(chain, state.q)
    p = fulcrum + np.array([0.0, 0.0, -80.0])
    state = rcm.solve_ik(chain, state, kinematics.Pose(p, pose.orientation), con).state
    rng = np.random.default_rng(seed)
    heading = rng.normal(size=3)
    worst, failed = 0.0, 0
    for _ in range(steps):
        heading = 0.8 * heading + 0.2 * rng.normal(size=3)
        p = p + 2.0 * heading / np.linalg.norm(heading)
        r = p - fulcrum
        depth = float(np.clip(-r[2], 80.0, 150.0))
        lat = r[:2] * min(1.0, math.tan(math.radians(30.0)) * depth / max(np.linalg.norm(r[:2]), 1e-12))
        p = fulcrum + np.array([lat[0], lat[1], -depth])
        res = rcm.solve_ik(chain, state, kinematics.Pose(p, pose.orientation), con)
        if res.converged:
            state = res.state
            worst = max(worst, float(np.linalg.norm(rcm.rcm_error(chain, state, con))))
        else:
            failed += 1
    ok = failed == 0 and worst <= 0.1
    return ok, f"max RCM residual {worst:.2e} mm over {steps} steps, {failed} non-converged"


def check_filter_gains() -> tuple:
    fs, n = 1000.0, 50
    worst = 0.0
    for f in (10.0, 20.0):
        filt = teleop.TremorFilter(n)
        t = np.arange(4000) / fs
        x = np.sin(2 * math.pi * f * t)
        y = filt.step_block(np.column_stack([x, x, x]))[:, 0]
        tail = slice(2000, None)
        # amplitude by projection onto the quadrature pair over whole periods
        c = np.cos(2 * math.pi * f * t[tail])
        s = np.sin(2 * math.pi * f * t[tail])
        amp = math.hypot(2 * np.mean(y[tail] * c), 2 * np.mean(y[tail] * s))
        worst = max(worst, abs(amp - float(teleop.boxcar_gain(f, n, fs))))
    return worst < 1e-6, f"max |measured - closed-form| gain {worst:.2e} at 10 and 20 Hz"


def check_scaling() -> tuple:
    cfg = teleop.TeleopConfig()
    start = kinematics.Pose(np.zeros(3), teleop.IDENTITY_QUAT)
    pipe = teleop.TeleopPipeline(cfg, start)
    hold = np.zeros((200, 3))
    pipe.step_block(hold)
    move = np.linspace(0, 50, 500)[:, None] * np.array([1.0, 0.0, 0.0])
    pipe.step_block(move)
    out = pipe.step_block(np.repeat(move[-1:], 200, axis=0))
    ratio = 50.0 / out[-1, 0]
    frozen = pipe.step_block(np.repeat([[80.0, 20.0, -5.0]], 100, axis=0), clutch_engaged=False)
    drift = float(np.max(np.abs(frozen - out[-1])))
    ok = abs(ratio - 5.0) <= 0.01 and drift == 0.0
    return ok, f"master/slave ratio {ratio:.6f}, clutched-out drift {drift:g} mm"


def check_wilcoxon_oracle() -> tuple:
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (5, 7, 9):
        d = np.round(rng.normal(0.4, 1.0, n), 1)
        d = d[d != 0]
        r, _ = inference.midranks(np.abs(d))
        w = float(r[d > 0].sum())
        w_all = np.array([np.dot(r, s) for s in itertools.product((0, 1), repeat=d.size)])
        p = min(1.0, 2 * min(np.mean(w_all <= w + 1e-9), np.mean(w_all >= w - 1e-9)))
        got = inference.wilcoxon_signed_rank(d, method="exact").p_value
        worst = max(worst, abs(got - p))
    return worst < 1e-12, f"max |exact - enumerated| p {worst:.1e}"


def check_beta_symmetry() -> tuple:
    worst = 0.0
    for x in np.linspace(0.01, 0.99, 15):
        for a, b in ((0.5, 0.5), (2.0, 3.0), (10.0, 0.5), (30.0, 40.0)):
            s = (special.regularized_incomplete_beta(x, a, b)
                 + special.regularized_incomplete_beta(1 - x, b, a))
            worst = max(worst, abs(s - 1.0))
    return worst < 1e-12, f"max |I_x(a,b) + I_1-x(b,a) - 1| {worst:.1e}"


def check_pivot() -> tuple:
    t_true, p_true = np.array([0.0, 0.0, 310.0]), np.array([100.0, 50.0, 200.0])
    res = rcm.pivot_calibrate(rcm.synthesize_pivot_poses(t_true, p_true, rng=7))
    err = max(float(np.linalg.norm(res.tip_offset - t_true)),
              float(np.linalg.norm(res.pivot - p_true)))
    return err < 1e-9, f"noiseless recovery error {err:.1e} mm"


FAST = (
    ("jacobian_fd", check_jacobian),
    ("rcm_hold", check_rcm_hold),
    ("filter_gains", check_filter_gains),
    ("scaling_clutch", check_scaling),
    ("wilcoxon_oracle", check_wilcoxon_oracle),
    ("beta_symmetry", check_beta_symmetry),
    ("pivot_noiseless", check_pivot),
)


def run_checks(fast: bool = True) -> list:
    """Run the battery; ``fast=False`` widens the Jacobian and RCM sweeps."""
    out = []
    for name, fn in FAST:
        t0 = time.perf_counter()
        try:
            if not fast and fn is check_jacobian:
                ok, detail = fn(n_states=1000)
            elif not fast and fn is check_rcm_hold:
                ok, detail = fn(steps=400)
            else:
                ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
