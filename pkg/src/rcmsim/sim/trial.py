"""One operator working through the ten-target board under one condition.

Both plants run at the 100 Hz operator rate. The robotic plant additionally
streams ten 1 kHz master samples per tick through the teleoperation pipeline
and solves the RCM-constrained IK once per tick, warm-started.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .. import _kernels
from ..kinematics import KinematicChain, Pose, default_chain
from ..rcm import FullState, IkParams, RcmConstraint, _param_array, dls_step, solve_ik
from ..teleop import TeleopConfig, TeleopPipeline, force_alert
from ..transforms import quat_from_matrix
from .board import TargetBoard, insertion_angle
from .operator import OPERATOR_RATE, Operator, OperatorModel, noise_gain
from .streams import CONDITION_CODES, rng_for

DT = 1.0 / OPERATOR_RATE
START_DEPTH = 60.0  # mm below the fulcrum
TARGET_TIMEOUT = 60.0  # s
MANUAL_TILT_HALF_RANGE = math.radians(60.0)
# Tip frame pointing straight down the shaft: x = -z_world, y = y_world.
TIP_DOWN = np.column_stack([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
READY_SEED_DEG = (0.0, 40.0, 0.0, -80.0, 0.0, -40.0, 0.0, 0.0, 0.0, 0.0)
# Per-tick debug rows. hx..hz is the master hand (robotic) or the tremor-free
# nominal tip (manual).
TRACE_COLUMNS = ("t", "order_position", "tip_x", "tip_y", "tip_z", "hx", "hy", "hz",
                 "engaged", "rcm_residual", "converged")


@dataclass(frozen=True)
class ConditionConfig:
    """Manual: lever lengths. Robotic: teleoperation and IK settings.

    The manual lever ratio ``d_in / d_out`` is held fixed over a trial.
    """

    mode: str
    d_in: float | None = None
    d_out: float | None = None
    teleop: TeleopConfig | None = None
    ik: IkParams | None = None
    workspace_radius: float = 150.0  # mm of master travel before clutch indexing
    reengage_radius: float = 5.0

    def __post_init__(self):
        if self.mode not in CONDITION_CODES:
            raise ValueError(f"mode must be 'manual' or 'robotic', got {self.mode!r}")
        if self.mode == "manual":
            if self.d_in is None or self.d_out is None:
                raise ValueError("manual condition needs d_in and d_out")
            if self.d_in <= 0 or self.d_out <= 0:
                raise ValueError("d_in and d_out must be positive")
        else:
            if self.teleop is None or self.ik is None:
                raise ValueError("robotic condition needs teleop and ik settings")
            if not 0 < self.reengage_radius < self.workspace_radius:
                raise ValueError("need 0 < reengage_radius < workspace_radius")

    @classmethod
    def manual(cls, d_in: float = 100.0, d_out: float = 250.0) -> "ConditionConfig":
        return cls("manual", d_in=d_in, d_out=d_out)

    @classmethod
    def robotic(cls, teleop: TeleopConfig = TeleopConfig(), ik: IkParams = IkParams(),
                workspace_radius: float = 150.0) -> "ConditionConfig":
        return cls("robotic", teleop=teleop, ik=ik, workspace_radius=workspace_radius)


@dataclass(frozen=True)
class ContactModel:
    k: float = 0.5  # N/mm
    threshold: float = 0.5  # mm
    damage_overshoot: float = 2.0  # mm, manual

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("surface stiffness must be positive")
        if self.threshold < 0 or self.damage_overshoot < 0:
            raise ValueError("contact thresholds must be non-negative")

    def penetration(self, tip, target) -> float:
        """Depth of ``tip`` below the target's surface plane (negative above)."""
        return float((np.asarray(target.center) - tip) @ target.normal)

    def force(self, tip, target) -> float:
        return self.k * max(0.0, self.penetration(tip, target))


class TrialRecord(NamedTuple):
    operator_id: str
    tier: str
    condition: str
    target_index: int
    insertion_angle: float
    error: float
    time: float
    order_position: int
    seed: int


@dataclass
class TrialOutcome:
    records: list
    flags: list  # per record: tuple of flag names
    ergonomic_cost: float
    ticks: int
    nonconverged_ticks: int = 0
    max_rcm_residual: float = 0.0
    damage_events: int = 0
    clutch_cycles: int = 0
    trace: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------- manual plant

def lever_map(v_handle, tip, fulcrum, ratio: float) -> np.ndarray:
    """Tip velocity from handle velocity through the fulcrum.

    The component along the shaft passes 1:1; the lateral part is inverted
    and scaled by ``ratio = d_in / d_out``.
    """
    r = np.asarray(tip, dtype=float) - fulcrum
    u = r / math.sqrt(r @ r)
    v = np.asarray(v_handle, dtype=float)
    axial = (v @ u) * u
    return axial - ratio * (v - axial)


def lever_inverse(v_tip, tip, fulcrum, ratio: float) -> np.ndarray:
    return lever_map(v_tip, tip, fulcrum, 1.0 / ratio)


def manual_plant_step(handle_velocity, tip, fulcrum, ratio: float, dt: float = DT) -> np.ndarray:
    """Advance the nominal (tremor-free) tip by one tick of handle motion."""
    return np.asarray(tip, dtype=float) + dt * lever_map(handle_velocity, tip, fulcrum, ratio)


def _tilt_cost(tip, fulcrum) -> float:
    u = np.asarray(tip) - fulcrum
    ax = math.atan2(u[0], -u[2]) / MANUAL_TILT_HALF_RANGE
    ay = math.atan2(u[1], -u[2]) / MANUAL_TILT_HALF_RANGE
    return ax * ax + ay * ay


# ---------------------------------------------------------------- robotic plant

@lru_cache(maxsize=8)
def _ready(fulcrum_key, chain_key):
    chain = _CHAINS[chain_key]
    fulcrum = np.array(fulcrum_key)
    target = Pose(fulcrum + np.array([0.0, 0.0, -START_DEPTH]), quat_from_matrix(TIP_DOWN))
    con = RcmConstraint(fulcrum)
    res = solve_ik(chain, FullState(np.radians(READY_SEED_DEG), 0.5), target, con,
                   IkParams(max_iters=3000))
    state = res.state
    for _ in range(2000):  # let the nullspace term centre the joints
        state = dls_step(chain, state, target, con)
    res = solve_ik(chain, state, target, con)
    if not res.converged:
        raise RuntimeError("no RCM-feasible ready pose for this fulcrum")
    return res.state


_CHAINS: dict = {}


def ready_state(chain: KinematicChain, fulcrum) -> FullState:
    """Joint-centred configuration with the tip START_DEPTH below the fulcrum, pointing down."""
    key = (chain.geom.tobytes(), np.asarray(chain.tool).tobytes(),
           chain.shaft_proximal_index, chain.shaft_distal_index)
    _CHAINS.setdefault(key, chain)
    return _ready(tuple(float(v) for v in fulcrum), key)


class RoboticPlant:
    """Slave arm state plus the teleoperation pipeline feeding it."""

    def __init__(self, chain: KinematicChain, fulcrum, condition: ConditionConfig,
                 state: FullState | None = None):
        self.chain = chain
        self.fulcrum = np.asarray(fulcrum, dtype=float)
        self.condition = condition
        state = state or ready_state(chain, self.fulcrum)
        self.q = state.q.copy()
        self.lam = state.lam
        self.T = np.empty((chain.n + 1, 4, 4))
        _kernels.fk(chain.geom, self.q, self.T)
        self.tip = _kernels.point_in_frame(self.T, chain.tip_frame, chain.tool)
        self.R = self.T[chain.tip_frame, :3, :3].copy()
        self.pipeline = TeleopPipeline(condition.teleop, Pose(self.tip.copy(), quat_from_matrix(self.R)))
        self.params = _param_array(condition.ik)
        self.norms = np.empty(int(condition.ik.max_iters) + 2)
        self.rcm_residual = self._rcm_residual()

    def _rcm_residual(self) -> float:
        c = self.chain
        p = self.T[c.shaft_proximal_index, :3, 3] + self.lam * (
            self.T[c.shaft_distal_index, :3, 3] - self.T[c.shaft_proximal_index, :3, 3])
        return float(np.linalg.norm(self.fulcrum - p))

    def step(self, master_positions, clutch_engaged: bool):
        """One tick: filter/scale the master block, solve IK toward its last target.

        Returns (tip, converged, rcm residual).
        """
        targets = self.pipeline.step_block(master_positions, clutch_engaged)
        c = self.chain
        q, lam, ok, _, _, _, rc = _kernels.solve(
            c.geom, c.tip_frame, c.shaft_proximal_index, c.shaft_distal_index, c.tool,
            self.q, self.lam, targets[-1], self.R, self.fulcrum, self.params, self.norms)
        self.q, self.lam = q, lam
        _kernels.fk(c.geom, q, self.T)
        self.tip = _kernels.point_in_frame(self.T, c.tip_frame, c.tool)
        self.rcm_residual = float(rc)
        return self.tip, bool(ok), self.rcm_residual

    def joint_cost(self) -> float:
        c = self.chain
        u = np.where(c.free, (self.q - c.mid) / np.where(c.free, c.half_range, 1.0), 0.0)
        return float(u @ u)


def robotic_plant_step(plant: RoboticPlant, master_positions, clutch_engaged: bool = True):
    return plant.step(master_positions, clutch_engaged)


# ---------------------------------------------------------------- trials

def _present(op, target, board, model, manual, rng):
    angle = insertion_angle(target.center, board.fulcrum, board.vertical)
    g = noise_gain(angle, model.angle_sensitivity) if manual else 1.0
    sigma = model.perception_noise * g
    op.perceived_target = np.asarray(target.center) + sigma * rng.standard_normal(3)
    op.clear_queue()
    op.inside = 0
    op.t_near = None
    return angle


def run_trial(condition: ConditionConfig, operator: OperatorModel, board: TargetBoard, seed: int,
              operator_id: str = "op", contact: ContactModel = ContactModel(),
              chain: KinematicChain | None = None, trace: bool = False) -> TrialOutcome:
    """Visit all ten targets in a seed-derived random order; deterministic in ``seed``."""
    manual = condition.mode == "manual"
    fulcrum = np.asarray(board.fulcrum, dtype=float)
    order = rng_for(seed, 0).permutation(len(board.targets))
    op_rng = rng_for(seed, 1)
    start = fulcrum + np.array([0.0, 0.0, -START_DEPTH])

    recentering = False
    if manual:
        ratio = condition.d_in / condition.d_out
        tip_nom = start.copy()
        op = Operator(operator, op_rng, lambda v, tip: lever_inverse(v, tip, fulcrum, ratio))
    else:
        chain = chain or default_chain()
        plant = RoboticPlant(chain, fulcrum, condition)
        scale = condition.teleop.scale
        op = Operator(operator, op_rng, lambda v, tip: scale * v)
        hand = np.zeros(3)
        engaged = True
        sub = np.arange(1, 11) / 10.0  # 1 kHz sample offsets within a tick
        sub_col = sub[:, None]

    records, flags, trace_rows = [], [], []
    cost_sum = 0.0
    ticks = 0
    nonconv = 0
    max_rcm = 0.0
    damage = 0
    clutch_cycles = 0
    for pos, ti in enumerate(order):
        target = board.targets[ti]
        angle = _present(op, target, board, operator, manual, rng_for(seed, 2, int(ti)))
        tick0 = ticks
        target_flags = set()
        while True:
            t = ticks * DT
            elapsed = (ticks - tick0) * DT
            if manual:
                r = tip_nom - fulcrum
                g = noise_gain(math.degrees(math.acos(min(1.0, -r[2] / math.sqrt(r @ r)))),
                               operator.angle_sensitivity)
                tremor_tip = g * lever_map(op.tremor.sample(t), tip_nom, fulcrum, ratio)
                tip = tip_nom + tremor_tip
                cost_sum += _tilt_cost(tip_nom, fulcrum)
            else:
                tip = plant.tip
                cost_sum += plant.joint_cost()
            timeout = elapsed >= TARGET_TIMEOUT - 1e-9
            if recentering:
                press = False
                v_h = np.zeros(3)
            else:
                v_h, press = op.update(tip, elapsed)
            if press or timeout:
                break
            if manual:
                tip_nom = manual_plant_step(v_h, tip_nom, fulcrum, ratio)
            else:
                if recentering:
                    dist = math.sqrt(hand @ hand)
                    step = min(dist, operator.max_hand_speed * DT)
                    v_h = -hand / dist * (step / DT) if dist > 0 else np.zeros(3)
                elif engaged:
                    nxt = hand + DT * v_h
                    if math.sqrt(nxt @ nxt) > condition.workspace_radius:
                        recentering, engaged = True, False
                        clutch_cycles += 1
                        v_h = np.zeros(3)
                master = hand + DT * sub_col * v_h + op.tremor.sample(t + DT * sub)
                hand = hand + DT * v_h
                if recentering and math.sqrt(hand @ hand) <= condition.reengage_radius:
                    recentering, engaged = False, True
                    op.clear_queue()
                _, ok, rc = plant.step(master, engaged)
                if ok:
                    max_rcm = max(max_rcm, rc)
                else:
                    nonconv += 1
                    target_flags.add("nonconverged")
                if trace:
                    trace_rows.append((t, pos, *plant.tip, *hand, int(engaged), rc, int(ok)))
            if manual and trace:
                trace_rows.append((t, pos, *tip, *tip_nom, 1, 0.0, 1))
            ticks += 1
        if timeout:
            target_flags.add("timeout")
        err = float(np.linalg.norm(tip - target.center))
        pen = contact.penetration(tip, target)
        if pen < -contact.threshold:
            target_flags.add("no_contact")
        if manual:
            hit = pen > contact.damage_overshoot
        else:
            hit = force_alert(contact.force(tip, target), condition.teleop)
        if hit:
            target_flags.add("damage")
            damage += 1
        time_taken = max(elapsed, DT)
        records.append(TrialRecord(operator_id, operator.tier, condition.mode, int(ti), angle,
                                   err, time_taken, pos, int(seed)))
        flags.append(tuple(sorted(target_flags)))
    return TrialOutcome(records, flags, cost_sum / max(ticks, 1), ticks, nonconv, max_rcm,
                        damage, clutch_cycles if not manual else 0, trace_rows)
