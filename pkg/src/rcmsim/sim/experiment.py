"""Crossover experiment runner and the trials.csv format."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..kinematics import KinematicChain, default_chain
from ..rcm import nullspace_objective_grad
from .board import DEFAULT_FULCRUM, generate_board
from .operator import OperatorModel, default_operator_models
from .streams import CONDITION_CODES, TIER_CODES, seed_for
from .trial import ConditionConfig, ContactModel, TrialOutcome, TrialRecord, run_trial

TRIAL_COLUMNS = TrialRecord._fields
CONDITIONS = ("manual", "robotic")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n_expert: int = 5
    n_novice: int = 5
    operators: dict = field(default_factory=default_operator_models)
    manual: ConditionConfig = field(default_factory=ConditionConfig.manual)
    robotic: ConditionConfig = field(default_factory=ConditionConfig.robotic)
    contact: ContactModel = field(default_factory=ContactModel)
    board_seed: int | None = None
    fulcrum: tuple = DEFAULT_FULCRUM
    depth_range: tuple = (80.0, 150.0)
    min_separation: float = 15.0
    threads: int | None = None

    def __post_init__(self):
        if self.n_expert < 1 or self.n_novice < 1:
            raise ValueError("need at least one operator per tier")
        if self.manual.mode != "manual" or self.robotic.mode != "robotic":
            raise ValueError("manual/robotic condition blocks have the wrong mode")
        if set(self.operators) != set(TIER_CODES):
            raise ValueError("operators must define exactly the expert and novice tiers")
        o = self.operators
        for name in ("tremor_rms", "reaction_delay", "perception_noise"):
            if getattr(o["expert"], name) > getattr(o["novice"], name):
                raise ValueError(f"expert {name} must not exceed novice {name}")
        lo, hi = self.depth_range
        if not 0 < lo < hi:
            raise ValueError("depth_range must satisfy 0 < lo < hi")


@dataclass
class Dataset:
    records: list
    summaries: list
    board: object = None
    traces: dict = field(default_factory=dict)  # (operator_id, condition) -> rows

    def values(self, metric: str, condition: str | None = None) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.records
                         if condition is None or r.condition == condition], dtype=float)


def operator_roster(config: ExperimentConfig):
    """(operator_id, tier, index within tier, first condition) for each synthetic operator.

    Robotic-first alternates across the whole roster, so half the operators
    (rounded) start with each condition.
    """
    roster = []
    k = 0
    for tier, n in (("expert", config.n_expert), ("novice", config.n_novice)):
        for j in range(n):
            first = "robotic" if k % 2 == 0 else "manual"
            roster.append((f"{tier[0].upper()}{j + 1:02d}", tier, j, first))
            k += 1
    return roster


def trial_seed(master_seed: int, tier: str, index: int, condition: str) -> int:
    return seed_for(master_seed, TIER_CODES[tier], index, CONDITION_CODES[condition])


def _run_job(job):
    condition, model, board, seed, op_id, contact, trace = job
    return run_trial(condition, model, board, seed, operator_id=op_id, contact=contact,
                     trace=trace)


def _threads(config: ExperimentConfig) -> int:
    if config.threads is not None:
        return max(1, int(config.threads))
    env = os.environ.get("RCMSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RCMSIM_THREADS must be an integer, got {env!r}") from None
    return 1


def run_experiment(config: ExperimentConfig = ExperimentConfig(), trace: bool = False) -> Dataset:
    """Every operator runs both conditions on one shared board.

    Trials may run in worker processes (``threads`` or RCMSIM_THREADS); the
    output is sorted canonically, so it does not depend on scheduling.
    """
    board_seed = config.seed if config.board_seed is None else config.board_seed
    board = generate_board(board_seed, fulcrum=config.fulcrum, depth_range=config.depth_range,
                           min_separation=config.min_separation)
    roster = operator_roster(config)
    jobs, meta = [], []
    for op_id, tier, j, first in roster:
        order = (first, "manual" if first == "robotic" else "robotic")
        for slot, cond in enumerate(order):
            cc = config.manual if cond == "manual" else config.robotic
            seed = trial_seed(config.seed, tier, j, cond)
            jobs.append((cc, config.operators[tier], board, seed, op_id, config.contact,
                         trace))
            meta.append((op_id, tier, cond, slot, first))
    n = _threads(config)
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            outcomes = list(pool.map(_run_job, jobs))
    else:
        outcomes = [_run_job(job) for job in jobs]

    records, summaries, traces = [], [], {}
    for (op_id, tier, cond, slot, first), out in zip(meta, outcomes):
        records.extend(out.records)
        summaries.append(_summary(op_id, tier, cond, slot, first, out))
        if trace:
            traces[(op_id, cond)] = out.trace
    records.sort(key=lambda r: (r.operator_id, r.condition, r.target_index))
    summaries.sort(key=lambda s: (s["operator_id"], s["condition"]))
    return Dataset(records, summaries, board, dict(sorted(traces.items())))


def _summary(op_id, tier, cond, slot, first, out: TrialOutcome) -> dict:
    err = [r.error for r in out.records]
    tm = [r.time for r in out.records]
    flag_counts = {}
    for fl in out.flags:
        for f in fl:
            flag_counts[f] = flag_counts.get(f, 0) + 1
    return {
        "operator_id": op_id, "tier": tier, "condition": cond,
        "session": slot + 1, "first_condition": first,
        "mean_error": float(np.mean(err)), "total_time": float(np.sum(tm)),
        "ergonomic_cost": float(out.ergonomic_cost),
        "ticks": int(out.ticks), "nonconverged_ticks": int(out.nonconverged_ticks),
        "max_rcm_residual": float(out.max_rcm_residual),
        "damage_events": int(out.damage_events), "clutch_cycles": int(out.clutch_cycles),
        "flags": dict(sorted(flag_counts.items())),
        "seed": int(out.records[0].seed),
    }


def ergonomic_cost(trajectory, chain: KinematicChain | None = None) -> float:
    """Time-average of the joint-centring objective over a (T, n) joint trajectory."""
    q = np.asarray(trajectory, dtype=float)
    if q.ndim != 2 or q.shape[0] == 0:
        raise ValueError("trajectory must be a non-empty (T, n) array")
    chain = chain or default_chain()
    return float(np.mean([nullspace_objective_grad(chain, row)[0] for row in q]))


# ---------------------------------------------------------------- trials.csv

def write_trials_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            w.writerow([r.operator_id, r.tier, r.condition, r.target_index,
                        repr(float(r.insertion_angle)), repr(float(r.error)),
                        repr(float(r.time)), r.order_position, r.seed])


def read_trials_csv(path) -> list:
    """Parse trials.csv; errors name the offending line or column."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRIAL_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, 2):
            try:
                rec = TrialRecord(
                    operator_id=_text(row["operator_id"]),
                    tier=_choice(row["tier"], TIER_CODES),
                    condition=_choice(row["condition"], CONDITION_CODES),
                    target_index=int(row["target_index"]),
                    insertion_angle=_finite(row["insertion_angle"]),
                    error=_finite(row["error"]),
                    time=_finite(row["time"]),
                    order_position=int(row["order_position"]),
                    seed=int(row["seed"]),
                )
                if rec.error < 0:
                    raise ValueError("error must be >= 0")
                if rec.time <= 0:
                    raise ValueError("time must be > 0")
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            out.append(rec)
    return out


def _text(v):
    if v is None or v.strip() == "":
        raise ValueError("empty operator_id")
    return v.strip()


def _choice(v, allowed):
    v = (v or "").strip()
    if v not in allowed:
        raise ValueError(f"unexpected value {v!r} (allowed: {', '.join(allowed)})")
    return v


def _finite(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {v!r}")
    return x
