"""Master-to-slave teleoperation: tremor filter, clutch, motion scaling, force alert.

Processing order per master sample is filter -> clutch/scale, so the tremor
filter always sees the raw hand signal and the clutch anchors are taken on
filtered positions (re-engaging never produces a jump).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .kinematics import Pose
from .transforms import matrix_from_quat, quat_from_matrix

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
MASTER_CSV_COLUMNS = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz", "clutch", "press")


@dataclass(frozen=True)
class TeleopConfig:
    scale: float = 5.0
    window: float = 0.05  # s
    sample_rate: float = 1000.0  # Hz
    force_threshold: float = 5.0  # N

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if self.sample_rate <= 0 or self.window <= 0:
            raise ValueError("window and sample_rate must be positive")
        if self.window_length < 1:
            raise ValueError("window shorter than one sample")
        if self.force_threshold < 0:
            raise ValueError("force_threshold must be >= 0")

    @property
    def window_length(self) -> int:
        return int(round(self.window * self.sample_rate))


class MasterSample(NamedTuple):
    t: float
    position: np.ndarray
    orientation: np.ndarray = IDENTITY_QUAT
    clutch_engaged: bool = True
    contact_press: bool = False


class TremorFilter:
    """Per-axis boxcar moving average over the last ``n`` samples.

    The buffer is pre-filled with the first sample, so a constant input
    passes unchanged from the start. The running sum is recomputed from the
    buffer every ``refresh`` samples to stop floating-point drift.
    """

    def __init__(self, n: int, dim: int = 3, refresh: int | None = None):
        if n < 1:
            raise ValueError("window length must be >= 1")
        self.n = n
        self.buf = np.zeros((n, dim))
        self.total = np.zeros(dim)
        self.idx = 0
        self.count = 0
        self.refresh = refresh or 16 * n
        self.initialized = False

    def reset(self, x):
        x = np.asarray(x, dtype=float)
        self.buf[:] = x
        self.total = self.n * x
        self.idx = 0
        self.count = 0
        self.initialized = True

    def step(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.initialized:
            self.reset(x)
        self.total = self.total + (x - self.buf[self.idx])
        self.buf[self.idx] = x
        self.idx = (self.idx + 1) % self.n
        self.count += 1
        if self.count % self.refresh == 0:
            self.total = self.buf.sum(axis=0)
        return self.total / self.n

    def step_block(self, xs) -> np.ndarray:
        """Filter a (k, dim) block at once; same outputs as k calls to :meth:`step`."""
        xs = np.asarray(xs, dtype=float)
        if not self.initialized:
            self.reset(xs[0])
        hist = np.roll(self.buf, -self.idx, axis=0)  # oldest first
        ext = np.concatenate([hist, xs])
        k = xs.shape[0]
        cs = np.cumsum(ext, axis=0)
        # window j covers ext[j+1 : n+j+1]; anchor on the running total for continuity
        out = self.total + (cs[self.n:self.n + k] - cs[self.n - 1]) - cs[0:k]
        self.buf = ext[-self.n:].copy()
        self.idx = 0
        self.count += k
        self.total = self.buf.sum(axis=0)
        return out / self.n

    def output(self) -> np.ndarray:
        return self.total / self.n


def tremor_filter_step(state: TremorFilter, position) -> np.ndarray:
    return state.step(position)


def boxcar_gain(freq, n: int, fs: float):
    """Closed-form magnitude response of an n-tap moving average at ``freq`` Hz."""
    w = np.pi * np.asarray(freq, dtype=float) / fs
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.abs(np.sin(n * w) / (n * np.sin(w)))
    return np.where(np.isclose(np.sin(w), 0.0), 1.0, g)


@dataclass
class ClutchState:
    engaged: bool = False
    master_anchor: np.ndarray | None = None
    master_anchor_R: np.ndarray | None = None
    slave_anchor: np.ndarray | None = None
    slave_anchor_R: np.ndarray | None = None
    last_target: Pose | None = None
    master_anchor_q: np.ndarray | None = None
    slave_anchor_q: np.ndarray | None = None

    @classmethod
    def holding(cls, slave: Pose) -> "ClutchState":
        """Disengaged clutch holding the slave at ``slave``."""
        R = matrix_from_quat(slave.orientation)
        p = np.asarray(slave.position, dtype=float)
        return cls(False, None, None, p.copy(), R, Pose(p.copy(), quat_from_matrix(R)))


def apply_scaling_clutch(clutch: ClutchState, sample: MasterSample, config: TeleopConfig) -> Pose:
    """Map a (filtered) master sample to a slave tip target, updating ``clutch``.

    Engaged: ``target = slave_anchor + (master - master_anchor) / scale`` and the
    master's rotation since engagement is applied unscaled. Disengaged: the
    last target is held. On an engage edge both anchors are re-taken, the
    slave anchor being the currently held target.
    """
    if clutch.slave_anchor is None:
        raise ValueError("clutch has no slave anchor; build it with ClutchState.holding()")
    master = np.asarray(sample.position, dtype=float)
    if sample.clutch_engaged and not clutch.engaged:
        clutch.master_anchor = master.copy()
        clutch.master_anchor_q = np.array(sample.orientation, dtype=float)
        clutch.master_anchor_R = matrix_from_quat(sample.orientation)
        clutch.slave_anchor = np.asarray(clutch.last_target.position, dtype=float).copy()
        clutch.slave_anchor_q = np.array(clutch.last_target.orientation, dtype=float)
        clutch.slave_anchor_R = matrix_from_quat(clutch.last_target.orientation)
    clutch.engaged = bool(sample.clutch_engaged)
    if not clutch.engaged:
        return clutch.last_target
    pos = clutch.slave_anchor + (master - clutch.master_anchor) / config.scale
    Rm = matrix_from_quat(sample.orientation)
    R = Rm @ clutch.master_anchor_R.T @ clutch.slave_anchor_R
    target = Pose(pos, quat_from_matrix(R))
    clutch.last_target = target
    return target


def force_alert(tip_force: float, config: TeleopConfig = TeleopConfig()) -> bool:
    """True when the tip force strictly exceeds the configured threshold."""
    if not tip_force >= 0:
        raise ValueError("tip force must be non-negative")
    return tip_force > config.force_threshold


class TeleopPipeline:
    """One operator's master -> slave chain (single owner, not thread-safe)."""

    def __init__(self, config: TeleopConfig, slave_start: Pose):
        self.config = config
        self.filter = TremorFilter(config.window_length)
        self.clutch = ClutchState.holding(slave_start)
        self.filtered = None

    def step(self, sample: MasterSample) -> Pose:
        self.filtered = self.filter.step(sample.position)
        fs = MasterSample(sample.t, self.filtered, sample.orientation, sample.clutch_engaged,
                          sample.contact_press)
        return apply_scaling_clutch(self.clutch, fs, self.config)

    def step_block(self, positions, clutch_engaged: bool = True,
                   orientation=IDENTITY_QUAT) -> np.ndarray:
        """Process a block of master positions sharing one clutch state and orientation.

        Returns the (k, 3) slave tip target positions; the orientation target
        is left in ``self.clutch.last_target``.
        """
        filt = self.filter.step_block(positions)
        self.filtered = filt[-1]
        c = self.clutch
        if not clutch_engaged:
            c.engaged = False
            return np.broadcast_to(c.last_target.position, filt.shape).copy()
        if not c.engaged:
            apply_scaling_clutch(c, MasterSample(0.0, filt[0], orientation, True), self.config)
        out = c.slave_anchor + (filt - c.master_anchor) / self.config.scale
        if np.array_equal(orientation, c.master_anchor_q):
            quat = c.slave_anchor_q  # master has not rotated since engaging
        else:
            Rm = matrix_from_quat(orientation)
            quat = quat_from_matrix(Rm @ c.master_anchor_R.T @ c.slave_anchor_R)
        c.last_target = Pose(out[-1].copy(), quat)
        return out

    def run(self, samples):
        return [self.step(s) for s in samples]


def read_master_csv(path) -> list:
    """Replay a master stream (columns t,px,py,pz,qw,qx,qy,qz,clutch,press)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MASTER_CSV_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        prev_t = -math.inf
        for lineno, row in enumerate(reader, 2):
            try:
                t = float(row["t"])
                pos = np.array([float(row[k]) for k in ("px", "py", "pz")])
                quat = np.array([float(row[k]) for k in ("qw", "qx", "qy", "qz")])
                clutch = _flag(row["clutch"])
                press = _flag(row["press"])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if t <= prev_t:
                raise ValueError(f"{path}:{lineno}: timestamps must increase")
            prev_t = t
            out.append(MasterSample(t, pos, quat / np.linalg.norm(quat), clutch, press))
    return out


def write_master_csv(path, samples) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MASTER_CSV_COLUMNS)
        for s in samples:
            w.writerow([repr(float(s.t)), *(repr(float(v)) for v in s.position),
                        *(repr(float(v)) for v in s.orientation),
                        int(bool(s.clutch_engaged)), int(bool(s.contact_press))])


def _flag(text) -> bool:
    text = str(text).strip().lower()
    if text in ("1", "true", "yes"):
        return True
    if text in ("0", "false", "no"):
        return False
    raise ValueError(f"bad flag value {text!r}")
