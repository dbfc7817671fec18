"""Synthetic surgeon: perception bias, delayed proportional reaching, tremor, press rule."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np
import yaml

OPERATOR_RATE = 100.0  # Hz
APPROACH_GAIN = 4.0  # 1/s, hand velocity per unit hand-space distance
DWELL_TIME = 0.1  # s inside the press radius before pressing
NEAR_FACTOR = 3.0  # press-radius multiples that count as "at the target"
SINE_SHARE = 0.8  # share of tremor variance in the two band-limited sinusoids


@dataclass(frozen=True)
class OperatorModel:
    """Numeric description of one operator tier.

    ``tremor_rms`` is the RMS length of the 3-D hand tremor vector and
    ``perception_noise`` the per-axis standard deviation of the misjudged
    target position, both in mm. ``patience`` (s) sets how fast the operator
    relaxes the press radius while failing to hold still at the target; the
    radius grows as ``press_threshold * (1 + t_near / patience)``.
    """

    tier: str
    tremor_rms: float
    reaction_delay: float
    max_hand_speed: float
    perception_noise: float
    press_threshold: float
    angle_sensitivity: float
    patience: float
    tremor_band: tuple = (8.0, 12.0)

    def __post_init__(self):
        if self.tier not in ("expert", "novice"):
            raise ValueError(f"unknown tier {self.tier!r}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not v >= 0:
                raise ValueError(f"OperatorModel.{f.name} must be non-negative, got {v}")
        lo, hi = self.tremor_band
        if not 0 < lo <= hi:
            raise ValueError("tremor_band must satisfy 0 < lo <= hi")
        if self.patience <= 0 or self.max_hand_speed <= 0:
            raise ValueError("patience and max_hand_speed must be positive")
        object.__setattr__(self, "tremor_band", (float(lo), float(hi)))

    def replace(self, **changes) -> "OperatorModel":
        d = asdict(self)
        d.update(changes)
        return OperatorModel(**d)


def load_operator_file(path=None) -> dict:
    """Tier -> OperatorModel from a versioned YAML parameter file."""
    if path is None:
        text = resources.files("rcmsim.data").joinpath("operators.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    doc = yaml.safe_load(text)
    return {tier: OperatorModel(tier=tier, **{k: (tuple(v) if isinstance(v, list) else v)
                                              for k, v in doc[tier].items()})
            for tier in ("expert", "novice")}


def default_operator_models() -> dict:
    return load_operator_file()


def noise_gain(angle_deg: float, k_theta: float) -> float:
    """Manual-condition multiplier on operator noise at a given insertion angle."""
    return 1.0 + k_theta * (angle_deg / 30.0)


class TremorGenerator:
    """Per-axis tremor: two sinusoids in the tremor band plus white noise.

    Frequencies and phases are drawn once; the expected 3-D RMS equals ``rms``
    (a finite window can deviate when the two frequencies nearly beat).
    """

    def __init__(self, rms: float, band, rng: np.random.Generator):
        self.rng = rng
        sigma_axis = rms / math.sqrt(3.0)
        self.amp = math.sqrt(SINE_SHARE) * sigma_axis  # each of two sines: A^2/2
        self.white = math.sqrt(1.0 - SINE_SHARE) * sigma_axis
        self.freq = rng.uniform(band[0], band[1], size=(2, 3))
        self.phase = rng.uniform(0.0, 2.0 * math.pi, size=(2, 3))

    def sample(self, t) -> np.ndarray:
        """Tremor displacement at times ``t`` (scalar or 1-D array) -> (..., 3)."""
        t = np.asarray(t, dtype=float)[..., None]
        s = np.sin(2 * math.pi * self.freq[0] * t + self.phase[0])
        s += np.sin(2 * math.pi * self.freq[1] * t + self.phase[1])
        out = self.amp * s
        if self.white > 0:
            out = out + self.white * self.rng.standard_normal(out.shape)
        return out


class Operator:
    """Stateful operator loop, advanced once per 10 ms tick.

    ``to_hand(v_tip, tip)`` maps a desired tip velocity to the hand velocity
    that produces it under the current condition (lever or scaling); the map
    must be linear in ``v_tip``. Commands (hand velocity and press) reach the
    hand after ``reaction_delay`` through a FIFO. The operator aims from the
    tip position predicted from the motion already queued, the way an
    efference copy lets a person avoid overshooting through their own delay.
    """

    def __init__(self, model: OperatorModel, rng: np.random.Generator, to_hand,
                 dt: float = 1.0 / OPERATOR_RATE):
        self.model = model
        self.rng = rng
        self.to_hand = to_hand
        self.dt = dt
        self.delay_ticks = int(round(model.reaction_delay / dt))
        self.tremor = TremorGenerator(model.tremor_rms, model.tremor_band, rng)
        self.perceived_target = None
        self.clear_queue()
        self.inside = 0
        self.t_near = None

    def clear_queue(self):
        self.fifo = deque([(np.zeros(3), np.zeros(3), False)] * self.delay_ticks)
        self.in_flight = np.zeros(3)  # sum of queued tip velocities

    def present(self, target, noise_scale: float = 1.0):
        """Show a new target; the operator misjudges it by a fresh bias."""
        sigma = self.model.perception_noise * noise_scale
        self.perceived_target = np.asarray(target, dtype=float) + sigma * self.rng.standard_normal(3)
        self.clear_queue()
        self.inside = 0
        self.t_near = None

    def press_radius(self, elapsed: float) -> float:
        if self.t_near is None:
            return self.model.press_threshold
        return self.model.press_threshold * (1.0 + (elapsed - self.t_near) / self.model.patience)

    def update(self, perceived_tip, elapsed: float):
        """Return (hand velocity mm/s executed this tick, press executed this tick)."""
        tip = np.asarray(perceived_tip, dtype=float)
        d = self.perceived_target - tip
        dist = math.sqrt(d @ d)
        if self.t_near is None and dist < NEAR_FACTOR * self.model.press_threshold:
            self.t_near = elapsed
        self.inside = self.inside + 1 if dist < self.press_radius(elapsed) else 0
        press = self.inside * self.dt >= DWELL_TIME - 1e-9

        v_tip = APPROACH_GAIN * (d - self.dt * self.in_flight)
        v = self.to_hand(v_tip, tip)
        speed = math.sqrt(v @ v)
        if speed > self.model.max_hand_speed:
            k = self.model.max_hand_speed / speed
            v = v * k
            v_tip = v_tip * k
        if self.delay_ticks == 0:
            return v, press
        self.fifo.append((v, v_tip, press))
        self.in_flight = self.in_flight + v_tip
        v_out, vt_out, press_out = self.fifo.popleft()
        self.in_flight = self.in_flight - vt_out
        return v_out, press_out


def operator_update(op: Operator, perceived_tip, perceived_target, elapsed: float):
    """Functional entry point: steer ``op`` toward ``perceived_target``."""
    if perceived_target is not None:
        op.perceived_target = np.asarray(perceived_target, dtype=float)
    return op.update(perceived_tip, elapsed)
