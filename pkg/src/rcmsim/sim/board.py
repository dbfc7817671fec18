"""Target board: ten 5 mm markers below the trocar at 0-30 degree insertion angles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .streams import rng_for

DEFAULT_FULCRUM = (400.0, 0.0, 100.0)
VERTICAL = (0.0, 0.0, 1.0)
N_TARGETS = 10
TARGET_RADIUS = 2.5
ANGLE_BANDS = ((0.0, 10.0), (10.0, 20.0), (20.0, 30.0))


@dataclass(frozen=True)
class Target:
    center: np.ndarray
    radius: float = TARGET_RADIUS
    normal: np.ndarray = field(default_factory=lambda: np.array(VERTICAL))  # foam normal


@dataclass(frozen=True)
class TargetBoard:
    targets: tuple
    fulcrum: np.ndarray
    vertical: np.ndarray

    def __post_init__(self):
        if len(self.targets) != N_TARGETS:
            raise ValueError(f"a board holds exactly {N_TARGETS} targets")

    def angles(self) -> np.ndarray:
        return np.array([insertion_angle(t.center, self.fulcrum, self.vertical)
                         for t in self.targets])

    def diameter(self) -> float:
        c = np.array([t.center for t in self.targets])
        return float(np.max(np.linalg.norm(c[:, None] - c[None], axis=-1)))


def insertion_angle(target, fulcrum, vertical=VERTICAL) -> float:
    """Angle (degrees) between the fulcrum->target line and the vertical axis."""
    v = np.asarray(target, dtype=float) - np.asarray(fulcrum, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("target coincides with the fulcrum")
    up = np.asarray(vertical, dtype=float)
    c = abs(v @ up) / (n * np.linalg.norm(up))
    return math.degrees(math.acos(min(1.0, c)))


def angle_band(angle_deg: float) -> int:
    """Index of the 10 degree band; 30 degrees belongs to the last band."""
    return min(int(angle_deg // 10.0), len(ANGLE_BANDS) - 1)


def generate_board(seed: int, fulcrum=DEFAULT_FULCRUM, depth_range=(80.0, 150.0),
                   min_separation: float = 15.0) -> TargetBoard:
    """Deterministic board for ``seed``.

    Insertion angles are stratified over six 5-degree sub-bands: one target
    in each, a second in the upper half of every 10-degree band and one
    anywhere. Each band therefore holds at least three targets and the
    steepest sub-band at least two.
    Depth below the fulcrum is uniform in ``depth_range``; azimuth uniform.
    """
    rng = rng_for(seed, 0xB0A4D)
    fulcrum = np.asarray(fulcrum, dtype=float)
    sub = list(range(6))
    sub += [1, 3, 5]
    sub.append(int(rng.integers(6)))
    centers = []
    for s in sub:
        for _ in range(1000):
            angle = math.radians(5.0 * s + 5.0 * rng.random())
            depth = rng.uniform(*depth_range)
            az = rng.uniform(0.0, 2.0 * math.pi)
            r = depth * math.tan(angle)
            c = fulcrum + np.array([r * math.cos(az), r * math.sin(az), -depth])
            if all(np.linalg.norm(c - o) >= min_separation for o in centers):
                break
        centers.append(c)
    order = rng.permutation(N_TARGETS)
    targets = tuple(Target(centers[i]) for i in order)
    return TargetBoard(targets, fulcrum, np.array(VERTICAL))
