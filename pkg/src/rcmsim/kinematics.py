"""Arm + instrument geometry, forward kinematics and Jacobians.

The chain is a 7-joint S-R-S arm carrying a laparoscopic instrument with a
roll joint and a two-axis distal wrist (10 revolute joints in total). Link
transforms follow the modified (Craig) Denavit-Hartenberg convention::

    T_{i-1,i} = Rx(alpha_{i-1}) Tx(a_{i-1}) Rz(theta_i) Tz(d_i)

so each table row stores the *preceding* link's ``a`` and ``alpha``. Frame
``i`` sits on the axis of joint ``i``; frame 0 is the world/base frame.
Lengths are millimetres, angles radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .transforms import quat_from_matrix, rotation_error

N_JOINTS = 10
SHAFT_LENGTH = 300.0

_D = math.pi / 180.0

# a, alpha, d, theta_offset, lo, hi  (mm / degrees); see docs/geometry.md
DEFAULT_GEOMETRY_TABLE = (
    (0.0, 0.0, 0.0, 0.0, -170.0, 170.0),      # 1 shoulder roll
    (0.0, -90.0, 0.0, 0.0, -120.0, 120.0),    # 2 shoulder pitch
    (0.0, 90.0, 300.0, 0.0, -170.0, 170.0),   # 3 upper-arm roll, elbow 300 mm out
    (0.0, 90.0, 0.0, 0.0, -150.0, 150.0),     # 4 elbow pitch
    (0.0, -90.0, 250.0, 0.0, -170.0, 170.0),  # 5 forearm roll, wrist 250 mm out
    (0.0, -90.0, 0.0, 0.0, -120.0, 120.0),    # 6 wrist pitch
    (0.0, 90.0, 150.0, 0.0, -170.0, 170.0),   # 7 flange roll, mount 150 mm out
    (0.0, 90.0, 300.0, 0.0, -170.0, 170.0),   # 8 instrument roll, 300 mm shaft
    (0.0, -90.0, 0.0, 90.0, -90.0, 90.0),     # 9 distal pitch
    (0.0, 90.0, 0.0, 180.0, -90.0, 90.0),     # 10 distal yaw
)
DEFAULT_TOOL_TIP = (10.0, 0.0, 0.0)


@dataclass(frozen=True)
class JointDef:
    """One revolute joint row. ``limit_lo == limit_hi`` locks the joint."""

    dh_a: float
    dh_alpha: float
    dh_d: float
    dh_theta_offset: float
    limit_lo: float
    limit_hi: float
    kind: str = "revolute"

    def __post_init__(self):
        if self.kind != "revolute":
            raise ValueError(f"unsupported joint kind {self.kind!r}")
        if self.limit_lo > self.limit_hi:
            raise ValueError("limit_lo must not exceed limit_hi")
        if max(abs(self.limit_lo), abs(self.limit_hi)) > math.pi + 1e-12:
            raise ValueError("joint limits must lie within [-pi, pi]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.limit_lo + self.limit_hi)

    @property
    def half_range(self) -> float:
        return 0.5 * (self.limit_hi - self.limit_lo)

    @property
    def locked(self) -> bool:
        return self.limit_hi == self.limit_lo


@dataclass(frozen=True, eq=False)
class KinematicChain:
    joints: tuple
    shaft_proximal_index: int = 7
    shaft_distal_index: int = 8
    tool_tip_offset: tuple = DEFAULT_TOOL_TIP
    # derived column arrays, filled in __post_init__
    a: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    d: np.ndarray = field(init=False, repr=False)
    theta_offset: np.ndarray = field(init=False, repr=False)
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)
    mid: np.ndarray = field(init=False, repr=False)
    half_range: np.ndarray = field(init=False, repr=False)
    free: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) != N_JOINTS:
            raise ValueError(f"chain needs exactly {N_JOINTS} joints, got {len(joints)}")
        if not 0 <= self.shaft_proximal_index < self.shaft_distal_index <= N_JOINTS:
            raise ValueError("shaft frame indices out of order")
        object.__setattr__(self, "joints", joints)
        object.__setattr__(self, "tool_tip_offset", tuple(float(v) for v in self.tool_tip_offset))
        cols = {
            "a": [j.dh_a for j in joints],
            "alpha": [j.dh_alpha for j in joints],
            "d": [j.dh_d for j in joints],
            "theta_offset": [j.dh_theta_offset for j in joints],
            "lo": [j.limit_lo for j in joints],
            "hi": [j.limit_hi for j in joints],
            "mid": [j.mid for j in joints],
            "half_range": [j.half_range for j in joints],
        }
        for name, values in cols.items():
            arr = np.array(values, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        free = np.array([not j.locked for j in joints])
        free.setflags(write=False)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "_ca", np.cos(self.alpha))
        object.__setattr__(self, "_sa", np.sin(self.alpha))
        geom = np.column_stack([self.a, self._ca, self._sa, self.d, self.theta_offset,
                                self.lo, self.hi, self.mid, self.half_range,
                                free.astype(float)])
        geom.setflags(write=False)
        object.__setattr__(self, "geom", np.ascontiguousarray(geom))
        object.__setattr__(self, "tool", np.array(self.tool_tip_offset))

    @property
    def n(self) -> int:
        return N_JOINTS

    @property
    def tip_frame(self) -> int:
        return N_JOINTS

    def clamp(self, q):
        return np.clip(q, self.lo, self.hi)


class Pose(NamedTuple):
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)


class InstrumentFrames(NamedTuple):
    p_w: np.ndarray  # shaft proximal end (instrument mount)
    p_s: np.ndarray  # shaft distal end (distal wrist centre)
    tip: np.ndarray
    tip_orientation: np.ndarray


class FKResult(NamedTuple):
    frames: list
    instrument: InstrumentFrames
    transforms: np.ndarray  # (N_JOINTS + 1, 4, 4)


def default_chain() -> KinematicChain:
    return chain_from_table(DEFAULT_GEOMETRY_TABLE, tool_tip_offset=DEFAULT_TOOL_TIP)


def chain_from_table(rows, tool_tip_offset=DEFAULT_TOOL_TIP, shaft=(7, 8), degrees=True):
    k = _D if degrees else 1.0
    joints = [JointDef(a, alpha * k, d, off * k, lo * k, hi * k)
              for a, alpha, d, off, lo, hi in rows]
    return KinematicChain(tuple(joints), shaft[0], shaft[1], tuple(tool_tip_offset))


def load_geometry(path) -> KinematicChain:
    """Read a geometry table.

    One joint per line: ``a alpha d theta_offset lo hi`` (mm, degrees), comma
    or whitespace separated. Optional directive lines ``shaft = i j`` and
    ``tool_tip = x y z``. ``#`` starts a comment.
    """
    rows, shaft, tip = [], (7, 8), DEFAULT_TOOL_TIP
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = (s.strip() for s in line.partition("="))
            nums = [float(v) for v in value.replace(",", " ").split()]
            if key == "shaft" and len(nums) == 2:
                shaft = (int(nums[0]), int(nums[1]))
            elif key == "tool_tip" and len(nums) == 3:
                tip = tuple(nums)
            else:
                raise ValueError(f"{path}:{lineno}: bad directive {raw.strip()!r}")
            continue
        try:
            nums = [float(v) for v in line.replace(",", " ").split()]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if len(nums) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 values, got {len(nums)}")
        rows.append(nums)
    return chain_from_table(rows, tool_tip_offset=tip, shaft=shaft)


def dump_geometry(chain: KinematicChain) -> str:
    lines = ["# a alpha d theta_offset lo hi   (mm, degrees)"]
    for j in chain.joints:
        vals = (j.dh_a, j.dh_alpha / _D, j.dh_d, j.dh_theta_offset / _D,
                j.limit_lo / _D, j.limit_hi / _D)
        lines.append(" ".join(f"{v:.12g}" for v in vals))
    lines.append(f"shaft = {chain.shaft_proximal_index} {chain.shaft_distal_index}")
    lines.append("tool_tip = " + " ".join(f"{v:.12g}" for v in chain.tool_tip_offset))
    return "\n".join(lines) + "\n"


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != N_JOINTS:
        raise ValueError(f"joint vector must have length {N_JOINTS}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint vector contains non-finite values")
    return q


def link_transforms(chain: KinematicChain, q) -> np.ndarray:
    """Per-link transforms, shape (..., N_JOINTS, 4, 4); ``q`` may be batched."""
    q = np.asarray(q, dtype=float)
    th = q + chain.theta_offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = chain._ca, chain._sa
    T = np.zeros(q.shape + (4, 4))
    T[..., 0, 0] = ct
    T[..., 0, 1] = -st
    T[..., 0, 3] = chain.a
    T[..., 1, 0] = st * ca
    T[..., 1, 1] = ct * ca
    T[..., 1, 2] = -sa
    T[..., 1, 3] = -sa * chain.d
    T[..., 2, 0] = st * sa
    T[..., 2, 1] = ct * sa
    T[..., 2, 2] = ca
    T[..., 2, 3] = ca * chain.d
    T[..., 3, 3] = 1.0
    return T


def frame_transforms(chain: KinematicChain, q) -> np.ndarray:
    """World transforms of frames 0..N_JOINTS, shape (..., N_JOINTS + 1, 4, 4)."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        return _kernels.fk(chain.geom, q, np.empty((N_JOINTS + 1, 4, 4)))
    L = link_transforms(chain, q)
    out = np.empty(L.shape[:-3] + (N_JOINTS + 1, 4, 4))
    out[..., 0, :, :] = np.eye(4)
    acc = L[..., 0, :, :]
    out[..., 1, :, :] = acc
    for i in range(1, N_JOINTS):
        acc = acc @ L[..., i, :, :]
        out[..., i + 1, :, :] = acc
    return out


def tip_position(chain: KinematicChain, transforms) -> np.ndarray:
    T = transforms[..., chain.tip_frame, :, :]
    return T[..., :3, 3] + T[..., :3, :3] @ np.asarray(chain.tool_tip_offset)


def instrument_frames(chain: KinematicChain, transforms) -> InstrumentFrames:
    T_tip = transforms[chain.tip_frame]
    return InstrumentFrames(
        p_w=transforms[chain.shaft_proximal_index, :3, 3].copy(),
        p_s=transforms[chain.shaft_distal_index, :3, 3].copy(),
        tip=tip_position(chain, transforms),
        tip_orientation=quat_from_matrix(T_tip[:3, :3]),
    )


def forward_kinematics(chain: KinematicChain, q) -> FKResult:
    """Per-frame poses (frames 0..10) and the instrument landmarks."""
    q = _check_q(q)
    if q.ndim != 1:
        raise ValueError("forward_kinematics takes a single joint vector; "
                         "use frame_transforms for batches")
    Ts = frame_transforms(chain, q)
    frames = [Pose(T[:3, 3].copy(), quat_from_matrix(T[:3, :3])) for T in Ts]
    return FKResult(frames, instrument_frames(chain, Ts), Ts)


def _point(transforms, frame, offset):
    T = transforms[frame]
    return T[:3, 3] + T[:3, :3] @ offset


def geometric_jacobian(chain: KinematicChain, q, frame: int, offset=(0.0, 0.0, 0.0),
                       transforms=None) -> np.ndarray:
    """6 x 10 Jacobian of a point rigidly attached to ``frame``.

    Rows 0-2 are linear velocity (mm/rad), rows 3-5 angular velocity (rad/rad),
    both expressed in the world frame. Joints distal to ``frame`` and locked
    joints give zero columns.
    """
    if not 0 <= frame <= N_JOINTS:
        raise IndexError(f"frame index {frame} out of range 0..{N_JOINTS}")
    if transforms is None:
        transforms = frame_transforms(chain, _check_q(q))
    p = _point(transforms, frame, np.asarray(offset, dtype=float))
    J = np.zeros((6, N_JOINTS))
    if frame == 0:
        return J
    z = transforms[1:frame + 1, :3, 2]
    o = transforms[1:frame + 1, :3, 3]
    J[:3, :frame] = np.cross(z, p - o).T
    J[3:, :frame] = z.T
    J[:, ~chain.free] = 0.0
    return J


def finite_difference_jacobian(chain: KinematicChain, q, frame: int, offset=(0.0, 0.0, 0.0),
                               h: float = 1e-6) -> np.ndarray:
    """Central-difference oracle for :func:`geometric_jacobian`.

    Orientation rows use the rotation vector of ``R(q+h) R(q-h)^T`` over 2h.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if not 0 <= frame <= N_JOINTS:
        raise IndexError(f"frame index {frame} out of range 0..{N_JOINTS}")
    q = _check_q(q)
    offset = np.asarray(offset, dtype=float)
    J = np.zeros((6, N_JOINTS))
    for j in range(N_JOINTS):
        if not chain.free[j]:
            continue
        dq = np.zeros(N_JOINTS)
        dq[j] = h
        Tp = frame_transforms(chain, q + dq)
        Tm = frame_transforms(chain, q - dq)
        J[:3, j] = (_point(Tp, frame, offset) - _point(Tm, frame, offset)) / (2 * h)
        J[3:, j] = rotation_error(Tp[frame, :3, :3], Tm[frame, :3, :3]) / (2 * h)
    return J


def joint_limit_margin(chain: KinematicChain, q) -> np.ndarray:
    """1 at the middle of each joint's range, 0 at (or beyond) a limit."""
    q = np.asarray(q, dtype=float)
    half = chain.half_range
    with np.errstate(divide="ignore", invalid="ignore"):
        m = 1.0 - np.abs(q - chain.mid) / half
    m = np.where(half > 0, m, 0.0)
    return np.clip(m, 0.0, 1.0)


def random_configuration(chain: KinematicChain, rng, size: int | Sequence[int] | None = None):
    """Uniform joint vectors inside the limits."""
    shape = (N_JOINTS,) if size is None else tuple(np.atleast_1d(size)) + (N_JOINTS,)
    return chain.lo + (chain.hi - chain.lo) * rng.random(shape)
