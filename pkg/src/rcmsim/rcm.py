"""Virtual remote-centre-of-motion inverse kinematics and pivot calibration.

The shaft point that must stay on the fulcrum is parametrised as
``p_rcm = p_w + lam * (p_s - p_w)``; ``lam`` joins the ten joint angles as an
eleventh unknown. Each damped-least-squares step drives a stacked 9-vector
(tip position, scaled tip orientation, RCM) to zero and spends the remaining
two degrees of redundancy on centring the joints in their ranges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .kinematics import N_JOINTS, KinematicChain, Pose, frame_transforms, tip_position
from .transforms import matrix_from_quat, quat_from_matrix

LAMBDA_MARGIN = 0.01


class DegenerateInputError(ValueError):
    """Raised when a least-squares system is rank deficient."""


@dataclass(frozen=True)
class RcmConstraint:
    fulcrum: np.ndarray
    lam: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "fulcrum", np.asarray(self.fulcrum, dtype=float))


@dataclass(frozen=True)
class FullState:
    q: np.ndarray
    lam: float

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (N_JOINTS,) or not np.all(np.isfinite(q)):
            raise ValueError("q must be a finite vector of length 10")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", float(np.clip(self.lam, LAMBDA_MARGIN, 1 - LAMBDA_MARGIN)))

    def as_vector(self):
        return np.append(self.q, self.lam)


@dataclass(frozen=True)
class IkParams:
    damping: float = 1e-2
    max_step: float = 0.05
    pos_tol: float = 0.01
    rot_tol: float = 1e-4
    rcm_tol: float = 0.01
    max_iters: int = 200
    nullspace_gain: float = 0.1
    rot_scale: float = 100.0

    def __post_init__(self):
        for name in ("damping", "max_step", "pos_tol", "rot_tol", "rcm_tol",
                     "max_iters", "rot_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"IkParams.{name} must be positive")
        if self.nullspace_gain < 0:
            raise ValueError("IkParams.nullspace_gain must be >= 0")


class IkResult(NamedTuple):
    state: FullState
    converged: bool
    iterations: int
    residual_pos: float
    residual_rot: float
    residual_rcm: float
    error_norms: tuple = ()


def _rcm_from_transforms(chain, T, lam):
    p_w = T[chain.shaft_proximal_index, :3, 3]
    p_s = T[chain.shaft_distal_index, :3, 3]
    return p_w + lam * (p_s - p_w)


def rcm_point(chain: KinematicChain, state: FullState) -> np.ndarray:
    return _rcm_from_transforms(chain, frame_transforms(chain, state.q), state.lam)


def rcm_error(chain: KinematicChain, state: FullState, constraint: RcmConstraint) -> np.ndarray:
    return constraint.fulcrum - rcm_point(chain, state)


def extended_jacobian(chain: KinematicChain, state: FullState, constraint: RcmConstraint = None,
                      rot_scale: float = 100.0) -> np.ndarray:
    """9 x 11 Jacobian of (tip position, rot_scale * tip rotation, RCM point) w.r.t. (q, lam).

    ``constraint`` is accepted for interface symmetry; the derivative does not
    depend on the fulcrum location.
    """
    T = frame_transforms(chain, state.q)
    J = np.empty((9, N_JOINTS + 1))
    return _kernels.ext_jacobian(chain.geom, T, state.lam, chain.tip_frame,
                                 chain.shaft_proximal_index, chain.shaft_distal_index,
                                 chain.tool, rot_scale, J)


def nullspace_objective_grad(chain: KinematicChain, q):
    """Joint-centring cost ``h = sum(((q - mid) / half_range)**2)`` and its gradient.

    Locked joints contribute nothing.
    """
    q = np.asarray(q, dtype=float)
    half = np.where(chain.free, chain.half_range, 1.0)
    u = np.where(chain.free, (q - chain.mid) / half, 0.0)
    return float(u @ u), 2.0 * u / half


def _param_array(params: IkParams):
    return np.array([params.damping, params.max_step, params.pos_tol, params.rot_tol,
                     params.rcm_tol, params.max_iters, params.nullspace_gain, params.rot_scale])


def _target_parts(target: Pose):
    return np.asarray(target.position, dtype=float), matrix_from_quat(target.orientation)


def task_error(chain: KinematicChain, state: FullState, target: Pose, constraint: RcmConstraint,
               rot_scale: float = 100.0) -> np.ndarray:
    """Stacked error ``[e_pos; rot_scale * e_rot; e_rcm]`` (mm)."""
    pos, R = _target_parts(target)
    T = frame_transforms(chain, state.q)
    e = np.empty(9)
    _kernels.task_error(T, state.lam, chain.tip_frame, chain.shaft_proximal_index,
                        chain.shaft_distal_index, chain.tool, pos, R, constraint.fulcrum,
                        rot_scale, e)
    return e


def dls_step(chain: KinematicChain, state: FullState, target: Pose, constraint: RcmConstraint,
             params: IkParams = IkParams()) -> FullState:
    """One damped-least-squares update with nullspace joint centring.

    ``dx = J^T (J J^T + mu^2 I)^-1 e - alpha (I - J^+ J) [grad h; 0]``, scaled so
    no joint moves more than ``max_step``, then clamped to the joint limits
    and ``lam`` to [0.01, 0.99].
    """
    e = task_error(chain, state, target, constraint, params.rot_scale)
    J = extended_jacobian(chain, state, constraint, params.rot_scale)
    q, lam = _kernels.dls_update(chain.geom, state.q, state.lam, J, e, _param_array(params))
    return FullState(q, lam)


def solve_ik(chain: KinematicChain, initial: FullState, target: Pose, constraint: RcmConstraint,
             params: IkParams = IkParams()) -> IkResult:
    """Iterate :func:`dls_step` until every residual is under tolerance.

    Non-convergence is reported, not raised; the returned state is the best
    one seen (smallest stacked error norm).
    """
    pos, R = _target_parts(target)
    norms = np.full(params.max_iters + 1, np.nan)
    q, lam, ok, it, rp, rr, rc = _kernels.solve(
        chain.geom, chain.tip_frame, chain.shaft_proximal_index, chain.shaft_distal_index,
        chain.tool, initial.q, float(initial.lam), pos, R, constraint.fulcrum,
        _param_array(params), norms)
    return IkResult(FullState(q, lam), bool(ok), int(it), float(rp), float(rr), float(rc),
                    tuple(norms[:it + 1]))


def tip_pose(chain: KinematicChain, q) -> Pose:
    T = frame_transforms(chain, q)
    return Pose(tip_position(chain, T), quat_from_matrix(T[chain.tip_frame, :3, :3]))


def shaft_lambda_through(chain: KinematicChain, q, point) -> float:
    """Shaft parameter of the point on the shaft closest to ``point``."""
    T = frame_transforms(chain, q)
    p_w = T[chain.shaft_proximal_index, :3, 3]
    axis = T[chain.shaft_distal_index, :3, 3] - p_w
    return float((np.asarray(point) - p_w) @ axis / (axis @ axis))


# ---------------------------------------------------------------- pivot calibration

class PivotResult(NamedTuple):
    tip_offset: np.ndarray
    pivot: np.ndarray
    rms_residual: float


def pivot_calibrate(poses) -> PivotResult:
    """Least-squares tip offset ``t`` (flange frame) and pivot ``p`` (world).

    Solves ``R_i t + d_i = p`` for all poses, i.e. ``[R_i | -I] [t; p] = -d_i``.
    """
    poses = list(poses)
    if len(poses) < 6:
        raise DegenerateInputError(f"pivot calibration needs at least 6 poses, got {len(poses)}")
    A = np.zeros((3 * len(poses), 6))
    b = np.zeros(3 * len(poses))
    Rs, ds = [], []
    for i, pose in enumerate(poses):
        R = matrix_from_quat(pose.orientation)
        d = np.asarray(pose.position, dtype=float)
        A[3 * i:3 * i + 3, :3] = R
        A[3 * i:3 * i + 3, 3:] = -np.eye(3)
        b[3 * i:3 * i + 3] = -d
        Rs.append(R)
        ds.append(d)
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= 1e-6:
        raise DegenerateInputError(
            f"pivot poses lack orientation diversity (smallest singular value {s[-1]:.3g})")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    t, p = x[:3], x[3:]
    res = np.array([R @ t + d - p for R, d in zip(Rs, ds)])
    rms = math.sqrt(float(np.mean(np.sum(res * res, axis=1))))
    return PivotResult(t, p, rms)


def synthesize_pivot_poses(tip_offset, pivot, n: int = 20, rng=None, noise_mm: float = 0.0,
                           max_tilt_deg: float = 30.0):
    """Flange poses of a tool pivoting about ``pivot``.

    Orientations sweep a circle of tilts around the vertical (like circling the
    instrument about the insertion point) with a random twist. ``noise_mm`` is
    the RMS length of the isotropic Gaussian error added to each position.
    """
    rng = np.random.default_rng(rng)
    t = np.asarray(tip_offset, dtype=float)
    p = np.asarray(pivot, dtype=float)
    poses = []
    for k in range(n):
        az = 2 * math.pi * k / n + rng.uniform(-0.1, 0.1)
        tilt = math.radians(max_tilt_deg) * rng.uniform(0.4, 1.0)
        twist = rng.uniform(-math.pi, math.pi)
        axis = np.array([-math.sin(az), math.cos(az), 0.0])
        R = _axis_angle(axis, tilt) @ _axis_angle(np.array([0.0, 0.0, 1.0]), twist)
        d = p - R @ t
        if noise_mm > 0:
            d = d + rng.normal(0.0, noise_mm / math.sqrt(3.0), 3)
        poses.append(Pose(d, quat_from_matrix(R)))
    return poses


def _axis_angle(axis, angle):
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K
