"""Compiled inner loops for forward kinematics and the RCM-constrained DLS solve.

Geometry is passed as a (10, 10) array with columns
a, cos(alpha), sin(alpha), d, theta_offset, lo, hi, mid, half_range, free.
IK parameters are a float array:
damping, max_step, pos_tol, rot_tol, rcm_tol, max_iters, nullspace_gain, rot_scale.
"""
import math

import numpy as np
from numba import njit

G_A, G_CA, G_SA, G_D, G_OFF, G_LO, G_HI, G_MID, G_HALF, G_FREE = range(10)
P_MU, P_MAXSTEP, P_POS, P_ROT, P_RCM, P_ITERS, P_NULL, P_ROTSCALE = range(8)
LAM_MIN = 0.01
LAM_MAX = 0.99


@njit(cache=True)
def fk(geom, q, out):
    n = q.shape[0]
    for r in range(4):
        for c in range(4):
            out[0, r, c] = 1.0 if r == c else 0.0
    L = np.empty((4, 4))
    for i in range(n):
        th = q[i] + geom[i, G_OFF]
        ct = math.cos(th)
        st = math.sin(th)
        ca = geom[i, G_CA]
        sa = geom[i, G_SA]
        d = geom[i, G_D]
        L[0, 0] = ct
        L[0, 1] = -st
        L[0, 2] = 0.0
        L[0, 3] = geom[i, G_A]
        L[1, 0] = st * ca
        L[1, 1] = ct * ca
        L[1, 2] = -sa
        L[1, 3] = -sa * d
        L[2, 0] = st * sa
        L[2, 1] = ct * sa
        L[2, 2] = ca
        L[2, 3] = ca * d
        for r in range(3):
            for c in range(4):
                s = 0.0
                for k in range(3):
                    s += out[i, r, k] * L[k, c]
                if c == 3:
                    s += out[i, r, 3]
                out[i + 1, r, c] = s
        out[i + 1, 3, 0] = 0.0
        out[i + 1, 3, 1] = 0.0
        out[i + 1, 3, 2] = 0.0
        out[i + 1, 3, 3] = 1.0
    return out


@njit(cache=True)
def point_in_frame(T, frame, offset):
    p = np.empty(3)
    for r in range(3):
        p[r] = T[frame, r, 3] + T[frame, r, 0] * offset[0] + T[frame, r, 1] * offset[1] \
            + T[frame, r, 2] * offset[2]
    return p


@njit(cache=True)
def quat_of(R):
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    if q[0] < 0.0:
        q = -q
    return q / math.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)


@njit(cache=True)
def rotvec_error(Rd, T, frame):
    """Rotation vector of Rd @ R_frame^T."""
    R = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += Rd[i, k] * T[frame, j, k]
            R[i, j] = s
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    c = min(1.0, max(-1.0, c))
    w0 = R[2, 1] - R[1, 2]
    w1 = R[0, 2] - R[2, 0]
    w2 = R[1, 0] - R[0, 1]
    s = 0.5 * math.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    angle = math.atan2(s, c)
    out = np.empty(3)
    if angle < 1e-9:
        out[0] = 0.5 * w0
        out[1] = 0.5 * w1
        out[2] = 0.5 * w2
    elif math.pi - angle < 1e-6:
        qq = quat_of(R)
        v = math.sqrt(qq[1] ** 2 + qq[2] ** 2 + qq[3] ** 2)
        ang = 2.0 * math.atan2(v, qq[0])
        for i in range(3):
            out[i] = qq[i + 1] * ang / v
    else:
        k = angle / (2.0 * s)
        out[0] = w0 * k
        out[1] = w1 * k
        out[2] = w2 * k
    return out


@njit(cache=True)
def task_error(T, lam, tip_frame, iw, i_s, tool, tpos, tR, fulcrum, rot_scale, e):
    """Fill the stacked 9-vector ``e``; return (|e_pos|, |e_rot|, |e_rcm|)."""
    tip = point_in_frame(T, tip_frame, tool)
    er = rotvec_error(tR, T, tip_frame)
    rp = 0.0
    rr = 0.0
    rc = 0.0
    for r in range(3):
        ep = tpos[r] - tip[r]
        pr = T[iw, r, 3] + lam * (T[i_s, r, 3] - T[iw, r, 3])
        ec = fulcrum[r] - pr
        e[r] = ep
        e[3 + r] = rot_scale * er[r]
        e[6 + r] = ec
        rp += ep * ep
        rr += er[r] * er[r]
        rc += ec * ec
    return math.sqrt(rp), math.sqrt(rr), math.sqrt(rc)


@njit(cache=True)
def ext_jacobian(geom, T, lam, tip_frame, iw, i_s, tool, rot_scale, J):
    n = geom.shape[0]
    tip = point_in_frame(T, tip_frame, tool)
    for r in range(9):
        for c in range(n + 1):
            J[r, c] = 0.0
    for j in range(n):
        if geom[j, G_FREE] == 0.0:
            continue
        f = j + 1
        z0 = T[f, 0, 2]
        z1 = T[f, 1, 2]
        z2 = T[f, 2, 2]
        o0 = T[f, 0, 3]
        o1 = T[f, 1, 3]
        o2 = T[f, 2, 3]
        if f <= tip_frame:
            d0 = tip[0] - o0
            d1 = tip[1] - o1
            d2 = tip[2] - o2
            J[0, j] = z1 * d2 - z2 * d1
            J[1, j] = z2 * d0 - z0 * d2
            J[2, j] = z0 * d1 - z1 * d0
            J[3, j] = rot_scale * z0
            J[4, j] = rot_scale * z1
            J[5, j] = rot_scale * z2
        if f <= iw:
            d0 = T[iw, 0, 3] - o0
            d1 = T[iw, 1, 3] - o1
            d2 = T[iw, 2, 3] - o2
            w = 1.0 - lam
            J[6, j] += w * (z1 * d2 - z2 * d1)
            J[7, j] += w * (z2 * d0 - z0 * d2)
            J[8, j] += w * (z0 * d1 - z1 * d0)
        if f <= i_s:
            d0 = T[i_s, 0, 3] - o0
            d1 = T[i_s, 1, 3] - o1
            d2 = T[i_s, 2, 3] - o2
            J[6, j] += lam * (z1 * d2 - z2 * d1)
            J[7, j] += lam * (z2 * d0 - z0 * d2)
            J[8, j] += lam * (z0 * d1 - z1 * d0)
    for r in range(3):
        J[6 + r, n] = T[i_s, r, 3] - T[iw, r, 3]
    return J


@njit(cache=True)
def dls_update(geom, q, lam, J, e, params):
    """DLS task step plus projected joint-centring step, clamped."""
    n = q.shape[0]
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    mu2 = params[P_MU] * params[P_MU]
    m = s.shape[0]
    ute = U.T @ e
    coef = np.empty(m)
    for i in range(m):
        coef[i] = s[i] / (s[i] * s[i] + mu2) * ute[i]
    dx = Vt.T @ coef
    alpha = params[P_NULL]
    if alpha > 0.0:
        g = np.zeros(n + 1)
        for i in range(n):
            if geom[i, G_FREE] != 0.0:
                half = geom[i, G_HALF]
                g[i] = 2.0 * (q[i] - geom[i, G_MID]) / (half * half)
        proj = g.copy()
        tol = s[0] * 1e-10
        for k in range(m):
            if s[k] > tol:
                dot = 0.0
                for i in range(n + 1):
                    dot += Vt[k, i] * g[i]
                for i in range(n + 1):
                    proj[i] -= Vt[k, i] * dot
        for i in range(n + 1):
            dx[i] -= alpha * proj[i]
    biggest = 0.0
    for i in range(n):
        biggest = max(biggest, abs(dx[i]))
    if biggest > params[P_MAXSTEP]:
        k = params[P_MAXSTEP] / biggest
        for i in range(n + 1):
            dx[i] *= k
    q_new = np.empty(n)
    for i in range(n):
        q_new[i] = min(max(q[i] + dx[i], geom[i, G_LO]), geom[i, G_HI])
    lam_new = min(max(lam + dx[n], LAM_MIN), LAM_MAX)
    return q_new, lam_new


@njit(cache=True)
def solve(geom, tip_frame, iw, i_s, tool, q0, lam0, tpos, tR, fulcrum, params, norms):
    """Iterate DLS steps; returns (q, lam, converged, iterations, rp, rr, rc, n_norms)."""
    n = q0.shape[0]
    T = np.empty((n + 1, 4, 4))
    J = np.empty((9, n + 1))
    e = np.empty(9)
    q = q0.copy()
    lam = lam0
    max_iters = int(params[P_ITERS])
    rot_scale = params[P_ROTSCALE]
    best_norm = np.inf
    best_q = q.copy()
    best_lam = lam
    best_r = (0.0, 0.0, 0.0)
    it = 0
    while True:
        fk(geom, q, T)
        rp, rr, rc = task_error(T, lam, tip_frame, iw, i_s, tool, tpos, tR, fulcrum, rot_scale, e)
        norm = 0.0
        for k in range(9):
            norm += e[k] * e[k]
        norm = math.sqrt(norm)
        if it < norms.shape[0]:
            norms[it] = norm
        if norm < best_norm:
            best_norm = norm
            best_q[:] = q
            best_lam = lam
            best_r = (rp, rr, rc)
        if rp <= params[P_POS] and rr <= params[P_ROT] and rc <= params[P_RCM]:
            return q, lam, True, it, rp, rr, rc
        if it >= max_iters:
            break
        ext_jacobian(geom, T, lam, tip_frame, iw, i_s, tool, rot_scale, J)
        q, lam = dls_update(geom, q, lam, J, e, params)
        it += 1
    return best_q, best_lam, False, it, best_r[0], best_r[1], best_r[2]
