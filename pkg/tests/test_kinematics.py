import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from rcmsim.kinematics import (DEFAULT_GEOMETRY_TABLE, N_JOINTS, SHAFT_LENGTH, chain_from_table,
                               dump_geometry, finite_difference_jacobian, forward_kinematics,
                               frame_transforms, geometric_jacobian, joint_limit_margin,
                               load_geometry, random_configuration)
from rcmsim.transforms import quat_from_matrix

# Tip at q = 0 from an independent symbolic product of the frozen modified-DH table.
HOME_TIP = (0.0, -310.0, 700.0)


def _sym_tip(rows, tool):
    T = sp.eye(4)
    for a, alpha, d, off, _, _ in rows:
        al, th = sp.rad(sp.nsimplify(alpha)), sp.rad(sp.nsimplify(off))
        Rx = sp.Matrix([[1, 0, 0, 0], [0, sp.cos(al), -sp.sin(al), 0],
                        [0, sp.sin(al), sp.cos(al), 0], [0, 0, 0, 1]])
        Tx = sp.Matrix([[1, 0, 0, a], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        Rz = sp.Matrix([[sp.cos(th), -sp.sin(th), 0, 0], [sp.sin(th), sp.cos(th), 0, 0],
                        [0, 0, 1, 0], [0, 0, 0, 1]])
        Tz = sp.Matrix([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, d], [0, 0, 0, 1]])
        T = T * Rx * Tx * Rz * Tz
    return T * sp.Matrix([*tool, 1])


def test_home_tip_matches_symbolic_chain(chain):
    sym = _sym_tip(DEFAULT_GEOMETRY_TABLE, chain.tool_tip_offset)
    sym = np.array([float(sym[i]) for i in range(3)])
    np.testing.assert_allclose(sym, HOME_TIP, atol=1e-9)
    fk = forward_kinematics(chain, np.zeros(N_JOINTS))
    np.testing.assert_allclose(fk.instrument.tip, HOME_TIP, atol=1e-9)


def test_base_rotation_by_pi_mirrors_tip(chain, rng):
    q = random_configuration(chain, rng) * 0.5
    q[0] = 0.0
    tip = forward_kinematics(chain, q).instrument.tip
    q[0] = math.pi
    flipped = chain_from_table([(*r[:4], -180.0, 180.0) if i == 0 else r
                                for i, r in enumerate(DEFAULT_GEOMETRY_TABLE)])
    tip2 = forward_kinematics(flipped, q).instrument.tip
    np.testing.assert_allclose(tip2, [-tip[0], -tip[1], tip[2]], atol=1e-9)


def test_rigid_shaft_over_many_configurations(chain, rng):
    worst = 0.0
    for _ in range(5):  # 10**6 configurations in chunks
        T = frame_transforms(chain, random_configuration(chain, rng, 200_000))
        length = np.linalg.norm(T[:, 8, :3, 3] - T[:, 7, :3, 3], axis=-1)
        worst = max(worst, np.max(np.abs(length / SHAFT_LENGTH - 1.0)))
    assert worst < 1e-9


def test_frames_orthonormal(chain, rng):
    T = frame_transforms(chain, random_configuration(chain, rng, 500))
    R = T[..., :3, :3]
    assert np.max(np.abs(np.linalg.det(R) - 1)) < 1e-9
    eye = np.einsum("...ji,...jk->...ik", R, R)
    assert np.max(np.abs(eye - np.eye(3))) < 1e-9


def test_fk_deterministic_and_batched_matches_single(chain, rng):
    q = random_configuration(chain, rng, 20)
    batch = frame_transforms(chain, q)
    for i in range(20):
        single = frame_transforms(chain, q[i])
        assert np.array_equal(single, frame_transforms(chain, q[i].copy()))
        np.testing.assert_allclose(single, batch[i], atol=1e-12)


def test_fk_tip_is_last_frame_plus_tool_offset(chain, rng):
    q = random_configuration(chain, rng)
    fk = forward_kinematics(chain, q)
    T = fk.transforms[-1]
    np.testing.assert_allclose(fk.instrument.tip, T[:3, 3] + T[:3, :3] @ chain.tool, atol=1e-12)
    np.testing.assert_allclose(fk.instrument.tip_orientation, quat_from_matrix(T[:3, :3]))
    for pose in fk.frames:
        assert abs(np.linalg.norm(pose.orientation) - 1) < 1e-9


@pytest.mark.parametrize("bad", [np.full(10, np.nan), np.zeros(9), np.r_[np.zeros(9), np.inf]])
def test_fk_rejects_bad_input(chain, bad):
    with pytest.raises(ValueError):
        forward_kinematics(chain, bad)


def test_single_joint_column_is_omega_cross_r():
    rows = [(0.0, 0.0, 0.0, 0.0, -180.0, 180.0)] + [(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)] * 9
    ch = chain_from_table(rows, tool_tip_offset=(100.0, 0.0, 0.0))
    J = geometric_jacobian(ch, np.zeros(10), 10, ch.tool)
    np.testing.assert_allclose(J[:, 0], [0, 100, 0, 0, 0, 1], atol=1e-12)
    assert np.all(J[:, 1:] == 0)


def test_distal_columns_are_zero(chain, rng):
    q = random_configuration(chain, rng)
    for frame in range(N_JOINTS + 1):
        J = geometric_jacobian(chain, q, frame, (5.0, -3.0, 2.0))
        assert np.all(J[:, frame:] == 0)


def test_jacobian_matches_finite_differences(chain, rng):
    for q in random_configuration(chain, rng, 100):
        Jg = geometric_jacobian(chain, q, chain.tip_frame, chain.tool)
        Jf = finite_difference_jacobian(chain, q, chain.tip_frame, chain.tool)
        assert np.max(np.abs(Jg - Jf)) / np.max(np.abs(Jg)) < 1e-5


def test_finite_difference_is_second_order(chain, rng):
    q = random_configuration(chain, rng)
    Jg = geometric_jacobian(chain, q, chain.tip_frame, chain.tool)
    e1 = np.max(np.abs(finite_difference_jacobian(chain, q, 10, chain.tool, h=1e-2) - Jg))
    e2 = np.max(np.abs(finite_difference_jacobian(chain, q, 10, chain.tool, h=5e-3) - Jg))
    assert 3.0 < e1 / e2 < 5.0


def test_locked_chain_has_zero_jacobian():
    rows = [(0.0, 0.0, 10.0, 0.0, 0.0, 0.0)] * 10
    ch = chain_from_table(rows)
    assert np.all(finite_difference_jacobian(ch, np.zeros(10), 10, ch.tool) == 0)
    assert np.all(geometric_jacobian(ch, np.zeros(10), 10, ch.tool) == 0)


def test_jacobian_errors(chain):
    with pytest.raises(IndexError):
        geometric_jacobian(chain, np.zeros(10), 11)
    with pytest.raises(ValueError):
        finite_difference_jacobian(chain, np.zeros(10), 10, h=0.0)


def test_joint_limit_margin_examples(chain):
    np.testing.assert_allclose(joint_limit_margin(chain, chain.mid), 1.0)
    q = chain.mid.copy()
    q[3] = chain.hi[3]
    assert joint_limit_margin(chain, q)[3] == 0.0
    q[3] = chain.mid[3] + 0.75 * chain.half_range[3]
    assert joint_limit_margin(chain, q)[3] == pytest.approx(0.25)


@given(st.lists(st.floats(-10, 10), min_size=10, max_size=10))
def test_joint_limit_margin_in_unit_interval(chain, q):
    m = joint_limit_margin(chain, np.array(q))
    assert np.all((m >= 0) & (m <= 1))


def test_geometry_table_round_trip(chain, tmp_path):
    p = tmp_path / "geom.txt"
    p.write_text(dump_geometry(chain))
    back = load_geometry(p)
    np.testing.assert_allclose(back.geom, chain.geom, atol=1e-12)
    assert back.tool_tip_offset == chain.tool_tip_offset


def test_geometry_table_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 0 0 0 -10\n")
    with pytest.raises(ValueError, match=":1:"):
        load_geometry(p)
    with pytest.raises(ValueError):
        chain_from_table(DEFAULT_GEOMETRY_TABLE[:9])
    with pytest.raises(ValueError):
        chain_from_table([(0, 0, 0, 0, 10, -10)] * 10)
