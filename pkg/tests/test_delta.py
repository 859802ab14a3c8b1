import numpy as np
import pytest

from amsim.delta import (DeltaGeometry, JointState, NoIntersection,
                         OutOfLimits, Singular, Unreachable, forward_kin,
                         inverse_kin, jacobian, joint_command, servo_step)


def fd_jacobian(geom, theta, h=1e-6):
    """Central finite differences of forward_kin, the independent oracle."""
    cols = []
    for i in range(3):
        tp = np.array(theta, dtype=float)
        tm = tp.copy()
        tp[i] += h
        tm[i] -= h
        cols.append((forward_kin(geom, tp) - forward_kin(geom, tm)) / (2.0 * h))
    return np.column_stack(cols)


class TestForwardKin:
    def test_symmetric_angles_on_axis(self, geom):
        for th in (0.2, 0.5, 0.9):
            p = forward_kin(geom, [th, th, th])
            assert abs(p[0]) < 1e-10 and abs(p[1]) < 1e-10
            assert p[2] < 0.0

    def test_roundtrip_through_ik(self, geom, rng):
        for _ in range(200):
            p = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(-0.20, -0.12)])
            theta = inverse_kin(geom, p)
            np.testing.assert_allclose(forward_kin(geom, theta), p, atol=1e-9)

    def test_infeasible_geometry(self):
        # forearm long enough to construct but far too short to close the loop
        geom = DeltaGeometry(forearm_len=0.05)
        with pytest.raises(NoIntersection):
            forward_kin(geom, [0.0, 0.0, 0.0])


class TestInverseKin:
    def test_central_point_equal_angles(self, geom):
        theta = inverse_kin(geom, [0.0, 0.0, -0.16])
        assert np.ptp(theta) < 1e-12

    def test_unreachable(self, geom):
        with pytest.raises(Unreachable):
            inverse_kin(geom, [1.0, 0.0, -0.1])

    def test_out_of_limits(self):
        # a long forearm makes shallow central points need theta < -30 deg
        geom = DeltaGeometry(forearm_len=0.19)
        with pytest.raises(OutOfLimits):
            inverse_kin(geom, [0.0, 0.0, -0.12])

    def test_ik_of_fk_identity(self, geom, rng):
        for _ in range(100):
            p = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(-0.20, -0.12)])
            theta = inverse_kin(geom, p)
            theta2 = inverse_kin(geom, forward_kin(geom, theta))
            np.testing.assert_allclose(theta2, theta, atol=1e-9)


class TestJacobian:
    def test_matches_finite_differences(self, geom, rng):
        for _ in range(30):
            p = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(-0.20, -0.12)])
            theta = inverse_kin(geom, p)
            j = jacobian(geom, theta)
            j_fd = fd_jacobian(geom, theta)
            err = np.abs(j - j_fd).max() / np.abs(j_fd).max()
            assert err < 1e-5

    def test_symmetric_pose_vertical(self, geom):
        theta = inverse_kin(geom, [0.0, 0.0, -0.16])
        j = jacobian(geom, theta)
        v = j @ np.ones(3)
        assert abs(v[0]) < 1e-10 and abs(v[1]) < 1e-10
        assert abs(v[2]) > 1e-3

    def test_planar_configuration_singular(self):
        # forearm = base - platform + upper puts the platform in the base
        # plane at theta = 0: all forearms horizontal, no vertical authority
        geom = DeltaGeometry(base_radius=0.06, platform_radius=0.03,
                             upper_arm_len=0.08, forearm_len=0.11)
        with pytest.raises(Singular):
            jacobian(geom, [0.0, 0.0, 0.0])


class TestJointCommand:
    def test_at_target_at_rest(self, geom):
        p = np.array([0.0, 0.0, -0.16])
        theta = inverse_kin(geom, p)
        _, rate = joint_command(geom, p, np.zeros(3),
                                JointState(theta, np.zeros(3)),
                                np.array([20.0, 20.0, 20.0]))
        np.testing.assert_allclose(rate, np.zeros(3), atol=1e-9)

    def test_proportional_gain_arithmetic(self, geom):
        p = np.array([0.0, 0.0, -0.16])
        theta = inverse_kin(geom, p)
        off = theta.copy()
        off[0] -= 0.01
        _, rate = joint_command(geom, p, np.zeros(3),
                                JointState(off, np.zeros(3)),
                                np.array([20.0, 20.0, 20.0]))
        assert rate[0] == pytest.approx(0.2, rel=1e-9)
        np.testing.assert_allclose(rate[1:], np.zeros(2), atol=1e-12)

    def test_vertical_feedforward_symmetric(self, geom):
        p = np.array([0.0, 0.0, -0.16])
        theta = inverse_kin(geom, p)
        _, rate = joint_command(geom, p, np.array([0.0, 0.0, -0.05]),
                                JointState(theta, np.zeros(3)),
                                np.array([20.0, 20.0, 20.0]))
        assert np.ptp(rate) < 1e-10

    def test_propagates_unreachable(self, geom):
        theta = inverse_kin(geom, [0.0, 0.0, -0.16])
        with pytest.raises(Unreachable):
            joint_command(geom, np.array([1.0, 0.0, -0.1]), np.zeros(3),
                          JointState(theta, np.zeros(3)), np.full(3, 20.0))


class TestServo:
    def test_rate_limit_applies(self, geom):
        st = JointState(np.zeros(3), np.zeros(3))
        out = servo_step(geom, st, np.array([100.0, -100.0, 1.0]), 0.01,
                         rate_limit=6.0)
        np.testing.assert_allclose(out.theta_dot, [6.0, -6.0, 1.0])
        np.testing.assert_allclose(out.theta, [0.06, -0.06, 0.01])

    def test_limits_clamp(self, geom):
        lo, hi = geom.joint_limits
        st = JointState(np.full(3, hi), np.zeros(3))
        out = servo_step(geom, st, np.full(3, 5.0), 0.1)
        assert np.all(out.theta <= hi + 1e-12)


class TestWorkspaceMonotone:
    def test_enlarging_forearm_keeps_points(self):
        lengths = [0.16, 0.175, 0.19]
        xs = np.linspace(-0.05, 0.05, 5)
        zs = np.linspace(-0.21, -0.15, 4)
        reach = []
        for lf in lengths:
            geom = DeltaGeometry(forearm_len=lf)
            ok = set()
            for x in xs:
                for y in xs:
                    for z in zs:
                        try:
                            inverse_kin(geom, [x, y, z])
                            ok.add((x, y, z))
                        except (Unreachable, OutOfLimits):
                            pass
            reach.append(ok)
        assert reach[0] <= reach[1] <= reach[2]
        assert len(reach[0]) > 0


class TestGeometryValidation:
    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            DeltaGeometry(forearm_len=0.02)  # < |base - platform| + margin
        with pytest.raises(ValueError):
            DeltaGeometry(upper_arm_len=0.0)
