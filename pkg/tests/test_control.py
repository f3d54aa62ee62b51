import numpy as np
import pytest
from numpy.testing import assert_allclose

from ilvs import camera, control, se3
from ilvs.camera import FeatureVector
from ilvs.se3 import Pose, Twist


def features_at(xy, depths):
    xy = np.asarray(xy, dtype=float)
    uv = np.zeros(8)
    return FeatureVector(xy=xy, depths=np.asarray(depths, dtype=float),
                         pixels=uv, out_of_view=False)


class TestInteractionMatrix:
    def test_centered_point_rows(self):
        z = 0.09116
        feats = features_at(np.zeros(8), np.full(4, z))
        L = control.interaction_matrix(feats)
        inv_z = 1.0 / z
        assert_allclose(L[0], [-inv_z, 0.0, 0.0, 0.0, -1.0, 0.0])
        assert_allclose(L[1], [0.0, -inv_z, 0.0, 1.0, 0.0, 0.0])
        assert L[0, 0] == pytest.approx(-10.9697, abs=1e-4)

    def test_structural_zeros(self, rng):
        for _ in range(5):
            feats = features_at(rng.normal(scale=0.3, size=8), rng.uniform(0.05, 0.5, size=4))
            L = control.interaction_matrix(feats)
            for i in range(4):
                assert L[2 * i, 1] == 0.0
                assert L[2 * i + 1, 0] == 0.0

    def test_nonpositive_depth_rejected(self):
        feats = features_at(np.zeros(8), [0.1, 0.1, 0.0, 0.1])
        with pytest.raises(ValueError):
            control.interaction_matrix(feats)

    def test_finite_difference_oracle(self, scenario, rng):
        # every row must match central differences of the projection under
        # camera twists
        h = 1e-6
        basis = np.eye(6)
        goal = camera.goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
        for _ in range(20):
            cam = Pose(goal.rotation @ se3.rotation_exp(rng.normal(scale=0.1, size=3)),
                       goal.translation + rng.normal(scale=0.02, size=3) * [1, 1, 1]
                       + [0, 0, 0.03])
            feats = camera.observe(cam, scenario.target_pose0, scenario)
            L = control.interaction_matrix(feats)
            fd = np.empty((8, 6))
            for j in range(6):
                tw = Twist.from_array(basis[j])
                plus = camera.observe(se3.integrate_twist(cam, tw, h),
                                      scenario.target_pose0, scenario)
                minus = camera.observe(
                    se3.integrate_twist(cam, Twist.from_array(-basis[j]), h),
                    scenario.target_pose0, scenario)
                fd[:, j] = (plus.xy - minus.xy) / (2.0 * h)
            assert np.max(np.abs(L - fd)) <= 1e-6


class TestPseudoinverse:
    def test_identity(self):
        assert_allclose(control.pseudoinverse(np.eye(6)), np.eye(6), atol=1e-12)

    def test_zero_matrix(self):
        assert_allclose(control.pseudoinverse(np.zeros((8, 6))), np.zeros((6, 8)))

    def test_full_rank_against_normal_equations(self, rng):
        # oracle: (M^T M)^-1 M^T
        for _ in range(10):
            m = rng.normal(size=(8, 6))
            lp = control.pseudoinverse(m)
            oracle = np.linalg.solve(m.T @ m, m.T)
            assert np.max(np.abs(lp - oracle)) <= 1e-8
            assert np.max(np.abs(lp @ m - np.eye(6))) <= 1e-8

    def test_penrose_conditions(self, rng):
        m = rng.normal(size=(8, 6))
        m[:, 5] = m[:, 4]  # rank deficient
        p = control.pseudoinverse(m)
        assert np.max(np.abs(m @ p @ m - m)) <= 1e-8
        assert np.max(np.abs(p @ m @ p - p)) <= 1e-8
        assert np.max(np.abs((m @ p).T - m @ p)) <= 1e-8
        assert np.max(np.abs((p @ m).T - p @ m)) <= 1e-8


class TestGoalPinv:
    def test_left_inverse_at_goal(self, scenario, lpinv):
        L = control.interaction_matrix(camera.desired_features(scenario))
        assert np.max(np.abs(lpinv @ L - np.eye(6))) <= 1e-6

    def test_shape(self, lpinv):
        assert lpinv.shape == (6, 8)

    def test_depth_scaling(self, scenario):
        from dataclasses import replace
        L1 = control.interaction_matrix(camera.desired_features(scenario))
        s2 = replace(scenario, desired_depth=2 * scenario.desired_depth,
                     marker_side=2 * scenario.marker_side)  # same normalized corners
        L2 = control.interaction_matrix(camera.desired_features(s2))
        assert_allclose(L2[:, :3], L1[:, :3] / 2.0, atol=1e-12)
        assert_allclose(L2[:, 3:], L1[:, 3:], atol=1e-12)


class TestVsControl:
    def test_zero_error(self, lpinv):
        v = control.vs_control(np.zeros(8), 2.0, lpinv)
        assert_allclose(v.as_array(), np.zeros(6))

    def test_definition(self, lpinv, rng):
        e = rng.normal(size=8)
        v = control.vs_control(e, 2.0, lpinv)
        assert_allclose(v.as_array(), -2.0 * (lpinv @ e), rtol=0, atol=0)

    def test_linearity(self, lpinv, rng):
        e = rng.normal(size=8)
        v1 = control.vs_control(e, 1.5, lpinv).as_array()
        v2 = control.vs_control(2.0 * e, 1.5, lpinv).as_array()
        assert_allclose(v2, 2.0 * v1, rtol=1e-12)

    def test_pure_function(self, lpinv, rng):
        e = rng.normal(size=8)
        a = control.vs_control(e, 2.0, lpinv).as_array()
        b = control.vs_control(e, 2.0, lpinv).as_array()
        assert np.array_equal(a, b)

    def test_equilibrium_iff_error_in_nullspace(self, lpinv, rng):
        e = rng.normal(size=8)
        v = control.vs_control(e, 2.0, lpinv)
        if np.linalg.norm(lpinv @ e) > 0:
            assert np.linalg.norm(v.as_array()) > 0
        # a vector in the nullspace of the pseudoinverse commands zero twist
        _, _, vt = np.linalg.svd(lpinv)
        null = vt[-1]
        assert np.linalg.norm(lpinv @ null) <= 1e-12
        assert_allclose(control.vs_control(null, 2.0, lpinv).as_array(),
                        np.zeros(6), atol=1e-12)


class TestTargetFeatureRate:
    def test_static_target(self, desired):
        rate = control.target_feature_rate(desired, Twist.zero())
        assert_allclose(rate, np.zeros(8))

    def test_centered_point_value(self):
        z = 0.09116
        feats = features_at(np.zeros(8), np.full(4, z))
        rate = control.target_feature_rate(feats, Twist([0.1, 0.0, 0.0], [0.0, 0.0, 0.0]))
        assert_allclose(rate[0::2], 0.1 / z)
        assert_allclose(rate[1::2], 0.0)
        assert rate[0] == pytest.approx(1.0970, abs=1e-4)

    def test_depth_motion(self):
        feats = features_at([0.2, -0.1] * 4, np.full(4, 0.1))
        rate = control.target_feature_rate(feats, Twist([0.0, 0.0, 0.05], [0.0, 0.0, 0.0]))
        assert_allclose(rate[0], -0.2 * 0.05 / 0.1)
        assert_allclose(rate[1], 0.1 * 0.05 / 0.1)


class TestTrackingControl:
    def test_reduces_to_vs(self, lpinv, rng):
        e = rng.normal(size=8)
        a = control.tracking_control(e, 2.0, lpinv, np.zeros(8)).as_array()
        b = control.vs_control(e, 2.0, lpinv).as_array()
        assert np.array_equal(a, b)

    def test_pure_feedforward(self, lpinv, rng):
        c = rng.normal(size=8)
        v = control.tracking_control(np.zeros(8), 2.0, lpinv, c)
        assert_allclose(v.as_array(), -(lpinv @ c), rtol=0, atol=0)

    def test_exponential_decay_rate(self, scenario):
        # static target, per-step exact pseudoinverse: ||e|| must decay at
        # the control gain (log-slope within 10%)
        gain = 2.0
        dt = scenario.dt
        cam = camera.goal_camera_pose(scenario.target_pose0, scenario.desired_depth)
        cam = cam.translated([0.004, -0.003, 0.005])
        norms = []
        desired_xy = camera.desired_features(scenario).xy
        for _ in range(150):
            feats = camera.observe(cam, scenario.target_pose0, scenario)
            e = feats.xy - desired_xy
            norms.append(np.linalg.norm(e))
            lp = control.pseudoinverse(control.interaction_matrix(feats))
            v = control.tracking_control(e, gain, lp, np.zeros(8))
            cam = se3.integrate_twist(cam, v, dt)
        t = np.arange(len(norms)) * dt
        slope = np.polyfit(t, np.log(norms), 1)[0]
        assert slope == pytest.approx(-gain, rel=0.10)


class TestVanishingGain:
    def test_unity_before_cut(self):
        assert control.vanishing_gain(0.0, 5.0, 1.0) == 1.0
        assert control.vanishing_gain(5.0, 5.0, 1.0) == 1.0

    def test_vanishes(self):
        assert control.vanishing_gain(1e6, 5.0, 1.0) < 1e-300

    def test_one_time_constant(self):
        assert control.vanishing_gain(6.0, 5.0, 1.0) == pytest.approx(np.exp(-1.0))
        assert control.vanishing_gain(6.0, 5.0, 1.0) == pytest.approx(0.3679, abs=1e-4)

    def test_monotone_non_increasing(self):
        ts = np.linspace(0.0, 20.0, 400)
        hs = [control.vanishing_gain(t, 5.0, 1.3) for t in ts]
        assert all(b <= a for a, b in zip(hs, hs[1:]))
        assert all(0.0 <= h <= 1.0 for h in hs)

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ValueError):
            control.vanishing_gain(1.0, 5.0, 0.0)
        with pytest.raises(ValueError):
            control.vanishing_gain(1.0, 5.0, -1.0)


class TestReshapedControl:
    def test_suppressed_equals_vs(self, lpinv, rng):
        e = rng.normal(size=8)
        rho = Twist.from_array(rng.normal(size=6))
        a = control.reshaped_control(e, 2.0, lpinv, rho, 0.0).as_array()
        assert_allclose(a, control.vs_control(e, 2.0, lpinv).as_array(), atol=1e-16)

    def test_full_equals_tracking(self, lpinv, rng):
        e = rng.normal(size=8)
        de = rng.normal(size=8)
        rho = Twist.from_array(-(lpinv @ de))
        a = control.reshaped_control(e, 2.0, lpinv, rho, 1.0).as_array()
        b = control.tracking_control(e, 2.0, lpinv, de).as_array()
        assert_allclose(a, b, rtol=1e-15, atol=1e-18)

    def test_midpoint(self, lpinv, rng):
        e = rng.normal(size=8)
        rho = Twist.from_array(rng.normal(size=6))
        lo = control.reshaped_control(e, 2.0, lpinv, rho, 0.0).as_array()
        hi = control.reshaped_control(e, 2.0, lpinv, rho, 1.0).as_array()
        mid = control.reshaped_control(e, 2.0, lpinv, rho, 0.5).as_array()
        assert_allclose(mid, 0.5 * (lo + hi), rtol=1e-12, atol=1e-18)


class ZeroModel:
    def predict_compensation(self, eps):
        return np.zeros(6)


class TestIlvsControl:
    def test_zero_model_reduces_to_vs(self, lpinv, rng):
        e = rng.normal(size=8)
        a = control.ilvs_control(e, 2.0, lpinv, ZeroModel()).as_array()
        b = control.vs_control(e, 2.0, lpinv).as_array()
        assert_allclose(a, b, atol=1e-16)

    def test_matches_demonstration_velocity(self, scenario, lpinv, model, suite):
        # query the learned law at demonstrated states: the commanded linear
        # velocity must stay close to what the oracle demonstrated
        demo = suite.demonstrations[0]
        worst = 0.0
        for n in range(0, len(demo), 50):
            v = control.ilvs_control(demo.errors[n], suite.control_gain, lpinv, model)
            worst = max(worst, np.linalg.norm(v.linear - demo.twists[n, :3]))
        assert worst <= 0.08
