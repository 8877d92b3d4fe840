import numpy as np
import pytest

from contactrecon.contact import (GROUND, OBJECT, ContactError, ContactSchedule, GroundPlane,
                                  ankle_force_from_lambdas, build_contact_points, clamp_report_contact_range,
                                  cone_generators_3d, cone_generators_6d, contact_motion_residual,
                                  vertex_force)
from contactrecon.dynamics import forward_kinematics
from contactrecon.model import random_configuration
from contactrecon.spatial import ForceVector, Placement, Rotation, transform_force


class TestGroundPlane:
    def test_normalizes(self):
        g = GroundPlane([0, 2, 0], 0.5)
        np.testing.assert_allclose(g.normal, [0, 1, 0])

    def test_rejects_bad_input(self):
        with pytest.raises(ContactError):
            GroundPlane([0, 0, 0], 0.0)
        with pytest.raises(ContactError):
            GroundPlane([0, 1, 0], 0.0, mu=-0.1)

    @pytest.mark.parametrize("n", [[0, 1, 0], [0.1, 1, -0.2], [1, 0, 0], [-1, 0, 0]])
    def test_frame(self, n):
        g = GroundPlane(n, 0.3)
        R = g.frame()
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(R[:, 1], -g.normal, atol=1e-15)

    def test_point_lies_on_plane(self, rng):
        g = GroundPlane(rng.normal(size=3), 0.7)
        for _ in range(10):
            c = rng.normal(size=2)
            p = g.point(c)
            assert g.normal @ p == pytest.approx(g.offset)
            np.testing.assert_allclose(g.coordinates(p), c, atol=1e-12)


class TestCone:
    def test_frictionless(self):
        np.testing.assert_array_equal(cone_generators_3d(0.0), np.tile([0.0, -1.0, 0.0], (4, 1)))

    def test_quarter_pi(self):
        h = np.sqrt(2) / 2
        np.testing.assert_allclose(cone_generators_3d(np.pi / 4)[0], [h, -h, 0], atol=1e-16)

    @pytest.mark.parametrize("mu", [0.05, 0.3, np.pi / 6, 0.8, 1.0])
    def test_generators_on_boundary(self, mu):
        for g in cone_generators_3d(mu):
            assert np.hypot(g[0], g[2]) == pytest.approx(-g[1] * np.tan(mu), abs=1e-15)

    def test_negative_mu(self):
        with pytest.raises(ContactError):
            cone_generators_3d(-0.01)

    def test_6d_zero_lever(self):
        np.testing.assert_array_equal(cone_generators_6d(np.zeros(3), 0.5)[:, 3:], 0.0)

    def test_6d_unit_lever(self):
        np.testing.assert_allclose(cone_generators_6d([1, 0, 0], 0.0), np.tile([0, -1, 0, 0, 0, -1], (4, 1)))

    def test_6d_matches_force_transform(self, rng):
        for _ in range(20):
            p, mu = rng.normal(size=3), rng.uniform(0, 1)
            G6 = cone_generators_6d(p, mu)
            P = Placement(Rotation.identity(), p)
            for g, row in zip(cone_generators_3d(mu), G6):
                f = transform_force(P, ForceVector(g, np.zeros(3)))
                np.testing.assert_allclose(row, np.concatenate([f.linear, f.angular]), atol=1e-14)


class TestAnkleForce:
    def sole(self, human):
        return human.sole_vertices[human.joint_index("l_ankle")]

    def test_zero(self, human):
        f = ankle_force_from_lambdas(np.zeros((4, 4)), self.sole(human), 0.8)
        np.testing.assert_array_equal(np.concatenate([f.linear, f.angular]), 0.0)

    def test_symmetric_no_vertical_moment(self, human):
        lam = np.ones((4, 4))
        f = ankle_force_from_lambdas(lam, self.sole(human), 0.8)
        assert abs(f.angular[1]) < 1e-14
        assert f.linear[1] == pytest.approx(-16 * np.cos(0.8))

    def test_negative_rejected(self, human):
        lam = np.zeros((4, 4))
        lam[2, 1] = -1e-3
        with pytest.raises(ContactError, match="nonnegative"):
            ankle_force_from_lambdas(lam, self.sole(human), 0.8)

    def test_vertex_forces_in_cone(self, rng):
        for _ in range(1000):
            mu = rng.uniform(1e-6, 1.0)
            f = vertex_force(rng.exponential(size=4), mu)
            assert np.hypot(f[0], f[2]) <= -f[1] * np.tan(mu) + 1e-12

    def test_superposition(self, human, rng):
        pts = self.sole(human)
        a, b = rng.random((4, 4)), rng.random((4, 4))
        fa, fb = (ankle_force_from_lambdas(x, pts, 0.6) for x in (a, b))
        fab = ankle_force_from_lambdas(2 * a + 3 * b, pts, 0.6)
        np.testing.assert_allclose(fab.linear, 2 * fa.linear + 3 * fb.linear, atol=1e-12)
        np.testing.assert_allclose(fab.angular, 2 * fa.angular + 3 * fb.angular, atol=1e-12)


def schedule(human, decl, flags):
    pts = build_contact_points(human, decl)
    return ContactSchedule({human.joint_index(n): f for (n, _), f in zip(decl, flags)}, pts)


class TestContactPoints:
    def test_sole_vertices_expand(self, human):
        pts = build_contact_points(human, [("l_ankle", GROUND), ("r_hand", OBJECT), ("l_hand", OBJECT)])
        assert [p.vertex for p in pts] == [0, 1, 2, 3, None, None]
        assert [p.slot for p in pts[4:]] == [0, 1]
        assert [p.index for p in pts] == [0, 1, 2, 3, 0, 1]

    def test_unknown_target(self, human):
        with pytest.raises(ContactError, match="unknown contact target"):
            build_contact_points(human, [("l_hand", "wall")])

    def test_flag_lengths(self, human):
        with pytest.raises(ContactError, match="different lengths"):
            schedule(human, [("l_ankle", GROUND), ("r_ankle", GROUND)], [[1, 1], [1, 1, 0]])

    def test_active_points(self, human):
        s = schedule(human, [("l_ankle", GROUND), ("r_hand", OBJECT)], [[1, 0, 1], [0, 1, 1]])
        assert s.n_frames == 3 and s.n_ground == 4 and s.n_object == 1
        assert [len(s.active(t)) for t in range(3)] == [4, 1, 5]
        # every point of an active joint is active
        assert {p.joint for p in s.active(0)} == {human.joint_index("l_ankle")}


class TestContactMotion:
    def hand_on_handle(self, human, stick, rng, c=0.35):
        q = random_configuration(human, rng, 0.5)
        j = human.joint_index("r_hand")
        hand = forward_kinematics(human, q).placements[j].translation
        R = Rotation(rng.normal(size=4))
        qo = np.concatenate([hand - R.apply([c, 0, 0]), R.quat])
        return q, qo, j

    def test_hand_on_handle_zero(self, human, stick, rng):
        q, qo, _ = self.hand_on_handle(human, stick, rng)
        s = schedule(human, [("r_hand", OBJECT), ("l_hand", OBJECT)], [[1], [0]])
        g = GroundPlane([0, 1, 0], 0.0)
        r = contact_motion_residual(human, stick, q, qo, np.array([0.35, 0.9]), np.zeros((0, 2)), g, s, 0)
        assert r.shape == (3,)
        np.testing.assert_allclose(r, 0.0, atol=1e-12)

    def test_displaced_hand(self, human, stick, rng):
        q, qo, _ = self.hand_on_handle(human, stick, rng)
        qo[:3] -= [0.1, 0.0, 0.0]
        s = schedule(human, [("r_hand", OBJECT), ("l_hand", OBJECT)], [[1], [0]])
        g = GroundPlane([0, 1, 0], 0.0)
        r = contact_motion_residual(human, stick, q, qo, np.array([0.35, 0.9]), np.zeros((0, 2)), g, s, 0)
        assert np.linalg.norm(r) == pytest.approx(0.1)

    def test_inactive_is_empty(self, human, stick, rng):
        s = schedule(human, [("l_ankle", GROUND), ("r_hand", OBJECT)], [[0, 0], [0, 0]])
        q = random_configuration(human, rng)
        r = contact_motion_residual(human, stick, q, stick.neutral()[:7], np.zeros(1), np.zeros((4, 2)),
                                    GroundPlane([0, 1, 0], 0.0), s, 1)
        assert r.size == 0

    def test_sole_vertices_on_ground(self, human, rng):
        q = random_configuration(human, rng, 0.3)
        j = human.joint_index("l_ankle")
        fr = forward_kinematics(human, q, [(j, v) for v in human.sole_vertices[j]])
        g = GroundPlane([0, 1, 0], 0.0)
        c = np.array([g.coordinates(p) for p in fr.contact_points])
        s = schedule(human, [("l_ankle", GROUND)], [[1]])
        r = contact_motion_residual(human, None, q, None, None, c, g, s, 0).reshape(4, 3)
        # in-plane components vanish, the rest is the height above the plane
        np.testing.assert_allclose(r[:, [0, 2]], 0.0, atol=1e-12)
        np.testing.assert_allclose(r[:, 1], fr.contact_points[:, 1], atol=1e-12)

    def test_missing_slot(self, human, rng):
        from contactrecon.model import build_object_model
        s = schedule(human, [("r_hand", OBJECT), ("l_hand", OBJECT)], [[1], [1]])
        with pytest.raises(ContactError, match="slot"):
            contact_motion_residual(human, build_object_model(contact_slots=1), human.neutral(),
                                    np.array([0, 0, 0, 1.0, 0, 0, 0]), np.zeros(1), np.zeros((0, 2)),
                                    GroundPlane([0, 1, 0], 0.0), s, 0)


class TestRangeReport:
    def test_inside(self):
        assert clamp_report_contact_range(0.5, 1.0) == []

    def test_below(self):
        [(i, v)] = clamp_report_contact_range(-0.01, 1.0)
        assert i == 0 and v == pytest.approx(0.01)

    def test_above(self):
        [(i, v)] = clamp_report_contact_range([0.2, 1.05], 1.0)
        assert i == 1 and v == pytest.approx(0.05)
