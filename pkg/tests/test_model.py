import copy

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as SciRot

from contactrecon.model import (JointKind, ModelError, build_human_model, build_object_model,
                                default_human_spec, difference, integrate, marker_positions,
                                random_configuration)


def naive_world_frames(model, q):
    """Chain of 4x4 joint placements built with scipy rotations."""
    H = []
    for i, j in enumerate(model.joints):
        a = model.idx_q[i]
        fixed = np.eye(4)
        fixed[:3, :3] = SciRot.from_quat(np.roll(j.rotation, -1)).as_matrix()
        fixed[:3, 3] = j.translation
        motion = np.eye(4)
        if j.kind == JointKind.FREE_FLOATING:
            motion[:3, :3] = SciRot.from_quat(np.roll(q[a + 3:a + 7], -1)).as_matrix()
            motion[:3, 3] = q[a:a + 3]
        elif j.kind == JointKind.SPHERICAL:
            motion[:3, :3] = SciRot.from_quat(np.roll(q[a:a + 4], -1)).as_matrix()
        else:
            motion[:3, 3] = np.asarray(j.axis) * q[a]
        local = fixed @ motion
        H.append(local if j.parent < 0 else H[j.parent] @ local)
    return H


class TestHumanModel:
    def test_dimensions(self, human):
        assert (human.nq, human.nv, human.njoints, len(human.markers)) == (99, 75, 24, 18)

    def test_total_mass(self, human):
        assert human.total_mass == pytest.approx(74.6, abs=1e-9)

    def test_custom_mass_is_respected(self):
        spec = copy.deepcopy(default_human_spec())
        spec["total_mass"] = 60.0
        assert build_human_model(spec).total_mass == pytest.approx(60.0)

    def test_parent_after_child_rejected(self):
        spec = copy.deepcopy(default_human_spec())
        spec["joints"][3]["parent"] = spec["joints"][5]["name"]
        with pytest.raises(ModelError, match="must precede"):
            build_human_model(spec)

    def test_missing_parent_rejected(self):
        spec = copy.deepcopy(default_human_spec())
        spec["joints"][4]["parent"] = "no_such_joint"
        with pytest.raises(ModelError, match="missing parent"):
            build_human_model(spec)

    def test_two_roots_rejected(self):
        spec = copy.deepcopy(default_human_spec())
        spec["joints"][1]["parent"] = None
        with pytest.raises(ModelError, match="single root"):
            build_human_model(spec)

    def test_inertias_positive_definite(self, human):
        for link in human.links:
            assert np.all(np.linalg.eigvalsh(link.inertia) > 0)
            assert link.mass > 0

    def test_sole_rectangle(self, human):
        assert len(human.sole_vertices) == 2
        for verts in human.sole_vertices.values():
            v = np.asarray(verts)
            assert v.shape == (4, 3)
            extent = v.max(0) - v.min(0)
            assert sorted(extent[[0, 2]]) == pytest.approx([0.08, 0.2])
            np.testing.assert_allclose(v[:, 1], -0.08)


class TestObjectModel:
    def test_dimensions_with_two_slots(self, stick):
        assert (stick.nq, stick.nv) == (10, 9)

    def test_no_slots(self):
        m = build_object_model(contact_slots=0)
        assert (m.nq, m.nv) == (8, 7)

    @pytest.mark.parametrize("L", [0.0, -1.0])
    def test_degenerate_handle(self, L):
        with pytest.raises(ModelError, match="handle length"):
            build_object_model({"handle_length": L, "mass": 1.0, "com": [0, 0, 0],
                                "inertia": np.eye(3).tolist()})

    def test_contact_range_validation(self, stick):
        q = stick.neutral()
        q[7:] = [1.0, 0.5, 0.2]
        stick.validate(q)
        q[8] = 1.01
        with pytest.raises(ModelError, match="outside"):
            stick.validate(q)
        q[8] = -0.01
        with pytest.raises(ModelError, match="outside"):
            stick.validate(q)


class TestManifold:
    def test_zero_velocity(self, human, rng):
        q = random_configuration(human, rng)
        np.testing.assert_allclose(integrate(human, q, np.zeros(75), 0.3), q, atol=1e-15)
        np.testing.assert_allclose(difference(human, q, q), 0.0, atol=1e-12)

    def test_round_trip_random(self, human, stick, rng):
        for model in (human, stick):
            for _ in range(1000 if model is human else 200):
                q1 = random_configuration(model, rng)
                q2 = random_configuration(model, rng, scale=0.5)
                d = difference(model, q1, q2)
                np.testing.assert_allclose(integrate(model, q1, d, 1.0), q2, atol=1e-8)

    def test_integrate_then_difference(self, human, rng):
        q = random_configuration(human, rng)
        v = rng.normal(scale=0.3, size=75)
        dt = 0.5
        np.testing.assert_allclose(difference(human, q, integrate(human, q, v, dt)), v * dt, atol=1e-10)

    def test_unit_quaternions_preserved(self, human, rng):
        q = integrate(human, random_configuration(human, rng), rng.normal(size=75), 1.0)
        human.validate(q)

    def test_dimension_mismatch(self, human):
        with pytest.raises(ModelError, match="tangent"):
            integrate(human, human.neutral(), np.zeros(74))
        with pytest.raises(ModelError, match="configuration"):
            difference(human, human.neutral(), np.zeros(98))


class TestMarkers:
    def test_names(self, human):
        assert [m for m, _ in marker_positions(human, human.neutral())][:2] == ["nose", "neck"]

    def test_rest_posture(self, human):
        spec = default_human_spec()
        off = {j["name"]: np.asarray(j["offset"]) for j in spec["joints"]}
        parent = {j["name"]: j["parent"] for j in spec["joints"]}

        def rest(name):
            return off[name] + (rest(parent[name]) if parent[name] else 0.0)
        expected = {m["name"]: rest(m["joint"]) + np.asarray(m["offset"]) for m in spec["markers"]}
        for name, p in marker_positions(human, human.neutral()):
            np.testing.assert_allclose(p, expected[name], atol=1e-12)

    def test_base_translation(self, human, rng):
        q = random_configuration(human, rng)
        t = np.array([0.3, -0.2, 1.5])
        q2 = q.copy()
        q2[:3] += t
        for (_, a), (_, b) in zip(marker_positions(human, q), marker_positions(human, q2)):
            np.testing.assert_allclose(b - a, t, atol=1e-12)

    def test_matches_naive_chain(self, human, rng):
        for _ in range(20):
            q = random_configuration(human, rng)
            H = naive_world_frames(human, q)
            for m, (_, p) in zip(human.markers, marker_positions(human, q)):
                np.testing.assert_allclose(p, (H[m.joint] @ np.append(m.offset, 1.0))[:3], atol=1e-12)
