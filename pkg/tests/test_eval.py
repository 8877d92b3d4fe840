import numpy as np
import pytest
from scipy.spatial.transform import Rotation as Rsp

from contactrecon.costs import project
from contactrecon.eval import (SCENARIOS, THRESHOLDS_PX, DegenerateError, SyntheticError, contact_motion_error,
                               contact_wrenches, endpoint_accuracy, evaluate, force_error,
                               generate_synthetic, mpjpe, mpjpe_per_frame, perturbed_init, rigid_align,
                               solution_markers)


def svd_align(S, D):
    """Textbook orthogonal Procrustes, for comparison."""
    cs, cd = S.mean(0), D.mean(0)
    U, _, Vt = np.linalg.svd((D - cd).T @ (S - cs))
    R = U @ np.diag([1, 1, np.linalg.det(U @ Vt)]) @ Vt
    return R, cd - R @ cs


class TestMetrics:
    def test_rigid_align_matches_svd(self, rng):
        for _ in range(20):
            S = rng.normal(size=(18, 3))
            D = S @ Rsp.random(random_state=rng.integers(1 << 31)).as_matrix().T + rng.normal(size=3)
            D += rng.normal(scale=0.05, size=D.shape)
            P = rigid_align(S, D)
            R, t = svd_align(S, D)
            np.testing.assert_allclose(P.rotation.matrix(), R, atol=1e-10)
            np.testing.assert_allclose(P.translation, t, atol=1e-10)

    def test_reflection_excluded(self, rng):
        S = rng.normal(size=(10, 3))
        D = S * [-1, 1, 1]
        assert np.linalg.det(rigid_align(S, D).rotation.matrix()) == pytest.approx(1.0)

    def test_mpjpe_rigid_invariance(self, rng):
        X = rng.normal(size=(5, 18, 3))
        Y = np.array([x @ Rsp.random(random_state=i).as_matrix().T + rng.normal(size=3) for i, x in enumerate(X)])
        assert mpjpe(Y, X) < 1e-9

    def test_mpjpe_known_offset(self, rng):
        X = rng.normal(size=(1, 18, 3))
        Y = X.copy()
        Y[0, 0] += [0.018, 0, 0]
        # mean error <= aligned RMS <= unaligned RMS = 18 mm / sqrt(18)
        assert 0 < mpjpe(Y, X) <= 18 / np.sqrt(18) + 1e-9

    def test_mpjpe_units_and_shape(self, rng):
        X = rng.normal(size=(3, 18, 3))
        assert mpjpe_per_frame(X, X).shape == (3,)
        with pytest.raises(ValueError):
            mpjpe(X, X[:, :5])

    def test_degenerate(self):
        with pytest.raises(DegenerateError):
            rigid_align(np.zeros((2, 3)), np.zeros((2, 3)))
        line = np.outer(np.arange(5.0), [1, 0, 0])
        with pytest.raises(DegenerateError):
            rigid_align(line, line)

    def test_endpoint_thresholds_monotone(self, rng):
        A = rng.uniform(0, 600, size=(200, 2))
        E = A + rng.normal(scale=60, size=A.shape)
        acc = endpoint_accuracy(E, A, (600, 400))
        assert list(acc) == sorted(acc) and 0 < acc[0] < acc[-1] <= 1
        assert endpoint_accuracy(A, A) == (1.0, 1.0, 1.0)
        assert THRESHOLDS_PX == (25, 50, 100)

    def test_endpoint_resolution_scaling(self):
        # 60 px at 1200 wide is 30 px at the reference width
        acc = endpoint_accuracy(np.array([[60.0, 0.0]]), np.zeros((1, 2)), (1200, 800))
        assert acc == (0.0, 1.0, 1.0)

    def test_force_error(self):
        E = np.zeros((2, 6))
        R = np.array([[3, 4, 0, 0, 0, 1], [0, 0, 0, 0, 0, 0.0]])
        assert force_error(E, R) == (2.5, 0.5)
        assert force_error(E, R, [True, False]) == (5.0, 1.0)
        assert force_error(E, R, [False, False]) == (0.0, 0.0)


@pytest.fixture(scope="module")
def scenes(lift_scene):
    out = {"lift-object": lift_scene}
    for name in ("static-stand", "swing-object", "walk-two-steps"):
        out[name] = generate_synthetic(name, seed=0)
    return out


class TestSynthetic:
    @pytest.mark.parametrize("name", SCENARIOS)
    def test_contacts_exact(self, scenes, name):
        meas, truth = scenes[name]
        assert truth.n_frames == meas.n_frames
        assert contact_motion_error(truth) < 1e-9

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_ground_forces_in_cone(self, scenes, name):
        _, truth = scenes[name]
        for c in truth.contacts:
            if c.target != "ground":
                continue
            F = c.force_world[c.has_force, :3]
            n = truth.ground[:3]
            normal = F @ n
            tangential = np.linalg.norm(F - np.outer(normal, n), axis=1)
            assert np.all(normal >= -1e-9)
            assert np.all(tangential <= np.tan(truth.mu) * normal + 1e-6)

    @pytest.mark.parametrize("name", SCENARIOS)
    def test_markers_in_image(self, scenes, name):
        meas, _ = scenes[name]
        w, h = meas.image_size
        assert meas.joints2d[..., 0].min() > 0 and meas.joints2d[..., 0].max() < w
        assert meas.joints2d[..., 1].min() > 0 and meas.joints2d[..., 1].max() < h

    def test_projection_consistent(self, human, scenes):
        meas, truth = scenes["swing-object"]
        P = solution_markers(human, truth)
        for t in (0, 50, 99):
            np.testing.assert_allclose([project(meas.camera, p) for p in P[t]], meas.joints2d[t], atol=1e-9)

    def test_static_total_force_is_weight(self, human, scenes):
        _, truth = scenes["static-stand"]
        W = contact_wrenches(human, truth)
        total = sum(w for w, m in W.values())
        weight = human.total_mass * 9.81
        np.testing.assert_allclose(total[1:, 1], weight, rtol=1e-6)
        np.testing.assert_allclose(total[1:, [0, 2]], 0, atol=1e-6 * weight)

    def test_walk_has_single_support(self, scenes):
        meas, _ = scenes["walk-two-steps"]
        ankles = np.array([v for k, v in meas.contacts.items() if k.endswith("ankle")])
        assert (ankles.sum(0) == 1).any() and (ankles.sum(0) == 2).any()

    def test_noise_deterministic(self):
        a, _ = generate_synthetic("static-stand", noise_px=2.0, seed=3, n_frames=5)
        b, _ = generate_synthetic("static-stand", noise_px=2.0, seed=3, n_frames=5)
        c, _ = generate_synthetic("static-stand", noise_px=0.0, seed=3, n_frames=5)
        np.testing.assert_array_equal(a.joints2d, b.joints2d)
        assert np.std(a.joints2d - c.joints2d) == pytest.approx(2.0, rel=0.2)

    def test_unknown_scenario(self):
        with pytest.raises(SyntheticError, match="unknown scenario"):
            generate_synthetic("juggle")
        with pytest.raises(SyntheticError):
            generate_synthetic("static-stand", n_frames=1)


class TestEvaluate:
    def test_truth_against_itself(self, human, lift_scene):
        meas, truth = lift_scene
        rep = evaluate(human, truth, truth, meas.camera, meas.image_size)
        assert rep["mpjpe_mm"] < 1e-6
        assert rep["force_linear_relative"] == 0.0
        assert rep["endpoint_3d_error_mm"] == 0.0
        assert rep["endpoint_accuracy"] == {"25px": 1.0, "50px": 1.0, "100px": 1.0}

    def test_perturbed_init_error(self, human, lift_scene):
        _, truth = lift_scene
        from dataclasses import replace
        est = replace(truth, q_h=perturbed_init(human, truth, seed=0))
        rep = evaluate(human, est, truth)
        assert 5 < rep["mpjpe_mm"] < 200
        assert len(rep["mpjpe_per_frame_mm"]) == truth.n_frames
