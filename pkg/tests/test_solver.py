import numpy as np
import pytest

from contactrecon.costs import project
from contactrecon.solver import (BlockSystem, DenseLeastSquares, PipelineConfig, SolverError, SolverOptions,
                                 State, StageProblem, levenberg_marquardt, object_base_for,
                                 object_orientation_inits, solve_block_tridiagonal, solve_pipeline,
                                 stage1_kinematics, stage2_forces, stage3_full)
from conftest import crop


def random_system(rng, sizes, nb):
    """Random SPD block-tridiagonal-plus-border system and its dense matrix."""
    n = sum(sizes)
    off = np.cumsum([0] + sizes)
    J = np.zeros((3 * n + nb, n + nb))
    row = 0
    for t, s in enumerate(sizes):
        cols = list(range(off[t], off[t + 1])) + (list(range(off[t - 1], off[t])) if t else [])
        cols += list(range(n, n + nb))
        J[row:row + 3 * s, cols] = rng.normal(size=(3 * s, len(cols)))
        row += 3 * s
    J[row:, n:] = rng.normal(size=(nb, nb))
    H = J.T @ J
    S = BlockSystem.zeros(sizes, nb)
    for t in range(len(sizes)):
        S.A[t] = H[off[t]:off[t + 1], off[t]:off[t + 1]]
        if t:
            S.B[t] = H[off[t]:off[t + 1], off[t - 1]:off[t]]
        S.C[t] = H[off[t]:off[t + 1], n:]
    S.D = H[n:, n:]
    return S, H, off


class TestBlockSolve:
    @pytest.mark.parametrize("nb", [0, 3])
    def test_matches_dense(self, rng, nb):
        sizes = [4, 6, 5, 3, 6]
        S, H, off = random_system(rng, sizes, nb)
        rhs = [rng.normal(size=s) for s in sizes]
        rhsb = rng.normal(size=nb)
        damp = [rng.random(s) for s in sizes]
        dampb = rng.random(nb)
        x, xb = solve_block_tridiagonal(S, rhs, rhsb, damp, dampb, [np.zeros(s, bool) for s in sizes],
                                        np.zeros(nb, bool))
        ref = np.linalg.solve(H + np.diag(np.concatenate(damp + [dampb])), np.concatenate(rhs + [rhsb]))
        np.testing.assert_allclose(np.concatenate(x + [xb]), ref, rtol=1e-9, atol=1e-12)

    def test_frozen_variables(self, rng):
        sizes, nb = [3, 4, 3], 2
        S, H, off = random_system(rng, sizes, nb)
        rhs = [rng.normal(size=s) for s in sizes]
        rhsb = rng.normal(size=nb)
        frozen = [np.array([0, 1, 0], bool), np.array([0, 0, 0, 1], bool), np.zeros(3, bool)]
        frozenb = np.array([1, 0], bool)
        z = [np.zeros(s) for s in sizes]
        x, xb = solve_block_tridiagonal(S, rhs, rhsb, z, np.zeros(nb), frozen, frozenb)
        free = ~np.concatenate(frozen + [frozenb])
        ref = np.zeros(len(free))
        ref[free] = np.linalg.solve(H[np.ix_(free, free)], np.concatenate(rhs + [rhsb])[free])
        np.testing.assert_allclose(np.concatenate(x + [xb]), ref, rtol=1e-9, atol=1e-12)

    def test_matvec(self, rng):
        S, H, off = random_system(rng, [2, 3, 2], 2)
        v = rng.normal(size=9)
        y, yb = S.matvec([v[0:2], v[2:5], v[5:7]], v[7:])
        np.testing.assert_allclose(np.concatenate(y + [yb]), H @ v, atol=1e-12)


class TestLevenbergMarquardt:
    def test_zero_residual_start(self):
        p = DenseLeastSquares(lambda x: x - 3.0, lambda x: np.eye(1))
        x, rep = levenberg_marquardt(p, np.array([3.0]))
        assert rep.iterations <= 1 and rep.final_cost == 0.0

    def test_linear(self):
        p = DenseLeastSquares(lambda x: x - 3.0, lambda x: np.eye(1))
        x, rep = levenberg_marquardt(p, np.array([0.0]), SolverOptions(function_tolerance=1e-14))
        assert x[0] == pytest.approx(3.0, abs=1e-7)

    def test_rosenbrock(self):
        r = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
        J = lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
        x, rep = levenberg_marquardt(DenseLeastSquares(r, J), np.array([-1.2, 1.0]),
                                     SolverOptions(max_iterations=200, function_tolerance=1e-15))
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)
        assert np.all(np.diff(rep.accepted_costs) <= 0)

    def test_bounds_hold(self):
        p = DenseLeastSquares(lambda x: x - np.array([3.0, -2.0]), lambda x: np.eye(2),
                              lower=np.array([-np.inf, 0.0]), upper=np.array([2.0, np.inf]))
        x, rep = levenberg_marquardt(p, np.array([0.0, 1.0]), SolverOptions(function_tolerance=1e-14))
        np.testing.assert_allclose(x, [2.0, 0.0], atol=1e-10)

    def test_nonfinite_start(self):
        p = DenseLeastSquares(lambda x: np.array([np.inf]), lambda x: np.eye(1))
        with pytest.raises(SolverError, match="not finite"):
            levenberg_marquardt(p, np.array([0.0]))

    def test_singular_normal_equations_recover(self):
        # rank-deficient Jacobian: damping keeps the solve well posed
        r = lambda x: np.array([x[0] + x[1] - 1.0])
        J = lambda x: np.array([[1.0, 1.0]])
        x, rep = levenberg_marquardt(DenseLeastSquares(r, J), np.zeros(2))
        assert abs(x.sum() - 1.0) < 1e-4

    def test_options_validated(self):
        with pytest.raises(ValueError):
            SolverOptions(function_tolerance=0.0)
        with pytest.raises(ValueError):
            SolverOptions(damping_up=1.0)


class TestOrientationInits:
    def test_four_unit_quaternions(self, lift_scene):
        qs = object_orientation_inits(lift_scene[0].camera)
        assert len(qs) == 4
        for q in qs:
            assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
        assert len({tuple(np.round(q, 9)) for q in qs}) == 4

    def test_midpoint_reprojects(self, lift_scene, lift_problem):
        meas, _ = lift_scene
        p, _ = lift_problem
        ep = meas.endpoints2d.mean(axis=(0, 1))
        for quat in object_orientation_inits(meas.camera):
            base = object_base_for(p, meas, quat, 4.0)
            R = Rotation(quat).matrix()
            mid = base[:3] + R @ [0.5 * p.obj.handle_length, 0, 0]
            assert np.linalg.norm(project(meas.camera, mid) - ep) < 1.0


from contactrecon.spatial import Rotation  # noqa: E402


def perturbed(problem, st, scale, seed=0):
    rng = np.random.default_rng(seed)
    L = problem.layout
    X = np.array([L.retract(x, rng.normal(scale=scale, size=L.nt)) for x in st.X])
    X[:, L.amb["lam"]] = np.abs(X[:, L.amb["lam"]])
    X[:, L.amb["c_obj"]] = np.clip(X[:, L.amb["c_obj"]], 0, problem.obj.handle_length)
    return State(X, st.G.copy())


class TestStages:
    def test_stage1_leaves_controls(self, lift_window):
        p, st = lift_window
        s0 = perturbed(p, st, 1e-3)
        s1, rep = stage1_kinematics(p, s0, SolverOptions(max_iterations=3))
        L = p.layout
        for seg in ("tau", "lam", "f_obj"):
            np.testing.assert_array_equal(s1.X[:, L.amb[seg]], s0.X[:, L.amb[seg]])
        np.testing.assert_array_equal(s1.G[:3], s0.G[:3])
        assert rep.final_cost <= rep.initial_cost

    def test_stage2_leaves_kinematics(self, lift_window):
        p, st = lift_window
        s0 = perturbed(p, st, 1e-3)
        s2, rep = stage2_forces(p, s0, SolverOptions(max_iterations=3))
        L = p.layout
        # frozen variables see a zero step; retraction may renormalize in the last bit
        for seg in ("qh", "qo", "vh", "vo", "c_obj", "c_gnd"):
            np.testing.assert_allclose(s2.X[:, L.amb[seg]], s0.X[:, L.amb[seg]], rtol=0, atol=1e-15)
        np.testing.assert_array_equal(s2.G, s0.G)
        assert rep.iterations > 0 and rep.final_cost < rep.initial_cost

    def test_stage3_invariants(self, human, lift_window):
        p, st = lift_window
        s0 = perturbed(p, st, 3e-3, seed=2)
        s3, rep = stage3_full(p, s0, SolverOptions(max_iterations=5))
        assert np.all(np.diff(rep.accepted_costs) <= 0)
        L = p.layout
        assert s3.X[:, L.amb["lam"]].min() >= 0
        c = s3.X[:, L.amb["c_obj"]]
        assert c.min() >= 0 and c.max() <= p.obj.handle_length
        for x in s3.X:
            human.validate(x[L.amb["qh"]])
            assert abs(np.linalg.norm(x[L.amb["qo"]][3:]) - 1) < 1e-9
        assert abs(np.linalg.norm(s3.G[:3]) - 1) < 1e-12

    def test_ground_mask(self, lift_window):
        p, st = lift_window
        sp = StageProblem(p, ("contact_motion",), p.active_mask(("kinematic",)), (False, True, False))
        assert sp.nb == 1 and list(sp.gidx) == [1]

    def test_truth_is_near_stationary(self, lift_window):
        # at the ground truth only the prior and smoothing terms pull, so stage 3 moves little
        p, st = lift_window
        s, rep = stage3_full(p, st, SolverOptions(max_iterations=3))
        assert rep.final_cost <= rep.initial_cost
        L = p.layout
        d = np.abs(s.X[:, L.amb["qh"]] - st.X[:, L.amb["qh"]]).max()
        assert d < 2e-2


class TestPipeline:
    def test_single_frame_rejected(self, human, lift_scene):
        with pytest.raises(SolverError, match="2 frames"):
            solve_pipeline(human, crop(lift_scene[0], 0, 1))

    def test_no_contacts_is_legal(self, human):
        from dataclasses import replace
        from contactrecon.eval import generate_synthetic, perturbed_init
        meas, truth = generate_synthetic("static-stand", n_frames=4, seed=0)
        meas = replace(meas, contacts={}, contact_targets={})
        cfg = PipelineConfig(stage1=PipelineConfig().stage1.__class__(options=SolverOptions(max_iterations=5)),
                             stage2=PipelineConfig().stage2.__class__(options=SolverOptions(max_iterations=3)),
                             stage3=PipelineConfig().stage3.__class__(options=SolverOptions(max_iterations=3)))
        problem, state, rep = solve_pipeline(human, meas, cfg, q_h_init=perturbed_init(human, truth))
        assert [s.name for s in rep.stages] == ["stage1", "stage2", "stage3"]
        assert not any(b.kind.startswith("contact") for b in problem.blocks)
        for s in rep.stages:
            assert s.final_cost <= s.initial_cost
