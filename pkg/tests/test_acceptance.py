"""Acceptance criteria, one test per criterion.

Each test records its measured values with :func:`conftest.note`; the
terminal summary prints one PASS/FAIL line per criterion.  The heavy
pipeline runs are shared through module fixtures.
"""
import json
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as Rsp

from conftest import note
from contactrecon.cli import main as cli
from contactrecon.contact import cone_generators_3d
from contactrecon.costs import retract_ground
from contactrecon.dynamics import inverse_dynamics, mass_matrix
from contactrecon.eval import (contact_motion_error, contact_wrenches, endpoint_accuracy, evaluate,
                               generate_synthetic, mpjpe, perturbed_init, rigid_align)
from contactrecon.io import solution_from_state
from contactrecon.model import Joint, JointKind, KinematicModel, Link, random_configuration
from contactrecon.solver import PipelineConfig, solve_pipeline

pytestmark = pytest.mark.slow
G = 9.81


def run(human, scenario, noise_px=0.0, seed=0, n_frames=None):
    meas, truth = generate_synthetic(scenario, noise_px=noise_px, seed=seed, n_frames=n_frames)
    t0 = time.perf_counter()
    problem, state, rep = solve_pipeline(human, meas, q_h_init=perturbed_init(human, truth, seed=seed))
    return {"meas": meas, "truth": truth, "problem": problem, "state": state, "rep": rep,
            "seconds": time.perf_counter() - t0, "solution": solution_from_state(problem, state)}


@pytest.fixture(scope="module")
def static_run(human):
    return run(human, "static-stand")


@pytest.fixture(scope="module")
def lift_runs(human):
    return {"clean": run(human, "lift-object", seed=1), "noisy": run(human, "lift-object", 2.0, seed=1)}


@pytest.fixture(scope="module")
def other_runs(human):
    return {s: run(human, s) for s in ("swing-object", "walk-two-steps")}


# --------------------------------------------------------------------------
# 1. planar double pendulum


def rod(m, length, r=0.01):
    return Link(m, np.array([0.0, -length / 2, 0.0]),
                np.diag([m * length ** 2 / 12, m * r * r / 2, m * length ** 2 / 12]))


def lagrangian_torques(th, dth, ddth, m1, m2, l1, l2):
    """Closed-form double pendulum (uniform rods, angles from hanging down)."""
    I1, I2 = m1 * l1 ** 2 / 12, m2 * l2 ** 2 / 12
    c1, c2 = l1 / 2, l2 / 2
    M11 = I1 + I2 + m1 * c1 ** 2 + m2 * (l1 ** 2 + c2 ** 2 + 2 * l1 * c2 * np.cos(th[1]))
    M12 = I2 + m2 * (c2 ** 2 + l1 * c2 * np.cos(th[1]))
    M22 = I2 + m2 * c2 ** 2
    h = m2 * l1 * c2 * np.sin(th[1])
    C = np.array([-h * (2 * dth[0] * dth[1] + dth[1] ** 2), h * dth[0] ** 2])
    Gr = np.array([(m1 * c1 + m2 * l1) * G * np.sin(th[0]) + m2 * c2 * G * np.sin(th[0] + th[1]),
                   m2 * c2 * G * np.sin(th[0] + th[1])])
    return np.array([[M11, M12], [M12, M22]]) @ ddth + C + Gr


@pytest.mark.criterion(1, "double pendulum inverse dynamics and M a identity")
def test_dynamics_oracle():
    t0 = time.perf_counter()
    m1, m2, l1, l2 = 1.3, 0.8, 0.7, 0.5
    model = KinematicModel("pendulum", (Joint("shoulder", JointKind.SPHERICAL, -1, np.zeros(3)),
                                        Joint("elbow", JointKind.SPHERICAL, 0, np.array([0.0, -l1, 0.0]))),
                           (rod(m1, l1), rod(m2, l2)))
    zq = lambda a: [np.cos(a / 2), 0.0, 0.0, np.sin(a / 2)]
    rng = np.random.default_rng(1)
    worst = worst_m = 0.0
    for _ in range(1000):
        th, dth, ddth = rng.uniform(-np.pi, np.pi, 2), rng.normal(size=2), rng.normal(size=2)
        q = np.concatenate([zq(th[0]), zq(th[1])])
        v = np.array([0, 0, dth[0], 0, 0, dth[1]])
        a = np.array([0, 0, ddth[0], 0, 0, ddth[1]])
        tau = inverse_dynamics(model, q, v, a)
        ref = lagrangian_torques(th, dth, ddth, m1, m2, l1, l2)
        # out-of-plane rows must vanish
        full = np.zeros(6)
        full[[2, 5]] = ref
        worst = max(worst, np.linalg.norm(tau - full) / np.linalg.norm(ref))
        # M a identity on the full 3D model with random states
        q3 = random_configuration(model, rng)
        v3, a3 = rng.normal(size=6), rng.normal(size=6)
        Ma = inverse_dynamics(model, q3, v3, a3) - inverse_dynamics(model, q3, v3, np.zeros(6))
        Mref = mass_matrix(model, q3) @ a3
        worst_m = max(worst_m, np.linalg.norm(Ma - Mref) / max(np.linalg.norm(Mref), 1e-300))
    seconds = time.perf_counter() - t0
    note(1, f"rel err {worst:.1e} (<= 1e-8), M a {worst_m:.1e} (<= 1e-10), {seconds:.1f} s (< 10)")
    assert worst <= 1e-8 and worst_m <= 1e-10 and seconds < 10


@pytest.mark.criterion(1, "double pendulum inverse dynamics and M a identity")
def test_dynamics_oracle_human_mass_matrix(human):
    # the same identity on the full human tree backs up the pendulum check
    rng = np.random.default_rng(2)
    for _ in range(20):
        q = random_configuration(human, rng)
        v, a = rng.normal(size=human.nv), rng.normal(size=human.nv)
        Ma = inverse_dynamics(human, q, v, a) - inverse_dynamics(human, q, v, np.zeros(human.nv))
        Mref = mass_matrix(human, q) @ a
        assert np.linalg.norm(Ma - Mref) <= 1e-10 * np.linalg.norm(Mref)


# --------------------------------------------------------------------------
# 2. residual Jacobians vs central differences


@pytest.mark.criterion(2, "block Jacobians vs central differences")
def test_gradient_suite(lift_problem):
    problem, st = lift_problem
    L = problem.layout
    h = 1e-6
    by_kind = {}
    for b in problem.blocks:
        by_kind.setdefault(b.kind, []).append(b)
    rng = np.random.default_rng(3)
    worst = {}
    for kind, blocks in sorted(by_kind.items()):
        errs = []
        for _ in range(100):
            b = blocks[rng.integers(len(blocks))]
            X, Gp = st.X.copy(), retract_ground(st.G, rng.normal(scale=0.02, size=3))
            for t in set(b.frames):
                X[t] = L.retract(X[t], rng.normal(scale=0.02, size=L.nt))
                X[t, L.amb["lam"]] = np.abs(X[t, L.amb["lam"]])
            _, Jp, Jc, Jg = b.linearize(X, Gp, L)
            J = np.hstack([Jp, Jc, Jg])
            F = np.zeros_like(J)
            k = 0
            for which, cols in (("prev", b.cols_prev), ("cur", b.cols_cur), ("ground", b.cols_ground)):
                for c in cols:
                    def at(s):
                        Xs, Gs = X, Gp
                        if which == "ground":
                            d = np.zeros(3)
                            d[c] = s
                            Gs = retract_ground(Gp, d)
                        else:
                            t = b.frame - 1 if which == "prev" else b.frame
                            d = np.zeros(L.nt)
                            d[c] = s
                            Xs = X.copy()
                            Xs[t] = L.retract(X[t], d)
                        return b.residual(Xs, Gs)
                    F[:, k] = (at(h) - at(-h)) / (2 * h)
                    k += 1
            errs.append(np.linalg.norm(J - F) / max(np.linalg.norm(F), 1e-12))
        worst[kind] = max(errs)
    note(2, f"{len(worst)} block types, worst rel err {max(worst.values()):.1e} (<= 1e-4)")
    assert len(worst) == 10
    assert max(worst.values()) <= 1e-4, worst


# --------------------------------------------------------------------------
# 3. friction pyramid


@pytest.mark.criterion(3, "cone soundness and generator closed forms")
def test_cone_soundness():
    rng = np.random.default_rng(4)
    worst = -np.inf
    for _ in range(10_000):
        mu = rng.uniform(0, 1) or 1.0
        lam = rng.random(4) * (rng.random(4) < 0.8)
        f = lam @ cone_generators_3d(mu)
        worst = max(worst, np.hypot(f[0], f[2]) - (-f[1] * np.tan(mu)))
    for mu in (0.0, np.pi / 6, np.pi / 4):
        s, c = np.sin(mu), np.cos(mu)
        ref = np.array([[s, -c, 0], [-s, -c, 0], [0, -c, s], [0, -c, -s]])
        assert np.array_equal(cone_generators_3d(mu), ref)
    note(3, f"max violation {worst:.1e} (<= 1e-12) over 10^4 samples, closed forms exact")
    assert worst <= 1e-12


# --------------------------------------------------------------------------
# 4. static stand


@pytest.mark.criterion(4, "static stand: 731.8 N support, stage-2 dynamics residual, < 60 s")
def test_static_equilibrium(human, static_run):
    r = static_run
    p = r["problem"]
    s2 = r["rep"].states["stage2"]
    # dynamics blocks carry sqrt(dynamics_penalty); undo it to get N and N m
    scale = np.sqrt(PipelineConfig().weights.dynamics_penalty)
    dyn = max(np.abs(b.residual(s2.X, s2.G)).max() for b in p.blocks if b.kind.startswith("dynamics")) / scale
    totals = {}
    for name in ("stage2", "stage3"):
        sol = solution_from_state(p, r["rep"].states[name])
        W = sum(w for w, _ in contact_wrenches(human, sol).values())
        totals[name] = W[1:, 1]
    dev = max(np.abs(v - 731.8).max() for v in totals.values())
    note(4, f"vertical force {totals['stage3'].mean():.3f} N, max dev from 731.8 {dev:.3f} N, "
            f"stage-2 dynamics {dyn:.1e}, {r['seconds']:.1f} s")
    assert dev <= 1.0 and dyn <= 1e-6 and r["seconds"] < 60


# --------------------------------------------------------------------------
# 5. lift round trip


@pytest.mark.criterion(5, "lift-object reconstruction, noiseless and 2 px")
def test_lift_round_trip(human, lift_runs):
    c, n = lift_runs["clean"], lift_runs["noisy"]
    ec = evaluate(human, c["solution"], c["truth"])
    en = evaluate(human, n["solution"], n["truth"])
    kappa = contact_motion_error(c["solution"])
    seconds = c["seconds"] + n["seconds"]
    note(5, f"clean MPJPE {ec['mpjpe_mm']:.2f} mm, endpoint {ec['endpoint_3d_error_mm']:.2f} mm, "
            f"kappa {kappa:.1e} m; 2px MPJPE {en['mpjpe_mm']:.1f} mm, force "
            f"{100 * en['force_linear_relative']:.1f}%; {seconds:.0f} s")
    assert ec["mpjpe_mm"] <= 5 and ec["endpoint_3d_error_mm"] <= 10 and kappa <= 1e-6
    assert en["mpjpe_mm"] <= 30 and en["force_linear_relative"] <= 0.15
    assert seconds < 15 * 60


# --------------------------------------------------------------------------
# 6. cascade monotonicity


@pytest.mark.criterion(6, "stage-3 cost <= stage-2 cost; accepted LM costs non-increasing")
def test_stage_cascade(static_run, lift_runs, other_runs):
    runs = {"static-stand": static_run, "lift-object": lift_runs["clean"], "lift-object 2px": lift_runs["noisy"],
            **other_runs}
    bad = []
    for name, r in runs.items():
        fc = r["rep"].full_costs
        if not fc["stage3"] <= fc["stage2"]:
            bad.append(f"{name}: stage3 {fc['stage3']:.6g} > stage2 {fc['stage2']:.6g}")
        for s in r["rep"].stages:
            if np.any(np.diff(s.accepted_costs) > 0):
                bad.append(f"{name}/{s.name}: accepted cost increased")
    note(6, f"{len(runs)} runs checked" + (f"; {bad}" if bad else ""))
    assert not bad


# --------------------------------------------------------------------------
# 7. linear-time structure


@pytest.mark.criterion(7, "solve time scaling exponent T=10..160 <= 1.3")
def test_scaling(human):
    Ts = [10, 20, 40, 80, 160]
    secs = []
    for T in Ts:
        meas, truth = generate_synthetic("static-stand", seed=0, n_frames=T)
        init = perturbed_init(human, truth, seed=0)
        t0 = time.perf_counter()
        solve_pipeline(human, meas, q_h_init=init)
        secs.append(time.perf_counter() - t0)
    slope = np.polyfit(np.log(Ts), np.log(secs), 1)[0]
    note(7, f"exponent {slope:.2f} (<= 1.3); seconds {[round(s, 1) for s in secs]}")
    assert slope <= 1.3


# --------------------------------------------------------------------------
# 8. metrics


@pytest.mark.criterion(8, "metrics: MPJPE invariance, threshold monotonicity, SVD oracle")
def test_metrics():
    rng = np.random.default_rng(5)
    worst_mpjpe = worst_align = 0.0
    for i in range(100):
        X = rng.normal(size=(3, 18, 3))
        R = Rsp.random(random_state=i).as_matrix()
        Y = X @ R.T + rng.normal(scale=5.0, size=3)
        worst_mpjpe = max(worst_mpjpe, mpjpe(Y, X))
        S = rng.normal(size=(18, 3))
        D = S @ R.T + rng.normal(size=3) + rng.normal(scale=0.1, size=(18, 3))
        cs, cd = S.mean(0), D.mean(0)
        U, _, Vt = np.linalg.svd((D - cd).T @ (S - cs))
        Rref = U @ np.diag([1, 1, np.linalg.det(U @ Vt)]) @ Vt
        P = rigid_align(S, D)
        worst_align = max(worst_align, np.abs(P.rotation.matrix() - Rref).max(),
                          np.abs(P.translation - (cd - Rref @ cs)).max())
    monotone = True
    for _ in range(100):
        A = rng.uniform(0, 600, size=(50, 2))
        acc = endpoint_accuracy(A + rng.normal(scale=rng.uniform(5, 150), size=A.shape), A)
        monotone &= acc[0] <= acc[1] <= acc[2]
    note(8, f"MPJPE under rigid motion {worst_mpjpe:.1e} mm, align err {worst_align:.1e}, monotone {monotone}")
    assert worst_mpjpe < 1e-9 and worst_align <= 1e-10 and monotone


# --------------------------------------------------------------------------
# 9. determinism


@pytest.mark.criterion(9, "synth --seed 1, solve twice: identical bytes")
def test_determinism(tmp_path):
    d = tmp_path / "scene"
    assert cli(["synth", "--scenario", "static-stand", "--seed", "1", "--noise-px", "1", "--frames", "12",
                "--out", str(d)]) == 0
    outs = []
    for k in range(2):
        out = tmp_path / f"solution{k}.json"
        assert cli(["solve", "--measurements", str(d / "measurements.json"), "--init", str(d / "init.json"),
                    "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    json.loads(outs[0])
    note(9, f"{len(outs[0])} bytes, identical {outs[0] == outs[1]}")
    assert outs[0] == outs[1]
