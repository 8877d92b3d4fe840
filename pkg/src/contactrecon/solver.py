"""Levenberg-Marquardt over block-tridiagonal normal equations and the
three-stage estimation cascade."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _kernels as K
from .contact import GROUND
from .costs import CostWeights, Problem, assemble_problem, retract_ground
from .spatial import Rotation

log = logging.getLogger(__name__)

STAGE1_KINDS = ("data", "prior", "smooth_human", "smooth_object", "contact_motion", "velocity",
                "contact_smooth")
STAGE2_KINDS = ("torque", "contact_smooth", "dynamics_human", "dynamics_object")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 100
    initial_damping: float = 1e-4
    damping_up: float = 2.0
    min_damping_decrease: float = 1.0 / 3.0
    function_tolerance: float = 1e-6
    gradient_tolerance: float = 1e-10
    parameter_tolerance: float = 1e-8
    max_damping: float = 1e32

    def __post_init__(self):
        for k in ("function_tolerance", "gradient_tolerance", "parameter_tolerance", "initial_damping"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be > 0")
        if self.damping_up <= 1:
            raise ValueError("damping_up must be > 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class LMReport:
    iterations: int = 0
    initial_cost: float = float("nan")
    final_cost: float = float("nan")
    termination: str = ""
    accepted_costs: list = field(default_factory=list)


# --------------------------------------------------------------------------
# structured linear algebra


@dataclass
class BlockSystem:
    """Normal equations over frames 0..T-1 plus a dense border.

    ``A[t]`` diagonal blocks, ``B[t]`` the (t, t-1) coupling (``B[0]`` is
    unused), ``C[t]`` frame-border coupling, ``D`` the border block and
    ``g``/``gb`` the gradients ``J^T r``.
    """
    A: list
    B: list
    C: list
    D: np.ndarray
    g: list
    gb: np.ndarray

    @classmethod
    def zeros(cls, sizes, nb):
        A = [np.zeros((n, n)) for n in sizes]
        B = [np.zeros((0, 0))] + [np.zeros((sizes[t], sizes[t - 1])) for t in range(1, len(sizes))]
        C = [np.zeros((n, nb)) for n in sizes]
        return cls(A, B, C, np.zeros((nb, nb)), [np.zeros(n) for n in sizes], np.zeros(nb))

    def matvec(self, x, xb):
        y = [A @ xt for A, xt in zip(self.A, x)]
        for t in range(1, len(x)):
            y[t] += self.B[t] @ x[t - 1]
            y[t - 1] += self.B[t].T @ x[t]
        yb = self.D @ xb
        for t in range(len(x)):
            y[t] += self.C[t] @ xb
            yb += self.C[t].T @ x[t]
        return y, yb

    def diagonal(self):
        return [np.diag(A).copy() for A in self.A], np.diag(self.D).copy()


def solve_block_tridiagonal(S: BlockSystem, rhs, rhsb, damp, dampb, frozen, frozenb):
    """Solve ``(H + diag(damp)) x = rhs`` by forward block elimination in
    time followed by a Schur complement on the border.  Frozen variables
    are pinned to zero.  Raises ``LinAlgError`` if a pivot block is not SPD.
    """
    T = len(S.A)
    nb = len(rhsb)
    A = []
    for t in range(T):
        At = S.A[t] + np.diag(damp[t])
        f = frozen[t]
        if f.any():
            At[f, :] = 0
            At[:, f] = 0
            At[f, f] = 1.0
        A.append(At)

    def masked(M, rows, cols):
        if rows.any() or cols.any():
            M = M.copy()
            M[rows, :] = 0
            M[:, cols] = 0
        return M

    Bm = [None] + [masked(S.B[t], frozen[t], frozen[t - 1]) for t in range(1, T)]
    Cm = [masked(S.C[t], frozen[t], frozenb) for t in range(T)]
    b = [np.where(frozen[t], 0.0, rhs[t]) for t in range(T)]
    D = S.D + np.diag(dampb)
    if frozenb.any():
        D[frozenb, :] = 0
        D[:, frozenb] = 0
        D[frozenb, frozenb] = 1.0
    bb = np.where(frozenb, 0.0, rhsb)

    facs, Ct, bt = [], [], []
    Acur, Ccur, bcur = A[0], Cm[0], b[0]
    for t in range(T):
        F = cho_factor(Acur, lower=True, check_finite=False)
        if not np.all(np.isfinite(F[0])) or np.any(np.diag(F[0]) <= 0):
            raise np.linalg.LinAlgError("pivot block not positive definite")
        facs.append(F)
        Ct.append(Ccur)
        bt.append(bcur)
        if nb:
            AinvC = cho_solve(F, Ccur, check_finite=False)
            D = D - Ccur.T @ AinvC
            bb = bb - AinvC.T @ bcur
        if t + 1 < T:
            Bn = Bm[t + 1]
            W = cho_solve(F, Bn.T, check_finite=False)
            Acur = A[t + 1] - Bn @ W
            Ccur = Cm[t + 1] - W.T @ Ccur if nb else Cm[t + 1]
            bcur = b[t + 1] - W.T @ bcur
    xb = np.zeros(nb)
    if nb:
        xb = np.linalg.solve(D, bb)
    x = [None] * T
    for t in range(T - 1, -1, -1):
        r = bt[t].copy()
        if nb:
            r -= Ct[t] @ xb
        if t + 1 < T:
            r -= Bm[t + 1].T @ x[t + 1]
        x[t] = cho_solve(facs[t], r, check_finite=False)
    if not all(np.all(np.isfinite(xt)) for xt in x) or not np.all(np.isfinite(xb)):
        raise np.linalg.LinAlgError("non-finite solution")
    return x, xb


# --------------------------------------------------------------------------
# generic LM driver


def levenberg_marquardt(problem, state, options: SolverOptions = SolverOptions()):
    """Minimize ``problem.cost`` from ``state``.

    ``problem`` provides ``cost(state)``, ``linearize(state) -> (cost,
    BlockSystem)``, ``retract(state, x, xb)`` and ``bound_gaps(state)``
    returning lower/upper distances to the bounds per frame and border.
    """
    rep = LMReport()
    cost = problem.cost(state)
    if not np.isfinite(cost):
        raise SolverError(f"cost is not finite at the initial point ({cost})")
    rep.initial_cost = rep.final_cost = cost
    rep.accepted_costs.append(cost)
    mu = options.initial_damping
    nu = 2.0
    need_lin = True
    for it in range(options.max_iterations + 1):
        if need_lin:
            cost, S = problem.linearize(state)
            (lo, hi), (lob, hib) = problem.bound_gaps(state)
            tiny = 1e-12
            frozen = [((l <= tiny) & (gg > 0)) | ((h <= tiny) & (gg < 0)) for l, h, gg in zip(lo, hi, S.g)]
            frozenb = ((lob <= tiny) & (S.gb > 0)) | ((hib <= tiny) & (S.gb < 0))
            gfree = max([np.abs(np.where(f, 0, gg)).max(initial=0.0) for f, gg in zip(frozen, S.g)]
                        + [np.abs(np.where(frozenb, 0, S.gb)).max(initial=0.0)])
            if cost <= 1e-30 or gfree <= options.gradient_tolerance:
                rep.termination = "gradient tolerance" if cost > 1e-30 else "zero cost"
                break
            dg, dgb = S.diagonal()
            dg = [np.clip(d, 1e-6, 1e32) for d in dg]
            dgb = np.clip(dgb, 1e-6, 1e32)
            need_lin = False
        if it == options.max_iterations:
            rep.termination = "max iterations"
            break
        try:
            x, xb = solve_block_tridiagonal(S, [-gg for gg in S.g], -S.gb,
                                            [mu * d for d in dg], mu * dgb, frozen, frozenb)
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2
            if mu > options.max_damping:
                rep.termination = "damping limit"
                break
            continue
        # project the step onto the bound box
        x = [np.clip(xt, -l, h) for xt, l, h in zip(x, lo, hi)]
        xb = np.clip(xb, -lob, hib)
        step = np.sqrt(sum(float(xt @ xt) for xt in x) + float(xb @ xb))
        Hx, Hxb = S.matvec(x, xb)
        pred = -(2 * (sum(float(gg @ xt) for gg, xt in zip(S.g, x)) + float(S.gb @ xb))
                 + sum(float(xt @ h) for xt, h in zip(x, Hx)) + float(xb @ Hxb))
        if step <= options.parameter_tolerance:
            rep.termination = "parameter tolerance"
            break
        trial = problem.retract(state, x, xb)
        new_cost = problem.cost(trial)
        rho = (cost - new_cost) / pred if pred > 0 else -1.0
        if np.isfinite(new_cost) and new_cost < cost and rho > 0:
            rel = (cost - new_cost) / max(cost, 1e-300)
            state, cost = trial, new_cost
            rep.iterations += 1
            rep.accepted_costs.append(cost)
            mu *= max(options.min_damping_decrease, 1 - (2 * rho - 1) ** 3)
            nu = options.damping_up
            need_lin = True
            log.debug("iter %d cost %.6e mu %.2e rho %.3f", rep.iterations, cost, mu, rho)
            if rel <= options.function_tolerance:
                rep.termination = "function tolerance"
                break
        else:
            mu *= nu
            nu *= 2
            if mu > options.max_damping:
                rep.termination = "damping limit"
                break
    rep.final_cost = cost
    return state, rep


class DenseLeastSquares:
    """Adapter for small dense problems (one 'frame', no border)."""

    def __init__(self, residual, jacobian, lower=None, upper=None):
        self.residual, self.jacobian = residual, jacobian
        self.lower, self.upper = lower, upper

    def cost(self, x):
        r = self.residual(x)
        return float(r @ r)

    def linearize(self, x):
        r = self.residual(x)
        J = np.atleast_2d(self.jacobian(x))
        S = BlockSystem([J.T @ J], [np.zeros((0, 0))], [np.zeros((len(x), 0))], np.zeros((0, 0)),
                        [J.T @ r], np.zeros(0))
        return float(r @ r), S

    def retract(self, x, dx, dxb):
        return x + dx[0]

    def bound_gaps(self, x):
        lo = x - self.lower if self.lower is not None else np.full(len(x), np.inf)
        hi = self.upper - x if self.upper is not None else np.full(len(x), np.inf)
        return ([lo], [hi]), (np.zeros(0), np.zeros(0))


# --------------------------------------------------------------------------
# problem adapter


@dataclass
class State:
    X: np.ndarray
    G: np.ndarray


def _runs(idx) -> list:
    """Contiguous runs of an index array as (destination, source) slices."""
    idx = np.asarray(idx, np.int64)
    out = []
    start = 0
    for k in range(1, len(idx) + 1):
        if k == len(idx) or idx[k] != idx[k - 1] + 1:
            out.append((slice(int(idx[start]), int(idx[k - 1]) + 1), slice(start, k)))
            start = k
    return out


def _acc(M, rows, cols, V):
    # M[rows, cols] += V with slice arithmetic; fancy indexing costs more
    # than the products being accumulated
    for dr, sr in rows:
        for dc, sc in cols:
            M[dr, dc] += V[sr, sc]


def _acc_vec(v, rows, V):
    for dr, sr in rows:
        v[dr] += V[sr]


class StageProblem:
    """A stage of the estimation problem: subset of blocks and free variables."""

    def __init__(self, problem: Problem, kinds, free: np.ndarray, free_ground=True):
        """``free_ground`` is a bool or a 3-mask over the ground tangent
        (two tilt directions, then the offset)."""
        self.p = problem
        self.blocks = [b for b in problem.blocks if b.kind in kinds]
        self.free = free
        self.free_ground = free_ground
        L = problem.layout
        self.idx = [np.flatnonzero(f) for f in free]
        self.pos = []
        for t, ix in enumerate(self.idx):
            p = np.full(L.nt, -1, np.int64)
            p[ix] = np.arange(len(ix))
            self.pos.append(p)
        gmask = np.broadcast_to(np.asarray(free_ground, bool), (3,))
        self.gidx = np.flatnonzero(gmask)
        self.nb = len(self.gidx)
        self.gpos = np.full(3, -1, np.int64)
        self.gpos[self.gidx] = np.arange(self.nb)
        self.plan = []
        for b in self.blocks:
            t = b.frame
            cc = b.cols_cur[free[t][b.cols_cur]]
            cp = b.cols_prev[free[t - 1][b.cols_prev]] if t > 0 else b.cols_prev[:0]
            cg = b.cols_ground[gmask[b.cols_ground]]
            if len(cc) + len(cp) + len(cg):
                runs = (_runs(self.pos[t][cc]), _runs(self.pos[t - 1][cp]) if len(cp) else [],
                        _runs(self.gpos[cg]))
                self.plan.append((b, cp, cc, cg, runs))
        self.sizes = [len(ix) for ix in self.idx]

    def cost(self, s: State) -> float:
        c = 0.0
        for b in self.blocks:
            r = b.residual(s.X, s.G)
            c += float(r @ r)
        return c

    def linearize(self, s: State):
        S = BlockSystem.zeros(self.sizes, self.nb)
        cost = 0.0
        planned = {id(item[0]) for item in self.plan}
        for b in self.blocks:
            if id(b) not in planned:
                r = b.residual(s.X, s.G)
                cost += float(r @ r)
        for b, cp, cc, cg, (rc, rp, rg) in self.plan:
            t = b.frame
            r, Jp, Jc, Jg = b.linearize(s.X, s.G, self.p.layout, cp, cc, cg)
            cost += float(r @ r)
            _acc(S.A[t], rc, rc, Jc.T @ Jc)
            _acc_vec(S.g[t], rc, Jc.T @ r)
            if len(cp):
                _acc(S.A[t - 1], rp, rp, Jp.T @ Jp)
                _acc(S.B[t], rc, rp, Jc.T @ Jp)
                _acc_vec(S.g[t - 1], rp, Jp.T @ r)
            if len(cg):
                _acc(S.D, rg, rg, Jg.T @ Jg)
                _acc(S.C[t], rc, rg, Jc.T @ Jg)
                _acc_vec(S.gb, rg, Jg.T @ r)
                if len(cp):
                    _acc(S.C[t - 1], rp, rg, Jp.T @ Jg)
        return cost, S

    def retract(self, s: State, x, xb) -> State:
        L = self.p.layout
        X = s.X.copy()
        for t, ix in enumerate(self.idx):
            if len(ix):
                dx = np.zeros(L.nt)
                dx[ix] = x[t]
                X[t] = L.retract(s.X[t], dx)
        if self.nb:
            d = np.zeros(3)
            d[self.gidx] = xb
            G = retract_ground(s.G, d)
        else:
            G = s.G.copy()
        return State(X, G)

    def bound_gaps(self, s: State):
        L = self.p.layout
        lo, hi = [], []
        for t, ix in enumerate(self.idx):
            val = s.X[t][L.tamb[ix]]
            lo.append(val - L.lower[ix])
            hi.append(L.upper[ix] - val)
        inf = np.full(self.nb, np.inf)
        return (lo, hi), (inf, inf.copy())


# --------------------------------------------------------------------------
# stages


@dataclass
class StageReport:
    name: str
    iterations: int
    initial_cost: float
    final_cost: float
    termination: str
    accepted_costs: list


@dataclass
class SolveReport:
    stages: list = field(default_factory=list)
    orientation_init: int = -1
    orientation_costs: list = field(default_factory=list)
    term_costs: dict = field(default_factory=dict)
    wall_time: float = 0.0
    # per-stage output states and full-objective costs (not serialized)
    states: dict = field(default_factory=dict, repr=False)
    full_costs: dict = field(default_factory=dict)

    def to_dict(self, include_time: bool = False) -> dict:
        d = {"stages": [s.__dict__ for s in self.stages], "orientation_init": self.orientation_init,
             "orientation_costs": self.orientation_costs, "term_costs": self.term_costs,
             "full_costs": self.full_costs}
        if include_time:
            d["wall_time"] = self.wall_time
        return d


@dataclass(frozen=True)
class StageConfig:
    enabled: bool = True
    options: SolverOptions = SolverOptions()
    weights: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    weights: CostWeights = CostWeights()
    # penalty weights are raised where their constraint should hold tightly;
    # the final stage keeps the torque regularizer weak so it cannot repose
    # joints the images do not observe
    stage1: StageConfig = StageConfig(options=SolverOptions(max_iterations=100),
                                      weights={"contact_penalty": 1e6})
    stage2: StageConfig = StageConfig(options=SolverOptions(max_iterations=30),
                                      weights={"dynamics_penalty": 1e6})
    stage3: StageConfig = StageConfig(options=SolverOptions(max_iterations=50),
                                      weights={"contact_penalty": 1e7, "torque": 1e-7})
    orientation_iterations: int = 15
    mu: float = 0.8
    gravity: tuple = (0.0, -9.81, 0.0)


def _run(problem: Problem, state: State, kinds, groups, ground, name: str,
         options: SolverOptions):
    free = problem.active_mask(groups)
    sp = StageProblem(problem, kinds, free, ground)
    state, rep = levenberg_marquardt(sp, state, options)
    log.info("%s: %d iterations, cost %.6e -> %.6e (%s)", name, rep.iterations, rep.initial_cost,
             rep.final_cost, rep.termination)
    return state, StageReport(name, rep.iterations, rep.initial_cost, rep.final_cost, rep.termination,
                              rep.accepted_costs)


def stage1_kinematics(problem: Problem, state: State, options: SolverOptions = SolverOptions()):
    """Kinematics only: controls frozen, dynamics terms dropped."""
    # the plane's tilt is pinned only by gravity, which enters through the
    # dynamics: keep the initial normal and adjust the offset
    return _run(problem, state, STAGE1_KINDS, ("kinematic",), (False, False, True), "stage1", options)


def stage2_forces(problem: Problem, state: State, options: SolverOptions = SolverOptions()):
    """Controls only, kinematics frozen."""
    return _run(problem, state, STAGE2_KINDS, ("control",), False, "stage2", options)


def stage3_full(problem: Problem, state: State, options: SolverOptions = SolverOptions()):
    return _run(problem, state, tuple({b.kind for b in problem.blocks}), ("kinematic", "control"), True,
                "stage3", options)


def with_weights(problem: Problem, measurements, overrides: dict, prior=None, object_spec=None) -> Problem:
    if not overrides:
        return problem
    return assemble_problem(problem.human, measurements, problem.weights.updated(**overrides), prior,
                            object_spec, problem.mu, problem.gravity)


# --------------------------------------------------------------------------
# initialization


def object_orientation_inits(camera=None) -> list:
    """Four candidate object base rotations: identity and 90/90/180 degree
    turns about the camera x, y and y axes, expressed in world axes."""
    Rwc = np.eye(3) if camera is None else camera.world_from_camera.rotation.matrix()
    turns = [np.zeros(3), [np.pi / 2, 0, 0], [0, np.pi / 2, 0], [0, np.pi, 0]]
    out = []
    for w in turns:
        Rc = Rotation.from_axis_angle(w).matrix()
        out.append(Rotation.from_matrix(Rwc @ Rc @ Rwc.T if camera is not None else Rc).quat)
    return out


def backproject(camera, uv, depth) -> np.ndarray:
    """World point on the pixel ray ``uv`` at camera depth ``depth``."""
    pc = np.array([(uv[0] - camera.cx) / camera.fx * depth, (uv[1] - camera.cy) / camera.fy * depth, depth])
    P = camera.world_from_camera
    return P.rotation.apply(pc) + P.translation


def object_base_for(problem: Problem, measurements, quat, depth) -> np.ndarray:
    """Object base pose whose handle midpoint reprojects onto the measured
    endpoint midpoint (averaged over frames with both endpoints)."""
    ep = np.asarray(measurements.endpoints2d, float)
    cf = np.asarray(measurements.endpoint_conf, float)
    ok = (cf >= 0.1).all(axis=1)
    mid = ep[ok].mean(axis=(0, 1)) if ok.any() else ep.mean(axis=(0, 1))
    c = backproject(problem.camera, mid, depth)
    R = K.quat_to_rot(np.asarray(quat, float))
    Lh = problem.obj.handle_length
    return np.concatenate([c - R @ np.array([0.5 * Lh, 0, 0]), quat])


def initial_state(problem: Problem, measurements, q_h=None, q_o=None) -> State:
    """Warm start from per-frame human configurations (heuristic if absent).

    Velocities come from backward differences, contact coordinates from the
    nearest feasible point, the ground from the lowest active sole vertex.
    """
    L = problem.layout
    T = problem.n_frames
    if q_h is None:
        q_h = heuristic_human_init(problem, measurements)
    q_h = np.asarray(q_h, float)
    X = np.array([L.pack(qh=q_h[t]) for t in range(T)])
    if problem.has_object:
        if q_o is None:
            depth = _human_depth(problem, q_h)
            base = object_base_for(problem, measurements, object_orientation_inits(problem.camera)[0], depth)
            q_o = np.tile(base, (T, 1))
        X[:, L.amb["qo"]] = np.asarray(q_o, float)[:, :7]
    G = _ground_init(problem, X)
    _fill_derived(problem, X, G)
    return State(X, G)


def _human_depth(problem, q_h) -> float:
    Rcw_p = problem.camera.to_camera(np.asarray(q_h)[:, :3].mean(axis=0))
    return float(Rcw_p[2])


def _ground_init(problem: Problem, X) -> np.ndarray:
    a = -problem.gravity / np.linalg.norm(problem.gravity)
    L = problem.layout
    heights = []
    for t in range(problem.n_frames):
        Rw, pw = K.forward_kinematics(problem.human.tree, X[t][L.amb["qh"]])
        for p in problem.schedule.active(t):
            if p.target == GROUND:
                heights.append(a @ (pw[p.joint] + Rw[p.joint] @ p.offset))
    if not heights:
        for t in range(problem.n_frames):
            Rw, pw = K.forward_kinematics(problem.human.tree, X[t][L.amb["qh"]])
            for j, verts in problem.human.sole_vertices.items():
                heights.extend(a @ (pw[j] + Rw[j] @ v) for v in verts)
    b = float(np.median(heights)) if heights else 0.0
    return np.concatenate([a, [b]])


def _fill_derived(problem: Problem, X, G):
    """Velocities, contact coordinates and force guesses consistent with q."""
    L = problem.layout
    T = problem.n_frames
    dt = problem.dt
    for t in range(1, T):
        X[t, L.amb["vh"]] = K.config_difference(problem.human.tree, X[t - 1, L.amb["qh"]].copy(),
                                                X[t, L.amb["qh"]].copy()) / dt
        if problem.has_object:
            X[t, L.amb["vo"]] = K.config_difference(L.base_tree, X[t - 1, L.amb["qo"]].copy(),
                                                    X[t, L.amb["qo"]].copy()) / dt
    if T > 1:
        X[0, L.amb["vh"]] = X[1, L.amb["vh"]]
        X[0, L.amb["vo"]] = X[1, L.amb["vo"]]
    from .contact import GroundPlane
    plane = GroundPlane(G[:3], G[3], problem.mu)
    weight = problem.human.total_mass * np.linalg.norm(problem.gravity)
    cmu = np.cos(problem.mu)
    for t in range(T):
        Rw, pw = K.forward_kinematics(problem.human.tree, X[t][L.amb["qh"]])
        active = problem.schedule.active(t)
        ng = sum(p.target == GROUND for p in active)
        if problem.has_object:
            Ro = K.quat_to_rot(X[t][L.amb["qo"]][3:])
            po = X[t][L.amb["qo"]][:3]
        for p in active:
            ph = pw[p.joint] + Rw[p.joint] @ p.offset
            if p.target == GROUND:
                X[t, L.amb["c_gnd"].start + 2 * p.index + np.arange(2)] = plane.coordinates(ph)
                X[t, L.amb["lam"].start + 4 * p.index + np.arange(4)] = weight / (4 * ng * cmu)
            else:
                s = float(Ro[:, 0] @ (ph - po))
                X[t, L.amb["c_obj"].start + p.index] = np.clip(s, 0.0, problem.obj.handle_length)


def heuristic_human_init(problem: Problem, measurements) -> np.ndarray:
    """Rest pose facing the camera, upright along -gravity, placed on the ray
    through the measured hip midpoint at a depth from the torso pixel height."""
    h = problem.human
    names = h.marker_names
    j2 = np.asarray(measurements.joints2d, float)
    q0 = h.neutral()
    from .dynamics import forward_kinematics
    ref = forward_kinematics(h, q0).markers
    neck, rh, lh = names.index("neck"), names.index("r_hip"), names.index("l_hip")
    torso = np.linalg.norm(ref[neck] - 0.5 * (ref[rh] + ref[lh]))
    pelvis_off = q0[:3] - 0.5 * (ref[rh] + ref[lh])
    Rwc = problem.camera.world_from_camera.rotation.matrix()
    up = -problem.gravity / np.linalg.norm(problem.gravity)
    # face the camera: body +z towards the camera centre, body +y along up
    fwd = -(Rwc[:, 2] - (Rwc[:, 2] @ up) * up)
    fwd /= np.linalg.norm(fwd)
    Rb = np.column_stack([np.cross(up, fwd), up, fwd])
    quat = Rotation.from_matrix(Rb).quat
    out = []
    for t in range(problem.n_frames):
        hip = 0.5 * (j2[t, rh] + j2[t, lh])
        px = np.linalg.norm(j2[t, neck] - hip)
        depth = problem.camera.fx * torso / max(px, 1.0)
        q = q0.copy()
        q[:3] = backproject(problem.camera, hip, depth) + Rb @ pelvis_off
        q[3:7] = quat
        out.append(q)
    return np.array(out)


# --------------------------------------------------------------------------
# pipeline


def solve_pipeline(human, measurements, config: PipelineConfig = PipelineConfig(), prior=None,
                   object_spec=None, q_h_init=None, q_o_init=None):
    """Run initialization and the three stages; returns (Problem, State, SolveReport)."""
    if measurements.n_frames < 2:
        raise SolverError("at least 2 frames are required")
    t0 = time.perf_counter()
    W = config.weights
    kw = dict(prior=prior, object_spec=object_spec, mu=config.mu, gravity=np.asarray(config.gravity, float))
    full = assemble_problem(human, measurements, W, **kw)
    rep = SolveReport()

    built = {}

    def stage_problem(sc: StageConfig):
        if not sc.weights:
            return full
        key = tuple(sorted(sc.weights.items()))
        if key not in built:
            built[key] = assemble_problem(human, measurements, W.updated(**sc.weights), **kw)
        return built[key]

    objective = None

    def keep(name, st, r):
        # stage outputs are compared on the final stage's objective
        nonlocal objective
        if objective is None:
            objective = stage_problem(config.stage3)
        rep.stages.append(r)
        rep.states[name] = st
        rep.full_costs[name] = objective.cost(st.X, st.G)

    state = initial_state(full, measurements, q_h_init, q_o_init)
    if config.stage1.enabled:
        p1 = stage_problem(config.stage1)
        if full.has_object and q_o_init is None:
            depth = _human_depth(full, state.X[:, full.layout.amb["qh"]])
            best = None
            short = replace(config.stage1.options, max_iterations=config.orientation_iterations)
            for i, quat in enumerate(object_orientation_inits(full.camera)):
                X = state.X.copy()
                X[:, full.layout.amb["qo"]] = object_base_for(full, measurements, quat, depth)
                _fill_derived(full, X, state.G)
                s, r = stage1_kinematics(p1, State(X, state.G.copy()), short)
                rep.orientation_costs.append(r.final_cost)
                if best is None or r.final_cost < best[1].final_cost:
                    best = (i, r, s)
            rep.orientation_init = best[0]
            state, r = stage1_kinematics(p1, best[2], config.stage1.options)
            r.initial_cost = best[1].initial_cost
            r.accepted_costs = best[1].accepted_costs + r.accepted_costs[1:]
            r.iterations += best[1].iterations
        else:
            state, r = stage1_kinematics(p1, state, config.stage1.options)
        keep("stage1", state, r)
    if config.stage2.enabled:
        state, r = stage2_forces(stage_problem(config.stage2), state, config.stage2.options)
        keep("stage2", state, r)
    if config.stage3.enabled:
        state, r = stage3_full(stage_problem(config.stage3), state, config.stage3.options)
        keep("stage3", state, r)
    rep.term_costs = full.block_cost(state.X, state.G)
    rep.wall_time = time.perf_counter() - t0
    return full, state, rep

