"""Residual terms of the discretized estimation problem.

The problem is a sum of squared residual blocks ``F = sum ||r_b||^2``.  Every
block touches at most two consecutive frames plus the global ground plane.
Block Jacobians come from complex-step differentiation of the compiled
residual kernels, except for the control columns of the dynamics blocks,
which are linear and computed in closed form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources

import numpy as np

from . import _blocks as B
from . import _kernels as K
from .contact import GROUND, OBJECT, ContactSchedule, GroundPlane, build_contact_points
from .dynamics import GRAVITY
from .model import Joint, JointKind, KinematicModel, Link, build_object_model
from .spatial import Placement

Z_MIN = 1e-3
CONFIDENCE_MIN = 0.1


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    world_from_camera: Placement = field(default_factory=Placement.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def kernel_args(self):
        R = self.world_from_camera.rotation.matrix()
        Rcw = np.ascontiguousarray(R.T)
        tcw = -Rcw @ self.world_from_camera.translation
        return Rcw, tcw, np.array([self.fx, self.fy, self.cx, self.cy], float)

    def to_camera(self, p) -> np.ndarray:
        Rcw, tcw, _ = self.kernel_args()
        return Rcw @ np.asarray(p, float) + tcw

    def matrix(self) -> np.ndarray:
        """3 x 4 projection matrix ``K [R | t]`` from world coordinates."""
        Rcw, tcw, _ = self.kernel_args()
        Kc = np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])
        return Kc @ np.hstack([Rcw, tcw[:, None]])


def project(camera: Camera, p) -> np.ndarray:
    """Pinhole projection of a world point; raises if it is not in front."""
    Rcw, tcw, intr = camera.kernel_args()
    u, v, z = B.project(Rcw, tcw, intr, np.asarray(p, float))
    if z <= Z_MIN:
        raise ValueError(f"point at depth {z:.3g} m is behind the camera")
    return np.array([u, v])


def huber(r, delta: float) -> float:
    """Huber loss of the norm of ``r``."""
    if delta <= 0:
        raise ValueError("Huber threshold must be positive")
    s = float(np.linalg.norm(r))
    return 0.5 * s * s if s <= delta else delta * (s - 0.5 * delta)


# --------------------------------------------------------------------------
# pose prior


@dataclass(frozen=True)
class GmmPrior:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        mu = np.atleast_2d(np.asarray(self.means, float))
        S = np.asarray(self.covariances, float).reshape(len(w), mu.shape[1], mu.shape[1])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if mu.shape[0] != len(w):
            raise ValueError("one mean per mixture component is required")
        chol = []
        for m, Sm in enumerate(S):
            if not np.allclose(Sm, Sm.T, atol=1e-12):
                raise ValueError(f"covariance {m} is not symmetric")
            try:
                chol.append(np.linalg.cholesky(Sm))
            except np.linalg.LinAlgError:
                raise ValueError(f"covariance {m} is not positive definite") from None
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", S)
        object.__setattr__(self, "_chol", np.array(chol))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def kernel_args(self):
        """(means, inverse Cholesky factors, log normalizers, NLL floor)."""
        d = self.dim
        Linv = np.array([np.linalg.inv(L) for L in self._chol])
        with np.errstate(divide="ignore"):
            logc = (np.log(self.weights) - 0.5 * d * np.log(2 * np.pi)
                    - np.array([np.log(np.diag(L)).sum() for L in self._chol]))
        logc = np.where(np.isfinite(logc), logc, -1e300)
        floor = -np.logaddexp.reduce(logc)
        return self.means, np.ascontiguousarray(np.tril(Linv)), logc, float(floor)

    def nll(self, y) -> float:
        means, Linv, logc, _ = self.kernel_args()
        return float(B.gmm_nll(np.asarray(y, float), means, Linv, logc))

    def to_dict(self) -> dict:
        return {"schema_version": "1.0", "n_components": len(self.weights),
                "weights": self.weights.tolist(), "means": self.means.tolist(),
                "cholesky": self._chol.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GmmPrior":
        L = np.asarray(d["cholesky"], float)
        if len(d["weights"]) != int(d.get("n_components", len(d["weights"]))):
            raise ValueError("n_components does not match the number of weights")
        return cls(np.asarray(d["weights"]), np.asarray(d["means"]), L @ np.swapaxes(L, 1, 2))


def default_prior() -> GmmPrior:
    """Bundled 3-component prior over the 69 spherical-joint rotations."""
    text = resources.files("contactrecon.data").joinpath("gmm_prior.json").read_text()
    return GmmPrior.from_dict(json.loads(text))


# per-joint spread (rad) of the synthetic prior, keyed by joint name stem:
# spine and shoulder girdle nearly rigid, limbs broad
_PRIOR_STD = {"hip": 0.8, "knee": 0.8, "shoulder": 0.8, "elbow": 0.8, "ankle": 0.4, "wrist": 0.4,
              "neck": 0.25, "head": 0.25, "spine": 0.12, "collar": 0.1, "foot": 0.15, "hand": 0.15}
_LIMBS = ("hip", "knee", "shoulder", "elbow")


def _joint_stem(name: str) -> str:
    stem = name.split("_", 1)[-1]
    return stem.rstrip("0123456789")


def synthetic_prior(dim: int = 69, n_components: int = 3, seed: int = 0, joint_names=None) -> GmmPrior:
    """Mixture around the rest pose shaped like a human pose prior.

    ``joint_names`` lists the non-base spherical joints (three dimensions
    each); the default human model's joints are used when omitted.  The
    spine, collars, hands and feet get tight spreads, the limbs broad ones;
    the extra components shift only the limb joints.
    """
    if joint_names is None:
        from .model import build_human_model
        joint_names = [j.name for j in build_human_model().joints[1:]]
    if 3 * len(joint_names) != dim:
        raise ValueError(f"prior dimension {dim} does not match {len(joint_names)} joints")
    rng = np.random.default_rng(seed)
    stems = [_joint_stem(n) for n in joint_names]
    std = np.repeat([_PRIOR_STD.get(s, 0.3) for s in stems], 3)
    limb = np.repeat([s in _LIMBS for s in stems], 3)
    w = rng.uniform(0.5, 1.0, n_components)
    means = np.where(limb, rng.normal(scale=0.3, size=(n_components, dim)), 0.0)
    means[0] = 0.0
    covs = []
    for _ in range(n_components):
        # mild random correlations on top of the per-joint spread
        A = rng.normal(scale=0.2, size=(dim, dim)) * std[:, None] / np.sqrt(dim)
        covs.append(np.diag(std ** 2) + A @ A.T)
    return GmmPrior(w / w.sum(), means, np.array(covs))


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class CostWeights:
    data: float = 1.0
    prior: float = 2e-2
    torque: float = 1e-5
    smooth_human: float = 1e-2
    smooth_object: float = 1e-2
    contact_fixed: float = 10.0
    contact_sliding: float = 0.1
    force_smooth: float = 1e-4
    contact_penalty: float = 1e3
    dynamics_penalty: float = 1e2
    velocity_penalty: float = 1e3
    huber_delta: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"cost weight {f.name} must be >= 0")
        if self.huber_delta <= 0:
            raise ValueError("huber_delta must be positive")

    def updated(self, **kw) -> "CostWeights":
        return replace(self, **kw)


# --------------------------------------------------------------------------
# variable layout

SEGMENTS = ("qh", "qo", "vh", "vo", "c_obj", "c_gnd", "tau", "lam", "f_obj")
KINEMATIC = ("qh", "qo", "vh", "vo", "c_obj", "c_gnd")
CONTROL = ("tau", "lam", "f_obj")


def _object_base_model() -> KinematicModel:
    return KinematicModel("object_base", (Joint("base", JointKind.FREE_FLOATING, -1, np.zeros(3)),),
                          (Link(0.0, np.zeros(3), np.zeros((3, 3))),))


class Layout:
    """Per-frame variable layout.  Ambient vectors hold quaternions; tangent
    vectors are what the solver steps in."""

    def __init__(self, human: KinematicModel, obj: KinematicModel | None, n_ground: int, n_object: int):
        self.human = human
        self.obj = obj
        self.n_ground = n_ground
        self.n_object = n_object
        has = obj is not None
        sizes = {
            "qh": (human.nq, human.nv), "qo": (7, 6) if has else (0, 0),
            "vh": (human.nv, human.nv), "vo": (6, 6) if has else (0, 0),
            "c_obj": (n_object, n_object), "c_gnd": (2 * n_ground, 2 * n_ground),
            "tau": (human.nv - 6, human.nv - 6), "lam": (4 * n_ground, 4 * n_ground),
            "f_obj": (6 * n_object, 6 * n_object),
        }
        self.amb, self.tan = {}, {}
        a = t = 0
        for s in SEGMENTS:
            na, nt = sizes[s]
            self.amb[s] = slice(a, a + na)
            self.tan[s] = slice(t, t + nt)
            a += na
            t += nt
        self.nx, self.nt = a, t
        self.lay = np.array([self.amb[s].start for s in SEGMENTS] + [self.nx, human.nq, human.nv,
                            n_object, n_ground], dtype=np.int64)
        self.base_tree = _object_base_model().tree
        # tangent -> ambient perturbation tables
        tkind = np.zeros(t, np.int64)
        tamb = np.zeros(t, np.int64)
        taxis = np.zeros(t, np.int64)
        for s in SEGMENTS:
            ts, as_ = self.tan[s], self.amb[s]
            tamb[ts] = np.arange(as_.start, as_.start + (ts.stop - ts.start))
        self._fill_config(human, self.tan["qh"].start, self.amb["qh"].start, tkind, tamb, taxis)
        if has:
            tkind[self.tan["qo"].start + 3:self.tan["qo"].stop] = 1
            tamb[self.tan["qo"]] = [self.amb["qo"].start + i for i in range(3)] + [self.amb["qo"].start + 3] * 3
            taxis[self.tan["qo"].start + 3:self.tan["qo"].stop] = [0, 1, 2]
        self.tkind, self.tamb, self.taxis = tkind, tamb, taxis
        self.lower = np.full(t, -np.inf)
        self.upper = np.full(t, np.inf)
        self.lower[self.tan["lam"]] = 0.0
        if n_object:
            self.lower[self.tan["c_obj"]] = 0.0
            self.upper[self.tan["c_obj"]] = obj.handle_length

    @staticmethod
    def _fill_config(model, t0, a0, tkind, tamb, taxis):
        for j, iq, iv in zip(model.joints, model.idx_q, model.idx_v):
            if j.kind == JointKind.FREE_FLOATING:
                tamb[t0 + iv:t0 + iv + 3] = a0 + iq + np.arange(3)
                tkind[t0 + iv + 3:t0 + iv + 6] = 1
                tamb[t0 + iv + 3:t0 + iv + 6] = a0 + iq + 3
                taxis[t0 + iv + 3:t0 + iv + 6] = [0, 1, 2]
            elif j.kind == JointKind.SPHERICAL:
                tkind[t0 + iv:t0 + iv + 3] = 1
                tamb[t0 + iv:t0 + iv + 3] = a0 + iq
                taxis[t0 + iv:t0 + iv + 3] = [0, 1, 2]
            else:
                tamb[t0 + iv] = a0 + iq

    def pack(self, **parts) -> np.ndarray:
        x = np.zeros(self.nx)
        x[self.amb["qh"]] = self.human.neutral()
        if self.obj is not None:
            x[self.amb["qo"].start + 3] = 1.0
        for k, v in parts.items():
            x[self.amb[k]] = v
        return x

    def get(self, x, seg):
        return x[..., self.amb[seg]]

    def retract(self, x, dx) -> np.ndarray:
        """Manifold update of one frame's ambient vector by a tangent step."""
        out = x.copy()
        qh, th = self.amb["qh"], self.tan["qh"]
        out[qh] = K.config_integrate(self.human.tree, x[qh].copy(), dx[th].copy(), 1.0)
        if self.obj is not None:
            qo, to = self.amb["qo"], self.tan["qo"]
            out[qo] = K.config_integrate(self.base_tree, x[qo].copy(), dx[to].copy(), 1.0)
        for s in SEGMENTS[2:]:
            out[self.amb[s]] = x[self.amb[s]] + dx[self.tan[s]]
        return out

    def object_config(self, x) -> np.ndarray:
        return np.concatenate([x[self.amb["qo"]], [self.obj.handle_length], x[self.amb["c_obj"]]])

    def object_velocity(self, x) -> np.ndarray:
        return np.concatenate([x[self.amb["vo"]], np.zeros(1 + self.n_object)])


def ground_basis(g) -> np.ndarray:
    R = B.plane_frame(np.asarray(g[:3], float))
    return np.ascontiguousarray(np.vstack([R[:, 0], R[:, 2]]))


def retract_ground(g, dg) -> np.ndarray:
    E = ground_basis(g)
    a = g[:3] + dg[0] * E[0] + dg[1] * E[1]
    return np.concatenate([a / np.linalg.norm(a), [g[3] + dg[2]]])


# --------------------------------------------------------------------------
# residual blocks


@dataclass
class ResidualBlock:
    """One residual term.  Column arrays index the tangent vectors of the
    previous frame, the current frame and the ground plane ``(d1, d2, db)``."""
    kind: str
    frame: int
    dim: int
    fun: object
    params: tuple
    cols_prev: np.ndarray
    cols_cur: np.ndarray
    cols_ground: np.ndarray
    ctrl_fun: object = None
    ctrl_start: int = 0

    @property
    def frames(self) -> tuple:
        return (self.frame - 1, self.frame) if len(self.cols_prev) or self.frame > 0 else (self.frame,)

    def _args(self, X, G):
        t = self.frame
        xp = X[t - 1] if t > 0 else X[t]
        return xp, X[t], G

    def residual(self, X, G) -> np.ndarray:
        xp, xc, g = self._args(X, G)
        return self.fun(self.params, xp, xc, g)

    def linearize(self, X, G, layout: Layout, cp=None, cc=None, cg=None):
        """Residual and Jacobian blocks for the given column subsets."""
        cp = self.cols_prev if cp is None else cp
        cc = self.cols_cur if cc is None else cc
        cg = self.cols_ground if cg is None else cg
        xp, xc, g = self._args(X, G)
        if self.ctrl_fun is None:
            r, J = B.JACOBIANS[self.fun](self.params, xp, xc, g, cp, cc, cg,
                                 layout.tkind, layout.tamb, layout.taxis, ground_basis(g))
            np_, nc = len(cp), len(cc)
            return r, J[:, :np_], J[:, np_:np_ + nc], J[:, np_ + nc:]
        ctrl = cc >= self.ctrl_start
        kin = cc[~ctrl]
        r, J = B.JACOBIANS[self.fun](self.params, xp, xc, g, cp, kin, cg,
                             layout.tkind, layout.tamb, layout.taxis, ground_basis(g))
        np_, nk = len(cp), len(kin)
        Jc = np.zeros((len(r), len(cc)))
        Jc[:, ~ctrl] = J[:, np_:np_ + nk]
        if ctrl.any():
            Jctrl = self.ctrl_fun(self.params, xc, g)
            Jc[:, ctrl] = Jctrl[:, cc[ctrl] - self.ctrl_start]
        return r, J[:, :np_], Jc, J[:, np_ + nk:]


def _i64(a, cols=None):
    a = np.asarray(a, dtype=np.int64)
    return a.reshape(-1, cols) if cols else a.reshape(-1)


def _seg_cols(layout: Layout, *segs) -> np.ndarray:
    return np.concatenate([np.arange(layout.tan[s].start, layout.tan[s].stop) for s in segs]).astype(np.int64)


@dataclass
class Problem:
    human: KinematicModel
    obj: KinematicModel | None
    layout: Layout
    schedule: ContactSchedule
    points: list
    blocks: list
    weights: CostWeights
    camera: Camera
    dt: float
    n_frames: int
    mu: float
    gravity: np.ndarray

    @property
    def has_object(self) -> bool:
        return self.obj is not None

    def block_cost(self, X, G, kinds=None) -> dict:
        out = {}
        for b in self.blocks:
            if kinds is None or b.kind in kinds:
                r = b.residual(X, G)
                out[b.kind] = out.get(b.kind, 0.0) + float(r @ r)
        return out

    def cost(self, X, G, kinds=None) -> float:
        return float(sum(self.block_cost(X, G, kinds).values()))

    def variable_dim(self) -> int:
        return self.n_frames * self.layout.nt + 3

    def residual_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def active_mask(self, groups=("kinematic", "control")) -> np.ndarray:
        """Tangent variables that some block depends on, restricted to groups."""
        L = self.layout
        m = np.zeros((self.n_frames, L.nt), bool)
        for t in range(self.n_frames):
            if "kinematic" in groups:
                for s in ("qh", "qo", "vh", "vo"):
                    m[t, L.tan[s]] = True
            for p in self.schedule.active(t):
                if "kinematic" in groups:
                    if p.target == GROUND:
                        m[t, L.tan["c_gnd"].start + 2 * p.index + np.arange(2)] = True
                    else:
                        m[t, L.tan["c_obj"].start + p.index] = True
                if "control" in groups and t > 0:
                    if p.target == GROUND:
                        m[t, L.tan["lam"].start + 4 * p.index + np.arange(4)] = True
                    else:
                        m[t, L.tan["f_obj"].start + 6 * p.index + np.arange(6)] = True
            if "control" in groups and t > 0:
                m[t, L.tan["tau"]] = True
        return m


def _contact_tables(points, schedule, t):
    active = schedule.active(t)
    kap = [(p.joint, 0 if p.target == GROUND else 1, 2 + p.slot, p.index) for p in active]
    dyn_h = [(p.joint, 0 if p.target == GROUND else 1, p.index) for p in active]
    dyn_o = [(2 + p.slot, p.index) for p in active if p.target == OBJECT]
    offs = np.array([p.offset for p in active], float).reshape(-1, 3)
    return active, _i64(kap, 4) if kap else np.zeros((0, 4), np.int64), \
        _i64(dyn_h, 3) if dyn_h else np.zeros((0, 3), np.int64), \
        _i64(dyn_o, 2) if dyn_o else np.zeros((0, 2), np.int64), offs


def assemble_problem(human: KinematicModel, measurements, weights: CostWeights | None = None,
                     prior: GmmPrior | None = None, object_spec: dict | None = None,
                     mu: float = 0.8, gravity=GRAVITY) -> Problem:
    """Build the residual blocks and variable layout for a measurement sequence.

    ``measurements`` provides ``n_frames``, ``dt``, ``joints2d``/``joint_conf``,
    optional ``endpoints2d``/``endpoint_conf``, ``contacts`` (joint name ->
    flags), ``contact_targets`` (joint name -> "ground"|"object") and ``camera``.
    """
    W = weights or CostWeights()
    prior = prior or default_prior()
    m = measurements
    T = m.n_frames
    has_obj = m.endpoints2d is not None
    decl = [(name, m.contact_targets[name]) for name in m.contacts]
    points = build_contact_points(human, decl)
    schedule = ContactSchedule({human.joint_index(n): f for n, f in m.contacts.items()}, points)
    if schedule.flags and schedule.n_frames != T:
        raise ValueError(f"contact flags have {schedule.n_frames} frames, measurements have {T}")
    n_obj_pts = schedule.n_object
    if n_obj_pts and not has_obj:
        raise ValueError("object contacts declared but the measurements contain no object endpoints")
    obj = build_object_model(object_spec, n_obj_pts) if has_obj else None
    L = Layout(human, obj, schedule.n_ground, n_obj_pts)
    lay = L.lay
    otree = obj.tree if has_obj else _object_base_model().tree
    Lh = float(obj.handle_length) if has_obj else 0.0
    htree = human.tree
    dt = float(m.dt)
    grav = np.asarray(gravity, float)
    cam_R, cam_t, intr = m.camera.kernel_args()
    mk_joint = _i64([mk.joint for mk in human.markers])
    mk_off = np.array([mk.offset for mk in human.markers], float)
    means, Linv, logc, floor = prior.kernel_args()
    qoffs = _i64([iq for j, iq in zip(human.joints, human.idx_q) if j.kind == JointKind.SPHERICAL])
    if 3 * len(qoffs) != prior.dim:
        raise ValueError(f"prior dimension {prior.dim} does not match {3 * len(qoffs)} spherical DoF")
    bodies_h = np.arange(human.njoints, dtype=np.int64)
    bodies_o = np.array([0, 1], np.int64)
    ctrl_start = L.tan["tau"].start

    kin_cols = _seg_cols(L, "qh", "qo")
    qh_cols = _seg_cols(L, "qh")
    prior_cols = qh_cols[6:]
    none = np.zeros(0, np.int64)
    g3 = np.arange(3, dtype=np.int64)
    blocks = []

    def add(kind, t, fun, params, cp, cc, cg, ctrl_fun=None):
        x0 = L.pack()
        g0 = np.array([0.0, 1.0, 0.0, 0.0])
        dim = len(fun(params, x0, x0, g0))
        if dim:
            blocks.append(ResidualBlock(kind, t, dim, fun, params, cp, cc, cg, ctrl_fun, ctrl_start))

    conf = np.asarray(m.joint_conf, float)
    for t in range(T):
        meas = np.asarray(m.joints2d[t], float)
        valid = conf[t] >= CONFIDENCE_MIN
        if has_obj:
            meas = np.vstack([meas, np.asarray(m.endpoints2d[t], float)])
            valid = np.concatenate([valid, np.asarray(m.endpoint_conf[t], float) >= CONFIDENCE_MIN])
        if valid.any():
            add("data", t, B.r_data,
                (htree, otree, lay, has_obj, Lh, mk_joint, mk_off, cam_R, cam_t, intr,
                 np.ascontiguousarray(meas), valid.astype(np.int64), np.sqrt(W.data), W.huber_delta, Z_MIN),
                none, kin_cols, none)
        add("prior", t, B.r_prior, (lay, qoffs, means, Linv, logc, floor, np.sqrt(W.prior)),
            none, prior_cols, none)
        add("smooth_human", t, B.r_smooth_h, (htree, lay, bodies_h, dt, np.sqrt(W.smooth_human), t > 0),
            _seg_cols(L, "vh") if t > 0 else none, _seg_cols(L, "qh", "vh"), none)
        if has_obj:
            add("smooth_object", t, B.r_smooth_o,
                (otree, lay, Lh, bodies_o, dt, np.sqrt(W.smooth_object), t > 0),
                _seg_cols(L, "vo") if t > 0 else none, _seg_cols(L, "qo", "vo", "c_obj"), none)
        active, kap, dyn_h, dyn_o, offs = _contact_tables(points, schedule, t)
        if active:
            cc = [kin_cols]
            for p in active:
                if p.target == GROUND:
                    cc.append(L.tan["c_gnd"].start + 2 * p.index + np.arange(2))
                else:
                    cc.append(L.tan["c_obj"].start + np.array([p.index]))
            add("contact_motion", t, B.r_kappa,
                (htree, otree, lay, has_obj, Lh, kap, offs, np.sqrt(W.contact_penalty)),
                none, np.unique(np.concatenate(cc)).astype(np.int64),
                g3 if any(p.target == GROUND for p in active) else none)
        if t == 0:
            continue
        add("torque", t, B.r_torque, (lay, np.sqrt(W.torque)), none, _seg_cols(L, "tau"), none)
        add("velocity", t, B.r_velocity, (htree, L.base_tree, lay, has_obj, dt, np.sqrt(W.velocity_penalty)),
            kin_cols, np.concatenate([kin_cols, _seg_cols(L, "vh", "vo")]), none)
        both = [p for p in active if schedule.is_active(p, t - 1)]
        if both:
            rows, wc, wf, colsets = [], [], [], []
            for p in both:
                wf_on = t >= 2
                if p.target == GROUND:
                    rows.append((0, p.index, wf_on))
                    wc.append(np.sqrt(W.contact_fixed * dt))
                    c = [L.tan["c_gnd"].start + 2 * p.index + np.arange(2)]
                    if wf_on:
                        c.append(L.tan["lam"].start + 4 * p.index + np.arange(4))
                else:
                    rows.append((1, p.index, wf_on))
                    wc.append(np.sqrt(W.contact_sliding * dt))
                    c = [L.tan["c_obj"].start + np.array([p.index])]
                    if wf_on:
                        c.append(L.tan["f_obj"].start + 6 * p.index + np.arange(6))
                wf.append(np.sqrt(W.force_smooth * dt))
                colsets.extend(c)
            cols = np.concatenate(colsets).astype(np.int64)
            add("contact_smooth", t, B.r_contact_smooth,
                (lay, _i64(rows, 3), np.array(wc), np.array(wf), float(mu), dt), cols, cols, none)
        hcols = [_seg_cols(L, "qh", "vh")]
        if has_obj:
            hcols.append(L.tan["qo"].start + np.arange(3, 6))
        hcols.append(_seg_cols(L, "tau"))
        for p in active:
            if p.target == GROUND:
                hcols.append(L.tan["lam"].start + 4 * p.index + np.arange(4))
            else:
                hcols.append(L.tan["f_obj"].start + 6 * p.index + np.arange(6))
        add("dynamics_human", t, B.r_dyn_h,
            (htree, lay, has_obj, dyn_h, offs, float(mu), grav, dt, np.sqrt(W.dynamics_penalty)),
            _seg_cols(L, "vh"), np.concatenate(hcols).astype(np.int64),
            g3 if any(p.target == GROUND for p in active) else none, B.dyn_h_controls)
        if has_obj:
            ocols = [_seg_cols(L, "qo", "vo")]
            for p in active:
                if p.target == OBJECT:
                    ocols.append(L.tan["c_obj"].start + np.array([p.index]))
            for p in active:
                if p.target == OBJECT:
                    ocols.append(L.tan["f_obj"].start + 6 * p.index + np.arange(6))
            add("dynamics_object", t, B.r_dyn_o,
                (otree, lay, Lh, dyn_o, grav, dt, np.sqrt(W.dynamics_penalty)),
                _seg_cols(L, "vo"), np.concatenate(ocols).astype(np.int64), none, B.dyn_o_controls)
    return Problem(human, obj, L, schedule, points, blocks, W, m.camera, dt, T, float(mu), grav)


BLOCK_KINDS = ("data", "prior", "smooth_human", "smooth_object", "contact_motion", "torque",
               "velocity", "contact_smooth", "dynamics_human", "dynamics_object")
