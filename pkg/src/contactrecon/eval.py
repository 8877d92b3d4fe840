"""Evaluation metrics and the synthetic ground-truth generator."""
from __future__ import annotations

import numpy as np
from scipy.optimize import lsq_linear

from . import _blocks as B
from . import _kernels as K
from .contact import GROUND, OBJECT
from .costs import Camera, assemble_problem
from .dynamics import GRAVITY, AppliedContact, dynamics_residual
from .io import MARKER_NAMES, MeasurementSequence, Solution, solution_from_state
from .model import KinematicModel, build_human_model, build_object_model
from .solver import State
from .spatial import Placement, Rotation

SCENARIOS = ("static-stand", "lift-object", "swing-object", "walk-two-steps")
REFERENCE_RESOLUTION = (600, 400)
THRESHOLDS_PX = (25, 50, 100)


class DegenerateError(ValueError):
    pass


class SyntheticError(ValueError):
    pass


# --------------------------------------------------------------------------
# metrics


def rigid_align(source, target) -> Placement:
    """Rotation and translation (no scale) minimizing ``sum |R s + t - d|^2``."""
    S = np.asarray(source, float)
    D = np.asarray(target, float)
    if S.shape != D.shape or S.ndim != 2 or S.shape[1] != 3:
        raise ValueError("rigid_align expects two (N, 3) arrays of equal shape")
    if len(S) < 3:
        raise DegenerateError("at least 3 point pairs are required")
    cs, cd = S.mean(axis=0), D.mean(axis=0)
    H = (S - cs).T @ (D - cd)
    sv = np.linalg.svd(S - cs, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateError("source points are collinear or coincident")
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Placement(Rotation.from_matrix(R), cd - R @ cs)


def _apply(P: Placement, pts):
    return pts @ P.rotation.matrix().T + P.translation


def mpjpe_per_frame(estimated, reference) -> np.ndarray:
    """Per-frame mean joint error after rigid alignment, in millimetres."""
    E = np.asarray(estimated, float)
    R = np.asarray(reference, float)
    if E.shape != R.shape:
        raise ValueError(f"shape mismatch {E.shape} vs {R.shape}")
    out = []
    for e, r in zip(E, R):
        P = rigid_align(e, r)
        out.append(np.linalg.norm(_apply(P, e) - r, axis=1).mean() * 1000.0)
    return np.array(out)


def mpjpe(estimated, reference) -> float:
    return float(mpjpe_per_frame(estimated, reference).mean())


def force_error(estimated, reference, mask=None):
    """Mean Euclidean error of the linear (N) and moment (N m) parts.

    Inputs are ``(n, 6)`` wrenches ``[force, moment]`` already expressed at
    the contact point in world axes; ``mask`` selects the frames compared.
    """
    E = np.asarray(estimated, float).reshape(-1, 6)
    R = np.asarray(reference, float).reshape(-1, 6)
    if mask is not None:
        m = np.asarray(mask, bool).reshape(-1)
        E, R = E[m], R[m]
    if len(E) == 0:
        return 0.0, 0.0
    d = E - R
    return float(np.linalg.norm(d[:, :3], axis=1).mean()), float(np.linalg.norm(d[:, 3:], axis=1).mean())


def endpoint_accuracy(estimated, annotated, image_size=REFERENCE_RESOLUTION, thresholds=THRESHOLDS_PX):
    """Fractions of endpoints within each pixel threshold at 600x400 scale."""
    E = np.asarray(estimated, float).reshape(-1, 2)
    A = np.asarray(annotated, float).reshape(-1, 2)
    if len(E) == 0:
        return tuple(1.0 for _ in thresholds)
    s = np.array([REFERENCE_RESOLUTION[0] / image_size[0], REFERENCE_RESOLUTION[1] / image_size[1]])
    d = np.linalg.norm((E - A) * s, axis=1)
    return tuple(float(np.mean(d <= th)) for th in thresholds)


# --------------------------------------------------------------------------
# solution-level evaluation


def solution_markers(human: KinematicModel, s: Solution) -> np.ndarray:
    out = []
    for q in s.q_h:
        Rw, pw = K.forward_kinematics(human.tree, q)
        out.append([pw[m.joint] + Rw[m.joint] @ m.offset for m in human.markers])
    return np.array(out)


def object_endpoints(s: Solution) -> np.ndarray:
    """World positions of handle end and head, ``(T, 2, 3)``."""
    out = []
    for q in s.q_o:
        R = K.quat_to_rot(q[3:7])
        out.append([q[:3], q[:3] + R[:, 0] * s.handle_length])
    return np.array(out)


def contact_wrenches(human: KinematicModel, s: Solution) -> dict:
    """World-axes wrenches per contact joint: soles summed at the ankle,
    point contacts at the contact point.  Returns ``{(joint, target): (W, mask)}``."""
    out = {}
    ids = {j.name: i for i, j in enumerate(human.joints)}
    for c in s.contacts:
        key = (c.joint, c.target)
        if key not in out:
            out[key] = (np.zeros((s.n_frames, 6)), np.zeros(s.n_frames, bool))
        W, mask = out[key]
        for t in np.flatnonzero(c.has_force):
            Rw, pw = K.forward_kinematics(human.tree, s.q_h[t])
            anchor = pw[ids[c.joint]] if c.vertex is not None else c.position[t]
            F = c.force_world[t, :3]
            W[t, :3] += F
            W[t, 3:] += c.force_world[t, 3:] + np.cross(c.position[t] - anchor, F)
            mask[t] = True
    return out


def contact_motion_error(s: Solution) -> float:
    """Largest distance between a contact point and its environment point."""
    worst = 0.0
    for c in s.contacts:
        for t in np.flatnonzero(c.active):
            if c.target == GROUND:
                pc = B.ground_point(np.asarray(s.ground, float), c.coords[t][0], c.coords[t][1])
            else:
                q = s.q_o[t]
                pc = q[:3] + K.quat_to_rot(q[3:7])[:, 0] * c.coords[t][0]
            worst = max(worst, float(np.linalg.norm(c.position[t] - pc)))
    return worst


def evaluate(human: KinematicModel, estimate: Solution, truth: Solution, camera: Camera | None = None,
             image_size=(1280, 720)) -> dict:
    """Metric report comparing a solution with ground truth."""
    per_frame = mpjpe_per_frame(solution_markers(human, estimate), solution_markers(human, truth))
    rep = {"mpjpe_mm": float(per_frame.mean()), "mpjpe_per_frame_mm": per_frame.tolist(),
           "contact_motion_max_m": contact_motion_error(estimate)}
    We, Wt = contact_wrenches(human, estimate), contact_wrenches(human, truth)
    forces = {}
    num = den = 0.0
    for key, (wt, mt) in Wt.items():
        we, me = We.get(key, (np.zeros_like(wt), np.zeros_like(mt)))
        m = mt & me
        lin, mom = force_error(we, wt, m)
        forces[f"{key[0]}:{key[1]}"] = {"linear_N": lin, "moment_Nm": mom, "frames": int(m.sum())}
        num += np.linalg.norm(we[m, :3] - wt[m, :3], axis=1).sum()
        den += np.linalg.norm(wt[m, :3], axis=1).sum()
    rep["forces"] = forces
    if forces:
        rep["force_linear_mean_N"] = float(np.mean([f["linear_N"] for f in forces.values()]))
        rep["force_moment_mean_Nm"] = float(np.mean([f["moment_Nm"] for f in forces.values()]))
    rep["force_linear_relative"] = float(num / den) if den > 0 else 0.0
    if estimate.q_o is not None and truth.q_o is not None:
        Ee, Et = object_endpoints(estimate), object_endpoints(truth)
        rep["endpoint_3d_error_mm"] = float(np.linalg.norm(Ee - Et, axis=2).mean() * 1000)
        rep["endpoint_3d_max_mm"] = float(np.linalg.norm(Ee - Et, axis=2).max() * 1000)
        if camera is not None:
            pe = _project_all(camera, Ee.reshape(-1, 3))
            pt = _project_all(camera, Et.reshape(-1, 3))
            rep["endpoint_accuracy"] = dict(zip((f"{t}px" for t in THRESHOLDS_PX),
                                                endpoint_accuracy(pe, pt, image_size)))
    return rep


def _project_all(camera: Camera, pts) -> np.ndarray:
    Rcw, tcw, intr = camera.kernel_args()
    out = []
    for p in pts:
        u, v, _ = B.project(Rcw, tcw, intr, np.asarray(p, float))
        out.append((u, v))
    return np.array(out)


# --------------------------------------------------------------------------
# synthetic scenes

_MIRROR = np.diag([-1.0, 1.0, 1.0])


def default_camera() -> Camera:
    """1280x720 pinhole 4 m in front of the origin at 1 m height, looking
    along world -z with image rows pointing down."""
    return Camera(1000.0, 1000.0, 640.0, 360.0,
                  Placement(Rotation.from_axis_angle([np.pi, 0, 0]), [0.0, 1.0, 4.0]))


def look_at_camera(eye, target, up=(0.0, 1.0, 0.0), f: float = 1000.0, size=(1280, 720)) -> Camera:
    """Pinhole camera at ``eye`` whose optical axis passes through ``target``."""
    eye, target = np.asarray(eye, float), np.asarray(target, float)
    z = target - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, float))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
    return Camera(f, f, size[0] / 2, size[1] / 2, Placement(Rotation.from_matrix(R), eye))


def scenario_camera() -> Camera:
    """Oblique view used by the synthetic scenarios: 4 m from the pelvis,
    30 degrees off the frontal axis and slightly above.  A frontal view
    leaves the shoulder line and the arms nearly parallel to the image
    plane, where depth is only observed to second order."""
    yaw, pitch, r = np.radians(30.0), np.radians(10.0), 4.0
    target = np.array([0.0, 0.9, 0.0])
    eye = target + r * np.array([np.sin(yaw) * np.cos(pitch), np.sin(pitch), np.cos(yaw) * np.cos(pitch)])
    return look_at_camera(eye, target)


def _rx(a):
    return Rotation.from_axis_angle([a, 0, 0]).matrix()


def _ry(a):
    return Rotation.from_axis_angle([0, a, 0]).matrix()


def _rz(a):
    return Rotation.from_axis_angle([0, 0, a]).matrix()


def _smooth(s):
    """Quintic smoothstep on [0, 1] with zero end velocity and acceleration."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s * s)


class _Pose:
    def __init__(self, human: KinematicModel):
        self.h = human
        self.q = human.neutral()

    def set(self, name, R, mirror=True):
        """Right-side rotation ``R``; the left side gets its mirror image."""
        for side, Rs in (("r_", R), ("l_", _MIRROR @ R @ _MIRROR)):
            if not mirror and side == "l_":
                break
            j = self.h.joint_index(side + name if mirror else name)
            a = self.h.idx_q[j]
            self.q[a:a + 4] = K.rot_to_quat(np.ascontiguousarray(Rs))
        return self

    def set_one(self, name, R):
        j = self.h.joint_index(name)
        a = self.h.idx_q[j]
        self.q[a:a + 4] = K.rot_to_quat(np.ascontiguousarray(R))
        return self


def _standing_height(human: KinematicModel, q) -> float:
    """Pelvis height putting the lowest sole vertex on y = 0."""
    Rw, pw = K.forward_kinematics(human.tree, q)
    low = min((pw[j] + Rw[j] @ v)[1] for j, vs in human.sole_vertices.items() for v in vs)
    return q[1] - low


def _hands(human, q):
    Rw, pw = K.forward_kinematics(human.tree, q)
    return pw[human.joint_index("r_hand")], pw[human.joint_index("l_hand")], Rw[human.joint_index("spine1")]


def _object_from_hands(human, q, L):
    """Object base pose along the line through both hands, plus hand coordinates."""
    pr, pl, Rs = _hands(human, q)
    d = pl - pr
    w = np.linalg.norm(d)
    x = d / w
    y = Rs[:, 1] - (Rs[:, 1] @ x) * x
    y /= np.linalg.norm(y)
    R = np.column_stack([x, y, np.cross(x, y)])
    mid = 0.5 * (pr + pl)
    base = mid - 0.5 * L * x
    c_r, c_l = 0.5 * L - 0.5 * w, 0.5 * L + 0.5 * w
    return np.concatenate([base, Rotation.from_matrix(R).quat]), c_r, c_l


def _hold_pose(human, pitch, elbow=np.radians(20)):
    P = _Pose(human)
    P.set("shoulder", _rx(pitch) @ _ry(np.pi / 2))
    P.set("elbow", _ry(elbow))
    return P


def _scenario_static(human, T):
    P = _Pose(human).set("shoulder", _rz(np.radians(75)))
    q = P.q.copy()
    q[1] = _standing_height(human, q)
    return np.tile(q, (T, 1)), None, {"l_ankle": np.ones(T, bool), "r_ankle": np.ones(T, bool)}


def _scenario_lift(human, T, dt, L):
    qs, qo = [], []
    for t in range(T):
        s = _smooth((t - 0.15 * T) / (0.7 * T))
        pitch = np.radians(50) - s * np.radians(70)
        q = _hold_pose(human, pitch).q
        q[1] = _standing_height(human, q)
        o, cr, cl = _object_from_hands(human, q, L)
        qs.append(q)
        qo.append(o)
    flags = {n: np.ones(T, bool) for n in ("l_ankle", "r_ankle", "l_hand", "r_hand")}
    return np.array(qs), np.array(qo), flags


def _scenario_swing(human, T, dt, L):
    qs, qo = [], []
    period = T * dt
    for t in range(T):
        ph = 2 * np.pi * t * dt / period
        ramp = _smooth(t / (0.2 * T)) * _smooth((T - 1 - t) / (0.2 * T))
        P = _hold_pose(human, np.radians(25) + np.radians(15) * ramp * np.sin(2 * ph))
        P.set_one("spine1", _ry(0.5 * ramp * np.sin(ph)))
        q = P.q
        q[1] = _standing_height(human, _Pose(human).q)
        o, _, _ = _object_from_hands(human, q, L)
        qs.append(q)
        qo.append(o)
    flags = {n: np.ones(T, bool) for n in ("l_ankle", "r_ankle", "l_hand", "r_hand")}
    return np.array(qs), np.array(qo), flags


def _leg_ik(human, q, side, target_R, target_p, iters=50):
    """Place an ankle frame exactly by moving hip, knee and ankle joints."""
    joints = [human.joint_index(f"{side}_{n}") for n in ("hip", "knee", "ankle")]
    ank = joints[-1]
    cols = np.concatenate([human.idx_v[j] + np.arange(3) for j in joints])
    for _ in range(iters):
        Rw, pw = K.forward_kinematics(human.tree, q)
        e_rot = Rw[ank] @ K.quat_log(K.rot_to_quat(np.ascontiguousarray(Rw[ank].T @ target_R)))
        e = np.concatenate([e_rot, target_p - pw[ank]])
        if np.abs(e).max() < 1e-13:
            break
        Jw = K.spatial_jacobian_world(human.tree, q, ank)
        J = np.vstack([Jw[:3], Jw[3:] + np.cross(Jw[:3].T, pw[ank]).T])[:, cols]
        dq = np.zeros(human.nv)
        dq[cols] = np.linalg.lstsq(J, e, rcond=None)[0]
        q = K.config_integrate(human.tree, q, dq, 1.0)
    else:
        raise SyntheticError("leg inverse kinematics did not converge")
    return q


def _scenario_walk(human, T, dt):
    q0 = _Pose(human).set("shoulder", _rz(np.radians(75))).q
    h0 = _standing_height(human, q0)
    Rw, pw = K.forward_kinematics(human.tree, np.concatenate([[0, h0, 0], q0[3:]]))
    feet = {s: (Rw[human.joint_index(f"{s}_ankle")].copy(), pw[human.joint_index(f"{s}_ankle")].copy())
            for s in ("l", "r")}
    dip, lift = 0.05, 0.05

    bent = _Pose(human)
    bent.q = q0.copy()
    bent.set("hip", _rx(-0.3)).set("knee", _rx(0.6)).set("ankle", _rx(-0.3))

    def pose(shift, lifted, height):
        # start from bent knees: the straight leg is a singular configuration
        q = bent.q.copy()
        q[:3] = [shift, h0 - dip, 0.0]
        for s in ("l", "r"):
            R, p = feet[s]
            q = _leg_ik(human, q, s, R, p + (np.array([0, height, 0]) if s == lifted else 0.0))
        return q

    def com_x(q):
        Rw, pw = K.forward_kinematics(human.tree, q)
        m = np.array([l.mass for l in human.links])
        com = np.array([pw[i] + Rw[i] @ l.com for i, l in enumerate(human.links)])
        return float(m @ com[:, 0] / m.sum())

    # pelvis shift placing the centre of mass just inside each stance ankle
    # mid-lift, leaving room for the centre of pressure while decelerating
    shifts = {}
    for stance, lifted in (("l", "r"), ("r", "l")):
        target = feet[stance][1][0] - 0.025 * np.sign(feet[stance][1][0])
        s = target
        for _ in range(6):
            s += target - com_x(pose(s, lifted, 0.5 * lift))
        shifts[stance] = s
    # phase boundaries (fractions of T): still, shift left, lift right,
    # shift right, lift left, shift back
    k = np.array([0.05, 0.22, 0.4, 0.62, 0.8, 1.0]) * T
    qs = []
    flags = {"l_ankle": np.ones(T, bool), "r_ankle": np.ones(T, bool)}

    def frac(t, i):
        return (t - k[i - 1]) / (k[i] - k[i - 1])

    for t in range(T):
        if t < k[0]:
            shift, lifted, hgt = 0.0, None, 0.0
        elif t < k[1]:
            shift, lifted, hgt = shifts["l"] * _smooth(frac(t, 1)), None, 0.0
        elif t < k[2]:
            shift, lifted, hgt = shifts["l"], "r", lift * np.sin(np.pi * _smooth(frac(t, 2))) ** 2
        elif t < k[3]:
            shift, lifted, hgt = shifts["l"] + (shifts["r"] - shifts["l"]) * _smooth(frac(t, 3)), None, 0.0
        elif t < k[4]:
            shift, lifted, hgt = shifts["r"], "l", lift * np.sin(np.pi * _smooth(frac(t, 4))) ** 2
        else:
            shift, lifted, hgt = shifts["r"] * (1 - _smooth(frac(t, 5))), None, 0.0
        qs.append(pose(shift, lifted, hgt))
        if lifted is not None and hgt > 0:
            flags[f"{lifted}_ankle"][t] = False
    return np.array(qs), None, flags


def _velocities(tree, Q, dt, nv):
    V = np.zeros((len(Q), nv))
    for t in range(1, len(Q)):
        V[t] = K.config_difference(tree, Q[t - 1].copy(), Q[t].copy()) / dt
    V[0] = V[1]
    return V


def _applied(problem, X, G, t, z_lam, z_f):
    """Contact wrenches at frame ``t`` for given cone coefficients / object forces."""
    L = problem.layout
    Rc = B.plane_frame(G[:3])
    Gc = B.cone3(problem.mu)
    out = []
    if problem.has_object:
        Ro = K.quat_to_rot(X[t][L.amb["qo"]][3:])
    for p in problem.schedule.active(t):
        if p.target == GROUND:
            F = Rc @ (z_lam[p.index] @ Gc)
            out.append(AppliedContact(p.joint, p.offset, F))
        else:
            f = z_f[p.index]
            out.append(AppliedContact(p.joint, p.offset, Ro @ f[:3], Ro @ f[3:], (2 + p.slot, np.zeros(3))))
    return out


def _frame_dynamics(problem, X, G, t, tau, z_lam, z_f):
    L = problem.layout
    h = (X[t][L.amb["qh"]], X[t][L.amb["vh"]], X[t - 1][L.amb["vh"]])
    o = None
    if problem.has_object:
        o = (L.object_config(X[t]), L.object_velocity(X[t]), L.object_velocity(X[t - 1]))
    rh, ro = dynamics_residual(problem.human, problem.obj, h, o, tau,
                               _applied(problem, X, G, t, z_lam, z_f), problem.dt, problem.gravity)
    return np.concatenate([rh, ro])


def oracle_forces(problem, X, G, t, force_weight=1e-3, tol=1e-8):
    """Minimum-norm torques and contact forces reproducing frame ``t``.

    Minimizes ``|tau|^2 + w (|lam|^2 + |f|^2)`` subject to the human and
    object dynamics and ``lam >= 0``.  The dynamics are linear in these
    unknowns, so the constraint matrix is assembled column by column.
    """
    L = problem.layout
    ng, nk = L.n_ground, L.n_object
    nt = problem.human.nv - 6
    active = problem.schedule.active(t)
    lam_ix = [(p.index, n) for p in active if p.target == GROUND for n in range(4)]
    f_ix = [(p.index, e) for p in active if p.target == OBJECT for e in range(6)]
    nz = nt + len(lam_ix) + len(f_ix)

    def unpack(z):
        lam = np.zeros((ng, 4))
        f = np.zeros((nk, 6))
        for (i, n), v in zip(lam_ix, z[nt:nt + len(lam_ix)]):
            lam[i, n] = v
        for (i, e), v in zip(f_ix, z[nt + len(lam_ix):]):
            f[i, e] = v
        return z[:nt], lam, f

    r0 = _frame_dynamics(problem, X, G, t, *unpack(np.zeros(nz)))
    A = np.empty((len(r0), nz))
    for k in range(nz):
        e = np.zeros(nz)
        e[k] = 1.0
        A[:, k] = _frame_dynamics(problem, X, G, t, *unpack(e)) - r0
    b = -r0
    w = np.concatenate([np.ones(nt), np.full(nz - nt, force_weight)])
    lo = np.concatenate([np.full(nt, -np.inf), np.zeros(len(lam_ix)), np.full(len(f_ix), -np.inf)])
    # augmented Lagrangian over exact bounded least-squares subproblems
    rho = 1e6
    M = np.vstack([np.sqrt(rho) * A, np.diag(np.sqrt(w))])
    hi = np.full(nz, np.inf)
    u = np.zeros_like(b)
    for _ in range(50):
        rhs = np.concatenate([np.sqrt(rho) * (b + u), np.zeros(nz)])
        z = lsq_linear(M, rhs, bounds=(lo, hi), method="bvls", tol=1e-15).x
        r = A @ z - b
        if np.abs(r).max() < 0.01 * tol:
            break
        u -= r
    res = float(np.abs(A @ z - b).max())
    if res > tol:
        raise SyntheticError(f"frame {t}: no contact forces satisfy the dynamics (residual {res:.3g})")
    return unpack(z)


def generate_synthetic(scenario: str, noise_px: float = 0.0, seed: int = 0, n_frames: int | None = None,
                       dt: float = 1.0 / 30.0, declare_hand_contacts: bool = True, human=None,
                       object_spec=None, mu: float = 0.8, camera: Camera | None = None):
    """Scenario trajectories with exact contacts and oracle forces, seen
    through ``camera`` (default :func:`scenario_camera`).

    Returns ``(measurements, ground-truth Solution)``.
    """
    if scenario not in SCENARIOS:
        raise SyntheticError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    human = human or build_human_model()
    cam = camera or scenario_camera()
    defaults = {"static-stand": 50, "lift-object": 100, "swing-object": 100, "walk-two-steps": 160}
    T = int(n_frames or defaults[scenario])
    if T < 2:
        raise SyntheticError("at least 2 frames are required")
    L = build_object_model(object_spec).handle_length
    if scenario == "static-stand":
        Qh, Qo, flags = _scenario_static(human, T)
    elif scenario == "lift-object":
        Qh, Qo, flags = _scenario_lift(human, T, dt, L)
    elif scenario == "swing-object":
        Qh, Qo, flags = _scenario_swing(human, T, dt, L)
    else:
        Qh, Qo, flags = _scenario_walk(human, T, dt)
    if not declare_hand_contacts:
        flags = {k: v for k, v in flags.items() if not k.endswith("hand")}
    flags = dict(sorted(flags.items()))
    targets = {k: GROUND if k.endswith("ankle") else OBJECT for k in flags}

    # clean projections
    j2 = []
    e2 = []
    Rcw, tcw, intr = cam.kernel_args()
    for t in range(T):
        Rw, pw = K.forward_kinematics(human.tree, Qh[t])
        j2.append([B.project(Rcw, tcw, intr, pw[m.joint] + Rw[m.joint] @ m.offset)[:2] for m in human.markers])
        if Qo is not None:
            R = K.quat_to_rot(Qo[t, 3:])
            e2.append([B.project(Rcw, tcw, intr, p)[:2] for p in (Qo[t, :3], Qo[t, :3] + L * R[:, 0])])
    j2 = np.array(j2)
    e2 = np.array(e2) if Qo is not None else None
    meas = MeasurementSequence(dt, j2, np.ones((T, len(MARKER_NAMES))), cam, e2,
                               None if e2 is None else np.ones((T, 2)), flags, targets)
    meas.validate()

    problem = assemble_problem(human, meas, object_spec=object_spec, mu=mu, gravity=GRAVITY)
    Lay = problem.layout
    X = np.array([Lay.pack() for _ in range(T)])
    X[:, Lay.amb["qh"]] = Qh
    X[:, Lay.amb["vh"]] = _velocities(human.tree, Qh, dt, human.nv)
    if Qo is not None:
        X[:, Lay.amb["qo"]] = Qo
        X[:, Lay.amb["vo"]] = _velocities(Lay.base_tree, Qo, dt, 6)
    G = np.array([0.0, 1.0, 0.0, 0.0])
    Rc = B.plane_frame(G[:3])
    for t in range(T):
        Rw, pw = K.forward_kinematics(human.tree, Qh[t])
        for p in problem.schedule.active(t):
            ph = pw[p.joint] + Rw[p.joint] @ p.offset
            if p.target == GROUND:
                X[t, Lay.amb["c_gnd"].start + 2 * p.index + np.arange(2)] = [Rc[:, 0] @ ph, Rc[:, 2] @ ph]
            else:
                R = K.quat_to_rot(Qo[t, 3:])
                X[t, Lay.amb["c_obj"].start + p.index] = R[:, 0] @ (ph - Qo[t, :3])
    for t in range(1, T):
        tau, lam, f = oracle_forces(problem, X, G, t)
        X[t, Lay.amb["tau"]] = tau
        X[t, Lay.amb["lam"]] = lam.reshape(-1)
        X[t, Lay.amb["f_obj"]] = f.reshape(-1)
    truth = solution_from_state(problem, State(X, G), {"scenario": scenario, "seed": seed})

    if noise_px > 0:
        rng = np.random.default_rng(seed)
        meas.joints2d = meas.joints2d + rng.normal(scale=noise_px, size=meas.joints2d.shape)
        if meas.endpoints2d is not None:
            meas.endpoints2d = meas.endpoints2d + rng.normal(scale=noise_px, size=meas.endpoints2d.shape)
    return meas, truth


def perturbed_init(human: KinematicModel, truth: Solution, seed: int = 0, rot_sigma: float = 0.05,
                   trans_sigma: float = 0.03):
    """Per-frame warm start: ground truth with a smooth random offset plus jitter."""
    rng = np.random.default_rng(seed)
    T = truth.n_frames
    bias = rng.normal(scale=rot_sigma, size=human.nv)
    bias[:3] = rng.normal(scale=trans_sigma, size=3)
    out = []
    for q in truth.q_h:
        d = bias + np.concatenate([rng.normal(scale=0.2 * trans_sigma, size=3),
                                   rng.normal(scale=0.2 * rot_sigma, size=human.nv - 3)])
        out.append(K.config_integrate(human.tree, q.copy(), d, 1.0))
    return np.array(out)
