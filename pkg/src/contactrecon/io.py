"""File formats: measurements, models, configs and solutions (all JSON)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _kernels as K
from .contact import GROUND, OBJECT
from .costs import Camera, CostWeights
from .model import build_human_model
from .solver import PipelineConfig, SolverOptions, StageConfig
from .spatial import Placement, Rotation

SCHEMA_MAJOR = 1
SCHEMA_VERSION = "1.0"

MARKER_NAMES = ("nose", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist",
                "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "r_eye", "l_eye", "r_ear", "l_ear")


class FormatError(ValueError):
    pass


def _version(d: dict, what: str):
    v = d.get("schema_version")
    if v is None:
        raise FormatError(f"{what}: missing field 'schema_version'")
    try:
        major = int(str(v).split(".")[0])
    except ValueError:
        raise FormatError(f"{what}: unreadable schema_version {v!r}") from None
    if major != SCHEMA_MAJOR:
        raise FormatError(f"{what}: unsupported schema major version {major} (expected {SCHEMA_MAJOR})")


def _read(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{p}: invalid JSON ({e})") from None


def _write(d: dict, path):
    Path(path).write_text(json.dumps(d, indent=1, sort_keys=True, allow_nan=False) + "\n")


# --------------------------------------------------------------------------
# camera


def camera_to_dict(c: Camera) -> dict:
    P = c.world_from_camera
    return {"fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
            "world_from_camera": {"rotation": P.rotation.quat.tolist(), "translation": P.translation.tolist()}}


def camera_from_dict(d: dict) -> Camera:
    for k in ("fx", "fy", "cx", "cy"):
        if k not in d:
            raise FormatError(f"camera: missing field {k!r}")
    P = Placement.identity()
    if "world_from_camera" in d:
        w = d["world_from_camera"]
        P = Placement(Rotation(np.asarray(w["rotation"], float)), np.asarray(w["translation"], float))
    try:
        return Camera(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]), P)
    except ValueError as e:
        raise FormatError(f"camera: {e}") from None


# --------------------------------------------------------------------------
# measurements


@dataclass
class MeasurementSequence:
    dt: float
    joints2d: np.ndarray
    joint_conf: np.ndarray
    camera: Camera
    endpoints2d: np.ndarray | None = None
    endpoint_conf: np.ndarray | None = None
    contacts: dict = field(default_factory=dict)
    contact_targets: dict = field(default_factory=dict)
    image_size: tuple = (1280, 720)
    joint_names: tuple = MARKER_NAMES

    @property
    def n_frames(self) -> int:
        return len(self.joints2d)

    def validate(self):
        T = self.n_frames
        if not self.dt > 0:
            raise FormatError("field 'dt' must be positive")
        streams = {"joints2d": self.joints2d, "joint_conf": self.joint_conf}
        if self.endpoints2d is not None:
            streams["endpoints2d"] = self.endpoints2d
            streams["endpoint_conf"] = self.endpoint_conf
        for name, flags in self.contacts.items():
            streams[f"contacts.{name}"] = flags
        for name, s in streams.items():
            if s is None or len(s) != T:
                raise FormatError(f"stream {name!r} has {0 if s is None else len(s)} frames, expected {T}")
        for name in ("joints2d", "endpoints2d"):
            a = streams.get(name)
            if a is not None:
                bad = np.argwhere(~np.isfinite(np.asarray(a, float)))
                if len(bad):
                    raise FormatError(f"field {name!r}: non-finite pixel at frame {bad[0][0]}")
        for name in ("joint_conf", "endpoint_conf"):
            a = streams.get(name)
            if a is not None:
                a = np.asarray(a, float)
                bad = np.argwhere(~((a >= 0) & (a <= 1)))
                if len(bad):
                    raise FormatError(f"field {name!r}: confidence {a[tuple(bad[0])]:g} outside [0, 1] "
                                      f"at frame {bad[0][0]}")
        for name in self.contacts:
            if self.contact_targets.get(name) not in (GROUND, OBJECT):
                raise FormatError(f"contact_targets.{name}: must be 'ground' or 'object'")
        if np.asarray(self.joints2d).shape[1:] != (len(self.joint_names), 2):
            raise FormatError(f"field 'joints2d': expected shape (T, {len(self.joint_names)}, 2)")
        return self


def measurements_to_dict(m: MeasurementSequence) -> dict:
    frames = []
    for t in range(m.n_frames):
        f = {"joints": {n: [float(m.joints2d[t, i, 0]), float(m.joints2d[t, i, 1]), float(m.joint_conf[t, i])]
                        for i, n in enumerate(m.joint_names)},
             "contacts": {n: bool(v[t]) for n, v in m.contacts.items()}}
        if m.endpoints2d is not None:
            f["endpoints"] = {n: [float(m.endpoints2d[t, i, 0]), float(m.endpoints2d[t, i, 1]),
                                  float(m.endpoint_conf[t, i])] for i, n in enumerate(("handle_end", "head"))}
        frames.append(f)
    return {"schema_version": SCHEMA_VERSION, "dt": m.dt, "n_frames": m.n_frames,
            "camera": camera_to_dict(m.camera), "image_size": list(m.image_size),
            "contact_targets": dict(m.contact_targets), "frames": frames}


def measurements_from_dict(d: dict) -> MeasurementSequence:
    _version(d, "measurements")
    for k in ("dt", "camera", "frames"):
        if k not in d:
            raise FormatError(f"measurements: missing field {k!r}")
    frames = d["frames"]
    T = int(d.get("n_frames", len(frames)))
    if len(frames) != T:
        raise FormatError(f"stream 'frames' has {len(frames)} entries, n_frames is {T}")
    targets = dict(d.get("contact_targets", {}))
    j2 = np.zeros((T, len(MARKER_NAMES), 2))
    jc = np.zeros((T, len(MARKER_NAMES)))
    has_obj = bool(frames) and "endpoints" in frames[0]
    e2 = np.zeros((T, 2, 2)) if has_obj else None
    ec = np.zeros((T, 2)) if has_obj else None
    contacts = {n: np.zeros(T, bool) for n in targets}
    for t, f in enumerate(frames):
        joints = f.get("joints")
        if joints is None:
            raise FormatError(f"frame {t}: missing field 'joints'")
        for i, n in enumerate(MARKER_NAMES):
            if n not in joints:
                raise FormatError(f"frame {t}: missing joint {n!r}")
            v = joints[n]
            if len(v) != 3:
                raise FormatError(f"frame {t}: joint {n!r} must be [u, v, confidence]")
            j2[t, i], jc[t, i] = v[:2], v[2]
        if has_obj:
            ep = f.get("endpoints")
            if ep is None:
                raise FormatError(f"frame {t}: missing field 'endpoints' (stream 'endpoints' is shorter)")
            for i, n in enumerate(("handle_end", "head")):
                if n not in ep:
                    raise FormatError(f"frame {t}: missing endpoint {n!r}")
                e2[t, i], ec[t, i] = ep[n][:2], ep[n][2]
        fc = f.get("contacts", {})
        for n in fc:
            if n not in targets:
                raise FormatError(f"frame {t}: contact {n!r} has no entry in 'contact_targets'")
        for n in targets:
            if n not in fc:
                raise FormatError(f"frame {t}: missing contact flag {n!r} (stream 'contacts.{n}' is shorter)")
            contacts[n][t] = bool(fc[n])
    m = MeasurementSequence(float(d["dt"]), j2, jc, camera_from_dict(d["camera"]), e2, ec, contacts, targets,
                            tuple(d.get("image_size", (1280, 720))))
    return m.validate()


def load_measurements(path) -> MeasurementSequence:
    try:
        return measurements_from_dict(_read(path))
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def save_measurements(m: MeasurementSequence, path):
    _write(measurements_to_dict(m), path)


# --------------------------------------------------------------------------
# solutions


@dataclass
class ContactTrack:
    """One contact point over time.  Inactive frames carry zeros."""
    id: int
    joint: str
    target: str
    vertex: int | None
    slot: int
    active: np.ndarray
    coords: np.ndarray
    force_local: np.ndarray
    force_world: np.ndarray
    has_force: np.ndarray
    position: np.ndarray
    lam: np.ndarray | None = None


@dataclass
class Solution:
    dt: float
    q_h: np.ndarray
    v_h: np.ndarray
    tau_m: np.ndarray
    ground: np.ndarray
    mu: float
    contacts: list = field(default_factory=list)
    q_o: np.ndarray | None = None
    v_o: np.ndarray | None = None
    c_obj: np.ndarray | None = None
    handle_length: float | None = None
    report: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.q_h)


def _arr(a):
    return None if a is None else np.asarray(a, float).tolist()


def solution_to_dict(s: Solution) -> dict:
    contacts = []
    for c in s.contacts:
        frames = []
        for t in np.flatnonzero(c.active):
            e = {"frame": int(t), "c": c.coords[t].tolist(), "position": c.position[t].tolist()}
            if c.has_force[t]:
                e["force_local"] = c.force_local[t].tolist()
                e["force_world"] = c.force_world[t].tolist()
                if c.lam is not None:
                    e["lambda"] = c.lam[t].tolist()
            frames.append(e)
        contacts.append({"id": c.id, "joint": c.joint, "target": c.target, "vertex": c.vertex, "slot": c.slot,
                         "frames": frames})
    d = {"schema_version": SCHEMA_VERSION, "dt": s.dt, "n_frames": s.n_frames,
         "q_h": _arr(s.q_h), "v_h": _arr(s.v_h), "tau_m": _arr(s.tau_m),
         "ground": {"normal": _arr(s.ground[:3]), "offset": float(s.ground[3]), "mu": s.mu},
         "contacts": contacts, "report": s.report}
    if s.q_o is not None:
        d["object"] = {"q_o": _arr(s.q_o), "v_o": _arr(s.v_o), "c_obj": _arr(s.c_obj),
                       "handle_length": s.handle_length}
    return d


def solution_from_dict(d: dict) -> Solution:
    _version(d, "solution")
    for k in ("dt", "q_h", "v_h", "tau_m", "ground"):
        if k not in d:
            raise FormatError(f"solution: missing field {k!r}")
    T = len(d["q_h"])
    for k in ("v_h", "tau_m"):
        if len(d[k]) != T:
            raise FormatError(f"solution: stream {k!r} has {len(d[k])} frames, expected {T}")
    g = d["ground"]
    s = Solution(float(d["dt"]), np.asarray(d["q_h"], float), np.asarray(d["v_h"], float),
                 np.asarray(d["tau_m"], float), np.concatenate([g["normal"], [g["offset"]]]).astype(float),
                 float(g["mu"]), report=d.get("report", {}))
    if "object" in d:
        o = d["object"]
        s.q_o = np.asarray(o["q_o"], float)
        s.v_o = np.asarray(o["v_o"], float)
        s.c_obj = np.asarray(o["c_obj"], float).reshape(T, -1)
        s.handle_length = o["handle_length"]
    for c in d.get("contacts", []):
        dim = 2 if c["target"] == GROUND else 1
        tr = ContactTrack(int(c["id"]), c["joint"], c["target"], c["vertex"], int(c["slot"]),
                          np.zeros(T, bool), np.zeros((T, dim)), np.zeros((T, 6)), np.zeros((T, 6)),
                          np.zeros(T, bool), np.zeros((T, 3)), np.zeros((T, 4)) if dim == 2 else None)
        for e in c["frames"]:
            t = int(e["frame"])
            if not 0 <= t < T:
                raise FormatError(f"contact {c['id']}: frame {t} out of range")
            tr.active[t] = True
            tr.coords[t] = e["c"]
            tr.position[t] = e["position"]
            if "force_local" in e:
                tr.has_force[t] = True
                tr.force_local[t] = e["force_local"]
                tr.force_world[t] = e["force_world"]
                if "lambda" in e and tr.lam is not None:
                    tr.lam[t] = e["lambda"]
        s.contacts.append(tr)
    return s


def export_solution(s: Solution, path):
    _write(solution_to_dict(s), path)


def load_solution(path) -> Solution:
    try:
        return solution_from_dict(_read(path))
    except FormatError as e:
        raise FormatError(f"{path}: {e}") from None


def solution_from_state(problem, state, report: dict | None = None) -> Solution:
    """Extract trajectories and contact forces from solver variables."""
    from ._blocks import cone3, plane_frame
    L = problem.layout
    X, G = state.X, state.G
    T = problem.n_frames
    q_h = X[:, L.amb["qh"]].copy()
    s = Solution(problem.dt, q_h, X[:, L.amb["vh"]].copy(), X[:, L.amb["tau"]].copy(),
                 G.copy(), problem.mu, report=report or {})
    s.tau_m[0] = 0.0
    if problem.has_object:
        s.q_o = X[:, L.amb["qo"]].copy()
        s.v_o = X[:, L.amb["vo"]].copy()
        s.c_obj = X[:, L.amb["c_obj"]].copy()
        s.handle_length = problem.obj.handle_length
    Rc = plane_frame(G[:3])
    Gc = cone3(problem.mu)
    names = [j.name for j in problem.human.joints]
    for p in problem.points:
        dim = 2 if p.target == GROUND else 1
        tr = ContactTrack(p.id, names[p.joint], p.target, p.vertex, p.slot, np.zeros(T, bool),
                          np.zeros((T, dim)), np.zeros((T, 6)), np.zeros((T, 6)), np.zeros(T, bool),
                          np.zeros((T, 3)), np.zeros((T, 4)) if dim == 2 else None)
        for t in range(T):
            if not problem.schedule.is_active(p, t):
                continue
            tr.active[t] = True
            Rw, pw = K.forward_kinematics(problem.human.tree, X[t][L.amb["qh"]])
            tr.position[t] = pw[p.joint] + Rw[p.joint] @ p.offset
            if p.target == GROUND:
                tr.coords[t] = X[t][L.amb["c_gnd"]][2 * p.index:2 * p.index + 2]
                if t > 0:
                    lam = X[t][L.amb["lam"]][4 * p.index:4 * p.index + 4]
                    tr.lam[t] = lam
                    fl = lam @ Gc
                    tr.force_local[t, :3] = fl
                    tr.force_world[t, :3] = Rc @ fl
            else:
                tr.coords[t] = X[t][L.amb["c_obj"]][p.index]
                if t > 0:
                    f = X[t][L.amb["f_obj"]][6 * p.index:6 * p.index + 6]
                    Ro = K.quat_to_rot(X[t][L.amb["qo"]][3:])
                    tr.force_local[t] = f
                    tr.force_world[t, :3] = Ro @ f[:3]
                    tr.force_world[t, 3:] = Ro @ f[3:]
            tr.has_force[t] = t > 0
        s.contacts.append(tr)
    return s


# --------------------------------------------------------------------------
# configs and models


def load_human_model(path=None):
    if path is None:
        return build_human_model()
    d = _read(path)
    _version(d, "model")
    try:
        return build_human_model(d)
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from None


def _options(d: dict, base: SolverOptions) -> SolverOptions:
    known = {f.name for f in fields(SolverOptions)}
    for k in d:
        if k not in known:
            raise FormatError(f"config: unknown solver option {k!r}")
    vals = {f.name: getattr(base, f.name) for f in fields(SolverOptions)}
    vals.update(d)
    return SolverOptions(**vals)


def config_from_dict(d: dict) -> PipelineConfig:
    _version(d, "config")
    base = PipelineConfig()
    w = d.get("weights", {})
    known = {f.name for f in fields(CostWeights)}
    for k in w:
        if k not in known:
            raise FormatError(f"config: unknown weight {k!r}")
    weights = base.weights.updated(**w)
    stages = []
    for name in ("stage1", "stage2", "stage3"):
        b = getattr(base, name)
        s = d.get("stages", {}).get(name, {})
        stages.append(StageConfig(bool(s.get("enabled", b.enabled)), _options(s.get("options", {}), b.options),
                                  dict(s.get("weights", b.weights))))
    return PipelineConfig(weights, *stages, orientation_iterations=int(d.get("orientation_iterations",
                                                                             base.orientation_iterations)),
                          mu=float(d.get("mu", base.mu)), gravity=tuple(d.get("gravity", base.gravity)))


def config_to_dict(c: PipelineConfig) -> dict:
    st = {}
    for name in ("stage1", "stage2", "stage3"):
        s = getattr(c, name)
        st[name] = {"enabled": s.enabled, "options": dict(s.options.__dict__), "weights": dict(s.weights)}
    return {"schema_version": SCHEMA_VERSION, "weights": dict(c.weights.__dict__), "stages": st,
            "orientation_iterations": c.orientation_iterations, "mu": c.mu, "gravity": list(c.gravity)}


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        return config_from_dict(_read(path))
    except (FormatError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from None


def load_init(path):
    """Per-frame initial configurations: ``{"q_h": [...], "q_o": [...]?}``."""
    d = _read(path)
    _version(d, "init")
    if "q_h" not in d:
        raise FormatError(f"{path}: missing field 'q_h'")
    q_o = np.asarray(d["q_o"], float) if d.get("q_o") is not None else None
    return np.asarray(d["q_h"], float), q_o


def save_init(path, q_h, q_o=None):
    _write({"schema_version": SCHEMA_VERSION, "q_h": _arr(q_h), "q_o": _arr(q_o)}, path)



def state_from_solution(problem, s: Solution):
    """Solver variables reproducing a solution (inverse of :func:`solution_from_state`)."""
    from .solver import State
    L = problem.layout
    X = np.array([L.pack() for _ in range(problem.n_frames)])
    X[:, L.amb["qh"]] = s.q_h
    X[:, L.amb["vh"]] = s.v_h
    X[:, L.amb["tau"]] = s.tau_m
    if problem.has_object:
        X[:, L.amb["qo"]] = s.q_o
        X[:, L.amb["vo"]] = s.v_o
        X[:, L.amb["c_obj"]] = s.c_obj
    names = [j.name for j in problem.human.joints]
    tracks = {(c.joint, c.target, c.vertex, c.slot): c for c in s.contacts}
    for p in problem.points:
        c = tracks.get((names[p.joint], p.target, p.vertex, p.slot))
        if c is None:
            continue
        for t in np.flatnonzero(c.active):
            if p.target == GROUND:
                X[t, L.amb["c_gnd"].start + 2 * p.index + np.arange(2)] = c.coords[t]
                if c.lam is not None:
                    X[t, L.amb["lam"].start + 4 * p.index + np.arange(4)] = c.lam[t]
            else:
                X[t, L.amb["c_obj"].start + p.index] = c.coords[t][0]
                X[t, L.amb["f_obj"].start + 6 * p.index + np.arange(6)] = c.force_local[t]
    return State(X, np.asarray(s.ground, float).copy())
