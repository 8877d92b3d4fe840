"""Parametric kinematic models: the articulated human body and stick-like objects."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from . import _kernels as K


class ModelError(ValueError):
    """Raised for malformed model descriptions or mismatched dimensions."""


class JointKind(enum.IntEnum):
    FREE_FLOATING = K.FREE
    SPHERICAL = K.SPHERICAL
    PRISMATIC = K.PRISMATIC

    @property
    def nq(self) -> int:
        return K.NQ[int(self)]

    @property
    def nv(self) -> int:
        return K.NV[int(self)]


_KIND_NAMES = {"free": JointKind.FREE_FLOATING, "spherical": JointKind.SPHERICAL,
               "prismatic": JointKind.PRISMATIC}


@dataclass(frozen=True)
class Joint:
    name: str
    kind: JointKind
    parent: int
    translation: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    axis: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class Link:
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # about the COM, body axes

    def spatial_inertia(self) -> np.ndarray:
        c = np.asarray(self.com, float)
        cx = _skew(c)
        I6 = np.zeros((6, 6))
        I6[:3, :3] = self.inertia + self.mass * cx @ cx.T
        I6[:3, 3:] = self.mass * cx
        I6[3:, :3] = self.mass * cx.T
        I6[3:, 3:] = self.mass * np.eye(3)
        return I6


@dataclass(frozen=True)
class Marker:
    name: str
    joint: int
    offset: np.ndarray


@dataclass(frozen=True)
class KinematicModel:
    """Immutable joint tree with inertias and named points.

    ``sole_vertices`` maps an ankle joint index to its four contact vertices
    (ankle coordinates).  ``handle_length`` is set for object models only.
    """

    name: str
    joints: tuple
    links: tuple
    markers: tuple = ()
    sole_vertices: dict = field(default_factory=dict)
    handle_length: float | None = None

    def __post_init__(self):
        if len(self.joints) != len(self.links):
            raise ModelError("one link per joint is required")
        roots = 0
        for i, j in enumerate(self.joints):
            if j.parent >= i:
                raise ModelError(f"joint {j.name!r}: parent index {j.parent} must precede it")
            if j.parent < 0:
                roots += 1
        if roots != 1:
            raise ModelError(f"expected a single root joint, found {roots}")

    @cached_property
    def idx_q(self) -> np.ndarray:
        return np.cumsum([0] + [j.kind.nq for j in self.joints])[:-1]

    @cached_property
    def idx_v(self) -> np.ndarray:
        return np.cumsum([0] + [j.kind.nv for j in self.joints])[:-1]

    @property
    def nq(self) -> int:
        return int(sum(j.kind.nq for j in self.joints))

    @property
    def nv(self) -> int:
        return int(sum(j.kind.nv for j in self.joints))

    @property
    def njoints(self) -> int:
        return len(self.joints)

    @property
    def total_mass(self) -> float:
        return float(sum(l.mass for l in self.links))

    @cached_property
    def tree(self) -> tuple:
        """Array tuple consumed by the compiled kernels."""
        jtype = np.array([int(j.kind) for j in self.joints], dtype=np.int64)
        parent = np.array([j.parent for j in self.joints], dtype=np.int64)
        R0 = np.array([K.quat_to_rot(np.asarray(j.rotation, float)) for j in self.joints])
        t0 = np.array([np.asarray(j.translation, float) for j in self.joints])
        axis = np.array([np.asarray(j.axis, float) for j in self.joints])
        I6 = np.array([l.spatial_inertia() for l in self.links])
        return (jtype, parent, self.idx_q.astype(np.int64), self.idx_v.astype(np.int64),
                R0, t0, axis, I6)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise ModelError(f"unknown joint {name!r}")

    @cached_property
    def marker_names(self) -> list:
        return [m.name for m in self.markers]

    def neutral(self) -> np.ndarray:
        """Reference posture: identity rotations, zero translations."""
        q = np.zeros(self.nq)
        for j, a in zip(self.joints, self.idx_q):
            if j.kind == JointKind.FREE_FLOATING:
                q[a + 3] = 1.0
            elif j.kind == JointKind.SPHERICAL:
                q[a] = 1.0
        return q

    def quaternion_slices(self):
        for j, a in zip(self.joints, self.idx_q):
            if j.kind == JointKind.FREE_FLOATING:
                yield slice(a + 3, a + 7)
            elif j.kind == JointKind.SPHERICAL:
                yield slice(a, a + 4)

    def validate(self, q) -> None:
        q = np.asarray(q, float)
        if q.shape != (self.nq,):
            raise ModelError(f"configuration has length {q.shape}, model expects {self.nq}")
        for s in self.quaternion_slices():
            if abs(np.linalg.norm(q[s]) - 1.0) > 1e-9:
                raise ModelError(f"quaternion block {s.start}:{s.stop} is not unit norm")
        if self.handle_length is not None:
            for i, j in enumerate(self.joints):
                if j.kind == JointKind.PRISMATIC:
                    x = q[self.idx_q[i]]
                    if x < -1e-12 or x > self.handle_length + 1e-12:
                        raise ModelError(f"prismatic joint {j.name!r} at {x:g} outside [0, {self.handle_length:g}]")


def _skew(c):
    return np.array([[0.0, -c[2], c[1]], [c[2], 0.0, -c[0]], [-c[1], c[0], 0.0]])


def _shape_inertia(mass: float, shape: dict) -> np.ndarray:
    kind = shape["type"]
    if kind == "cylinder":
        r, ell = float(shape["radius"]), float(shape["length"])
        u = np.asarray(shape["axis"], float)
        u = u / np.linalg.norm(u)
        perp = mass * (3 * r * r + ell * ell) / 12.0
        ax = 0.5 * mass * r * r
        return perp * (np.eye(3) - np.outer(u, u)) + ax * np.outer(u, u)
    if kind == "box":
        a, b, c = (float(x) for x in shape["size"])
        return mass / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])
    if kind == "sphere":
        r = float(shape["radius"])
        return 0.4 * mass * r * r * np.eye(3)
    raise ModelError(f"unknown link shape {kind!r}")


def default_human_spec() -> dict:
    with resources.files("contactrecon.data").joinpath("human_default.json").open() as fh:
        return json.load(fh)


def default_object_spec() -> dict:
    with resources.files("contactrecon.data").joinpath("object_default.json").open() as fh:
        return json.load(fh)


def sole_rectangle(length: float, width: float, vertical_offset: float,
                   forward_offset: float = 0.0) -> np.ndarray:
    """Four sole vertices in ankle coordinates (y up, z forward)."""
    hl, hw = 0.5 * length, 0.5 * width
    y = vertical_offset
    z0 = forward_offset
    return np.array([[hw, y, z0 + hl], [-hw, y, z0 + hl], [-hw, y, z0 - hl], [hw, y, z0 - hl]])


def build_human_model(spec: dict | None = None) -> KinematicModel:
    """Human body from a model description (see ``schemas/model.schema.json``)."""
    spec = default_human_spec() if spec is None else spec
    names = [j["name"] for j in spec["joints"]]
    if len(set(names)) != len(names):
        raise ModelError("duplicate joint names")
    index = {n: i for i, n in enumerate(names)}
    joints = []
    for i, j in enumerate(spec["joints"]):
        par = j.get("parent")
        if isinstance(par, str):
            if par not in index:
                raise ModelError(f"joint {j['name']!r}: missing parent {par!r}")
            par = index[par]
        elif par is None:
            par = -1
        if par >= i:
            raise ModelError(f"joint {j['name']!r}: parent index {par} must precede it")
        kind = _KIND_NAMES[j.get("kind", "spherical")]
        joints.append(Joint(j["name"], kind, int(par), np.asarray(j["offset"], float),
                            axis=np.asarray(j.get("axis", [0.0, 0.0, 0.0]), float)))

    link_specs = {l["joint"]: l for l in spec["links"]}
    fracs = np.array([link_specs[n]["mass_fraction"] for n in names], float)
    masses = fracs / fracs.sum() * float(spec.get("total_mass", 74.6))
    links = []
    for n, m in zip(names, masses):
        ls = link_specs[n]
        inertia = (np.asarray(ls["inertia"], float) if "inertia" in ls
                   else _shape_inertia(m, ls["shape"]))
        links.append(Link(float(m), np.asarray(ls["com"], float), inertia))

    markers = []
    for mk in spec.get("markers", []):
        if mk["joint"] not in index:
            raise ModelError(f"marker {mk['name']!r} attached to unknown joint {mk['joint']!r}")
        markers.append(Marker(mk["name"], index[mk["joint"]], np.asarray(mk["offset"], float)))

    sole = spec.get("sole")
    soles = {}
    if sole:
        verts = sole_rectangle(sole["length"], sole["width"], sole["vertical_offset"],
                               sole.get("forward_offset", 0.0))
        for n in sole["joints"]:
            soles[index[n]] = verts.copy()

    model = KinematicModel("human", tuple(joints), tuple(links), tuple(markers), soles)
    if len(joints) == 24:
        if model.nq != 99 or model.nv != 75:
            raise ModelError(f"human model has nq={model.nq}, nv={model.nv}; expected 99/75")
    return model


def build_object_model(spec: dict | None = None, contact_slots: int = 0) -> KinematicModel:
    """Rigid stick: free base at the handle end, a head point and ``contact_slots``
    prismatic contact points, all along the base +x axis."""
    spec = default_object_spec() if spec is None else spec
    L = float(spec["handle_length"])
    if not L > 0.0:
        raise ModelError(f"handle length must be positive, got {L}")
    if contact_slots < 0:
        raise ModelError("number of contact slots must be >= 0")
    x = np.array([1.0, 0.0, 0.0])
    joints = [Joint("handle_end", JointKind.FREE_FLOATING, -1, np.zeros(3)),
              Joint("head", JointKind.PRISMATIC, 0, np.zeros(3), axis=x)]
    joints += [Joint(f"contact_{k}", JointKind.PRISMATIC, 0, np.zeros(3), axis=x)
               for k in range(contact_slots)]
    massless = Link(0.0, np.zeros(3), np.zeros((3, 3)))
    links = [Link(float(spec["mass"]), np.asarray(spec["com"], float),
                  np.asarray(spec["inertia"], float))] + [massless] * (1 + contact_slots)
    return KinematicModel("object", tuple(joints), tuple(links), handle_length=L)


def _check(model, arr, n, what):
    arr = np.asarray(arr)
    if arr.shape != (n,):
        raise ModelError(f"{what} has shape {arr.shape}, expected ({n},)")
    return arr


def integrate(model: KinematicModel, q, v, dt: float = 1.0) -> np.ndarray:
    q = _check(model, q, model.nq, "configuration")
    v = _check(model, v, model.nv, "tangent vector")
    dtype = np.result_type(q.dtype, v.dtype, float)
    return K.config_integrate(model.tree, q.astype(dtype), v.astype(dtype), dt)


def difference(model: KinematicModel, q1, q2) -> np.ndarray:
    q1 = _check(model, q1, model.nq, "configuration")
    q2 = _check(model, q2, model.nq, "configuration")
    dtype = np.result_type(q1.dtype, q2.dtype, float)
    return K.config_difference(model.tree, q1.astype(dtype), q2.astype(dtype))


def random_configuration(model: KinematicModel, rng, scale: float = 1.0) -> np.ndarray:
    """Random valid configuration (tests and synthetic data)."""
    v = rng.normal(scale=scale, size=model.nv)
    q = integrate(model, model.neutral(), v)
    if model.handle_length is not None:
        for i, j in enumerate(model.joints):
            if j.kind == JointKind.PRISMATIC:
                q[model.idx_q[i]] = rng.uniform(0, model.handle_length)
    return q


def marker_positions(model: KinematicModel, q) -> list:
    """World positions of the model's named markers."""
    q = _check(model, q, model.nq, "configuration").astype(float)
    Rw, pw = K.forward_kinematics(model.tree, q)
    return [(m.name, pw[m.joint] + Rw[m.joint] @ m.offset) for m in model.markers]
