"""Contact points, schedules, friction-cone generators and the contact motion residual."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _blocks as B
from . import _kernels as K
from .model import KinematicModel, ModelError
from .spatial import ForceVector

GROUND = "ground"
OBJECT = "object"


class ContactError(ValueError):
    pass


@dataclass(frozen=True)
class GroundPlane:
    """Plane ``{p : a.p = b}`` with friction coefficient ``mu``."""
    normal: np.ndarray
    offset: float
    mu: float = 0.8

    def __post_init__(self):
        a = np.asarray(self.normal, float).reshape(3)
        n = np.linalg.norm(a)
        if not n > 1e-12:
            raise ContactError("ground normal must be nonzero")
        object.__setattr__(self, "normal", a / n)
        object.__setattr__(self, "offset", float(self.offset))
        if self.mu < 0:
            raise ContactError(f"friction coefficient must be >= 0, got {self.mu}")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.normal, [self.offset]])

    def frame(self) -> np.ndarray:
        """Contact frame rotation: columns x, y = -normal, z."""
        return B.plane_frame(self.normal)

    def point(self, c) -> np.ndarray:
        return B.ground_point(self.as_vector(), float(c[0]), float(c[1]))

    def coordinates(self, p) -> np.ndarray:
        """In-plane coordinates of the projection of ``p``."""
        R = self.frame()
        return np.array([R[:, 0] @ p, R[:, 2] @ p])


@dataclass(frozen=True)
class ContactPoint:
    """One point contact.  ``vertex`` is the sole vertex index for ankle
    contacts; ``slot`` the object contact slot for object targets."""
    id: int
    joint: int
    target: str
    offset: np.ndarray
    slot: int = -1
    vertex: int | None = None
    index: int = 0  # position among contacts of the same target kind


@dataclass
class ContactSchedule:
    """Per-joint contact flags over frames and the joint -> points map."""
    flags: dict
    points: list = field(default_factory=list)

    def __post_init__(self):
        self.flags = {int(j): np.asarray(f, bool) for j, f in self.flags.items()}
        lens = {len(f) for f in self.flags.values()}
        if len(lens) > 1:
            raise ContactError(f"contact flag streams have different lengths {sorted(lens)}")
        for p in self.points:
            if p.joint not in self.flags:
                raise ContactError(f"contact point {p.id} on joint {p.joint} has no flag stream")

    @property
    def n_frames(self) -> int:
        return len(next(iter(self.flags.values()))) if self.flags else 0

    def phi(self, joint: int) -> list:
        return [p for p in self.points if p.joint == joint]

    def active(self, t: int) -> list:
        return [p for p in self.points if self.flags[p.joint][t]]

    def is_active(self, point: ContactPoint, t: int) -> bool:
        return bool(self.flags[point.joint][t])

    @property
    def n_ground(self) -> int:
        return sum(p.target == GROUND for p in self.points)

    @property
    def n_object(self) -> int:
        return sum(p.target == OBJECT for p in self.points)


def build_contact_points(human: KinematicModel, declarations) -> list:
    """Expand ``(joint name, target)`` declarations into contact points.

    Ankles touching the ground get the four sole vertices; anything else is
    a point contact at the joint origin.  Object contacts get consecutive
    slots in declaration order.
    """
    pts = []
    ng = no = 0
    for name, target in declarations:
        j = human.joint_index(name)
        if target == GROUND and j in human.sole_vertices:
            for v, off in enumerate(human.sole_vertices[j]):
                pts.append(ContactPoint(len(pts), j, GROUND, np.asarray(off, float), vertex=v, index=ng))
                ng += 1
        elif target == GROUND:
            pts.append(ContactPoint(len(pts), j, GROUND, np.zeros(3), index=ng))
            ng += 1
        elif target == OBJECT:
            pts.append(ContactPoint(len(pts), j, OBJECT, np.zeros(3), slot=no, index=no))
            no += 1
        else:
            raise ContactError(f"unknown contact target {target!r} for joint {name!r}")
    return pts


def cone_generators_3d(mu: float) -> np.ndarray:
    """Four pyramid generators (rows) in the contact frame, y towards gravity."""
    if mu < 0:
        raise ContactError(f"friction coefficient must be >= 0, got {mu}")
    return B.cone3(float(mu))


def cone_generators_6d(p, mu: float) -> np.ndarray:
    """Rows ``(g, p x g)``: linear part first, then the moment about the ankle."""
    G = cone_generators_3d(mu)
    p = np.asarray(p, float)
    return np.hstack([G, np.cross(p, G)])


def ankle_force_from_lambdas(lams, points, mu: float) -> ForceVector:
    """Sum of the sole vertex forces as a wrench at the ankle.

    ``lams`` is ``(n_vertices, 4)``, ``points`` the vertex positions in the
    ankle frame (also taken as the contact frame axes).
    """
    lams = np.asarray(lams, float)
    if np.any(lams < 0):
        raise ContactError("cone coefficients must be nonnegative")
    f = np.zeros(6)
    for lam, p in zip(lams, points):
        f += lam @ cone_generators_6d(p, mu)
    return ForceVector(f[:3], f[3:])


def vertex_force(lam, mu: float) -> np.ndarray:
    """Linear force in the contact frame from four cone coefficients."""
    return np.asarray(lam, float) @ cone_generators_3d(mu)


def contact_point_target(obj: KinematicModel | None, point: ContactPoint, q_o, c_obj, c_gnd,
                         ground: GroundPlane) -> np.ndarray:
    """World position ``p^c_k`` of the environment side of a contact."""
    if point.target == GROUND:
        return ground.point(c_gnd[point.index])
    if obj is None:
        raise ContactError("object contact without an object model")
    body = 2 + point.slot
    if body >= obj.njoints:
        raise ContactError(f"object has no prismatic joint for contact slot {point.slot}")
    q = np.concatenate([q_o[:7], [obj.handle_length], c_obj])
    if q.shape != (obj.nq,):
        raise ContactError(f"object has {obj.njoints - 2} contact slots, got {len(c_obj)} coordinates")
    _, pw = K.forward_kinematics(obj.tree, q)
    return pw[body]


def contact_motion_residual(human: KinematicModel, obj: KinematicModel | None, q_h, q_o, c_obj, c_gnd,
                            ground: GroundPlane, schedule: ContactSchedule, t: int) -> np.ndarray:
    """Stacked 3-vectors ``T(p^h_j) - p^c_k`` over the contacts active at ``t``."""
    Rw, pw = K.forward_kinematics(human.tree, np.asarray(q_h, float))
    out = []
    for p in schedule.active(t):
        ph = pw[p.joint] + Rw[p.joint] @ p.offset
        out.append(ph - contact_point_target(obj, p, q_o, c_obj, c_gnd, ground))
    return np.concatenate(out) if out else np.zeros(0)


def clamp_report_contact_range(c, length: float) -> list:
    """``(index, violation)`` for object contact coordinates outside [0, length]."""
    out = []
    for i, x in enumerate(np.atleast_1d(np.asarray(c, float))):
        if x < 0:
            out.append((i, float(-x)))
        elif x > length:
            out.append((i, float(x - length)))
    return out
