"""Forward kinematics, frame Jacobians and rigid-body dynamics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import KinematicModel, ModelError
from .spatial import MotionVector, Placement, Rotation

GRAVITY = np.array([0.0, -9.81, 0.0])


@dataclass
class FramesResult:
    placements: list
    markers: np.ndarray
    contact_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))


@dataclass
class DynamicsTerms:
    mass_matrix: np.ndarray
    nonlinear_effects: np.ndarray
    gravity: np.ndarray


def _vec(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ModelError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def _frame(model: KinematicModel, frame) -> int:
    if isinstance(frame, str):
        return model.joint_index(frame)
    i = int(frame)
    if not 0 <= i < model.njoints:
        raise ModelError(f"unknown frame index {frame}")
    return i


def forward_kinematics(model: KinematicModel, q, points=()) -> FramesResult:
    """World placements of all joints, marker positions and extra points.

    ``points`` is a sequence of ``(joint, local offset)`` pairs.
    """
    q = _vec(q, model.nq, "configuration")
    Rw, pw = K.forward_kinematics(model.tree, q)
    placements = [Placement(Rotation.from_matrix(Rw[i]), pw[i]) for i in range(model.njoints)]
    markers = np.array([pw[m.joint] + Rw[m.joint] @ m.offset for m in model.markers]).reshape(-1, 3)
    extra = []
    for joint, off in points:
        j = _frame(model, joint)
        extra.append(pw[j] + Rw[j] @ np.asarray(off, float))
    return FramesResult(placements, markers, np.array(extra).reshape(-1, 3))


def frame_velocity(model: KinematicModel, q, v, frame) -> MotionVector:
    """Spatial velocity of a joint frame in its own coordinates."""
    i = _frame(model, frame)
    q = _vec(q, model.nq, "configuration")
    v = _vec(v, model.nv, "velocity")
    V = K.forward_pass(model.tree, q, v, np.zeros(model.nv), np.zeros(3))[4]
    return MotionVector.from_array(V[i])


def frame_acceleration(model: KinematicModel, q, v, a, frame) -> MotionVector:
    """Spatial acceleration (time derivative of the body-frame velocity)."""
    i = _frame(model, frame)
    q = _vec(q, model.nq, "configuration")
    v = _vec(v, model.nv, "velocity")
    a = _vec(a, model.nv, "acceleration")
    A = K.forward_pass(model.tree, q, v, a, np.zeros(3))[5]
    return MotionVector.from_array(A[i])


def frame_jacobian(model: KinematicModel, q, frame, point=None) -> np.ndarray:
    """Jacobian of a frame.

    With ``point`` (local coordinates) returns the 3 x nv world-axes Jacobian
    of that point; without, the 6 x nv Jacobian of the frame's local spatial
    velocity (angular first).
    """
    i = _frame(model, frame)
    q = _vec(q, model.nq, "configuration")
    Rw, pw = K.forward_kinematics(model.tree, q)
    if point is not None:
        return K.point_jacobian(model.tree, q, i, pw[i] + Rw[i] @ np.asarray(point, float))
    Jw = K.spatial_jacobian_world(model.tree, q, i)
    R, p = Rw[i], pw[i]
    J = np.empty_like(Jw)
    J[:3] = R.T @ Jw[:3]
    J[3:] = R.T @ (Jw[3:] - np.cross(p, Jw[:3].T).T)
    return J


def inverse_dynamics(model: KinematicModel, q, v, a, fext=None, gravity=GRAVITY) -> np.ndarray:
    """Generalized forces ``M a + b - g - sum J^T f``.

    ``fext`` is ``(njoints, 6)``: per-body spatial forces in world axes,
    moment about the world origin, angular first.
    """
    q = _vec(q, model.nq, "configuration")
    v = _vec(v, model.nv, "velocity")
    a = _vec(a, model.nv, "acceleration")
    if fext is None:
        fext = np.zeros((model.njoints, 6))
    fext = np.asarray(fext, float)
    if fext.shape != (model.njoints, 6):
        raise ModelError(f"external forces have shape {fext.shape}, expected ({model.njoints}, 6)")
    return K.rnea(model.tree, q, v, a, np.asarray(gravity, float), fext)


def mass_matrix(model: KinematicModel, q) -> np.ndarray:
    return K.crba(model.tree, _vec(q, model.nq, "configuration"))


def dynamics_terms(model: KinematicModel, q, v, gravity=GRAVITY) -> DynamicsTerms:
    z = np.zeros(model.nv)
    nle = inverse_dynamics(model, q, v, z, gravity=gravity)
    g = -inverse_dynamics(model, q, z, z, gravity=gravity)
    return DynamicsTerms(mass_matrix(model, q), nle, g)


def point_wrench(point, force, moment=None) -> np.ndarray:
    """World spatial force (about the origin) of a force applied at ``point``."""
    f = np.asarray(force, float)
    m = np.zeros(3) if moment is None else np.asarray(moment, float)
    return np.concatenate([m + np.cross(point, f), f])


@dataclass
class AppliedContact:
    """Contact wrench at a human point, world axes, moment about that point.

    ``object_point`` (object body index, local offset) names where the
    reaction acts on the object; ``None`` for ground contacts.
    """
    human_joint: int
    human_point: np.ndarray
    force: np.ndarray
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    object_point: tuple | None = None
    active: bool = True


def dynamics_residual(human: KinematicModel, obj: KinematicModel | None, human_state, obj_state,
                      tau_m, contacts, dt: float, gravity=GRAVITY):
    """Human and object dynamics residuals for one frame.

    ``*_state`` are ``(q, v, v_prev)``; accelerations are the backward
    differences ``(v - v_prev) / dt``.  The human receives each contact
    wrench, the object its reaction.  Only the 6 base rows of the object
    residual are returned (its other joints are massless contact slots).
    """
    q, v, vp = (_vec(x, n, "human state") for x, n in zip(human_state, (human.nq, human.nv, human.nv)))
    tau_m = _vec(tau_m, human.nv - 6, "muscle torque")
    Rw, pw = K.forward_kinematics(human.tree, q)
    fh = np.zeros((human.njoints, 6))
    fo = None
    if obj is not None:
        qo, vo, vop = (_vec(x, n, "object state") for x, n in zip(obj_state, (obj.nq, obj.nv, obj.nv)))
        Ro, po = K.forward_kinematics(obj.tree, qo)
        fo = np.zeros((obj.njoints, 6))
    for c in contacts:
        if not c.active:
            raise ModelError(f"contact force given for inactive contact on joint {c.human_joint}")
        p = pw[c.human_joint] + Rw[c.human_joint] @ np.asarray(c.human_point, float)
        fh[c.human_joint] += point_wrench(p, c.force, c.moment)
        if c.object_point is not None:
            if fo is None:
                raise ModelError("object contact given without an object model")
            b, off = c.object_point
            po_k = po[b] + Ro[b] @ np.asarray(off, float)
            fo[b] -= point_wrench(po_k, c.force, c.moment)
    a = (v - vp) / dt
    rh = K.rnea(human.tree, q, v, a, np.asarray(gravity, float), fh)
    rh[6:] -= tau_m
    ro = np.zeros(0)
    if obj is not None:
        ro = K.rnea(obj.tree, qo, vo, (vo - vop) / dt, np.asarray(gravity, float), fo)[:6]
    return rh, ro
