"""Spatial vector algebra and SE(3) placements.

Thin value types over the compiled kernels.  Rotations are unit quaternions
``(w, x, y, z)`` kept in the ``w >= 0`` half; motion and force vectors are
stored angular-first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K


@dataclass(frozen=True)
class Rotation:
    quat: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quat, float)
        object.__setattr__(self, "quat", K.quat_normalize(q))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_axis_angle(cls, w) -> "Rotation":
        return cls(K.quat_exp(np.asarray(w, float)))

    @classmethod
    def from_matrix(cls, R) -> "Rotation":
        return cls(K.rot_to_quat(np.ascontiguousarray(R, dtype=float)))

    def matrix(self) -> np.ndarray:
        return K.quat_to_rot(self.quat)

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(K.quat_mul(self.quat, other.quat))

    def inverse(self) -> "Rotation":
        return Rotation(K.quat_conj(self.quat))

    def apply(self, p) -> np.ndarray:
        return self.matrix() @ np.asarray(p, float)


@dataclass(frozen=True)
class Placement:
    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, float).reshape(3))

    @classmethod
    def identity(cls) -> "Placement":
        return cls(Rotation.identity(), np.zeros(3))

    def homogeneous(self) -> np.ndarray:
        H = np.eye(4)
        H[:3, :3] = self.rotation.matrix()
        H[:3, 3] = self.translation
        return H


@dataclass(frozen=True)
class MotionVector:
    angular: np.ndarray
    linear: np.ndarray

    @classmethod
    def from_array(cls, m) -> "MotionVector":
        m = np.asarray(m, float)
        return cls(m[:3].copy(), m[3:].copy())

    def array(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def __add__(self, other):
        return MotionVector(self.angular + other.angular, self.linear + other.linear)


@dataclass(frozen=True)
class ForceVector:
    linear: np.ndarray
    angular: np.ndarray

    @classmethod
    def from_array(cls, f) -> "ForceVector":
        f = np.asarray(f, float)
        return cls(f[3:].copy(), f[:3].copy())

    def array(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])

    def __add__(self, other):
        return ForceVector(self.linear + other.linear, self.angular + other.angular)


def power(f: ForceVector, v: MotionVector) -> float:
    return float(f.linear @ v.linear + f.angular @ v.angular)


def compose(a: Placement, b: Placement) -> Placement:
    return Placement(a.rotation * b.rotation, a.translation + a.rotation.apply(b.translation))


def inverse(P: Placement) -> Placement:
    Rinv = P.rotation.inverse()
    return Placement(Rinv, -Rinv.apply(P.translation))


def act_on_point(P: Placement, p) -> np.ndarray:
    return P.rotation.apply(p) + P.translation


def transform_motion(P: Placement, v: MotionVector) -> MotionVector:
    """Motion vector given in frame B, re-expressed in frame A where ``P`` = A<-B."""
    R = P.rotation.matrix()
    w = R @ v.angular
    return MotionVector(w, R @ v.linear + np.cross(P.translation, w))


def transform_force(P: Placement, f: ForceVector) -> ForceVector:
    """Dual of :func:`transform_motion`: moments pick up ``p x f``."""
    R = P.rotation.matrix()
    lin = R @ f.linear
    return ForceVector(lin, R @ f.angular + np.cross(P.translation, lin))


def integrate_rotation(R: Rotation, w, dt: float = 1.0) -> Rotation:
    """Body-frame integration ``R * exp(w dt)``."""
    return Rotation(K.quat_mul(R.quat, K.quat_exp(np.asarray(w, float) * dt)))


def rotation_difference(R1: Rotation, R2: Rotation) -> np.ndarray:
    """Axis-angle ``w`` with ``integrate_rotation(R1, w, 1) == R2``."""
    return K.quat_log(K.quat_mul(K.quat_conj(R1.quat), R2.quat))


def skew(c) -> np.ndarray:
    return np.array([[0.0, -c[2], c[1]], [c[2], 0.0, -c[0]], [-c[1], c[0], 0.0]])
