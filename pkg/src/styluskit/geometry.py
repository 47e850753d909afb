"""Rigid-body math shared by every other module.

Conventions, used consistently across the package:

- Quaternions are Hamilton, stored ``(qx, qy, qz, qw)``, unit norm, with a
  canonical sign (``qw >= 0``) so that equal rotations compare equal
  componentwise.
- Euler angles are intrinsic yaw(Z) - pitch(Y) - roll(X).
- Distances in meters, angles in radians.  Degrees appear only at the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroVector

_UNIT_TOL = 1e-12


def vec3(v) -> np.ndarray:
    """Coerce ``v`` to a float 3-vector."""
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


def quat_normalize(q) -> np.ndarray:
    """Return the unit quaternion equal to ``q`` with canonical sign.

    Normalization is skipped when the norm is already 1 within 1e-12 so
    that re-normalizing a canonical quaternion is bit-stable.
    """
    a = np.asarray(q, dtype=float)
    if a.shape != (4,):
        raise ValueError(f"expected a quaternion (qx,qy,qz,qw), got shape {a.shape}")
    n = math.sqrt(float(a @ a))
    if n < _UNIT_TOL:
        raise ZeroVector("quaternion has (near-)zero norm")
    if abs(n - 1.0) > _UNIT_TOL:
        a = a / n
    else:
        a = a.copy()
    if a[3] < 0.0 or (a[3] == 0.0 and _leading_component(a) < 0.0):
        a = -a
    return a


def _leading_component(q: np.ndarray) -> float:
    for x in q[:3]:
        if x != 0.0:
            return float(x)
    return 1.0


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a * b (apply b first, then a)."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    qx, qy, qz, qw = q
    return np.array([-qx, -qy, -qz, qw])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate 3-vector ``v`` by quaternion ``q``."""
    u = np.asarray(q[:3], dtype=float)
    w = float(q[3])
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion."""
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_matrices(quats: np.ndarray) -> np.ndarray:
    """Vectorized ``quat_to_matrix`` for an (N, 4) array."""
    q = np.asarray(quats, dtype=float)
    x, y, z, w = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - z * w)
    m[:, 0, 2] = 2 * (x * z + y * w)
    m[:, 1, 0] = 2 * (x * y + z * w)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - x * w)
    m[:, 2, 0] = 2 * (x * z - y * w)
    m[:, 2, 1] = 2 * (y * z + x * w)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_from_matrix(m) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's method)."""
    r = np.asarray(m, dtype=float)
    t = r[0, 0] + r[1, 1] + r[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    return quat_normalize([x, y, z, w])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    a = vec3(axis)
    n = np.linalg.norm(a)
    if n < _UNIT_TOL:
        raise ZeroVector("rotation axis has (near-)zero norm")
    a = a / n
    h = 0.5 * angle
    return quat_normalize(np.append(a * math.sin(h), math.cos(h)))


def quat_angle(a, b) -> float:
    """Angle of the relative rotation between two unit quaternions.

    Stable near zero: uses atan2 on the relative quaternion instead of
    acos on the dot product.
    """
    r = quat_multiply(a, quat_conjugate(b))
    return 2.0 * math.atan2(float(np.linalg.norm(r[:3])), abs(float(r[3])))


def rotation_between(u, v) -> np.ndarray:
    """Minimal rotation (quaternion) taking direction ``u`` onto ``v``."""
    a = vec3(u)
    b = vec3(v)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < _UNIT_TOL or nb < _UNIT_TOL:
        raise ZeroVector("cannot align a (near-)zero vector")
    a = a / na
    b = b / nb
    c = np.cross(a, b)
    d = float(a @ b)
    s = float(np.linalg.norm(c))
    if s < _UNIT_TOL:
        if d > 0.0:
            return np.array([0.0, 0.0, 0.0, 1.0])
        # antiparallel: rotate pi about any axis orthogonal to a
        helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        return quat_from_axis_angle(axis, math.pi)
    return quat_from_axis_angle(c, math.atan2(s, d))


@dataclass(frozen=True, eq=False)
class Pose:
    """A rigid transform: rotate by ``rotation``, then add ``translation``.

    The quaternion is normalized (canonical sign) on construction and both
    arrays are frozen, so instances are safe to share across threads.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = quat_normalize(self.rotation)
        t = vec3(self.translation).copy()
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(t)):
            raise ValueError("pose has non-finite components")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.array([0.0, 0.0, 0.0, 1.0]), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(quat_from_matrix(m[:3, :3]), m[:3, 3])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation_matrix()
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class EulerAngles:
    """Intrinsic yaw(Z)-pitch(Y)-roll(X) angles in radians."""

    yaw: float
    pitch: float
    roll: float


@dataclass(frozen=True, eq=False)
class TipPoseRecord:
    """One timestamped tip pose: ``t`` seconds, position meters, unit quaternion."""

    t: float
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = vec3(self.position).copy()
        q = quat_normalize(self.orientation)
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def pose(self) -> Pose:
        return Pose(self.orientation, self.position)


def compose(a: Pose, b: Pose) -> Pose:
    """Transform product a * b: applying the result equals applying b, then a."""
    return Pose(
        quat_multiply(a.rotation, b.rotation),
        quat_rotate(a.rotation, b.translation) + a.translation,
    )


def invert(t: Pose) -> Pose:
    qc = quat_conjugate(t.rotation)
    return Pose(qc, -quat_rotate(qc, t.translation))


def transform_point(t: Pose, p) -> np.ndarray:
    return quat_rotate(t.rotation, vec3(p)) + t.translation


def euler_to_rotation(angles: EulerAngles) -> np.ndarray:
    """Quaternion of the intrinsic Z-Y-X (yaw-pitch-roll) rotation."""
    qz = quat_from_axis_angle([0.0, 0.0, 1.0], angles.yaw)
    qy = quat_from_axis_angle([0.0, 1.0, 0.0], angles.pitch)
    qx = quat_from_axis_angle([1.0, 0.0, 0.0], angles.roll)
    return quat_multiply(quat_multiply(qz, qy), qx)


def rotation_to_euler(q) -> EulerAngles:
    """Euler angles (yaw-pitch-roll) of a unit quaternion.

    At the pitch singularity (|pitch| = pi/2) the split between yaw and
    roll is not unique; roll is set to zero there.
    """
    r = quat_to_matrix(quat_normalize(q))
    sp = -r[2, 0]
    sp = min(1.0, max(-1.0, sp))
    cp = math.sqrt(max(0.0, 1.0 - sp * sp))
    pitch = math.atan2(sp, cp)
    if cp > 1e-9:
        roll = math.atan2(r[2, 1], r[2, 2])
        yaw = math.atan2(r[1, 0], r[0, 0])
    else:
        roll = 0.0
        yaw = math.atan2(-r[0, 1], r[1, 1])
    return EulerAngles(yaw=yaw, pitch=pitch, roll=roll)


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two nonzero vectors (atan2 of cross/dot)."""
    a = vec3(u)
    b = vec3(v)
    if np.linalg.norm(a) < _UNIT_TOL or np.linalg.norm(b) < _UNIT_TOL:
        raise ZeroVector("angle_between requires nonzero vectors")
    cross = np.linalg.norm(np.cross(a, b))
    dot = float(a @ b)
    return math.atan2(cross, dot)
