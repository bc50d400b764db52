"""Minimal SO(3)/SE(3) algebra used throughout the package.

Rotations are plain 3x3 numpy arrays, homogeneous transforms are 4x4 arrays
with the bottom row [0, 0, 0, 1].  All functions are pure.
"""

from __future__ import annotations

import numpy as np

ROTATION_TOL = 1e-9

# Below this body rate (rad/s) the rotation axis is undefined and the
# integrated rotation is taken to be the identity.
ZERO_RATE = 1e-12


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector: hat(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(w: np.ndarray) -> np.ndarray:
    """Inverse of hat.  Reads the canonical entries, so the round trip
    hat(vee(w)) == w is exact for skew-symmetric input."""
    w = np.asarray(w, dtype=float)
    return np.array([w[2, 1], w[0, 2], w[1, 0]])


def vee_antisym(w: np.ndarray) -> np.ndarray:
    """vee of the antisymmetric part of w; use on numerically near-skew input."""
    w = np.asarray(w, dtype=float)
    return 0.5 * np.array(
        [w[2, 1] - w[1, 2], w[0, 2] - w[2, 0], w[1, 0] - w[0, 1]]
    )


def rodrigues(omega_b: np.ndarray, ts: float) -> np.ndarray:
    """Rotation reached after spinning at constant body rate omega_b for ts
    seconds.

    The rate is decomposed into a speed and a unit axis; speeds below
    ZERO_RATE return the identity (the axis would be undefined).
    """
    omega_b = np.asarray(omega_b, dtype=float)
    speed = float(np.linalg.norm(omega_b))
    if speed < ZERO_RATE:
        return np.eye(3)
    k = hat(omega_b / speed)
    angle = speed * ts
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_matrix(angles: np.ndarray) -> np.ndarray:
    """Rotation from [roll, pitch, yaw]: R_z(yaw) @ R_y(pitch) @ R_x(roll)."""
    r, p, y = np.asarray(angles, dtype=float)
    return rot_z(y) @ rot_y(p) @ rot_x(r)


def rpy_from_matrix(r: np.ndarray) -> np.ndarray:
    """Extract [roll, pitch, yaw] with r == rpy_matrix(result).

    At the pitch singularity (|pitch| = pi/2) roll is pinned to zero; the
    returned triple still reproduces r.
    """
    r = np.asarray(r, dtype=float)
    sp = -r[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = np.arcsin(sp)
    cp = np.cos(pitch)
    if cp > 1e-9:
        roll = np.arctan2(r[2, 1], r[2, 2])
        yaw = np.arctan2(r[1, 0], r[0, 0])
    else:
        roll = 0.0
        yaw = np.arctan2(-r[0, 1], r[1, 1])
    return np.array([roll, pitch, yaw])


def rotation_angle(r: np.ndarray) -> float:
    """Angle of rotation in [0, pi] via the trace identity
    tr(R) = 1 + 2 cos(angle).  Clamping absorbs round-off."""
    r = np.asarray(r, dtype=float)
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(min(1.0, max(-1.0, c))))


def make_transform(rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    t = np.eye(4)
    t[:3, :3] = rotation
    t[:3, 3] = np.asarray(translation, dtype=float)
    return t


def translate(v: np.ndarray) -> np.ndarray:
    return make_transform(np.eye(3), v)


def identity_transform() -> np.ndarray:
    return np.eye(4)


def rotation_of(t: np.ndarray) -> np.ndarray:
    return np.asarray(t, dtype=float)[:3, :3]


def translation_of(t: np.ndarray) -> np.ndarray:
    return np.asarray(t, dtype=float)[:3, 3]


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)
    out[3] = (0.0, 0.0, 0.0, 1.0)
    return out


def invert(t: np.ndarray) -> np.ndarray:
    """Inverse in block form: [[R^T, -R^T b], [0, 1]]."""
    t = np.asarray(t, dtype=float)
    rt = t[:3, :3].T
    return make_transform(rt, -rt @ t[:3, 3])


def is_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        return False
    if not np.allclose(r @ r.T, np.eye(3), atol=tol):
        return False
    return abs(np.linalg.det(r) - 1.0) <= tol


def require_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    if not is_rotation(r, tol):
        raise ValueError("not a rotation matrix within tolerance %g" % tol)
    return np.asarray(r, dtype=float)
