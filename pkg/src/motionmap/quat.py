"""Quaternion algebra, Euler conversion and the hand-chain joint-angle model.

Conventions used throughout the package:

* Quaternions are stored as ``[x, y, z, w]``.
* Products are Hamilton products; ``R(a ⊗ b) = R(a) @ R(b)``.
* Euler angles are intrinsic Z-Y'-X'' (yaw, pitch, roll), so
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``. Angles are in degrees.
* IMU quaternions map world-frame vectors into the sensor frame. With that
  convention ``q_child ⊗ q_parent^-1`` is the child's rotation relative to its
  parent and does not depend on where the world frame is.
* A :class:`Pose` maps body coordinates into its parent frame,
  ``p_parent = R(orientation) @ p_body + position``.

All functions accept array-likes with a trailing axis of 4 (quaternions) or
3 (angles / positions) and broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

UNIT_TOL = 1e-6
GIMBAL_LOCK_DEG = 89.99

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])

JOINT_NAMES = (
    "ff_j1", "ff_j2", "ff_j3", "ff_j4",
    "mf_j1", "mf_j2", "mf_j3", "mf_j4",
    "th_j1", "th_j2", "th_j3", "th_j4", "th_j5",
    "wr_j1", "wr_j2",
)

SENSOR_NAMES = (
    "forearm", "hand_back",
    "ff_proximal", "ff_middle", "ff_distal",
    "mf_proximal", "mf_middle", "mf_distal",
    "th_base", "th_proximal", "th_middle", "th_distal",
)

# (parent sensor, child sensor, joint read from yaw, joint read from pitch or
#  None). Flexion is about yaw except at the thumb base, which sits in
# opposition: there flexion (th_j1) is about pitch and abduction (th_j2) yaw.
CHAIN = (
    (0, 1, "wr_j1", "wr_j2"),
    (1, 2, "ff_j1", "ff_j2"),
    (2, 3, "ff_j3", None),
    (3, 4, "ff_j4", None),
    (1, 5, "mf_j1", "mf_j2"),
    (5, 6, "mf_j3", None),
    (6, 7, "mf_j4", None),
    (1, 8, "th_j2", "th_j1"),
    (8, 9, "th_j3", None),
    (9, 10, "th_j4", None),
    (10, 11, "th_j5", None),
)


class QuaternionError(ValueError):
    """Raised for non-finite or non-unit quaternion input."""


class Quaternion(NamedTuple):
    x: float
    y: float
    z: float
    w: float


class EulerAngles(NamedTuple):
    """Intrinsic Z-Y'-X'' angles in degrees.

    ``gimbal_lock`` is set when ``|pitch|`` is within 0.01 deg of 90 deg; roll
    is then forced to 0 and the remaining freedom is folded into yaw.
    """

    roll: float
    pitch: float
    yaw: float
    gimbal_lock: bool = False


@dataclass(frozen=True)
class Pose:
    position: np.ndarray  # mm, shape (3,)
    orientation: np.ndarray  # unit quaternion [x, y, z, w]

    def __post_init__(self):
        object.__setattr__(self, "position", _finite(self.position, 3, "position"))
        object.__setattr__(self, "orientation", _unit(self.orientation))


def _finite(a, size: int, what: str = "quaternion") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.shape[-1:] != (size,):
        raise QuaternionError(f"{what} must have trailing dimension {size}, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise QuaternionError(f"non-finite {what} component")
    return arr


def _unit(q, tol: float = UNIT_TOL) -> np.ndarray:
    arr = _finite(q, 4)
    norm = np.sqrt((arr * arr).sum(axis=-1))
    if (np.abs(norm - 1.0) > tol).any():
        raise QuaternionError(f"quaternion is not unit-norm (|q| = {np.max(np.abs(norm - 1.0)) + 1.0:.9g})")
    return arr


def normalize(q) -> np.ndarray:
    arr = _finite(q, 4)
    norm = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise QuaternionError("cannot normalize a zero quaternion")
    return arr / norm


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a ⊗ b`` of unit quaternions."""
    a = _unit(a)
    b = _unit(b)
    return _mul(a, b)


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ax, ay, az, aw = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bx, by, bz, bw = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ],
        axis=-1,
    )


def quat_conjugate(q) -> np.ndarray:
    """Inverse of a unit quaternion written as ``[x, y, z, -w]``.

    This is the negative of the textbook conjugate ``[-x, -y, -z, w]``; both
    encode the same (inverse) rotation. Only valid for unit quaternions, so
    non-unit input is rejected.
    """
    q = _unit(q)
    out = q.copy()
    out[..., 3] = -out[..., 3]
    return out


def relative_quat(q0, q1) -> np.ndarray:
    """Rotation of ``q0`` expressed with respect to ``q1``: ``q1 ⊗ q0^-1``."""
    return quat_multiply(q1, quat_conjugate(q0))


def rotation_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a (not necessarily canonical-sign) unit quaternion."""
    q = _finite(q, 4)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def matrix_to_quat(m) -> np.ndarray:
    """Quaternion (w >= 0) from a 3x3 rotation matrix; Shepperd's method."""
    m = np.asarray(m, dtype=float)
    tr = np.trace(m)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s, (m[2, 1] - m[1, 2]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s, (m[0, 2] - m[2, 0]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s, (m[1, 0] - m[0, 1]) / s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[3] < 0 else q


def axis_angle_quat(axis: Sequence[float], angle_deg: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = np.radians(angle_deg) / 2.0
    return np.append(axis * np.sin(half), np.cos(half))


def rotation_angle(q) -> np.ndarray:
    """Rotation magnitude in radians, in [0, pi]; insensitive to the sign of q."""
    q = _finite(q, 4)
    vec = np.linalg.norm(q[..., :3], axis=-1)
    return 2.0 * np.arctan2(vec, np.abs(q[..., 3]))


def _wrap180(deg):
    """Wrap to (-180, 180]."""
    out = np.mod(np.asarray(deg, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(out == -180.0, 180.0, out)


def _euler_arrays(q: np.ndarray):
    # only the rotation-matrix entries the angles need
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r00, r10, r20 = 1 - 2 * (y * y + z * z), 2 * (x * y + z * w), 2 * (x * z - y * w)
    r21, r22 = 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)
    cos_pitch = np.hypot(r00, r10)
    pitch = np.degrees(np.arctan2(-r20, cos_pitch))
    yaw = np.degrees(np.arctan2(r10, r00))
    roll = np.degrees(np.arctan2(r21, r22))
    lock = np.abs(pitch) > GIMBAL_LOCK_DEG
    if np.any(lock):
        # R = Rz(yaw ∓ roll) Ry(±90): recover the combined angle from column 1
        r01, r11 = 2 * (x * y - z * w), 1 - 2 * (x * x + z * z)
        locked_yaw = np.degrees(np.arctan2(-r01, r11))
        yaw = np.where(lock, locked_yaw, yaw)
        roll = np.where(lock, 0.0, roll)
    return _wrap180(roll), pitch, _wrap180(yaw), lock


def quat_to_euler(q) -> EulerAngles:
    q = _unit(q)
    if q.ndim != 1:
        raise QuaternionError("quat_to_euler expects a single quaternion; use quat_to_euler_array")
    roll, pitch, yaw, lock = _euler_arrays(q)
    return EulerAngles(float(roll), float(pitch), float(yaw), bool(lock))


def quat_to_euler_array(q) -> np.ndarray:
    """Vectorised ``quat_to_euler``: returns ``(..., 3)`` as roll, pitch, yaw."""
    q = _unit(q)
    roll, pitch, yaw, _ = _euler_arrays(q)
    return np.stack([roll, pitch, yaw], axis=-1)


def euler_to_quat(e) -> np.ndarray:
    """Unit quaternion for ``(roll, pitch, yaw)`` degrees, broadcast over ``(..., 3)``."""
    e = _finite(e[:3] if isinstance(e, EulerAngles) else e, 3, "euler angles")
    half = np.radians(e) / 2.0
    cr, cp, cy = np.cos(half[..., 0]), np.cos(half[..., 1]), np.cos(half[..., 2])
    sr, sp, sy = np.sin(half[..., 0]), np.sin(half[..., 1]), np.sin(half[..., 2])
    return np.stack(
        [
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
            cr * cp * cy + sr * sp * sy,
        ],
        axis=-1,
    )


def joint_angles_from_chain(quats) -> np.ndarray:
    """15 joint angles (degrees, ``JOINT_NAMES`` order) from 12 IMU quaternions.

    ``quats`` has shape ``(12, 4)`` or ``(N, 12, 4)`` in ``SENSOR_NAMES`` order.
    Each adjacent sensor pair gives a relative quaternion ``child ⊗ parent^-1``
    decomposed to Euler angles; see ``CHAIN`` for which component feeds which
    joint.
    """
    q = _unit(quats)
    if q.shape[-2:] != (12, 4):
        raise QuaternionError(f"expected 12 sensor quaternions, got shape {q.shape}")
    parents = q[..., [c[0] for c in CHAIN], :]
    children = q[..., [c[1] for c in CHAIN], :]
    inv = parents.copy()
    inv[..., 3] = -inv[..., 3]
    rel = _mul(children, inv)
    _, pitch, yaw, _ = _euler_arrays(rel)
    out = np.zeros(q.shape[:-2] + (len(JOINT_NAMES),))
    for k, (_, _, yaw_joint, pitch_joint) in enumerate(CHAIN):
        out[..., JOINT_NAMES.index(yaw_joint)] = yaw[..., k]
        if pitch_joint is not None:
            out[..., JOINT_NAMES.index(pitch_joint)] = pitch[..., k]
    return out


def chain_from_joint_angles(angles, root=IDENTITY) -> np.ndarray:
    """Inverse of :func:`joint_angles_from_chain` for a given forearm orientation.

    ``angles`` has shape ``(15,)`` or ``(N, 15)``; ``root`` broadcasts against
    the leading shape. Returns ``(..., 12, 4)`` sensor quaternions.
    """
    angles = _finite(angles, len(JOINT_NAMES), "joint angles")
    root = np.broadcast_to(_unit(root), angles.shape[:-1] + (4,))
    out = np.zeros(angles.shape[:-1] + (12, 4))
    out[..., 0, :] = root
    for parent, child, yaw_joint, pitch_joint in CHAIN:
        yaw = angles[..., JOINT_NAMES.index(yaw_joint)]
        pitch = angles[..., JOINT_NAMES.index(pitch_joint)] if pitch_joint is not None else np.zeros_like(yaw)
        rel = euler_to_quat(np.stack([np.zeros_like(yaw), pitch, yaw], axis=-1))
        out[..., child, :] = _mul(rel, out[..., parent, :])
    return out


def compose_pose(a: Pose, b: Pose) -> Pose:
    """``a ∘ b``: pose ``b`` (expressed in frame ``a``) mapped into ``a``'s parent."""
    pos = a.position + rotation_matrix(a.orientation) @ b.position
    return Pose(pos, normalize(_mul(a.orientation, b.orientation)))


def invert_pose(p: Pose) -> Pose:
    inv = p.orientation * np.array([-1.0, -1.0, -1.0, 1.0])
    return Pose(-(rotation_matrix(inv) @ p.position), inv)


def relative_pose(tool_in_camera: Pose, wrist_in_camera: Pose) -> Pose:
    """Tool pose expressed in the wrist frame."""
    return compose_pose(invert_pose(wrist_in_camera), tool_in_camera)
