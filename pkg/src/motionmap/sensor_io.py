"""Raw sensor stream parsing, stream alignment, filtering and resampling.

Raw frame lines are JSON objects::

    {"t": 0.02, "q": [[x, y, z, w], ... 12 ...], "s": 123,
     "tool": {"p": [x, y, z], "q": [x, y, z, w]},
     "wrist": {"p": [x, y, z], "q": [x, y, z, w]}}

``tool`` and ``wrist`` are optional (tracker occlusion). Aligned records are
written as ``{"t": ..., "x": [15 joint angles], "y": [roll, pitch, yaw, jaw]}``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from . import quat
from .quat import Pose

log = logging.getLogger(__name__)

RAW_UNIT_TOL = 1e-3
ALIGN_WINDOW = 0.010  # s, half the 50 Hz frame period
JAW_OPEN_DEG = 30.0
JAW_CLOSED_DEG = 0.0
N_SENSORS = 12


class FrameError(ValueError):
    """A raw frame or record violates the line schema."""


@dataclass(frozen=True)
class SensorFrame:
    timestamp: float
    imu_quats: np.ndarray  # (12, 4)
    strain_raw: int
    tool_pose_camera: Optional[Pose] = None
    wrist_pose_camera: Optional[Pose] = None


@dataclass(frozen=True)
class TrackerRecord:
    timestamp: float
    tool: Pose
    wrist: Pose


@dataclass(frozen=True)
class JawCalibration:
    raw_open: int
    raw_closed: int
    angle_open: float = JAW_OPEN_DEG
    angle_closed: float = JAW_CLOSED_DEG

    def __post_init__(self):
        if self.raw_open == self.raw_closed:
            raise ValueError("raw_open and raw_closed must differ")

    @classmethod
    def load(cls, path) -> "JawCalibration":
        with open(path) as fh:
            obj = json.load(fh)
        try:
            return cls(int(obj["raw_open"]), int(obj["raw_closed"]))
        except KeyError as exc:
            raise FrameError(f"calibration file missing field {exc.args[0]!r}") from None

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"raw_open": self.raw_open, "raw_closed": self.raw_closed}, fh)
            fh.write("\n")


@dataclass
class AlignedRecord:
    timestamp: float
    joint_angles: np.ndarray  # (15,) degrees
    tool_state: np.ndarray  # (4,) roll, pitch, yaw, jaw in degrees
    complete: bool = True


@dataclass
class FilterResult:
    records: list = field(default_factory=list)
    dropped: int = 0


def _pose_from_obj(obj, name: str) -> Pose:
    try:
        p = obj["p"]
        q = obj["q"]
    except (KeyError, TypeError):
        raise FrameError(f"field {name!r} must be an object with keys 'p' and 'q'") from None
    q = _check_quat(q, name)
    try:
        return Pose(np.asarray(p, dtype=float), q)
    except (ValueError, TypeError) as exc:
        raise FrameError(f"invalid pose in {name!r}: {exc}") from None


def _check_quat(q, where: str) -> np.ndarray:
    try:
        arr = np.asarray(q, dtype=float)
    except (ValueError, TypeError):
        raise FrameError(f"non-numeric quaternion in {where!r}") from None
    if arr.shape[-1:] != (4,):
        raise FrameError(f"quaternion in {where!r} must have 4 components")
    if not np.all(np.isfinite(arr)):
        raise FrameError(f"non-finite quaternion in {where!r}")
    norm = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norm - 1.0) > RAW_UNIT_TOL):
        raise FrameError(f"quaternion norm off by more than {RAW_UNIT_TOL} in {where!r}")
    return arr / norm[..., None]


def parse_frame(line: str) -> SensorFrame:
    """Validate one raw JSON line; quaternions within 1e-3 of unit are renormalized."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise FrameError("frame must be a JSON object")
    for key in ("t", "q", "s"):
        if key not in obj:
            name = {"t": "timestamp", "q": "imu_quats", "s": "strain_raw"}[key]
            raise FrameError(f"missing field {key!r} ({name})")
    t = obj["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)) or not np.isfinite(t):
        raise FrameError("field 't' must be a finite number")
    s = obj["s"]
    if isinstance(s, bool) or not isinstance(s, int):
        raise FrameError("field 's' (strain_raw) must be an integer")
    q = obj["q"]
    if not isinstance(q, list) or len(q) != N_SENSORS:
        raise FrameError(f"field 'q' must hold {N_SENSORS} quaternions")
    quats = _check_quat(q, "q")
    tool = _pose_from_obj(obj["tool"], "tool") if obj.get("tool") is not None else None
    wrist = _pose_from_obj(obj["wrist"], "wrist") if obj.get("wrist") is not None else None
    return SensorFrame(float(t), quats, s, tool, wrist)


def _pose_obj(p: Pose) -> dict:
    return {"p": p.position.tolist(), "q": p.orientation.tolist()}


def serialize_frame(frame: SensorFrame) -> str:
    obj = {"t": frame.timestamp, "q": frame.imu_quats.tolist(), "s": int(frame.strain_raw)}
    if frame.tool_pose_camera is not None:
        obj["tool"] = _pose_obj(frame.tool_pose_camera)
    if frame.wrist_pose_camera is not None:
        obj["wrist"] = _pose_obj(frame.wrist_pose_camera)
    return json.dumps(obj)


def read_frames(lines: Iterable[str], strict: bool = False) -> tuple[list[SensorFrame], list[tuple[int, str]]]:
    """Parse many lines, collecting ``(line number, reason)`` for rejected frames."""
    frames, rejected = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            frames.append(parse_frame(line))
        except FrameError as exc:
            if strict:
                raise FrameError(f"line {lineno}: {exc}") from None
            rejected.append((lineno, str(exc)))
    if rejected:
        log.info("rejected %d of %d frames", len(rejected), len(frames) + len(rejected))
    return frames, rejected


def jaw_from_strain(raw, cal: JawCalibration):
    """Linear two-point map from ADC counts to jaw angle, clamped to the jaw range."""
    frac = (np.asarray(raw, dtype=float) - cal.raw_closed) / (cal.raw_open - cal.raw_closed)
    angle = cal.angle_closed + frac * (cal.angle_open - cal.angle_closed)
    lo, hi = sorted((cal.angle_closed, cal.angle_open))
    out = np.clip(angle, lo, hi)
    return float(out) if out.ndim == 0 else out


def strain_from_jaw(angle, cal: JawCalibration):
    """Nearest ADC count producing ``angle``; inverse of :func:`jaw_from_strain`."""
    frac = (np.asarray(angle, dtype=float) - cal.angle_closed) / (cal.angle_open - cal.angle_closed)
    raw = np.rint(cal.raw_closed + frac * (cal.raw_open - cal.raw_closed)).astype(np.int64)
    return int(raw) if raw.ndim == 0 else raw


def tracker_stream(frames: Sequence[SensorFrame]) -> list[TrackerRecord]:
    """Tracker records embedded in raw frames (both markers visible)."""
    return [
        TrackerRecord(f.timestamp, f.tool_pose_camera, f.wrist_pose_camera)
        for f in frames
        if f.tool_pose_camera is not None and f.wrist_pose_camera is not None
    ]


def _check_monotonic(ts: np.ndarray, what: str) -> None:
    if ts.size > 1 and np.any(np.diff(ts) <= 0):
        raise FrameError(f"{what} timestamps are not strictly increasing")


def nearest_indices(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Index into sorted ``ref`` of the nearest value to each query (earlier wins ties)."""
    pos = np.searchsorted(ref, query)
    left = np.clip(pos - 1, 0, ref.size - 1)
    right = np.clip(pos, 0, ref.size - 1)
    take_right = np.abs(ref[right] - query) < np.abs(query - ref[left])
    return np.where(take_right, right, left)


def align_streams(
    imu_stream: Sequence[SensorFrame],
    tracker: Sequence[TrackerRecord],
    cal: JawCalibration,
    window: float = ALIGN_WINDOW,
) -> list[AlignedRecord]:
    """Pair each IMU frame with the nearest tracker record within ``window`` seconds.

    Frames without a tracker record in the window yield an incomplete record
    whose tool orientation is NaN.
    """
    if not imu_stream:
        return []
    ts = np.array([f.timestamp for f in imu_stream])
    _check_monotonic(ts, "IMU")
    quats = np.stack([f.imu_quats for f in imu_stream])
    joints = quat.joint_angles_from_chain(quats)
    jaw = jaw_from_strain(np.array([f.strain_raw for f in imu_stream]), cal)

    orient = np.full((len(imu_stream), 3), np.nan)
    complete = np.zeros(len(imu_stream), dtype=bool)
    if tracker:
        tr_ts = np.array([r.timestamp for r in tracker])
        _check_monotonic(tr_ts, "tracker")
        idx = nearest_indices(ts, tr_ts)
        complete = np.abs(tr_ts[idx] - ts) <= window + 1e-12
        for i in np.flatnonzero(complete):
            rec = tracker[idx[i]]
            rel = quat.relative_pose(rec.tool, rec.wrist)
            e = quat.quat_to_euler(rel.orientation)
            orient[i] = (e.roll, e.pitch, e.yaw)
    return [
        AlignedRecord(float(ts[i]), joints[i], np.append(orient[i], jaw[i]), bool(complete[i]))
        for i in range(len(imu_stream))
    ]


def filter_incomplete(records: Sequence[AlignedRecord]) -> FilterResult:
    kept = [r for r in records if r.complete]
    return FilterResult(kept, len(records) - len(kept))


def _wrap180(a: np.ndarray) -> np.ndarray:
    return quat._wrap180(a)


def resample(
    records: Sequence[AlignedRecord],
    rate: float,
    max_gap: Optional[float] = None,
) -> list[AlignedRecord]:
    """Linear interpolation onto the grid ``t0 + k / rate`` within the stream span.

    Joint angles and tool Euler angles are interpolated on the unwrapped angle
    axis and wrapped back to (-180, 180]; jaw is interpolated directly. With
    ``max_gap`` set, grid points whose bracketing records are further apart
    than ``max_gap`` seconds are dropped instead of bridged.
    """
    if len(records) < 2:
        raise ValueError("resampling needs at least two records")
    if rate <= 0:
        raise ValueError("rate must be positive")
    ts = np.array([r.timestamp for r in records])
    _check_monotonic(ts, "record")
    x = np.stack([r.joint_angles for r in records])
    y = np.stack([r.tool_state for r in records])

    t0 = ts[0]
    n = int(np.floor((ts[-1] - t0) * rate + 1e-9)) + 1
    grid = t0 + np.arange(n) / rate
    grid = grid[grid <= ts[-1] + 1e-9]

    def interp(col: np.ndarray, angular: bool) -> np.ndarray:
        if angular:
            return _wrap180(np.interp(grid, ts, np.unwrap(col, period=360.0)))
        return np.interp(grid, ts, col)

    gx = np.stack([interp(x[:, j], True) for j in range(x.shape[1])], axis=1)
    gy = np.stack([interp(y[:, j], j < 3) for j in range(y.shape[1])], axis=1)

    keep = np.ones(grid.size, dtype=bool)
    if max_gap is not None:
        right = np.clip(np.searchsorted(ts, grid, side="right"), 1, ts.size - 1)
        on_sample = np.abs(ts[right - 1] - grid) <= 1e-9
        keep = on_sample | (ts[right] - ts[right - 1] <= max_gap)
    return [AlignedRecord(float(grid[i]), gx[i], gy[i], True) for i in np.flatnonzero(keep)]


def record_to_line(rec: AlignedRecord) -> str:
    return json.dumps({"t": rec.timestamp, "x": rec.joint_angles.tolist(), "y": rec.tool_state.tolist()})


def record_from_line(line: str) -> AlignedRecord:
    try:
        obj = json.loads(line)
        t, x, y = obj["t"], obj["x"], obj["y"]
    except json.JSONDecodeError as exc:
        raise FrameError(f"malformed JSON: {exc.msg}") from None
    except (KeyError, TypeError) as exc:
        raise FrameError(f"aligned record missing field {exc.args[0]!r}") from None
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (15,) or y.shape != (4,):
        raise FrameError("aligned record needs 15 inputs 'x' and 4 targets 'y'")
    return AlignedRecord(float(t), x, y, True)


def write_records(records: Iterable[AlignedRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(record_to_line(rec))
            fh.write("\n")


def read_records(path) -> list[AlignedRecord]:
    with open(path) as fh:
        return [record_from_line(line) for line in fh if line.strip()]


def iter_lines(path) -> Iterator[str]:
    with open(path) as fh:
        yield from fh
