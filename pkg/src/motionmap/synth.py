"""Synthetic surgical sessions with a known joint -> tool mapping.

Joint trajectories are driven by a few shared band-limited "synergy" signals
plus small per-joint components, squashed into anatomical ranges. The tool
state is a sparse smooth function of five joints (:class:`OracleMap`). The
session is rendered into the raw line format: the IMU chain is posed by
inverting the joint-angle model, the tool pose is placed relative to a moving
wrist, and the jaw is written as strain-gauge counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from . import quat
from .quat import JOINT_NAMES, Pose
from .sensor_io import JawCalibration, SensorFrame, serialize_frame, strain_from_jaw

J = {name: i for i, name in enumerate(JOINT_NAMES)}

# degrees; (low, high) per joint in JOINT_NAMES order
JOINT_RANGES = (
    (0.0, 80.0), (-15.0, 15.0), (0.0, 100.0), (0.0, 70.0),
    (0.0, 80.0), (-15.0, 15.0), (0.0, 100.0), (0.0, 70.0),
    (-15.0, 35.0), (0.0, 60.0), (0.0, 55.0), (0.0, 75.0), (0.0, 60.0),
    (-50.0, 50.0), (-20.0, 30.0),
)

# Synergy loadings (rows: joints, columns: five shared motion signals). The
# five joints the oracle reads each follow one synergy; the rest blend two or
# three so that no joint is a near copy of another. Rows are unit-normalized.
_MIX = np.array([
    # s_mcp  s_pip  s_opp  s_ip   s_wrist
    [1.0,    0.0,   0.0,   0.0,   0.0],   # ff_j1
    [0.6,    0.0,  -0.5,   0.0,   0.6],   # ff_j2
    [0.0,    1.0,   0.0,   0.0,   0.0],   # ff_j3
    [0.5,    0.7,   0.0,   0.5,   0.0],   # ff_j4
    [0.7,    0.6,   0.0,   0.0,   0.4],   # mf_j1
    [0.6,    0.0,  -0.6,   0.0,   0.5],   # mf_j2
    [0.6,    0.6,   0.0,  -0.5,   0.0],   # mf_j3
    [0.0,    0.5,   0.6,   0.6,   0.0],   # mf_j4
    [-0.5,   0.0,   0.6,   0.0,   0.6],   # th_j1
    [0.0,    0.0,   1.0,   0.0,   0.0],   # th_j2
    [0.0,    0.5,   0.6,   0.6,   0.0],   # th_j3
    [0.0,    0.0,   0.0,   1.0,   0.0],   # th_j4
    [0.5,    0.0,   0.0,   0.7,  -0.5],   # th_j5
    [0.5,    0.0,  -0.6,   0.0,   0.6],   # wr_j1
    [0.0,    0.0,   0.0,   0.0,   1.0],   # wr_j2
])
_norm = np.linalg.norm(_MIX, axis=1, keepdims=True)
SYNERGY_MIX = _MIX / _norm

DEFAULT_CALIBRATION = JawCalibration(raw_open=8_000_000, raw_closed=-8_000_000)
TOOL_OFFSET_MM = (85.0, 12.0, -25.0)


@dataclass(frozen=True)
class OracleMap:
    """Ground-truth tool state as a sparse function of the joint angles.

    ``rest`` holds roll/pitch/yaw (deg) and the jaw logit at all-zero joint
    angles. Each ``terms`` entry ``(out, joint, amp, gain, centre)`` adds
    ``amp * (tanh(gain * (a - centre)) - tanh(-gain * centre))``; each ``pairs``
    entry ``(out, j1, j2, amp, s1, s2)`` adds ``amp * tanh(a1 / s1) * tanh(a2 / s2)``.
    Both vanish at zero angles. Output 3 is a logit mapped to the jaw as
    ``30 * sigmoid(logit)``.
    """

    rest: tuple = (5.0, -10.0, 15.0, -1.0)
    terms: tuple = (
        (0, J["th_j2"], 32.0, 0.05, 30.0),
        (0, J["wr_j2"], 18.0, 0.06, 5.0),
        (0, J["ff_j1"], 8.0, 0.04, 40.0),
        (1, J["ff_j1"], 28.0, 0.045, 40.0),
        (1, J["th_j2"], 12.0, 0.05, 30.0),
        (1, J["wr_j2"], 10.0, 0.05, 5.0),
        (2, J["wr_j2"], 45.0, 0.05, 5.0),
        (2, J["th_j2"], 25.0, 0.04, 30.0),
        (2, J["ff_j1"], 20.0, 0.04, 40.0),
        (3, J["th_j2"], 2.4, 0.06, 30.0),
        (3, J["th_j4"], 1.8, 0.05, 38.0),
        (3, J["ff_j3"], -1.6, 0.04, 50.0),
    )
    pairs: tuple = (
        (0, J["th_j2"], J["ff_j1"], 6.0, 40.0, 60.0),
        (2, J["wr_j2"], J["th_j2"], 10.0, 25.0, 40.0),
        (3, J["th_j2"], J["th_j4"], 0.8, 40.0, 50.0),
    )

    def to_dict(self) -> dict:
        return {"rest": list(self.rest), "terms": [list(t) for t in self.terms], "pairs": [list(p) for p in self.pairs]}

    @classmethod
    def from_dict(cls, obj: dict) -> "OracleMap":
        return cls(
            tuple(obj["rest"]),
            tuple(tuple(t) for t in obj["terms"]),
            tuple(tuple(p) for p in obj["pairs"]),
        )

    def relevant_joints(self, output: Optional[int] = None) -> set[int]:
        idx = {t[1] for t in self.terms if output is None or t[0] == output}
        for p in self.pairs:
            if output is None or p[0] == output:
                idx |= {p[1], p[2]}
        return idx

    def rest_pose(self) -> np.ndarray:
        return oracle_eval(np.zeros(len(JOINT_NAMES)), self)

    def lipschitz_bound(self) -> np.ndarray:
        """Upper bound on |d output / d angle| summed over joints (deg/deg) per output."""
        bound = np.zeros(4)
        for out, _, amp, gain, _ in self.terms:
            bound[out] += abs(amp) * gain
        for out, _, _, amp, s1, s2 in self.pairs:
            bound[out] += abs(amp) * (1.0 / s1 + 1.0 / s2)
        bound[3] *= 30.0 / 4.0  # max slope of 30 * sigmoid
        return bound


def oracle_eval(joint_angles, oracle: OracleMap = OracleMap()) -> np.ndarray:
    """Tool state (roll, pitch, yaw, jaw) in degrees for ``(..., 15)`` joint angles."""
    a = np.asarray(joint_angles, dtype=float)
    acc = [np.full(a.shape[:-1], float(r)) for r in oracle.rest]
    for out, j, amp, gain, centre in oracle.terms:
        acc[out] = acc[out] + amp * (np.tanh(gain * (a[..., j] - centre)) - np.tanh(-gain * centre))
    for out, j1, j2, amp, s1, s2 in oracle.pairs:
        acc[out] = acc[out] + amp * np.tanh(a[..., j1] / s1) * np.tanh(a[..., j2] / s2)
    jaw = np.clip(30.0 / (1.0 + np.exp(-acc[3])), 0.0, 30.0)
    return np.stack([acc[0], acc[1], acc[2], jaw], axis=-1)


@dataclass(frozen=True)
class SynthConfig:
    duration: float = 334.0  # s
    rate: float = 50.0  # Hz
    seed: int = 0
    cutoff_hz: float = 2.0
    synergy_gain: float = 1.6
    independent_share: float = 0.15
    independent_joints: tuple = ()
    joint_ranges: tuple = JOINT_RANGES
    imu_noise_rad: float = 0.0
    strain_noise_counts: float = 0.0
    tracker_noise_mm: float = 0.0
    tracker_noise_deg: float = 0.0
    occlusion_rate: float = 0.0
    occlusion_burst: tuple = (5, 25)  # frames, inclusive range
    oracle: OracleMap = field(default_factory=OracleMap)
    calibration: JawCalibration = DEFAULT_CALIBRATION

    def __post_init__(self):
        if self.duration <= 0 or self.rate <= 0 or self.cutoff_hz <= 0:
            raise ValueError("duration, rate and cutoff must be positive")
        if self.cutoff_hz >= self.rate / 2:
            raise ValueError("cutoff must be below the Nyquist frequency")
        for name in ("imu_noise_rad", "strain_noise_counts", "tracker_noise_mm", "tracker_noise_deg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.occlusion_rate < 0.5:
            raise ValueError("occlusion_rate must be in [0, 0.5)")
        if len(self.joint_ranges) != len(JOINT_NAMES):
            raise ValueError("joint_ranges needs one entry per joint")
        for lo, hi in self.joint_ranges:
            if not -180.0 < lo < hi <= 180.0:
                raise ValueError("joint ranges must be increasing and within (-180, 180]")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.rate))


@dataclass
class Session:
    """A generated session: raw frames plus ground truth at the acquisition rate."""

    frames: list
    timestamps: np.ndarray
    joint_angles: np.ndarray  # true, (N, 15)
    targets: np.ndarray  # oracle tool state, (N, 4)
    occluded: np.ndarray  # bool, (N,)
    config: SynthConfig


def band_limited(rng: np.random.Generator, n: int, k: int, rate: float, cutoff: float) -> np.ndarray:
    """``k`` zero-mean unit-variance low-pass noise signals of length ``n``."""
    sos = signal.butter(4, cutoff, fs=rate, output="sos")
    pad = int(rate * 4)
    raw = rng.standard_normal((n + 2 * pad, k))
    out = signal.sosfiltfilt(sos, raw, axis=0)[pad : pad + n]
    out -= out.mean(axis=0)
    return out / out.std(axis=0)


def joint_trajectories(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.n_frames
    n_j = len(JOINT_NAMES)
    syn = band_limited(rng, n, SYNERGY_MIX.shape[1], cfg.rate, cfg.cutoff_hz)
    own = band_limited(rng, n, n_j, cfg.rate, cfg.cutoff_hz)
    mix = SYNERGY_MIX
    share = np.full(n_j, cfg.independent_share)
    for name in cfg.independent_joints:
        share[J[name]] = 1.0
    u = np.sqrt(1.0 - share**2) * (syn @ mix.T) + share * own
    lo, hi = np.array(cfg.joint_ranges).T
    return lo + (hi - lo) / (1.0 + np.exp(-cfg.synergy_gain * u))


def _smooth_orientations(rng, n, rate, cutoff, scale_deg) -> np.ndarray:
    eul = band_limited(rng, n, 3, rate, cutoff / 4) * np.asarray(scale_deg)
    return quat.euler_to_quat(eul)


def _random_small_rotations(rng, shape, sigma_rad) -> np.ndarray:
    rotvec = rng.standard_normal(shape + (3,)) * sigma_rad
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    axis = np.divide(rotvec, angle, out=np.zeros_like(rotvec), where=angle > 0)
    return np.concatenate([axis * np.sin(angle / 2), np.cos(angle / 2)], axis=-1)


def occlusion_mask(rng: np.random.Generator, n: int, rate: float, burst: tuple) -> np.ndarray:
    """Exactly ``round(rate * n)`` occluded frames in non-adjacent bursts."""
    mask = np.zeros(n, dtype=bool)
    target = int(round(rate * n))
    if target == 0:
        return mask
    lengths = []
    while sum(lengths) < target:
        lengths.append(int(rng.integers(burst[0], burst[1] + 1)))
    lengths[-1] -= sum(lengths) - target
    lengths = [L for L in lengths if L > 0]
    k = len(lengths)
    free = n - target - 2 * (k + 1)
    if free < 0:
        raise ValueError("occlusion bursts do not fit in the session")
    cuts = np.sort(rng.integers(0, free + 1, size=k))
    gaps = np.diff(np.concatenate([[0], cuts])) + 2
    pos = 0
    for gap, L in zip(gaps, lengths):
        pos += gap
        mask[pos : pos + L] = True
        pos += L
    return mask


def generate_session(cfg: SynthConfig = SynthConfig()) -> Session:
    """Deterministic synthetic session for ``cfg.seed``."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(6)]
    n = cfg.n_frames
    ts = np.arange(n) / cfg.rate

    joints = joint_trajectories(cfg, streams[0])
    targets = oracle_eval(joints, cfg.oracle)

    forearm = _smooth_orientations(streams[1], n, cfg.rate, cfg.cutoff_hz, (20.0, 15.0, 40.0))
    chain = quat.chain_from_joint_angles(joints, forearm)
    if cfg.imu_noise_rad > 0:
        jitter = _random_small_rotations(streams[2], (n, 12), cfg.imu_noise_rad)
        chain = quat._mul(jitter, chain)
    chain = quat.normalize(chain)

    wrist_q = _smooth_orientations(streams[1], n, cfg.rate, cfg.cutoff_hz, (30.0, 25.0, 60.0))
    wrist_p = np.array([0.0, 0.0, 350.0]) + band_limited(streams[1], n, 3, cfg.rate, cfg.cutoff_hz / 4) * 40.0
    tool_rel_q = quat.euler_to_quat(targets[:, :3])
    tool_q = quat.normalize(quat._mul(wrist_q, tool_rel_q))
    rot_w = quat.rotation_matrix(wrist_q)
    tool_p = wrist_p + np.einsum("nij,j->ni", rot_w, np.asarray(TOOL_OFFSET_MM))
    if cfg.tracker_noise_mm > 0:
        tool_p = tool_p + streams[3].standard_normal(tool_p.shape) * cfg.tracker_noise_mm
    if cfg.tracker_noise_deg > 0:
        tool_q = quat.normalize(
            quat._mul(tool_q, _random_small_rotations(streams[3], (n,), np.radians(cfg.tracker_noise_deg)))
        )

    strain = strain_from_jaw(targets[:, 3], cfg.calibration)
    if cfg.strain_noise_counts > 0:
        strain = strain + np.rint(streams[4].standard_normal(n) * cfg.strain_noise_counts).astype(np.int64)

    occluded = occlusion_mask(streams[5], n, cfg.occlusion_rate, cfg.occlusion_burst)
    frames = []
    for i in range(n):
        tool = wrist = None
        if not occluded[i]:
            tool = Pose(tool_p[i], tool_q[i])
            wrist = Pose(wrist_p[i], wrist_q[i])
        frames.append(SensorFrame(float(ts[i]), chain[i], int(strain[i]), tool, wrist))
    return Session(frames, ts, joints, targets, occluded, cfg)


def write_session(session: Session, raw_path, truth_path=None, calib_path=None) -> None:
    with open(raw_path, "w") as fh:
        for frame in session.frames:
            fh.write(serialize_frame(frame))
            fh.write("\n")
    if truth_path is not None:
        with open(truth_path, "w") as fh:
            for t, x, y in zip(session.timestamps, session.joint_angles, session.targets):
                fh.write(json.dumps({"t": float(t), "x": x.tolist(), "y": y.tolist()}))
                fh.write("\n")
    if calib_path is not None:
        session.config.calibration.save(calib_path)
