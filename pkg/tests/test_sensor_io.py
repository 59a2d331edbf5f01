import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motionmap import quat, synth
from motionmap import sensor_io as sio
from motionmap.quat import IDENTITY, Pose
from motionmap.sensor_io import AlignedRecord, FrameError, JawCalibration, SensorFrame, TrackerRecord

CAL = JawCalibration(raw_open=1000, raw_closed=-1000)


def identity_line(t=0.0, s=0, **extra):
    obj = {"t": t, "q": [[0, 0, 0, 1]] * 12, "s": s, **extra}
    return json.dumps(obj)


def make_frame(t, tracked=True, s=0):
    pose = Pose(np.zeros(3), IDENTITY) if tracked else None
    return SensorFrame(t, np.tile(IDENTITY, (12, 1)), s, pose, pose)


# --- parsing ----------------------------------------------------------------


def test_identity_frame_gives_zero_joints():
    f = sio.parse_frame(identity_line())
    assert np.allclose(quat.joint_angles_from_chain(f.imu_quats), 0)
    assert f.tool_pose_camera is None


def test_missing_strain_named():
    obj = {"t": 0.0, "q": [[0, 0, 0, 1]] * 12}
    with pytest.raises(FrameError, match="strain_raw"):
        sio.parse_frame(json.dumps(obj))


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        "[1, 2]",
        identity_line(s=1.5),
        json.dumps({"t": 0, "q": [[0, 0, 0, 1]] * 11, "s": 0}),
        json.dumps({"t": 0, "q": [[0, 0, 0, 2]] * 12, "s": 0}),
        identity_line(tool={"p": [0, 0, 0]}),
    ],
)
def test_malformed_rejected(line):
    with pytest.raises(FrameError):
        sio.parse_frame(line)


def test_near_unit_renormalized():
    q = [[0, 0, 0, 0.9995]] * 12
    f = sio.parse_frame(json.dumps({"t": 0, "q": q, "s": 0}))
    assert np.allclose(np.linalg.norm(f.imu_quats, axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_parse_serialize_round_trip(seed):
    rng = np.random.default_rng(seed)
    q = quat.normalize(rng.normal(size=(12, 4)))
    pose = Pose(rng.normal(size=3) * 100, quat.normalize(rng.normal(size=4)))
    f = SensorFrame(float(rng.uniform(0, 100)), q, int(rng.integers(-2**23, 2**23)), pose, pose)
    g = sio.parse_frame(sio.serialize_frame(f))
    # re-normalizing an already unit quaternion may move the last bit only
    assert np.allclose(g.imu_quats, f.imu_quats, rtol=0, atol=1e-15)
    assert g.timestamp == f.timestamp and g.strain_raw == f.strain_raw
    assert np.array_equal(g.tool_pose_camera.position, pose.position)


def test_read_frames_collects_bad_lines():
    lines = [identity_line(0.0), "garbage", "", identity_line(0.02)]
    frames, bad = sio.read_frames(lines)
    assert len(frames) == 2 and [b[0] for b in bad] == [2]
    with pytest.raises(FrameError, match="line 2"):
        sio.read_frames(lines, strict=True)


# --- jaw --------------------------------------------------------------------


def test_jaw_calibration_points():
    assert sio.jaw_from_strain(1000, CAL) == pytest.approx(30.0)
    assert sio.jaw_from_strain(-1000, CAL) == pytest.approx(0.0)
    assert sio.jaw_from_strain(0, CAL) == pytest.approx(15.0)


@given(st.integers(-10**9, 10**9))
def test_jaw_always_in_range(raw):
    assert 0.0 <= sio.jaw_from_strain(raw, CAL) <= 30.0


def test_strain_inverse_within_half_count():
    cal = synth.DEFAULT_CALIBRATION
    a = np.linspace(0, 30, 1001)
    back = sio.jaw_from_strain(sio.strain_from_jaw(a, cal), cal)
    assert np.max(np.abs(back - a)) <= 0.5 * 30 / (cal.raw_open - cal.raw_closed) + 1e-12


def test_calibration_file_round_trip(tmp_path):
    p = tmp_path / "cal.json"
    CAL.save(p)
    assert JawCalibration.load(p) == CAL
    p.write_text('{"raw_open": 1}')
    with pytest.raises(FrameError, match="raw_closed"):
        JawCalibration.load(p)


# --- alignment ----------------------------------------------------------------


def test_exact_and_distant_tracker():
    frames = [make_frame(0.0, tracked=False), make_frame(0.02, tracked=False)]
    pose = Pose(np.zeros(3), IDENTITY)
    recs = sio.align_streams(frames, [TrackerRecord(0.0, pose, pose)], CAL)
    assert recs[0].complete and np.allclose(recs[0].tool_state[:3], 0)
    far = sio.align_streams(frames[:1], [TrackerRecord(0.025, pose, pose)], CAL)
    assert not far[0].complete and np.all(np.isnan(far[0].tool_state[:3]))


@given(st.integers(0, 2**32 - 1))
def test_pairing_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    imu_t = np.arange(60) * 0.02
    tr_t = np.sort(rng.choice(np.arange(60), 40, replace=False) * 0.02 + rng.uniform(-0.015, 0.015, 40))
    tr_t = np.unique(tr_t)
    idx = sio.nearest_indices(imu_t, tr_t)
    for i, t in enumerate(imu_t):
        d = np.abs(tr_t - t)
        best = int(np.flatnonzero(d == d.min())[0])
        assert idx[i] == best
    # completeness follows the ±10 ms window
    poses = [TrackerRecord(float(t), Pose(np.zeros(3), IDENTITY), Pose(np.zeros(3), IDENTITY)) for t in tr_t]
    recs = sio.align_streams([make_frame(float(t), False) for t in imu_t], poses, CAL)
    for i, t in enumerate(imu_t):
        assert recs[i].complete == (np.min(np.abs(tr_t - t)) <= 0.010 + 1e-12)


def test_non_monotonic_rejected():
    with pytest.raises(FrameError):
        sio.align_streams([make_frame(0.02), make_frame(0.0)], [], CAL)


def test_relative_tool_orientation():
    wrist = Pose(np.array([0.0, 0, 100]), quat.axis_angle_quat([0, 0, 1], 30))
    tool_rel = quat.euler_to_quat([10.0, -20.0, 45.0])
    tool = Pose(np.array([5.0, 5, 5]), quat.quat_multiply(wrist.orientation, tool_rel))
    rec = sio.align_streams([SensorFrame(0.0, np.tile(IDENTITY, (12, 1)), 0, tool, wrist)],
                            [TrackerRecord(0.0, tool, wrist)], CAL)[0]
    assert np.allclose(rec.tool_state[:3], [10, -20, 45], atol=1e-9)


# --- filtering / resampling -------------------------------------------------------


def rec(t, x=0.0, y=0.0, complete=True):
    return AlignedRecord(t, np.full(15, x, float), np.full(4, y, float), complete)


def test_filter_counts():
    recs = [rec(i * 0.02, complete=i not in (2, 5, 7)) for i in range(10)]
    res = sio.filter_incomplete(recs)
    assert len(res.records) == 7 and res.dropped == 3
    assert sio.filter_incomplete(res.records).dropped == 0


def test_occlusion_burst_becomes_exact_gap():
    cfg = synth.SynthConfig(duration=20, seed=4, occlusion_rate=0.05)
    s = synth.generate_session(cfg)
    recs = sio.align_streams(s.frames, sio.tracker_stream(s.frames), cfg.calibration)
    kept = sio.filter_incomplete(recs).records
    kept_t = np.array([r.timestamp for r in kept])
    assert np.array_equal(kept_t, s.timestamps[~s.occluded])


def test_resample_constant_and_ramp():
    src = [rec(i / 50, 7.0, 3.0) for i in range(101)]
    out = sio.resample(src, 30.0)
    assert all(np.allclose(r.joint_angles, 7.0) and np.allclose(r.tool_state, 3.0) for r in out)

    ramp = [AlignedRecord(i / 50, np.full(15, 2.0 * i / 50), np.array([0, 0, 0, 10.0 * i / 50]), True)
            for i in range(101)]
    out = sio.resample(ramp, 30.0)
    t = np.array([r.timestamp for r in out])
    assert np.allclose(np.diff(t), 1 / 30, atol=1e-12) and len(out) == 61
    assert np.allclose([r.joint_angles[0] for r in out], 2.0 * t, atol=1e-9)
    assert np.allclose([r.tool_state[3] for r in out], 10.0 * t, atol=1e-9)


def test_resample_takes_short_way_across_seam():
    src = [AlignedRecord(0.0, np.full(15, 179.0), np.array([179.0, 0, 0, 0]), True),
           AlignedRecord(0.1, np.full(15, -179.0), np.array([-179.0, 0, 0, 0]), True)]
    out = sio.resample(src, 20.0)
    mid = out[1]
    assert mid.timestamp == pytest.approx(0.05)
    assert abs(mid.joint_angles[0]) == pytest.approx(180.0)
    assert abs(mid.tool_state[0]) == pytest.approx(180.0)


def test_resample_max_gap_drops_bridged_points():
    src = [rec(t) for t in (0.0, 0.02, 0.04, 0.20, 0.22)]
    out = sio.resample(src, 50.0, max_gap=0.03)
    t = [r.timestamp for r in out]
    assert np.allclose(t, [0.0, 0.02, 0.04, 0.20, 0.22], atol=1e-9)
    assert len(sio.resample(src, 50.0)) == 12


def test_record_lines(tmp_path):
    r = AlignedRecord(1.5, np.arange(15.0), np.arange(4.0), True)
    back = sio.record_from_line(sio.record_to_line(r))
    assert back.timestamp == 1.5 and np.array_equal(back.joint_angles, r.joint_angles)
    with pytest.raises(FrameError):
        sio.record_from_line('{"t": 0, "x": [1], "y": [1, 2, 3, 4]}')
    p = tmp_path / "r.jsonl"
    sio.write_records([r, r], p)
    assert len(sio.read_records(p)) == 2
