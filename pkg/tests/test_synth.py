import json

import numpy as np
import pytest

from motionmap import sensor_io as sio
from motionmap import synth
from motionmap.quat import JOINT_NAMES
from motionmap.synth import J, OracleMap, SynthConfig, generate_session, oracle_eval


def random_joints(rng, n):
    lo, hi = np.array(synth.JOINT_RANGES).T
    return rng.uniform(lo, hi, size=(n, 15))


def test_rest_pose():
    o = OracleMap()
    rest = oracle_eval(np.zeros(15), o)
    assert np.allclose(rest[:3], o.rest[:3], atol=1e-12)
    assert rest[3] == pytest.approx(30 / (1 + np.exp(-o.rest[3])))
    assert np.array_equal(rest, o.rest_pose())


def test_jaw_monotone_in_th_j2(rng):
    lo, hi = synth.JOINT_RANGES[J["th_j2"]]
    grid = np.linspace(lo, hi, 200)
    for base in random_joints(rng, 100):
        a = np.tile(base, (grid.size, 1))
        a[:, J["th_j2"]] = grid
        assert np.all(np.diff(oracle_eval(a)[:, 3]) > 0)


def test_oracle_pure_and_bounded(rng):
    a = random_joints(rng, 1000)
    y1, y2 = oracle_eval(a), oracle_eval(a)
    assert np.array_equal(y1, y2)
    assert y1[:, 3].min() >= 0 and y1[:, 3].max() <= 30


def test_planted_structure():
    o = OracleMap()
    names = lambda idx: {JOINT_NAMES[i] for i in idx}
    assert names(o.relevant_joints(3)) == {"th_j2", "th_j4", "ff_j3"}
    assert names(o.relevant_joints(0) | o.relevant_joints(1) | o.relevant_joints(2)) == {"th_j2", "wr_j2", "ff_j1"}
    assert J["mf_j2"] not in o.relevant_joints()


def test_mf_j2_has_zero_effect(rng):
    a = random_joints(rng, 50)
    b = a.copy()
    b[:, J["mf_j2"]] = rng.uniform(-15, 15, 50)
    assert np.array_equal(oracle_eval(a), oracle_eval(b))


def test_lipschitz_bound_holds(rng):
    o = OracleMap()
    bound = o.lipschitz_bound()
    a = random_joints(rng, 300)
    h = 1e-5
    for i in range(15):
        d = np.zeros(15)
        d[i] = h
        slope = np.abs(oracle_eval(a + d) - oracle_eval(a - d)) / (2 * h)
        assert np.all(slope <= bound + 1e-6)


def test_oracle_dict_round_trip():
    o = OracleMap()
    assert OracleMap.from_dict(json.loads(json.dumps(o.to_dict()))) == o


def test_trajectories_in_range():
    s = generate_session(SynthConfig(duration=30, seed=1))
    lo, hi = np.array(synth.JOINT_RANGES).T
    assert np.all(s.joint_angles >= lo) and np.all(s.joint_angles <= hi)
    assert s.joint_angles.shape == (1500, 15)


def test_seeded_generation_bit_reproducible():
    cfg = SynthConfig(duration=10, seed=11, imu_noise_rad=0.02, strain_noise_counts=3,
                      tracker_noise_mm=0.5, tracker_noise_deg=0.2, occlusion_rate=0.05)
    a = [sio.serialize_frame(f) for f in generate_session(cfg).frames]
    b = [sio.serialize_frame(f) for f in generate_session(cfg).frames]
    c = [sio.serialize_frame(f) for f in generate_session(SynthConfig(duration=10, seed=12)).frames]
    assert a == b and a != c


def test_occlusion_rate_five_percent():
    cfg = SynthConfig(duration=100, seed=2, occlusion_rate=0.05)
    s = generate_session(cfg)
    recs = sio.align_streams(s.frames, sio.tracker_stream(s.frames), cfg.calibration)
    res = sio.filter_incomplete(recs)
    assert abs(res.dropped / len(recs) - 0.05) <= 0.005


def test_occlusion_mask_bursts(rng):
    m = synth.occlusion_mask(rng, 5000, 0.04, (5, 25))
    assert m.sum() == 200
    edges = np.flatnonzero(np.diff(np.concatenate([[0], m.astype(int), [0]])))
    lengths = edges[1::2] - edges[::2]
    assert lengths.max() <= 25 and lengths.sum() == 200


def test_zero_noise_inversion():
    cfg = SynthConfig(duration=20, seed=5)
    s = generate_session(cfg)
    recs = sio.align_streams(s.frames, sio.tracker_stream(s.frames), cfg.calibration)
    assert all(r.complete for r in recs)
    x = np.stack([r.joint_angles for r in recs])
    y = np.stack([r.tool_state for r in recs])
    assert np.max(np.abs(x - s.joint_angles)) < 1e-6
    assert np.max(np.abs(y - s.targets)) < 1e-6


def test_paper_scale_sample_count():
    cfg = SynthConfig(seed=7)
    s = generate_session(cfg)
    recs = sio.align_streams(s.frames, sio.tracker_stream(s.frames), cfg.calibration)
    out = sio.resample(sio.filter_incomplete(recs).records, 30.0)
    assert abs(len(out) - 10000) <= 50


def test_write_session(tmp_path):
    s = generate_session(SynthConfig(duration=2, seed=1))
    raw, truth, cal = tmp_path / "r.jsonl", tmp_path / "t.jsonl", tmp_path / "c.json"
    synth.write_session(s, raw, truth, cal)
    frames, bad = sio.read_frames(raw.read_text().splitlines())
    assert len(frames) == 100 and not bad
    rows = [json.loads(line) for line in truth.read_text().splitlines()]
    assert np.array_equal(rows[3]["y"], s.targets[3])
    assert sio.JawCalibration.load(cal) == s.config.calibration


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(rate=0)
    with pytest.raises(ValueError):
        SynthConfig(imu_noise_rad=-1)
    with pytest.raises(ValueError):
        SynthConfig(cutoff_hz=30)
