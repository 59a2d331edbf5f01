import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motionmap import dataset as ds
from motionmap.quat import JOINT_NAMES
from motionmap.sensor_io import AlignedRecord


def records(n, rng):
    return [AlignedRecord(i / 30, rng.uniform(-90, 90, 15), rng.uniform(0, 30, 4), True) for i in range(n)]


def test_build_shapes_and_order(rng):
    recs = records(10, rng)
    d = ds.build_dataset(recs)
    assert d.inputs.shape == (10, 15) and d.targets.shape == (10, 4)
    assert np.array_equal(d.inputs[:, 0], [r.joint_angles[0] for r in recs])
    assert d.feature_names[0] == "ff_j1"


@pytest.mark.parametrize("j", range(15))
def test_single_joint_lands_in_its_column(j):
    x = np.zeros(15)
    x[j] = 12.5
    d = ds.build_dataset([AlignedRecord(0.0, x, np.zeros(4), True)])
    assert np.flatnonzero(d.inputs[0]).tolist() == [j]
    assert d.feature_names[j] == JOINT_NAMES[j]


def test_empty_rejected():
    with pytest.raises(ValueError):
        ds.build_dataset([])


def test_normalize_examples():
    x = np.zeros((3, 15))
    x[:, 0] = [-90, 0, 90]
    x[:, 1:] = np.arange(3)[:, None]
    y = np.tile(np.arange(3.0)[:, None], (1, 4))
    y[:, 3] = [0, 10, 30]
    dn, p = ds.normalize(ds.Dataset(x, y))
    assert dn.inputs[1, 0] == 0.5
    assert dn.targets[2, 3] == 1.0
    half = ds.Dataset(x, np.full((3, 4), 0.5), normalized=True, norm=ds.NormParams(p.x_min, p.x_max, np.zeros(4), np.full(4, 30.0)))
    assert np.allclose(ds.denormalize(half).targets, 15.0)


def test_constant_column_named():
    x = np.ones((4, 15))
    x[:, 0] = np.arange(4)
    with pytest.raises(ValueError, match="ff_j2"):
        ds.normalize(ds.Dataset(x, np.arange(16.0).reshape(4, 4)))


@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_normalize_round_trip_and_range(n, seed):
    rng = np.random.default_rng(seed)
    d = ds.Dataset(rng.uniform(-180, 180, (n, 15)), rng.uniform(-50, 50, (n, 4)))
    dn, _ = ds.normalize(d)
    assert dn.inputs.min() >= 0 and dn.inputs.max() <= 1
    assert dn.targets.min() >= 0 and dn.targets.max() <= 1
    back = ds.denormalize(dn)
    assert np.max(np.abs(back.inputs - d.inputs)) < 1e-12
    assert np.max(np.abs(back.targets - d.targets)) < 1e-12


def test_split_sizes(rng):
    d = ds.build_dataset(records(10, rng))
    tr, te = ds.split(d, 0.8)
    assert (len(tr), len(te)) == (8, 2)
    big = ds.Dataset(np.zeros((10000, 15)), np.zeros((10000, 4)), timestamps=np.arange(10000.0))
    tr, te = ds.split(big, 0.8)
    assert (len(tr), len(te)) == (8000, 2000)
    assert tr.timestamps.max() < te.timestamps.min()
    with pytest.raises(ValueError):
        ds.split(ds.build_dataset(records(1, rng)), 0.8)


@given(st.integers(2, 200), st.floats(0.05, 0.95))
def test_split_preserves_rows(n, f):
    d = ds.Dataset(np.arange(n * 15.0).reshape(n, 15), np.zeros((n, 4)), timestamps=np.arange(float(n)))
    try:
        tr, te = ds.split(d, f)
    except ValueError:
        return  # one side would be empty
    assert len(tr) + len(te) == n
    assert np.array_equal(np.concatenate([tr.timestamps, te.timestamps]), d.timestamps)


def test_window_examples():
    d = ds.Dataset(np.arange(75.0).reshape(5, 15), np.arange(20.0).reshape(5, 4))
    w1 = ds.window(d, 1)
    assert w1.windows.shape == (5, 1, 15) and np.array_equal(w1.windows[:, 0], d.inputs)
    w3 = ds.window(d, 3)
    assert w3.windows.shape[0] == 3 and np.array_equal(w3.targets, d.targets[2:])
    with pytest.raises(ValueError):
        ds.window(d, 6)


@given(st.integers(1, 40), st.integers(1, 40))
def test_window_matches_slicing(n, L):
    if L > n:
        return
    d = ds.Dataset(np.random.default_rng(n).normal(size=(n, 15)), np.arange(n * 4.0).reshape(n, 4))
    w = ds.window(d, L)
    assert w.windows.shape[0] == n - L + 1
    for i in range(n - L + 1):
        assert np.array_equal(w.windows[i], d.inputs[i : i + L])
        assert np.array_equal(w.targets[i], d.targets[i + L - 1])


def test_window_split_context():
    d = ds.Dataset(np.arange(150.0).reshape(10, 15), np.arange(40.0).reshape(10, 4))
    tr, te = ds.split(d, 0.7)
    wtr, wte = ds.window_split(tr, te, 4)
    assert len(wte.targets) == len(te)
    assert np.array_equal(wte.windows[0], d.inputs[4:8])
    assert np.array_equal(wte.targets, te.targets)
    assert len(wtr.targets) == len(tr) - 3


def test_pad_history():
    x = np.arange(6.0).reshape(3, 2)
    w = ds.pad_history(x, 3)
    assert np.array_equal(w[0], [[0, 1], [0, 1], [0, 1]])
    assert np.array_equal(w[2], x)


def test_select_features(rng):
    dn, _ = ds.normalize(ds.build_dataset(records(20, rng)))
    sub = dn.select_features([9, 0])
    assert sub.feature_names == ("th_j2", "ff_j1")
    assert np.array_equal(sub.inputs, dn.inputs[:, [9, 0]])
    assert np.array_equal(sub.norm.x_min, dn.norm.x_min[[9, 0]])
    with pytest.raises(ValueError):
        dn.select_features([])


def test_save_load(tmp_path, rng):
    d = ds.build_dataset(records(25, rng))
    p = tmp_path / "data.jsonl"
    ds.save_dataset(d, p)
    back, params = ds.load_dataset(p)
    assert np.array_equal(back.inputs, d.inputs) and np.array_equal(back.targets, d.targets)
    assert ds.norm_sidecar(p).name == "data.norm.json"
    a, _ = ds.normalize(d)
    b, _ = ds.normalize(back, params)
    assert np.array_equal(a.inputs, b.inputs)
