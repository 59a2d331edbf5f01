"""Shared fixtures: one benchmark session, trained once per test run."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import pytest
from hypothesis import settings

from motionmap import dataset as ds
from motionmap import sensor_io as sio
from motionmap import synth
from motionmap.analysis import importance_report, top_k_features
from motionmap.eval import fit_and_score, paired_configs, pca_experiment, reduced_input_experiment, sweep
from motionmap.neural import NetworkConfig

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

# Benchmark protocol used by the learning-level tests. Matches
#   motionmap generate --seed 7 --imu-noise 0.03 --occlusion 0.01
#   motionmap preprocess --rate 30 --max-gap 0.07
BENCH_SYNTH = synth.SynthConfig(seed=7, imu_noise_rad=0.03, occlusion_rate=0.01)
BENCH_RATE = 30.0
BENCH_MAX_GAP = 0.07
TRAIN_FRACTION = 0.8
TRAIN_SEED = 1
BASE_NET = NetworkConfig(architecture="dfnn", hidden_layers=2, neurons=20, epochs=200, seed=TRAIN_SEED)
DFNN_CFG, LSTM_CFG = paired_configs(BASE_NET, lstm_layers=1)

ACCEPTANCE: dict = {}


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[key] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


@dataclass
class Bench:
    train: ds.Dataset
    test: ds.Dataset
    norm: ds.NormParams
    raw: ds.Dataset
    session: synth.Session
    timings: dict = field(default_factory=dict)


def build_bench(cfg: synth.SynthConfig = BENCH_SYNTH) -> Bench:
    t0 = time.perf_counter()
    session = synth.generate_session(cfg)
    recs = sio.align_streams(session.frames, sio.tracker_stream(session.frames), cfg.calibration)
    kept = sio.filter_incomplete(recs).records
    rs = sio.resample(kept, BENCH_RATE, max_gap=BENCH_MAX_GAP)
    raw = ds.build_dataset(rs)
    dn, params = ds.normalize(raw)
    tr, te = ds.split(dn, TRAIN_FRACTION)
    return Bench(tr, te, params, raw, session, {"build": time.perf_counter() - t0})


@pytest.fixture(scope="session")
def bench() -> Bench:
    return build_bench()


class Cache(dict):
    """Lazily computed, session-wide results keyed by name."""

    def get_or(self, key, fn):
        if key not in self:
            t0 = time.perf_counter()
            self[key] = fn()
            self[key + ":seconds"] = time.perf_counter() - t0
        return self[key]


@pytest.fixture(scope="session")
def cache() -> Cache:
    return Cache()


@pytest.fixture(scope="session")
def dfnn_full(bench, cache):
    return cache.get_or("dfnn_full", lambda: fit_and_score(DFNN_CFG, bench.train, bench.test))


@pytest.fixture(scope="session")
def lstm_full(bench, cache):
    return cache.get_or("lstm_full", lambda: fit_and_score(LSTM_CFG, bench.train, bench.test))


@pytest.fixture(scope="session")
def bench_importance(bench, cache):
    return cache.get_or("importance", lambda: importance_report(bench.train))


@pytest.fixture(scope="session")
def sweep_results(bench, cache):
    return cache.get_or(
        "sweep", lambda: sweep(bench.train, bench.test, BASE_NET, neurons=(5, 10, 20, 40), layers=(1, 2, 3))
    )


@pytest.fixture(scope="session")
def top5(bench_importance):
    return top_k_features(bench_importance, 5)


@pytest.fixture(scope="session")
def reduced_results(bench, cache, top5):
    return cache.get_or(
        "reduced", lambda: reduced_input_experiment(bench.train, bench.test, top5, DFNN_CFG, LSTM_CFG)
    )


@pytest.fixture(scope="session")
def pca_results(bench, cache):
    return cache.get_or("pca", lambda: pca_experiment(bench.train, bench.test, 5, DFNN_CFG, LSTM_CFG))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
