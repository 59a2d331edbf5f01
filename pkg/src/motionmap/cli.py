"""``motionmap`` command line: file-based pipeline stages.

Every command that writes an output file also writes ``<output>.manifest.json``
with the parsed configuration, paths, seed, version, wall time and exit status.
Wall-clock measurements go to the manifest only, so report files are
byte-identical across reruns with the same inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import quat
from .analysis import TreeParams, importance_report, pca_fit, top_k_features
from .dataset import OUTPUT_NAMES, load_dataset, normalize, save_dataset, split, build_dataset
from .eval import metrics, paired_configs, pca_datasets, pca_experiment, reduced_input_experiment, sweep
from .neural import NetworkConfig, StreamPredictor, TrainingError, init_network, load_model, save_model, train
from .sensor_io import (
    ALIGN_WINDOW,
    FrameError,
    JawCalibration,
    align_streams,
    filter_incomplete,
    parse_frame,
    read_frames,
    resample,
    tracker_stream,
)
from .synth import DEFAULT_CALIBRATION, SynthConfig, generate_session, write_session

log = logging.getLogger("motionmap")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


# --- helpers ---------------------------------------------------------------


def _sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.stem + suffix)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)
        fh.write("\n")


def _write_text(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("list is empty")
    return vals


def _load_split(path, fraction: float):
    """Dataset file -> normalized (train, test) using the stored NormParams."""
    d, params = load_dataset(path)
    dn, _ = normalize(d, params)
    return split(dn, fraction)


def _net_config(args, input_dim: int = 15) -> NetworkConfig:
    return NetworkConfig(
        architecture=args.arch,
        hidden_layers=args.layers,
        neurons=args.neurons,
        input_dim=input_dim,
        epochs=args.epochs,
        learning_rate=args.lr,
        decay=args.decay,
        batch_size=args.batch_size,
        seed=args.seed,
        window_length=args.window,
    )


def _print(text: str) -> None:
    sys.stdout.write(text + "\n")


# --- commands --------------------------------------------------------------
# Each returns (outputs, extra) where ``extra`` lands in the manifest.


def cmd_generate(args):
    cfg = SynthConfig(
        duration=args.duration,
        rate=args.rate,
        seed=args.seed,
        imu_noise_rad=args.imu_noise,
        strain_noise_counts=args.strain_noise,
        tracker_noise_mm=args.tracker_noise_mm,
        tracker_noise_deg=args.tracker_noise_deg,
        occlusion_rate=args.occlusion,
    )
    session = generate_session(cfg)
    truth, calib = _sidecar(args.output, ".truth.jsonl"), _sidecar(args.output, ".calib.json")
    write_session(session, args.output, truth, calib)
    log.info("wrote %d frames to %s", len(session.frames), args.output)
    return [args.output, str(truth), str(calib)], {"frames": len(session.frames),
                                                    "occluded": int(session.occluded.sum())}


def cmd_preprocess(args):
    calib_path = args.calib or _sidecar(args.input, ".calib.json")
    if args.calib is None and not Path(calib_path).exists():
        log.info("no calibration file found, using the default calibration")
        cal = DEFAULT_CALIBRATION
    else:
        cal = JawCalibration.load(calib_path)
    with open(args.input) as fh:
        frames, bad = read_frames(fh, strict=args.strict)
    for lineno, msg in bad:
        log.warning("line %d skipped: %s", lineno, msg)
    if not frames:
        raise FrameError("no valid frames in input")
    recs = align_streams(frames, tracker_stream(frames), cal, args.align_window)
    filt = filter_incomplete(recs)
    if not filt.records:
        raise FrameError("every record is incomplete")
    out = filt.records if args.rate <= 0 else resample(filt.records, args.rate, args.max_gap)
    d = build_dataset(out)
    save_dataset(d, args.output)
    log.info("%d frames, %d incomplete dropped, %d samples written", len(frames), filt.dropped, len(d))
    return [args.output, str(_sidecar(args.output, ".norm.json"))], {
        "frames": len(frames), "skipped_lines": len(bad), "dropped_incomplete": filt.dropped, "samples": len(d),
    }


def cmd_train(args):
    tr, te = _load_split(args.data, args.split)
    cfg = _net_config(args, tr.inputs.shape[1])
    model = train(init_network(cfg), tr, te)
    save_model(model, args.output)
    rep = metrics(model, te, tr)
    _print(f"{cfg.architecture} n={cfg.neurons} l={cfg.hidden_layers}: test mse {rep.test.mse:.6g}, r2 {rep.test.r2:.4f}")
    return [args.output], {"train_time_s": model.train_time, "test_mse": rep.test.mse, "test_r2": rep.test.r2}


def _metrics_table(rep) -> str:
    lines = [f"{'set':<6} {'mse':>11} {'r2':>8}  " + " ".join(f"{n + '_deg':>9}" for n in OUTPUT_NAMES)]
    for name, m in (("train", rep.train), ("test", rep.test)):
        if m is not None:
            lines.append(f"{name:<6} {m.mse:11.6g} {m.r2:8.4f}  " + " ".join(f"{v:9.3f}" for v in m.rmse))
    lines.append(f"prediction time: {rep.batch_time * 1e3:.2f} ms per batch, {rep.sample_time * 1e6:.2f} us per sample")
    return "\n".join(lines)


def cmd_eval(args):
    model = load_model(args.model)
    tr, te = _load_split(args.data, args.split)
    rep = metrics(model, te, tr)
    _print(_metrics_table(rep))
    timing = {"predict_time_batch_s": rep.batch_time, "predict_time_per_sample_s": rep.sample_time}
    if not args.output:
        return [], timing
    _write_json(args.output, rep.to_dict(timing=False))
    return [args.output], timing


def cmd_importance(args):
    tr, _ = _load_split(args.data, args.split)
    rep = importance_report(tr, TreeParams(args.max_depth, args.min_leaf), args.forest, args.trees, args.seed)
    top = top_k_features(rep, args.top)
    for out in OUTPUT_NAMES:
        _print(f"{out:>5}: " + " ".join(rep.ranking(out)[:5]))
    _print(f"top-{args.top} (mean over outputs): " + " ".join(rep.feature_names[i] for i in top))
    if not args.output:
        return [], {}
    obj = rep.to_dict()
    obj["top_k"] = [rep.feature_names[i] for i in top]
    _write_json(args.output, obj)
    csv_path = _sidecar(args.output, ".csv")
    _write_text(csv_path, rep.to_csv())
    return [args.output, str(csv_path)], {}


def cmd_pca(args):
    tr, te = _load_split(args.data, args.split)
    if args.experiment:
        base = replace(_net_config(args), input_dim=args.k)
        dfnn_cfg, lstm_cfg = paired_configs(base, args.lstm_layers)
        reps = pca_experiment(tr, te, args.k, dfnn_cfg, lstm_cfg)
        return _experiment_output(args, reps, {"k": args.k})
    model = pca_fit(tr.inputs, args.k)
    _print("explained variance ratio: " + " ".join(f"{r:.4f}" for r in model.explained_variance_ratio))
    if not args.output:
        return [], {}
    _write_json(args.output, model.to_dict())
    return [args.output], {}


def _experiment_output(args, reps, header: dict):
    obj = dict(header)
    timing = {}
    for arch, rep in zip(("dfnn", "lstm"), reps):
        _print(f"[{arch}]\n" + _metrics_table(rep))
        obj[arch] = rep.to_dict(timing=False)
        timing[arch] = {"predict_time_batch_s": rep.batch_time}
    if not args.output:
        return [], timing
    _write_json(args.output, obj)
    return [args.output], timing


def cmd_reduced(args):
    tr, te = _load_split(args.data, args.split)
    if args.features:
        names = [s.strip() for s in args.features.split(",") if s.strip()]
        unknown = [n for n in names if n not in tr.feature_names]
        if unknown:
            raise UsageError(f"unknown feature names: {', '.join(unknown)}")
        idx = [tr.feature_names.index(n) for n in names]
    else:
        rep = importance_report(tr)
        idx = top_k_features(rep, args.top)
    base = _net_config(args)
    dfnn_cfg, lstm_cfg = paired_configs(base, args.lstm_layers)
    reps = reduced_input_experiment(tr, te, idx, dfnn_cfg, lstm_cfg)
    return _experiment_output(args, reps, {"features": [tr.feature_names[i] for i in idx]})


def cmd_sweep(args):
    tr, te = _load_split(args.data, args.split)
    base = _net_config(args, tr.inputs.shape[1])
    rep = sweep(tr, te, base, args.grid_neurons, args.grid_layers, args.archs, jobs=args.jobs)
    _print(rep.table())
    timing = {f"{e.architecture}:{e.neurons}:{e.layers}": e.train_time for e in rep.entries}
    failed = sum(not e.ok for e in rep.entries)
    if not args.output:
        return [], {"train_time_s": timing, "failed_cells": failed}
    _write_json(args.output, rep.to_dict(timing=False))
    csv_path = _sidecar(args.output, ".csv")
    _write_text(csv_path, rep.to_csv(timing=False))
    return [args.output, str(csv_path)], {"train_time_s": timing, "failed_cells": failed}


def frame_joint_angles(line: str) -> tuple[float, np.ndarray]:
    """Timestamp and joint angles from a raw sensor frame (``q``) or an aligned record (``x``)."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise FrameError("frame must be a JSON object")
    if "x" in obj:
        x = np.asarray(obj["x"], dtype=float)
        if x.shape != (15,):
            raise FrameError("field 'x' must hold 15 joint angles")
        return float(obj.get("t", 0.0)), x
    frame = parse_frame(line)
    return frame.timestamp, quat.joint_angles_from_chain(frame.imu_quats)


def predict_line(predictor: StreamPredictor, line: str) -> str:
    t, x = frame_joint_angles(line)
    y = predictor.push(x)
    return json.dumps({"t": t, **{k: float(v) for k, v in zip(OUTPUT_NAMES, y)}})


def cmd_predict(args):
    model = load_model(args.model)
    sp = StreamPredictor(model)
    out = open(args.output, "w") if args.output else sys.stdout
    n = 0
    lat = []
    try:
        with open(args.input) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                t0 = time.perf_counter()
                try:
                    text = predict_line(sp, line)
                except FrameError as exc:
                    raise FrameError(f"line {lineno}: {exc}") from None
                out.write(text + "\n")
                out.flush()
                lat.append(time.perf_counter() - t0)
                n += 1
    finally:
        if out is not sys.stdout:
            out.close()
    extra = {"frames": n}
    if lat:
        extra["latency_ms"] = {"p50": float(np.percentile(lat, 50) * 1e3), "p99": float(np.percentile(lat, 99) * 1e3)}
    return ([args.output] if args.output else []), extra


# --- parser ----------------------------------------------------------------


def _add_common(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="seed for every random stream (default 0)")
    p.add_argument("--jobs", type=int, default=d(1), help="worker processes for sweep (default 1)")
    p.add_argument("-o", "--output", default=d(None), help="output path")


def _add_net(p, arch="dfnn", layers=2, neurons=20):
    p.add_argument("--arch", choices=("dfnn", "lstm"), default=arch)
    p.add_argument("-l", "--layers", type=int, default=layers, help="hidden layers")
    p.add_argument("-n", "--neurons", type=int, default=neurons, help="units per hidden layer")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--decay", type=float, default=0.0)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--window", type=int, default=16, help="LSTM window length")


def _add_split(p):
    p.add_argument("--split", type=float, default=0.8, help="training fraction (contiguous split)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="motionmap", description="Hand-motion to tool-state mapping pipeline.")
    ap.add_argument("--version", action="version", version=f"motionmap {__version__}")
    _add_common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)

    def new(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _add_common(p, suppress=True)
        p.set_defaults(func=fn)
        return p

    p = new("generate", cmd_generate, "write a synthetic raw session plus truth and calibration sidecars")
    p.add_argument("--duration", type=float, default=334.0, help="seconds (default 334)")
    p.add_argument("--rate", type=float, default=50.0, help="acquisition rate in Hz")
    p.add_argument("--imu-noise", type=float, default=0.0, help="IMU jitter, radians")
    p.add_argument("--strain-noise", type=float, default=0.0, help="strain gauge noise, counts")
    p.add_argument("--tracker-noise-mm", type=float, default=0.0)
    p.add_argument("--tracker-noise-deg", type=float, default=0.0)
    p.add_argument("--occlusion", type=float, default=0.0, help="fraction of frames with tracker occlusion")

    p = new("preprocess", cmd_preprocess, "align, filter and resample raw frames into a dataset")
    p.add_argument("input")
    p.add_argument("--calib", help="jaw calibration JSON (default: <input>.calib.json if present)")
    p.add_argument("--rate", type=float, default=30.0, help="resample rate in Hz; <= 0 keeps the raw grid")
    p.add_argument("--max-gap", type=float, default=0.07, help="do not interpolate across gaps longer than this (s)")
    p.add_argument("--align-window", type=float, default=ALIGN_WINDOW, help="tracker matching window (s)")
    p.add_argument("--strict", action="store_true", help="fail on the first malformed frame")

    p = new("train", cmd_train, "train a DFNN or LSTM on a dataset")
    p.add_argument("data")
    _add_split(p)
    _add_net(p)

    p = new("eval", cmd_eval, "score a trained model on the train/test split of a dataset")
    p.add_argument("model")
    p.add_argument("data")
    _add_split(p)

    p = new("importance", cmd_importance, "regression-tree MDI importance per output")
    p.add_argument("data")
    _add_split(p)
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--forest", action="store_true", help="average MDI over bagged trees")
    p.add_argument("--trees", type=int, default=25)
    p.add_argument("--top", type=int, default=5)

    p = new("pca", cmd_pca, "fit PCA on the training inputs, optionally retrain on the scores")
    p.add_argument("data")
    _add_split(p)
    p.add_argument("-k", type=int, default=5, help="number of components")
    p.add_argument("--experiment", action="store_true", help="retrain DFNN and LSTM on the k scores")
    p.add_argument("--lstm-layers", type=int, default=1)
    _add_net(p)

    p = new("sweep", cmd_sweep, "train over a grid of (n, l) and report test MSE")
    p.add_argument("data")
    _add_split(p)
    p.add_argument("--grid-neurons", type=_int_list, default=[5, 10, 20, 40, 80])
    p.add_argument("--grid-layers", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--archs", type=lambda s: [a.strip() for a in s.split(",")], default=["dfnn"])
    _add_net(p)

    p = new("reduced", cmd_reduced, "retrain DFNN and LSTM on the most important joints only")
    p.add_argument("data")
    _add_split(p)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--features", help="comma-separated joint names (overrides --top)")
    p.add_argument("--lstm-layers", type=int, default=1)
    _add_net(p)

    p = new("predict", cmd_predict, "stream predictions, one tool-state line per input frame")
    p.add_argument("model")
    p.add_argument("--input", required=True, help="raw frames or aligned records, one JSON object per line")
    return ap


REQUIRES_OUTPUT = {"generate", "preprocess", "train"}


def _manifest(args, argv, outputs, extra, status, wall, error=None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    inputs = [str(getattr(args, k)) for k in ("input", "data", "model") if getattr(args, k, None)]
    m = {
        "command": args.command,
        "argv": list(argv),
        "config": cfg,
        "inputs": inputs,
        "outputs": [str(o) for o in outputs],
        "seed": args.seed,
        "version": __version__,
        "wall_time_s": wall,
        "exit_status": status,
        "extra": extra,
    }
    if error:
        m["error"] = error
    return m


def _setup_logging() -> None:
    level = os.environ.get("MOTIONMAP_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"MOTIONMAP_LOG must be one of {', '.join(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _setup_logging()
    except UsageError as exc:
        sys.stderr.write(f"motionmap: {exc}\n")
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in REQUIRES_OUTPUT and not args.output:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"motionmap {args.command}: -o/--output is required\n")
        return EXIT_USAGE
    if args.seed < 0 or args.jobs < 1:
        sys.stderr.write("motionmap: --seed must be >= 0 and --jobs >= 1\n")
        return EXIT_USAGE

    t0 = time.perf_counter()
    outputs, extra, error = [], {}, None
    try:
        outputs, extra = args.func(args)
        status = EXIT_OK
    except UsageError as exc:
        status, error = EXIT_USAGE, str(exc)
    except BrokenPipeError:
        # downstream reader went away (e.g. `| head`); not an error of ours
        sys.stdout = open(os.devnull, "w")
        status = EXIT_OK
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        status, error = EXIT_IO, f"{exc.strerror}: {exc.filename}"
    except OSError as exc:
        status, error = EXIT_IO, str(exc)
    except (FrameError, ValueError, KeyError, TrainingError, quat.QuaternionError) as exc:
        status, error = EXIT_DATA, str(exc)
    if error:
        sys.stderr.write(f"motionmap {args.command}: {error}\n")
    if args.output:
        try:
            wall = time.perf_counter() - t0
            _write_json(_sidecar(args.output, ".manifest.json"),
                        _manifest(args, argv, outputs, extra, status, wall, error))
        except OSError as exc:
            sys.stderr.write(f"motionmap: could not write manifest: {exc}\n")
            status = status or EXIT_IO
    return status


if __name__ == "__main__":
    sys.exit(main())
