"""Command line entry point.

Subcommands::

    synth    write a synthetic current waveform and its per-frame state labels
    analyze  run the full pipeline on a file or a synthesis config
    decode   Viterbi-decode a waveform with a saved model.txt
    metrics  temporal analytics of a state-label file

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import hmm, metrics, observation, pipeline, signal_io, tfa
from .errors import ArcRegimeError, ConfigError


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON or key=value config file")
    return common


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="arcregime", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic signal and labels")
    p.add_argument("--frames", type=int, default=None, help="number of synthetic frames")

    p = sub.add_parser("analyze", parents=[common], help="run the full pipeline")
    p.add_argument("--input", default=None, help="signal file (overrides config)")
    p.add_argument("--column", type=int, default=None)
    p.add_argument("--sample-rate", type=float, default=None)
    p.add_argument("--synthetic", action="store_true", help="use the bundled synthetic config")

    p = sub.add_parser("decode", parents=[common], help="decode a signal with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--sample-rate", type=float, default=None, help="defaults to the model's")

    p = sub.add_parser("metrics", parents=[common], help="temporal metrics of a state path")
    p.add_argument("--path", required=True, help="file with one state index per line")
    p.add_argument("--states", type=int, default=None, help="number of states (default: max label + 1)")
    return parser


def _read_config(args):
    if getattr(args, "config", None) is None:
        return {}
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return pipeline.parse_config_text(path.read_text())


def _synth(args):
    data = _read_config(args)
    synthesis = dict(data.get("synthesis") or {"preset": "table"})
    if args.frames is not None:
        synthesis["duration_frames"] = args.frames
    seed = getattr(args, "seed", data.get("seed", 0))
    spec = pipeline.synthesis_spec_from(synthesis, seed)
    signal, states = signal_io.synthesize_arc_signal(spec)
    out = Path(getattr(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    signal_io.write_signal(out / "signal.csv", signal)
    signal_io.write_labels(out / "labels.csv", states)
    print(json.dumps({
        "signal": str(out / "signal.csv"),
        "labels": str(out / "labels.csv"),
        "sample_rate": signal.sample_rate,
        "frame_len": spec.frame_len,
        "frames": len(states),
    }, indent=2))


def _analyze(args):
    if args.synthetic:
        data = pipeline.parse_config_text(pipeline.bundled_config_path().read_text())
        data.update(_read_config(args))
    else:
        data = _read_config(args)
    if args.input is not None:
        data.pop("synthesis", None)
        data["input_path"] = args.input
    for key, value in (("column", args.column), ("sample_rate", args.sample_rate)):
        if value is not None:
            data[key] = value
    if hasattr(args, "seed"):
        data["seed"] = args.seed
    data["output_dir"] = getattr(args, "out", data.get("output_dir") or "arcregime_out")
    config = pipeline.PipelineConfig.from_mapping(data)
    report = pipeline.run_pipeline(config)
    summary = {
        "output_dir": config.output_dir,
        "frames": int(len(report.path)),
        "final_loglik": report.loglik_trace["hmm"][-1],
        "transition": np.round(report.model.transition, 4).tolist(),
        "temporal_metrics": report.to_json_dict()["temporal_metrics"],
    }
    if report.accuracy is not None:
        summary["ground_truth_accuracy"] = report.accuracy
    print(json.dumps(summary, indent=2))


def _decode(args):
    params, scaler, conv = hmm.load_model(args.model)
    try:
        window_len = int(conv["window_len"])
        hop = int(conv["hop"])
        window_kind = conv["window_kind"]
        fs = float(conv["sample_rate"]) if args.sample_rate is None else args.sample_rate
    except (KeyError, ValueError):
        raise ConfigError(f"{args.model}: missing analysis conventions (window_len, hop, window_kind, sample_rate)")
    signal = signal_io.load_signal(args.input, args.column, fs)
    spectrogram = tfa.stft_power(signal, window_len, hop, window_kind)
    raw = observation.build_observations(spectrogram)
    z = scaler.transform(raw.vectors) if scaler is not None else raw.vectors
    path = hmm.viterbi(z, params)
    out = Path(getattr(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    target = out / "path.csv"
    with target.open("w") as fh:
        fh.write("frame,time,state,label\n")
        for i, (t, s) in enumerate(zip(raw.frame_times, path.states)):
            fh.write(f"{i},{t:.17g},{s},{params.state_labels[s]}\n")
    print(json.dumps({"path": str(target), "frames": int(len(path.states)), "log_joint": path.log_joint}, indent=2))


def _metrics(args):
    states = signal_io.load_labels(args.path)
    K = args.states if args.states is not None else int(states.max()) + 1
    tm = metrics.temporal_metrics(states, K)
    emp, unvisited = metrics.empirical_transition_matrix(states, K)
    result = {
        "temporal_metrics": tm.__dict__,
        "empirical_transition": emp.tolist(),
        "unvisited_states": np.flatnonzero(unvisited).tolist(),
    }
    if K == 3:
        persistence, inst = metrics.transition_metrics(emp)
        result["persistence"] = persistence.tolist()
        result["instability_probability"] = inst
    text = json.dumps(result, indent=2)
    if hasattr(args, "out"):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text + "\n")
    print(text)


COMMANDS = {"synth": _synth, "analyze": _analyze, "decode": _decode, "metrics": _metrics}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ArcRegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
