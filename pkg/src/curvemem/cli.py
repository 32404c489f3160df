"""Command-line front door: score, simulate, eval, replay.

Exit codes: 0 success, 1 I/O or data errors, 2 configuration and usage
errors, 3 replay divergence. Data goes to stdout or files; summaries and
error messages go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import IO, Any

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    grid_values,
    merge_sources,
    parse_config_text,
    parse_id_list,
    render_config,
)
from .engine import Engine
from .errors import ConfigError, StreamCorruptionError, StreamError, StreamFormatError
from .evaluate import SweepGrid, rows_to_csv, run_sweep
from .simulate import LabeledStream, SyntheticSpec, generate, place_transitions
from .stream_io import read_stream_flagged, write_stream

# (config key, argparse attribute) for flags shared by score and replay
_FLAG_FIELDS = (
    ("lambda", "lam"),
    ("gamma", "gamma"),
    ("k1", "k1"),
    ("k2", "k2"),
    ("capacity", "capacity"),
    ("cost_high", "cost_high"),
    ("cost_low", "cost_low"),
    ("high_res_side", "high_res_side"),
    ("transition_size", "transition_size"),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--lambda", dest="lam", type=float,
                        help="curvature weight in the composite score")
    parser.add_argument("--gamma", type=float, help="EMA decay for the score stats")
    parser.add_argument("--k1", type=float, help="lower threshold offset (sigmas)")
    parser.add_argument("--k2", type=float, help="upper threshold offset (sigmas)")
    parser.add_argument("--capacity", type=int, help="memory queue bound")
    parser.add_argument("--cost-high", type=float)
    parser.add_argument("--cost-low", type=float)
    parser.add_argument("--high-res-side", type=int)
    parser.add_argument("--transition-size", type=int)
    parser.add_argument("--query-frames",
                        help="comma-separated frame ids forced to Clear")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvemem",
        description="Curvature-gated streaming memory over feature trajectories.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser(
        "score", help="run the engine over a stream and emit the decision trace")
    _add_config_flags(score)
    score.add_argument("--input", help="stream file, or - for JSONL on stdin")
    score.add_argument("--output", default="-",
                       help="trace JSONL destination, or - for stdout (default)")
    score.add_argument("--format", choices=("auto", "binary", "jsonl"), default="auto")
    score.add_argument("--print-config", action="store_true",
                       help="print the effective configuration and exit")

    sim = sub.add_parser("simulate", help="generate a labeled synthetic stream")
    sim.add_argument("--dim", type=int, default=8)
    sim.add_argument("--frames", type=int, default=500)
    sim.add_argument("--transitions", type=int, default=0,
                     help="number of turns to place at random valid indices")
    sim.add_argument("--transition-indices",
                     help="explicit comma-separated indices (overrides --transitions)")
    sim.add_argument("--drift-step", type=float, default=0.01)
    sim.add_argument("--turn-angle", type=float, default=math.pi / 2)
    sim.add_argument("--noise-sigma", type=float, default=0.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--output", required=True)
    sim.add_argument("--truth", help="sidecar path (default: <output>.truth.json)")
    sim.add_argument("--format", choices=("binary", "jsonl"), default="binary")

    ev = sub.add_parser("eval", help="sweep selection strategies over labeled streams")
    ev.add_argument("--streams",
                    help="directory of stream files with .truth.json sidecars")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--manifest",
                    help="rerun a previous sweep from its manifest.json")
    ev.add_argument("--strategies", default="uniform,motion_topk,curvature_topk,engine")
    ev.add_argument("--budgets", default="10")
    ev.add_argument("--lambdas", default="0.2")
    ev.add_argument("--gammas", default="0.9")
    ev.add_argument("--k1s", default="0.0")
    ev.add_argument("--k2s", default="1.0")
    ev.add_argument("--capacities", default="20")
    ev.add_argument("--window", type=int, default=1)

    rep = sub.add_parser(
        "replay", help="recompute a trace and verify it line for line")
    _add_config_flags(rep)
    rep.add_argument("--trace", required=True)
    rep.add_argument("--input", required=True)
    rep.add_argument("--format", choices=("auto", "binary", "jsonl"), default="auto")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_values = None
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        file_values = parse_config_text(text, args.config)
    flag_values: dict[str, Any] = {}
    for key, attr in _FLAG_FIELDS:
        value = getattr(args, attr)
        if value is not None:
            flag_values[key] = value
    if args.query_frames is not None:
        flag_values["query_frames"] = parse_id_list(args.query_frames)
    return merge_sources(file_values, flag_values)


def cmd_score(args: argparse.Namespace, stdin: IO[str] | None) -> int:
    config = _config_from_args(args)
    if args.print_config:
        sys.stdout.write(render_config(config))
        return 0
    if not args.input:
        raise ConfigError("score needs --input (or --print-config)")

    streaming = args.input == "-"
    if streaming and args.format == "binary":
        raise ConfigError("stdin streams must be JSONL; binary input needs a file path")
    if streaming:
        source = stdin if stdin is not None else sys.stdin
        pairs = read_stream_flagged(source, "jsonl")
    else:
        pairs = read_stream_flagged(args.input, args.format)

    engine = Engine(config)
    to_stdout = args.output == "-"
    sink = sys.stdout if to_stdout else open(args.output, "w", encoding="utf-8")
    if streaming:
        # handshake for callers driving the process over pipes
        print("ready", file=sys.stderr, flush=True)
    try:
        for frame, is_query in pairs:
            sink.write(engine.step(frame, is_query=is_query).to_json_line() + "\n")
            if streaming or to_stdout:
                sink.flush()
    finally:
        if not to_stdout:
            sink.close()
    print(engine.summary(), file=sys.stderr)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.transition_indices is not None:
        transitions = parse_id_list(args.transition_indices)
    elif args.transitions:
        transitions = place_transitions(
            args.transitions, args.frames, np.random.default_rng(args.seed))
    else:
        transitions = ()
    spec = SyntheticSpec(
        dimension=args.dim,
        total_frames=args.frames,
        transitions=transitions,
        drift_step=args.drift_step,
        turn_angle=args.turn_angle,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    stream = generate(spec)
    write_stream(args.output, stream.frames, fmt=args.format)
    truth_path = Path(args.truth) if args.truth else Path(args.output + ".truth.json")
    truth_path.write_text(json.dumps(list(stream.transitions)) + "\n", encoding="utf-8")
    print(f"wrote {len(stream.frames)} frames to {args.output} "
          f"(truth: {truth_path})", file=sys.stderr)
    return 0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_stream(path: Path, sidecar: Path) -> LabeledStream:
    frames = tuple(frame for frame, _ in read_stream_flagged(path, "auto"))
    truth = json.loads(sidecar.read_text(encoding="utf-8"))
    ok = isinstance(truth, list) and all(
        isinstance(i, int) and not isinstance(i, bool) for i in truth)
    if not ok:
        raise StreamCorruptionError(
            f"{sidecar}: truth sidecar must be a JSON list of frame indices")
    return LabeledStream(frames=frames, transitions=tuple(truth), spec=None)


def _discover_streams(dir_path: Path) -> list[tuple[Path, Path]]:
    records = []
    for sidecar in sorted(dir_path.glob("*.truth.json")):
        stream_path = sidecar.with_name(sidecar.name[: -len(".truth.json")])
        if stream_path.exists():
            records.append((stream_path, sidecar))
    if not records:
        raise ConfigError(
            f"{dir_path}: no streams found (expected <stream> plus <stream>.truth.json)")
    return records


def _int_grid(text: str, name: str) -> tuple[int, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"empty grid for {name}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad {name} grid: {text!r}") from exc


def cmd_eval(args: argparse.Namespace) -> int:
    if args.manifest:
        manifest_text = Path(args.manifest).read_text(encoding="utf-8")
        manifest = json.loads(manifest_text)
        grid = SweepGrid(
            strategies=tuple(manifest["grid"]["strategies"]),
            budgets=tuple(int(v) for v in manifest["grid"]["budgets"]),
            lambdas=tuple(float(v) for v in manifest["grid"]["lambdas"]),
            gammas=tuple(float(v) for v in manifest["grid"]["gammas"]),
            k1s=tuple(float(v) for v in manifest["grid"]["k1s"]),
            k2s=tuple(float(v) for v in manifest["grid"]["k2s"]),
            capacities=tuple(int(v) for v in manifest["grid"]["capacities"]),
        )
        window = int(manifest["window"])
        named = []
        for record in manifest["streams"]:
            path, sidecar = Path(record["path"]), Path(record["truth_path"])
            for target, want in ((path, record["sha256"]),
                                 (sidecar, record["truth_sha256"])):
                if not target.exists():
                    raise StreamFormatError(f"{target}: recorded in manifest but missing")
                if _sha256(target) != want:
                    raise StreamCorruptionError(
                        f"{target}: contents changed since the manifest was written")
            named.append((record["name"], _load_stream(path, sidecar)))
    else:
        if not args.streams:
            raise ConfigError("eval needs --streams DIR or --manifest FILE")
        records = _discover_streams(Path(args.streams))
        grid = SweepGrid(
            strategies=tuple(p.strip() for p in args.strategies.split(",") if p.strip()),
            budgets=_int_grid(args.budgets, "budgets"),
            lambdas=grid_values(args.lambdas, "lambda"),
            gammas=grid_values(args.gammas, "gamma"),
            k1s=grid_values(args.k1s, "k1"),
            k2s=grid_values(args.k2s, "k2"),
            capacities=grid_values(args.capacities, "capacity"),
        )
        window = args.window
        named = [(path.stem, _load_stream(path, sidecar)) for path, sidecar in records]
        payload = {
            "schema_version": 1,
            "version": __version__,
            "window": window,
            "grid": {
                "strategies": list(grid.strategies),
                "budgets": list(grid.budgets),
                "lambdas": list(grid.lambdas),
                "gammas": list(grid.gammas),
                "k1s": list(grid.k1s),
                "k2s": list(grid.k2s),
                "capacities": list(grid.capacities),
            },
            "streams": [
                {
                    "name": path.stem,
                    "path": str(path.resolve()),
                    "sha256": _sha256(path),
                    "truth_path": str(sidecar.resolve()),
                    "truth_sha256": _sha256(sidecar),
                }
                for path, sidecar in records
            ],
        }
        manifest_text = json.dumps(payload, indent=2, sort_keys=True) + "\n"

    rows = run_sweep(named, grid, window=window)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(exist_ok=True)
    for index, row in enumerate(rows):
        if row.trace_lines:
            (traces_dir / f"row{index:04d}.jsonl").write_text(
                "\n".join(row.trace_lines) + "\n", encoding="utf-8")
    (out_dir / "manifest.json").write_text(manifest_text, encoding="utf-8")
    print(f"rows={len(rows)} streams={len(named)} report={out_dir / 'report.csv'}",
          file=sys.stderr)
    return 0


def cmd_replay(args: argparse.Namespace, stdin: IO[str] | None) -> int:
    config = _config_from_args(args)
    trace_path = Path(args.trace)
    # missing replay inputs are a usage problem, not a runtime I/O failure
    if not trace_path.exists():
        raise ConfigError(f"missing trace file: {trace_path}")
    if args.input != "-" and not Path(args.input).exists():
        raise ConfigError(f"missing stream file: {args.input}")

    expected = trace_path.read_text(encoding="utf-8").splitlines()
    if args.input == "-":
        source = stdin if stdin is not None else sys.stdin
        pairs = read_stream_flagged(source, "jsonl")
    else:
        pairs = read_stream_flagged(args.input, args.format)

    engine = Engine(config)
    count = 0
    for frame, is_query in pairs:
        count += 1
        line = engine.step(frame, is_query=is_query).to_json_line()
        if count > len(expected) or line != expected[count - 1]:
            print(f"DIVERGE line {count}")
            return 3
    if len(expected) > count:
        print(f"DIVERGE line {count + 1}")
        return 3
    print("MATCH")
    return 0


def main(argv: list[str] | None = None, stdin: IO[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors, --help, --version
        if exc.code is None or exc.code == 0:
            return 0
        return 2
    try:
        if args.command == "score":
            return cmd_score(args, stdin)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_replay(args, stdin)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StreamError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
