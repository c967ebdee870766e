"""Command line entry points: batch runs, trace comparison, live service."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import scenario as scenario_mod
from . import trace as trace_mod
from .engine import DeadlockDetected, Engine

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_DEADLOCK = 4
EXIT_DIFF = 5


def _load_scenario(path: str, seed: int | None, duration: float | None):
    scenario_path = Path(path)
    if not scenario_path.exists():
        raise FileNotFoundError(f"scenario file not found: {scenario_path}")
    scenario = scenario_mod.load(
        scenario_path.read_text(encoding="utf-8"), base_dir=str(scenario_path.parent)
    )
    if seed is not None:
        scenario.seed = seed
    if duration is not None:
        scenario.duration_s = duration
    return scenario


def cmd_run(args) -> int:
    try:
        scenario = _load_scenario(args.scenario, args.seed, args.duration)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except scenario_mod.ScenarioInvalid as exc:
        print(f"scenario parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    try:
        engine = Engine(scenario)
    except scenario_mod.ScenarioInvalid as exc:
        print(f"scenario validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        events, metrics = engine.run()
    except DeadlockDetected as exc:
        print(f"deadlock: {exc}", file=sys.stderr)
        return EXIT_DEADLOCK

    digest = scenario_mod.scenario_hash(scenario)
    trace_mod.write_trace(args.output, digest, scenario.seed, events, metrics)
    print(f"trace written to {args.output} ({len(events)} events)")
    print(f"metrics: {metrics}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        a = trace_mod.read_trace(args.trace_a)
        b = trace_mod.read_trace(args.trace_b)
    except (OSError, trace_mod.TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        diff = trace_mod.compare_traces(a, b, allow_seed_mismatch=args.allow_seed_mismatch)
    except trace_mod.HeaderMismatch as exc:
        print(f"header mismatch: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(diff.describe())
    return EXIT_OK if diff.equal else EXIT_DIFF


def cmd_serve(args) -> int:
    from .service import serve

    try:
        scenario = _load_scenario(args.scenario, args.seed, args.duration)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except scenario_mod.ScenarioInvalid as exc:
        print(f"scenario parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        serve(
            scenario,
            host=args.host,
            port=args.port,
            speed=args.speed,
            stream_hz=args.stream_hz,
        )
    except scenario_mod.ScenarioInvalid as exc:
        print(f"scenario validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("stopped")
    return EXIT_OK


def cmd_tables(args) -> int:
    """Dump the contrast-table reproduction frames as PGM files."""
    from . import optics
    from .workcell import ColorClass, Part

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    defaults = optics.OpticsDefaults()
    camera = optics.CameraConfig()
    filters = {
        "red": defaults.filters[optics.FilterName.RED_FILTER],
        "green": defaults.filters[optics.FilterName.GREEN_FILTER],
        "blue": defaults.filters[optics.FilterName.BLUE_FILTER],
    }
    leds = {
        "red": defaults.led_light((255, 0, 0)),
        "green": defaults.led_light((0, 255, 0)),
        "blue": defaults.led_light((0, 0, 255)),
    }
    parts = [
        Part(
            id=i + 1,
            color_class=color,
            reflectance=defaults.block_reflectance[color],
            position_mm=(camera.center_x_mm - 100.0 + 100.0 * i, 0.0),
        )
        for i, color in enumerate((ColorClass.RED, ColorClass.GREEN, ColorClass.BLUE))
    ]
    written = []
    for filter_name, filt in filters.items():
        ambient_frame = optics.render(
            parts, filt, defaults.ambient_light, camera, defaults.belt_reflectance
        )
        path = out / f"filter_only_{filter_name}.pgm"
        path.write_bytes(optics.to_pgm(ambient_frame))
        written.append(path)
        led_frame = optics.render(
            parts, filt, leds[filter_name], camera, defaults.belt_reflectance
        )
        path = out / f"filter_led_{filter_name}.pgm"
        path.write_bytes(optics.to_pgm(led_frame))
        written.append(path)
    for path in written:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sortcell",
        description="Digital twin of a conveyor color-sorting workcell.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario headless and write a trace")
    run_p.add_argument("scenario", help="scenario JSON path")
    run_p.add_argument("-o", "--output", default="trace.jsonl", help="trace output path")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument(
        "--duration", type=float, default=None, help="override the run duration (s)"
    )
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser("compare", help="diff two trace files")
    cmp_p.add_argument("trace_a")
    cmp_p.add_argument("trace_b")
    cmp_p.add_argument(
        "--allow-seed-mismatch",
        action="store_true",
        help="diff event streams even when the seeds differ",
    )
    cmp_p.set_defaults(func=cmd_compare)

    serve_p = sub.add_parser("serve", help="run the live service for the operator HMI")
    serve_p.add_argument("scenario")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8787)
    serve_p.add_argument("--seed", type=int, default=None)
    serve_p.add_argument("--duration", type=float, default=None)
    serve_p.add_argument(
        "--speed", type=float, default=1.0, help="simulated seconds per wall second"
    )
    serve_p.add_argument(
        "--stream-hz", type=float, default=10.0, help="snapshot push rate"
    )
    serve_p.set_defaults(func=cmd_serve)

    tables_p = sub.add_parser(
        "tables", help="render the contrast-table frames to PGM files"
    )
    tables_p.add_argument("--out", default="tables", help="output directory")
    tables_p.set_defaults(func=cmd_tables)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
