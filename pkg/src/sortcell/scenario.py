"""Scenario documents: what to spawn, what the operator does, and every knob.

A scenario is a single JSON document with an explicit schema version. Unknown
keys anywhere (except inside the inert ``network`` metadata block) are
rejected so that config drift fails loudly. Stochastic part schedules are
resolved into concrete spawn lists before the run, using three independent
seeded streams (spawn gaps, colors, lateral offsets/rotations) derived from
the scenario seed via ``numpy.random.SeedSequence(seed).spawn(3)`` with the
PCG64 generator, so a (scenario, seed) pair always yields the same schedule.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .workcell import ColorClass

SCHEMA_VERSION = 1

COLOR_NAMES = {"red": ColorClass.RED, "green": ColorClass.GREEN, "blue": ColorClass.BLUE}

COMMAND_NAMES = {"start", "stop", "select_colors", "set_override", "spawn_part"}
ROUTES = {"hmi", "pushbutton"}


class ScenarioInvalid(Exception):
    pass


@dataclass(frozen=True)
class PartSpawn:
    t_s: float
    color: str
    y_mm: float = 0.0
    rotation_deg: float = 0.0


@dataclass(frozen=True)
class OperatorAction:
    t_s: float
    command: str
    args: dict = field(default_factory=dict)
    route: str = "hmi"


@dataclass(frozen=True)
class ConveyorParams:
    speed_mm_per_s: float = 100.0
    belt_length_mm: float = 1200.0
    belt_half_width_mm: float = 150.0
    beam_sensor_x_mm: float = 600.0
    camera_window_x_mm: float = 600.0
    part_size_mm: float = 40.0
    spawn_x_mm: float = 0.0


@dataclass(frozen=True)
class OpticsParams:
    find_threshold_delta: float = 0.15
    min_area_px: int = 200
    max_area_px: int = 20000
    edge_leak_margin_mm: float = 60.0
    edge_leak_factor: float = 2.0
    image_width_px: int = 640
    image_height_px: int = 480
    mm_per_px: float = 0.5
    block_red: tuple = (0.80, 0.10, 0.08)
    block_green: tuple = (0.10, 0.70, 0.12)
    block_blue: tuple = (0.08, 0.12, 0.75)
    belt: tuple = (0.05, 0.05, 0.05)
    filter_red: tuple = (0.85, 0.10, 0.08)
    filter_green: tuple = (0.10, 0.60, 0.55)
    filter_blue: tuple = (0.08, 0.55, 0.60)
    ambient: tuple = (0.6, 0.6, 0.6)
    led_residual: tuple = (0.1, 0.1, 0.1)
    led_gain: float = 1.0


@dataclass(frozen=True)
class ArduinoParams:
    servo_travel_deg_per_s: float = 300.0


@dataclass(frozen=True)
class RobotParams:
    joint_move_s: float = 2.0
    vision_processing_s: float = 0.05
    pick_tolerance_mm: float = 10.0


@dataclass(frozen=True)
class PlcParams:
    scan_period_ms: int = 10
    t1_preset_ms: int = 200


@dataclass(frozen=True)
class BusParams:
    rpi_ms: int = 10
    extra_latency_ms: int = 0


@dataclass(frozen=True)
class BinParams:
    x_mm: float = 600.0
    y_mm: float = -300.0
    radius_mm: float = 100.0
    drop_height_mm: float = 200.0


@dataclass(frozen=True)
class ScenarioParams:
    conveyor: ConveyorParams = field(default_factory=ConveyorParams)
    optics: OpticsParams = field(default_factory=OpticsParams)
    arduino: ArduinoParams = field(default_factory=ArduinoParams)
    robot: RobotParams = field(default_factory=RobotParams)
    plc: PlcParams = field(default_factory=PlcParams)
    bus: BusParams = field(default_factory=BusParams)
    bin: BinParams = field(default_factory=BinParams)


@dataclass(frozen=True)
class Spawner:
    rate_per_min: float
    count: int
    color_weights: tuple = (1.0, 1.0, 1.0)  # red, green, blue
    y_max_mm: float = 0.0
    rotate: bool = False
    start_t_s: float = 1.0


@dataclass
class Scenario:
    duration_s: float
    seed: int = 0
    name: str = ""
    selected_colors: dict = field(
        default_factory=lambda: {"red": False, "green": False, "blue": False}
    )
    override_enabled: bool = False
    auto_start: bool = True
    parts: list = field(default_factory=list)
    spawner: Spawner | None = None
    script: list = field(default_factory=list)
    params: ScenarioParams = field(default_factory=ScenarioParams)
    network: dict = field(default_factory=dict)
    # optional robot program sources replacing the embedded corpus
    robot_programs: dict = field(default_factory=dict)
    # where relative robot_programs paths resolve from; not part of the document
    base_dir: str | None = field(default=None, compare=False)

    def resolved_parts(self) -> list[PartSpawn]:
        if self.spawner is None:
            return list(self.parts)
        return _generate_spawns(self.spawner, self.seed, self)

    def spawn_clearance_mm(self) -> float:
        """Minimum headway between consecutive parts.

        Keeps any neighbour's footprint out of the camera window while a part
        sits at the beam for its scan — the process flow handles strictly one
        part at a time, so two blobs in one frame would mean a malformed
        scenario, not a supported state. The bound covers: half the window,
        half a part (the scanned part stops with its leading edge at the
        beam), a rotated neighbour's corner reach (edge x sqrt(2)/2), one
        scan period of stop lag, and any camera/beam offset.
        """
        p = self.params
        window_half = p.optics.image_width_px * p.optics.mm_per_px / 2.0
        corner_reach = p.conveyor.part_size_mm * math.sqrt(2.0) / 2.0
        stop_lag = p.conveyor.speed_mm_per_s * p.plc.scan_period_ms / 1000.0
        beam_offset = abs(p.conveyor.camera_window_x_mm - p.conveyor.beam_sensor_x_mm)
        return (
            window_half
            + p.conveyor.part_size_mm / 2.0
            + corner_reach
            + stop_lag
            + beam_offset
        )

    def min_spawn_gap_s(self) -> float:
        return self.spawn_clearance_mm() / self.params.conveyor.speed_mm_per_s

    def resolved_programs(self):
        """(scan_program, sort_program): scenario-referenced sources when
        given, otherwise the embedded corpus."""
        from pathlib import Path

        from . import tp

        programs = {"scanpart": tp.scanpart(), "sortpart": tp.sortpart()}
        for key, path_text in self.robot_programs.items():
            path = Path(path_text)
            if not path.is_absolute() and self.base_dir:
                path = Path(self.base_dir) / path
            try:
                source = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ScenarioInvalid(f"robot_programs.{key}: {exc}") from exc
            try:
                programs[key] = tp.parse(source)
            except tp.ParseError as exc:
                raise ScenarioInvalid(f"robot_programs.{key}: {exc}") from exc
        return programs["scanpart"], programs["sortpart"]


def _generate_spawns(spawner: Spawner, seed: int, scenario: "Scenario") -> list[PartSpawn]:
    streams = np.random.SeedSequence(seed).spawn(3)
    rng_times = np.random.Generator(np.random.PCG64(streams[0]))
    rng_colors = np.random.Generator(np.random.PCG64(streams[1]))
    rng_offsets = np.random.Generator(np.random.PCG64(streams[2]))

    min_gap = scenario.min_spawn_gap_s()
    mean_gap = 60.0 / spawner.rate_per_min
    weights = np.asarray(spawner.color_weights, dtype=float)
    weights = weights / weights.sum()
    names = ["red", "green", "blue"]

    spawns = []
    t = spawner.start_t_s
    for _ in range(spawner.count):
        color = names[int(rng_colors.choice(3, p=weights))]
        y = float(rng_offsets.uniform(-spawner.y_max_mm, spawner.y_max_mm)) if spawner.y_max_mm else 0.0
        rot = float(rng_offsets.uniform(0.0, 360.0)) if spawner.rotate else 0.0
        spawns.append(PartSpawn(t_s=t, color=color, y_mm=y, rotation_deg=rot))
        t += max(min_gap, float(rng_times.exponential(mean_gap)))
    return spawns


# --- document (JSON) round trip ---------------------------------------------


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioInvalid(f"{where}: unknown keys {sorted(unknown)}")


def _load_params_section(doc: dict, cls, where: str):
    allowed = {f.name for f in fields(cls)}
    _require_keys(doc, allowed, where)
    kwargs = {}
    for f in fields(cls):
        if f.name in doc:
            value = doc[f.name]
            kwargs[f.name] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ScenarioInvalid(f"{where}: {exc}") from exc


def from_document(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioInvalid("scenario document must be an object")
    allowed = {
        "schema_version", "name", "seed", "duration_s", "selected_colors",
        "override_enabled", "auto_start", "parts", "spawner", "operator_script",
        "params", "network", "robot_programs",
    }
    _require_keys(doc, allowed, "scenario")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioInvalid(
            f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}"
        )
    if "duration_s" not in doc:
        raise ScenarioInvalid("duration_s is required")

    selected = {"red": False, "green": False, "blue": False}
    sel_doc = doc.get("selected_colors", {})
    _require_keys(sel_doc, set(selected), "selected_colors")
    selected.update({k: bool(v) for k, v in sel_doc.items()})

    parts = []
    for i, part_doc in enumerate(doc.get("parts", [])):
        _require_keys(part_doc, {"t_s", "color", "y_mm", "rotation_deg"}, f"parts[{i}]")
        if part_doc.get("color") not in COLOR_NAMES:
            raise ScenarioInvalid(f"parts[{i}]: unknown color {part_doc.get('color')!r}")
        parts.append(
            PartSpawn(
                t_s=float(part_doc["t_s"]),
                color=part_doc["color"],
                y_mm=float(part_doc.get("y_mm", 0.0)),
                rotation_deg=float(part_doc.get("rotation_deg", 0.0)),
            )
        )

    spawner = None
    if "spawner" in doc:
        spawner = _load_params_section(doc["spawner"], Spawner, "spawner")

    script = []
    for i, action_doc in enumerate(doc.get("operator_script", [])):
        _require_keys(action_doc, {"t_s", "command", "args", "route"}, f"operator_script[{i}]")
        command = action_doc.get("command")
        if command not in COMMAND_NAMES:
            raise ScenarioInvalid(f"operator_script[{i}]: unknown command {command!r}")
        route = action_doc.get("route", "hmi")
        if route not in ROUTES:
            raise ScenarioInvalid(f"operator_script[{i}]: unknown route {route!r}")
        script.append(
            OperatorAction(
                t_s=float(action_doc["t_s"]),
                command=command,
                args=dict(action_doc.get("args", {})),
                route=route,
            )
        )

    programs_doc = doc.get("robot_programs", {})
    _require_keys(programs_doc, {"scanpart", "sortpart"}, "robot_programs")
    robot_programs = {k: str(v) for k, v in programs_doc.items()}

    params_doc = doc.get("params", {})
    _require_keys(
        params_doc,
        {"conveyor", "optics", "arduino", "robot", "plc", "bus", "bin"},
        "params",
    )
    params = ScenarioParams(
        conveyor=_load_params_section(params_doc.get("conveyor", {}), ConveyorParams, "params.conveyor"),
        optics=_load_params_section(params_doc.get("optics", {}), OpticsParams, "params.optics"),
        arduino=_load_params_section(params_doc.get("arduino", {}), ArduinoParams, "params.arduino"),
        robot=_load_params_section(params_doc.get("robot", {}), RobotParams, "params.robot"),
        plc=_load_params_section(params_doc.get("plc", {}), PlcParams, "params.plc"),
        bus=_load_params_section(params_doc.get("bus", {}), BusParams, "params.bus"),
        bin=_load_params_section(params_doc.get("bin", {}), BinParams, "params.bin"),
    )

    return Scenario(
        duration_s=float(doc["duration_s"]),
        seed=int(doc.get("seed", 0)),
        name=str(doc.get("name", "")),
        selected_colors=selected,
        override_enabled=bool(doc.get("override_enabled", False)),
        auto_start=bool(doc.get("auto_start", True)),
        parts=parts,
        spawner=spawner,
        script=script,
        params=params,
        network=dict(doc.get("network", {})),
        robot_programs=robot_programs,
    )


def to_document(scenario: Scenario) -> dict:
    def clean(value):
        if isinstance(value, tuple):
            return [clean(v) for v in value]
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, list):
            return [clean(v) for v in value]
        return value

    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "seed": scenario.seed,
        "duration_s": scenario.duration_s,
        "selected_colors": dict(scenario.selected_colors),
        "override_enabled": scenario.override_enabled,
        "auto_start": scenario.auto_start,
        "parts": [clean(asdict(p)) for p in scenario.parts],
        "operator_script": [clean(asdict(a)) for a in scenario.script],
        "params": clean(asdict(scenario.params)),
        "network": dict(scenario.network),
        "robot_programs": dict(scenario.robot_programs),
    }
    if scenario.spawner is not None:
        doc["spawner"] = clean(asdict(scenario.spawner))
    return doc


def load(text: str, base_dir: str | None = None) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"not valid JSON: {exc}") from exc
    scenario = from_document(doc)
    scenario.base_dir = base_dir
    return scenario


def dump(scenario: Scenario) -> str:
    return json.dumps(to_document(scenario), indent=2, sort_keys=True) + "\n"


def scenario_hash(scenario: Scenario) -> str:
    """Canonical digest of the scenario document, excluding the seed (the seed
    travels in the trace header so seed overrides remain comparable)."""
    doc = to_document(scenario)
    doc.pop("seed", None)
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Worst-case filter travel must fit inside the scan program's fixed waits
# (90 degrees in 0.50 s, 180 degrees in 0.80 s).
MIN_SERVO_SPEED_DEG_S = max(90.0 / 0.5, 180.0 / 0.8)


def validate(scenario: Scenario) -> list[PartSpawn]:
    """Full validation; returns the resolved spawn list on success."""
    p = scenario.params
    if scenario.duration_s <= 0:
        raise ScenarioInvalid("duration_s must be positive")
    if scenario.parts and scenario.spawner is not None:
        raise ScenarioInvalid("give either an explicit part list or a spawner, not both")
    if p.conveyor.speed_mm_per_s <= 0:
        raise ScenarioInvalid("conveyor speed must be positive")
    if not 0 <= p.conveyor.beam_sensor_x_mm <= p.conveyor.belt_length_mm:
        raise ScenarioInvalid("beam sensor must sit within the belt length")
    if not 0 <= p.conveyor.camera_window_x_mm <= p.conveyor.belt_length_mm:
        raise ScenarioInvalid("camera window must sit within the belt length")
    if p.conveyor.spawn_x_mm >= p.conveyor.beam_sensor_x_mm - p.conveyor.part_size_mm:
        raise ScenarioInvalid("spawn point must sit upstream of the beam sensor")
    window_left = (
        p.conveyor.camera_window_x_mm - p.optics.image_width_px * p.optics.mm_per_px / 2.0
    )
    if p.conveyor.spawn_x_mm > window_left - p.conveyor.part_size_mm:
        raise ScenarioInvalid("spawn point must sit upstream of the camera window")
    if p.arduino.servo_travel_deg_per_s < MIN_SERVO_SPEED_DEG_S:
        raise ScenarioInvalid(
            f"servo speed {p.arduino.servo_travel_deg_per_s} deg/s cannot settle the "
            f"filter wheel within the scan waits (needs >= {MIN_SERVO_SPEED_DEG_S})"
        )
    if not 0.0 < p.optics.find_threshold_delta < 1.0:
        raise ScenarioInvalid("find_threshold_delta must lie in (0, 1)")
    if p.optics.min_area_px > p.optics.max_area_px:
        raise ScenarioInvalid("min_area_px must be <= max_area_px")
    if p.plc.scan_period_ms <= 0 or p.bus.rpi_ms <= 0:
        raise ScenarioInvalid("scan period and RPI must be positive")
    if p.bus.extra_latency_ms < 0:
        raise ScenarioInvalid("extra bus latency cannot be negative")
    if scenario.spawner is not None:
        if scenario.spawner.count < 0 or scenario.spawner.rate_per_min <= 0:
            raise ScenarioInvalid("spawner needs a positive rate and nonnegative count")
    scenario.resolved_programs()  # referenced program sources must parse

    spawns = scenario.resolved_parts()
    min_gap = scenario.min_spawn_gap_s()
    y_limit = p.conveyor.belt_half_width_mm - p.conveyor.part_size_mm / 2.0
    last_t = None
    for i, spawn in enumerate(spawns):
        if spawn.color not in COLOR_NAMES:
            raise ScenarioInvalid(f"parts[{i}]: unknown color {spawn.color!r}")
        if spawn.t_s < 0:
            raise ScenarioInvalid(f"parts[{i}]: spawn time must be nonnegative")
        if last_t is not None:
            if spawn.t_s < last_t:
                raise ScenarioInvalid("spawn times must be nondecreasing")
            # ulp slack: accumulated spawn times may sit one rounding step shy
            if spawn.t_s - last_t < min_gap - 1e-9:
                raise ScenarioInvalid(
                    f"parts[{i}]: spawn gap {spawn.t_s - last_t:.3f} s would crowd the "
                    f"previous part (minimum {min_gap:.3f} s keeps one part per "
                    f"camera window)"
                )
        if abs(spawn.y_mm) > y_limit:
            raise ScenarioInvalid(
                f"parts[{i}]: lateral offset {spawn.y_mm} mm leaves the belt "
                f"(limit {y_limit} mm)"
            )
        last_t = spawn.t_s
    for i, action in enumerate(scenario.script):
        if action.t_s < 0:
            raise ScenarioInvalid(f"operator_script[{i}]: time must be nonnegative")
        _validate_command(action.command, action.args, f"operator_script[{i}]")
    return spawns


def _validate_command(command: str, args: dict, where: str) -> None:
    if command not in COMMAND_NAMES:
        raise ScenarioInvalid(f"{where}: unknown command {command!r}")
    if command in ("start", "stop"):
        if args:
            raise ScenarioInvalid(f"{where}: {command} takes no arguments")
    elif command == "select_colors":
        _require_keys(args, {"red", "green", "blue"}, where)
    elif command == "set_override":
        _require_keys(args, {"enabled"}, where)
        if "enabled" not in args:
            raise ScenarioInvalid(f"{where}: set_override requires 'enabled'")
    elif command == "spawn_part":
        _require_keys(args, {"color", "y_mm", "rotation_deg"}, where)
        if args.get("color") not in COLOR_NAMES:
            raise ScenarioInvalid(f"{where}: unknown color {args.get('color')!r}")
