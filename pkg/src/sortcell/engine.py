"""Deterministic discrete-event engine owning every node of the cell.

Time is integer microseconds. Events at equal times execute in fixed node
priority order (bus, operator commands, PLC, robot, Arduino, workcell), then
by scheduling sequence, so a (scenario, seed) pair always produces the same
trace byte for byte, at any step granularity. Belt positions and the servo
angle are only materialized when an event executes; snapshots project them
without touching simulation state.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field

from . import arduino as ard
from . import iobus, optics, plc, robot
from .iobus import Direction
from .scenario import OperatorAction, PartSpawn, Scenario, validate as validate_scenario
from .workcell import (
    ColorClass,
    ConveyorState,
    Part,
    PartState,
    ReflectanceRGB,
    RejectBin,
    advance_conveyor,
    beam_blocked,
)

US = 1_000_000

# Event priorities at equal times (lower runs first).
PRIO_BUS = 0
PRIO_COMMAND = 1
PRIO_PLC = 2
PRIO_ROBOT = 3
PRIO_ARDUINO = 4
PRIO_WORKCELL = 5

EVENT_KINDS = (
    "TagChange", "PartSpawn", "PartState", "BeamEdge", "ProgramStart",
    "ProgramEnd", "VisionResult", "MotionStart", "MotionEnd", "VerdictIssued",
)

# A stopped cell with live parts and an idle robot must emit something within
# this horizon, otherwise the run is declared stuck.
DEADLOCK_HORIZON_US = 2 * US

COMMAND_PULSE_MS = 50


class DeadlockDetected(Exception):
    pass


class EngineFault(Exception):
    """Internal contract violation while running (signals a regression)."""


@dataclass(frozen=True)
class SimEvent:
    seq: int
    t_us: int
    source: str
    kind: str
    payload: dict

    def to_record(self) -> dict:
        return {
            "type": "event",
            "seq": self.seq,
            "t_us": self.t_us,
            "src": self.source,
            "kind": self.kind,
            "data": self.payload,
        }


@dataclass
class PartStats:
    color: str
    spawned_at_us: int
    beam_rise_us: int | None = None
    verdict_us: int | None = None
    detected: list = field(default_factory=list)
    match: bool | None = None
    final_state: str = "on_belt"


class Engine:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        spawns = validate_scenario(scenario)
        p = scenario.params

        self.now_us = 0
        self.duration_us = round(scenario.duration_s * US)
        self.events: list[SimEvent] = []
        self.event_listeners = []
        self._trace_seq = itertools.count()
        self._sched_seq = itertools.count()
        self._queue: list = []
        self._last_progress_us = 0
        self.completed = False
        self.deadlocked: str | None = None

        # --- workcell ---
        self.conveyor = ConveyorState(
            running=False,
            speed_mm_per_s=p.conveyor.speed_mm_per_s,
            belt_length_mm=p.conveyor.belt_length_mm,
            belt_half_width_mm=p.conveyor.belt_half_width_mm,
            beam_sensor_x_mm=p.conveyor.beam_sensor_x_mm,
            camera_window_x_mm=p.conveyor.camera_window_x_mm,
        )
        self.part_size_mm = p.conveyor.part_size_mm
        self.spawn_x_mm = p.conveyor.spawn_x_mm
        self.bin = RejectBin(
            location_mm=(p.bin.x_mm, p.bin.y_mm), radius_mm=p.bin.radius_mm
        )
        self.parts: list[Part] = []
        self._cell_update_us = 0
        self._beam_state = False
        self._active_part_id: int | None = None
        self._next_part_id = itertools.count(1)
        self.part_stats: dict[int, PartStats] = {}
        self._spawn_budget = len(spawns)
        self._pending_spawns: list = []
        self._spawn_clearance_mm = scenario.spawn_clearance_mm()

        # --- optics ---
        self.optics = self._build_optics(p.optics)
        self.camera = optics.CameraConfig(
            width_px=p.optics.image_width_px,
            height_px=p.optics.image_height_px,
            mm_per_px=p.optics.mm_per_px,
            center_x_mm=p.conveyor.camera_window_x_mm,
        )
        self.vision_processes = {
            name: optics.VisionProcess(
                name,
                find_threshold_delta=p.optics.find_threshold_delta,
                min_area_px=p.optics.min_area_px,
                max_area_px=p.optics.max_area_px,
            )
            for name in (optics.REDSCAN, optics.GRNSCAN, optics.BLUSCAN)
        }

        # --- arduino ---
        self.arduino_config = ard.ArduinoConfig(
            servo_travel_deg_per_s=p.arduino.servo_travel_deg_per_s
        )
        self.arduino = ard.ArduinoState()
        self._arduino_update_us = 0

        # --- robot ---
        robot_config = robot.RobotConfig(
            joint_move_s=p.robot.joint_move_s,
            vision_processing_s=p.robot.vision_processing_s,
            pick_tolerance_mm=p.robot.pick_tolerance_mm,
            workspace=robot.Workspace(
                x_min=-100.0,
                x_max=p.conveyor.belt_length_mm + 100.0,
                y_min=min(-500.0, p.bin.y_mm - p.bin.radius_mm - 100.0),
                y_max=500.0,
            ),
        )
        perch = robot.Pose(p.bin.x_mm, p.bin.y_mm, p.bin.drop_height_mm)
        self.robot_env = robot.RobotEnv(
            io=robot.RobotIO(),
            positions={1: perch},
            position_registers={
                80: robot.Pose(p.conveyor.camera_window_x_mm, 0.0, p.conveyor.part_size_mm),
                81: robot.Pose(0.0, 0.0, 100.0),
            },
            pose=perch,
            config=robot_config,
            vision_find=self._vision_find,
            emit=lambda kind, payload: self._emit(kind, "robot", payload),
        )
        scan_program, sort_program = scenario.resolved_programs()
        self.dispatcher = robot.RobotDispatcher(self.robot_env, scan_program, sort_program)
        self.robot_env.io.add_do_hook(self._on_robot_do)
        self._held_part_id: int | None = None

        # --- plc ---
        self.plc_program = plc.build_default_program(t1_preset_ms=p.plc.t1_preset_ms)
        self.plc_db = plc.build_tag_database(t1_preset_ms=p.plc.t1_preset_ms)
        plc.validate(self.plc_program, self.plc_db)
        self.scan_period_us = p.plc.scan_period_ms * 1000
        self._pulse_scans = max(1, COMMAND_PULSE_MS // p.plc.scan_period_ms)
        self._pulses: dict[str, int] = {}
        for color, on in scenario.selected_colors.items():
            self.plc_db.bits[f"HMI_{color.capitalize()}"] = on
        self.plc_db.bits["HMI_Override"] = scenario.override_enabled

        # --- bus ---
        self.bus = iobus.CyclicBus(rpi_us=p.bus.rpi_ms * 1000)
        self.extra_latency_us = p.bus.extra_latency_ms * 1000
        self.bus.register_producer(Direction.ROBOT_TO_PLC, self._produce_robot_words)
        self.bus.register_producer(Direction.PLC_TO_ROBOT, self._produce_plc_words)

        # --- commands / script ---
        self._command_queue: list[tuple[int, OperatorAction]] = []
        self._command_lock = threading.Lock()
        self._command_counter = itertools.count(1)
        self._last_command_id = 0

        # initial schedule
        self._schedule(0, PRIO_BUS, self._bus_tick)
        self._schedule(0, PRIO_PLC, self._plc_scan)
        if scenario.auto_start:
            self.submit_command(OperatorAction(t_s=0.0, command="start"))
        for action in scenario.script:
            self._schedule(
                round(action.t_s * US),
                PRIO_COMMAND,
                lambda t, a=action: self._enqueue_command(a),
            )
        for spawn in spawns:
            self._schedule(
                round(spawn.t_s * US),
                PRIO_WORKCELL,
                lambda t, s=spawn: self._try_spawn(s),
            )

    # ------------------------------------------------------------------ build

    @staticmethod
    def _build_optics(op) -> optics.OpticsDefaults:
        return optics.OpticsDefaults(
            block_reflectance={
                ColorClass.RED: ReflectanceRGB(*op.block_red),
                ColorClass.GREEN: ReflectanceRGB(*op.block_green),
                ColorClass.BLUE: ReflectanceRGB(*op.block_blue),
            },
            belt_reflectance=ReflectanceRGB(*op.belt),
            filters={
                optics.FilterName.RED_FILTER: optics.FilterSpec(
                    optics.FilterName.RED_FILTER, tuple(op.filter_red)
                ),
                optics.FilterName.GREEN_FILTER: optics.FilterSpec(
                    optics.FilterName.GREEN_FILTER, tuple(op.filter_green)
                ),
                optics.FilterName.BLUE_FILTER: optics.FilterSpec(
                    optics.FilterName.BLUE_FILTER, tuple(op.filter_blue)
                ),
                optics.FilterName.NO_FILTER: optics.FilterSpec(
                    optics.FilterName.NO_FILTER, (1.0, 1.0, 1.0)
                ),
            },
            ambient_light=optics.LightSpec(tuple(op.ambient)),
            led_gain=op.led_gain,
            led_residual=tuple(op.led_residual),
            edge_leak=optics.EdgeLeakConfig(
                margin_mm=op.edge_leak_margin_mm, factor=op.edge_leak_factor
            ),
        )

    # ------------------------------------------------------------- scheduling

    def _schedule(self, t_us: int, priority: int, action) -> None:
        heapq.heappush(self._queue, (t_us, priority, next(self._sched_seq), action))

    def _emit(self, kind: str, source: str, payload: dict) -> None:
        event = SimEvent(
            seq=next(self._trace_seq),
            t_us=self.now_us,
            source=source,
            kind=kind,
            payload=payload,
        )
        self.events.append(event)
        self._last_progress_us = self.now_us
        for listener in self.event_listeners:
            listener(event)

    # ------------------------------------------------------------------ world

    def _advance_cell(self, t_us: int) -> None:
        if t_us < self._cell_update_us:
            raise EngineFault("cell time went backwards")
        if t_us > self._cell_update_us:
            dt = (t_us - self._cell_update_us) / US
            before = {p.id: p.state for p in self.parts}
            self.parts = advance_conveyor(self.conveyor, self.parts, dt)
            self._cell_update_us = t_us
            for part in self.parts:
                if part.state is PartState.PASSED_THROUGH and before[part.id] is PartState.ON_BELT:
                    self._part_state_changed(part)
        self._check_beam()

    def _advance_arduino(self, t_us: int) -> None:
        if t_us > self._arduino_update_us:
            dt = (t_us - self._arduino_update_us) / US
            self.arduino = ard.step_servo(self.arduino, dt, self.arduino_config)
            self._arduino_update_us = t_us

    def _check_beam(self) -> None:
        blocked = beam_blocked(self.conveyor, self.parts)
        if blocked != self._beam_state:
            self._beam_state = blocked
            if blocked:
                self._active_part_id = self._part_at_beam()
                if self._active_part_id is not None:
                    stats = self.part_stats[self._active_part_id]
                    if stats.beam_rise_us is None:
                        stats.beam_rise_us = self.now_us
            self._emit("BeamEdge", "workcell", {"rising": blocked})

    def _part_at_beam(self) -> int | None:
        bx = self.conveyor.beam_sensor_x_mm
        for part in self.parts:
            if part.state is PartState.ON_BELT:
                half = part.size_mm / 2.0
                if part.x - half <= bx <= part.x + half:
                    return part.id
        return None

    def _part_state_changed(self, part: Part) -> None:
        self.part_stats[part.id].final_state = part.state.value
        self._emit(
            "PartState",
            "workcell",
            {"id": part.id, "state": part.state.value},
        )

    def _spawn_clear(self) -> bool:
        """A part may enter only on a running belt with full headway clear,
        so it can never share the camera window with the part under scan."""
        if not self.conveyor.running:
            return False
        limit = self.spawn_x_mm + self._spawn_clearance_mm
        return all(
            p.x >= limit for p in self.parts if p.state is PartState.ON_BELT
        )

    def _try_spawn(self, spawn) -> None:
        self._advance_cell(self.now_us)
        if self._pending_spawns or not self._spawn_clear():
            self._pending_spawns.append(spawn)
            return
        self._spawn_part(spawn)

    def _drain_pending_spawns(self) -> None:
        if self._pending_spawns and self._spawn_clear():
            self._spawn_part(self._pending_spawns.pop(0))

    def _spawn_part(self, spawn) -> None:
        self._advance_cell(self.now_us)
        color = ColorClass(spawn.color)
        part = Part(
            id=next(self._next_part_id),
            color_class=color,
            reflectance=self.optics.block_reflectance[color],
            position_mm=(self.spawn_x_mm, spawn.y_mm),
            rotation_deg=spawn.rotation_deg,
            size_mm=self.part_size_mm,
        )
        self.parts.append(part)
        self.part_stats[part.id] = PartStats(color=spawn.color, spawned_at_us=self.now_us)
        self._spawn_budget -= 1
        self._emit(
            "PartSpawn",
            "workcell",
            {
                "id": part.id,
                "color": spawn.color,
                "x_mm": part.x,
                "y_mm": part.y,
                "rotation_deg": part.rotation_deg,
            },
        )
        self._check_beam()

    def _replace_part(self, part_id: int, new_part: Part) -> None:
        self.parts = [new_part if p.id == part_id else p for p in self.parts]

    def _find_part(self, part_id: int) -> Part:
        for part in self.parts:
            if part.id == part_id:
                return part
        raise EngineFault(f"part {part_id} vanished")

    # ------------------------------------------------------------------ robot

    def _on_robot_do(self, index: int, value: bool) -> None:
        self._emit(
            "TagChange",
            "robot",
            {
                "signal": f"DO[{index}]",
                "label": iobus.DO_LABELS.get(index, ""),
                "value": value,
            },
        )
        if index == iobus.DO_RELAY_TO_ARDUINO_A:
            self._set_arduino_inputs(a=iobus.relay_line_level(value))
        elif index == iobus.DO_RELAY_TO_ARDUINO_B:
            self._set_arduino_inputs(b=iobus.relay_line_level(value))
        elif index == iobus.DO_SUCTION:
            if value:
                self._suction_grab()
            else:
                self._suction_release()

    def _set_arduino_inputs(self, a=None, b=None) -> None:
        self._advance_arduino(self.now_us)
        state = self.arduino
        new_a = a if a is not None else state.input_a
        new_b = b if b is not None else state.input_b
        new_state = state.with_inputs(new_a, new_b)
        changed_command = new_state.commanded_angle_deg != state.commanded_angle_deg
        self.arduino = new_state
        for name, old, new in (("input_a", state.input_a, new_a), ("input_b", state.input_b, new_b)):
            if old is not new:
                self._emit(
                    "TagChange", "arduino", {"signal": f"arduino.{name}", "value": new.value}
                )
        if changed_command:
            self._emit(
                "TagChange",
                "arduino",
                {
                    "signal": "arduino.command",
                    "angle_deg": new_state.commanded_angle_deg,
                    "led_rgb": list(new_state.led_rgb),
                },
            )

    def _suction_grab(self) -> None:
        self._advance_cell(self.now_us)
        pose = self.robot_env.pose
        tolerance = self.robot_env.config.pick_tolerance_mm
        for part in self.parts:
            if part.state is not PartState.ON_BELT:
                continue
            dx, dy = part.x - pose.x, part.y - pose.y
            if dx * dx + dy * dy <= tolerance * tolerance:
                held = part.with_state(PartState.HELD_BY_ROBOT)
                self._replace_part(part.id, held)
                self._held_part_id = part.id
                self._part_state_changed(held)
                self._check_beam()
                return
        # nothing within reach: the cup grabs air

    def _suction_release(self) -> None:
        if self._held_part_id is None:
            return
        self._advance_cell(self.now_us)
        pose = self.robot_env.pose
        part = self._find_part(self._held_part_id)
        self._held_part_id = None
        if self.bin.accepts(pose.x, pose.y):
            dropped = part.moved_to(pose.x, pose.y).with_state(PartState.IN_REJECT_BIN)
            self.bin.contents.append(part.id)
        elif (
            0.0 <= pose.x <= self.conveyor.belt_length_mm
            and abs(pose.y) <= self.conveyor.belt_half_width_mm
        ):
            dropped = part.moved_to(pose.x, pose.y).with_state(PartState.ON_BELT)
        else:
            raise EngineFault(f"part {part.id} released outside bin and belt")
        self._replace_part(part.id, dropped)
        self._part_state_changed(dropped)
        self._check_beam()

    def _vision_find(self, process_name: str) -> optics.VisionRegister:
        self._advance_cell(self.now_us)
        self._advance_arduino(self.now_us)
        process = self.vision_processes.get(process_name)
        if process is None:
            raise EngineFault(f"unknown vision process {process_name!r}")
        filt = self.optics.filters[self.arduino.current_filter]
        light = self.optics.led_light(self.arduino.led_rgb)
        image = optics.render(
            [p for p in self.parts if p.state is PartState.ON_BELT],
            filt,
            light,
            self.camera,
            self.optics.belt_reflectance,
            belt_half_width_mm=self.conveyor.belt_half_width_mm,
            edge_leak=self.optics.edge_leak,
            wheel_settled=self.arduino.settled(self.arduino_config),
        )
        return optics.run_find(process, image)

    def _robot_resume(self, t_us: int) -> None:
        wake = self.dispatcher.resume(t_us)
        if wake is not None:
            self._schedule(wake, PRIO_ROBOT, self._robot_resume)

    def _poke_robot(self) -> None:
        assembly = self.bus.consumed(Direction.PLC_TO_ROBOT)
        self.dispatcher.update_inputs(
            scan_request=assembly.bit("Scan Program"),
            part_match=assembly.bit("Part match"),
            remove_program=assembly.bit("Remove Program"),
        )
        if not self.dispatcher.interpreter.running:
            wake = self.dispatcher.poll(self.now_us)
            if wake is not None:
                self._schedule(wake, PRIO_ROBOT, self._robot_resume)

    def _produce_robot_words(self) -> list[int]:
        io = self.robot_env.io
        bits = {
            "Cmd enabled": True,
            "System ready": True,
            "Prg running": self.dispatcher.interpreter.running,
            "At perch": not self.dispatcher.busy,
        }
        for do_index, (word, bit) in iobus.DO_TO_ASSEMBLY_BIT.items():
            name = iobus.ROBOT_TO_PLC_ALIASES[(word, bit)]
            bits[name] = io.do(do_index)
        return iobus.pack(bits, Direction.ROBOT_TO_PLC)

    def _produce_plc_words(self) -> list[int]:
        bits = {
            alias: self.plc_db.bits[tag]
            for alias, tag in plc.OUTPUT_ALIAS_TO_TAG.items()
        }
        return iobus.pack(bits, Direction.PLC_TO_ROBOT)

    # -------------------------------------------------------------------- bus

    def _bus_tick(self, t_us: int) -> None:
        snapshot = self.bus.capture()
        if self.extra_latency_us:
            self._schedule(
                t_us + self.extra_latency_us,
                PRIO_BUS,
                lambda t, s=snapshot: self._bus_deliver(s),
            )
        else:
            self._bus_deliver(snapshot)
        next_t = t_us + self.bus.rpi_us
        if next_t <= self.duration_us:
            self._schedule(next_t, PRIO_BUS, self._bus_tick)

    def _bus_deliver(self, snapshot) -> None:
        for direction, _, new in self.bus.deliver(snapshot):
            self._emit(
                "TagChange",
                "bus",
                {
                    "assembly": direction.value,
                    "words": list(new),
                    "set_bits": iobus.set_bit_names(new, direction),
                },
            )
        self._poke_robot()

    # -------------------------------------------------------------------- plc

    def submit_command(self, action: OperatorAction, command_id: int | None = None) -> int:
        """Queue an operator command; it applies at the next PLC scan boundary."""
        if command_id is None:
            command_id = next(self._command_counter)
        with self._command_lock:
            self._command_queue.append((command_id, action))
        return command_id

    def _enqueue_command(self, action: OperatorAction) -> None:
        self.submit_command(action)

    def _apply_command(self, command_id: int, action: OperatorAction) -> None:
        db = self.plc_db
        route_pb = action.route == "pushbutton"
        if action.command == "start":
            self._pulse("Start_PB" if route_pb else "HMI_Start")
        elif action.command == "stop":
            self._pulse("Stop_PB" if route_pb else "HMI_Stop")
        elif action.command == "select_colors":
            for color in ("red", "green", "blue"):
                if color in action.args:
                    tag = (
                        f"{color.capitalize()}_Sel_PB"
                        if route_pb
                        else f"HMI_{color.capitalize()}"
                    )
                    db.bits[tag] = bool(action.args[color])
        elif action.command == "set_override":
            db.bits["HMI_Override"] = bool(action.args["enabled"])
        elif action.command == "spawn_part":
            self._spawn_part(
                PartSpawn(
                    t_s=self.now_us / US,
                    color=action.args["color"],
                    y_mm=float(action.args.get("y_mm", 0.0)),
                    rotation_deg=float(action.args.get("rotation_deg", 0.0)),
                )
            )
        else:
            raise EngineFault(f"unknown command {action.command!r}")
        self._last_command_id = max(self._last_command_id, command_id)

    def _pulse(self, tag: str) -> None:
        self.plc_db.bits[tag] = True
        self._pulses[tag] = self._pulse_scans

    def _plc_scan(self, t_us: int) -> None:
        db = self.plc_db
        # commands apply at the scan boundary
        with self._command_lock:
            pending, self._command_queue = self._command_queue, []
        for command_id, action in pending:
            self._apply_command(command_id, action)

        # freeze physical and bus inputs into the tag image
        self._advance_cell(t_us)
        db.bits["Beam"] = self._beam_state
        robot_image = self.bus.consumed(Direction.ROBOT_TO_PLC)
        for alias, tag in plc.INPUT_ALIAS_TO_TAG.items():
            db.bits[tag] = robot_image.bit(alias)

        prev_match = db.bits["PartMatch"]
        prev_remove = db.bits["RemoveProgram"]
        prev_conveyor = db.bits["ConveyorRun"]

        plc.scan_once(self.plc_program, db, self.scan_period_us // 1000)

        # outputs: conveyor motor is wired discretely
        if db.bits["ConveyorRun"] != prev_conveyor:
            self._emit(
                "TagChange", "plc", {"signal": "ConveyorRun", "value": db.bits["ConveyorRun"]}
            )
        if db.bits["ConveyorRun"] != self.conveyor.running:
            self.conveyor.running = db.bits["ConveyorRun"]

        match_rise = db.bits["PartMatch"] and not prev_match
        remove_rise = db.bits["RemoveProgram"] and not prev_remove
        if match_rise or remove_rise:
            self._issue_verdict(db.bits["PartMatch"])

        # command pulses decay after a few scans
        for tag in list(self._pulses):
            self._pulses[tag] -= 1
            if self._pulses[tag] <= 0:
                db.bits[tag] = False
                del self._pulses[tag]

        self._drain_pending_spawns()
        self._check_progress(t_us)

        next_t = t_us + self.scan_period_us
        if next_t <= self.duration_us and not self.completed:
            self._schedule(next_t, PRIO_PLC, self._plc_scan)

    def _issue_verdict(self, match: bool) -> None:
        db = self.plc_db
        detected = [
            c for c in ("Red", "Green", "Blue") if db.bits[f"Robot_{c}"]
        ]
        selected = [
            c
            for c in ("Red", "Green", "Blue")
            if db.bits[f"{c}_Sel_PB"] or db.bits[f"HMI_{c}"]
        ]
        part_id = self._active_part_id
        self._emit(
            "VerdictIssued",
            "plc",
            {
                "part_id": part_id,
                "match": match,
                "remove": not match,
                "detected": [c.lower() for c in detected],
                "selected": [c.lower() for c in selected],
                "override": db.bits["HMI_Override"],
            },
        )
        if part_id is not None and part_id in self.part_stats:
            stats = self.part_stats[part_id]
            stats.verdict_us = self.now_us
            stats.detected = [c.lower() for c in detected]
            stats.match = match

    # ------------------------------------------------------- progress control

    def _nonterminal_parts(self) -> bool:
        return any(
            p.state in (PartState.ON_BELT, PartState.HELD_BY_ROBOT) for p in self.parts
        )

    def _check_progress(self, t_us: int) -> None:
        if self._spawn_budget == 0 and self.parts and not self._nonterminal_parts():
            if not self.dispatcher.busy:
                self.completed = True
                return
        stuck = (
            self.plc_db.bits["Enable"]
            and self._nonterminal_parts()
            and not self.conveyor.running
            and not self.dispatcher.interpreter.running
            and t_us - self._last_progress_us > DEADLOCK_HORIZON_US
        )
        if stuck:
            self.deadlocked = (
                "no event is schedulable while parts remain on the belt "
                f"(no progress since t={self._last_progress_us / US:.3f} s)"
            )

    # -------------------------------------------------------------- run / api

    def step_until(self, until_us: int) -> None:
        """Execute all events at or before ``until_us`` (capped at duration)."""
        until_us = min(until_us, self.duration_us)
        while self._queue and not self.completed and self.deadlocked is None:
            t, prio, seq, action = self._queue[0]
            if t > until_us:
                break
            heapq.heappop(self._queue)
            self.now_us = t
            action(t)
        if self.deadlocked is not None:
            raise DeadlockDetected(self.deadlocked)
        if not self.completed and until_us > self.now_us:
            self.now_us = until_us

    def run(self) -> tuple[list[SimEvent], dict]:
        self.step_until(self.duration_us)
        return self.events, self.metrics()

    def metrics(self) -> dict:
        per_color = {
            color: {"spawned": 0, "kept": 0, "removed": 0}
            for color in ("red", "green", "blue")
        }
        cycle_times = []
        misclassified = 0
        for stats in self.part_stats.values():
            bucket = per_color.get(stats.color)
            if bucket is None:
                continue
            bucket["spawned"] += 1
            if stats.final_state == "passed_through":
                bucket["kept"] += 1
            elif stats.final_state == "in_reject_bin":
                bucket["removed"] += 1
            if stats.beam_rise_us is not None and stats.verdict_us is not None:
                cycle_times.append((stats.verdict_us - stats.beam_rise_us) / US)
            if stats.verdict_us is not None and stats.detected != [stats.color]:
                misclassified += 1
        return {
            "per_color": per_color,
            "parts_total": len(self.part_stats),
            "reject_bin": list(self.bin.contents),
            "misclassified": misclassified,
            "mean_cycle_time_s": (
                round(sum(cycle_times) / len(cycle_times), 6) if cycle_times else None
            ),
            "sim_time_s": self.now_us / US,
            "event_count": len(self.events),
        }

    def projected_parts(self, t_us: int | None = None) -> list[Part]:
        """Belt positions at ``t_us`` without touching simulation state."""
        t_us = self.now_us if t_us is None else t_us
        dt = max(0, t_us - self._cell_update_us) / US
        return advance_conveyor(self.conveyor, self.parts, dt)

    def snapshot(self) -> dict:
        db = self.plc_db
        robot_words = self.bus.consumer_images[Direction.ROBOT_TO_PLC]
        plc_words = self.bus.consumer_images[Direction.PLC_TO_ROBOT]
        pose = self.robot_env.pose
        return {
            "schema": 1,
            "t_us": self.now_us,
            "conveyor": {
                "running": self.conveyor.running,
                "speed_mm_per_s": self.conveyor.speed_mm_per_s,
                "belt_length_mm": self.conveyor.belt_length_mm,
                "belt_half_width_mm": self.conveyor.belt_half_width_mm,
                "beam_sensor_x_mm": self.conveyor.beam_sensor_x_mm,
            },
            "enable": db.bits["Enable"],
            "beam_blocked": self._beam_state,
            "selected": {
                "red": db.bits["Red_Sel_PB"] or db.bits["HMI_Red"],
                "green": db.bits["Green_Sel_PB"] or db.bits["HMI_Green"],
                "blue": db.bits["Blue_Sel_PB"] or db.bits["HMI_Blue"],
            },
            "override": db.bits["HMI_Override"],
            "parts": [
                {
                    "id": p.id,
                    "color": p.color_class.value,
                    "x_mm": round(p.x, 3),
                    "y_mm": round(p.y, 3),
                    "rotation_deg": p.rotation_deg,
                    "state": p.state.value,
                }
                for p in self.projected_parts()
            ],
            "assemblies": {
                "robot_to_plc": {
                    "words": list(robot_words),
                    "set_bits": iobus.set_bit_names(robot_words, Direction.ROBOT_TO_PLC),
                },
                "plc_to_robot": {
                    "words": list(plc_words),
                    "set_bits": iobus.set_bit_names(plc_words, Direction.PLC_TO_ROBOT),
                },
            },
            "robot": {
                "state": self.dispatcher.state.value,
                "program": self.dispatcher.current_program,
                "statement_index": self.dispatcher.interpreter.statement_index,
                "pose": {"x": round(pose.x, 3), "y": round(pose.y, 3), "z": round(pose.z, 3)},
                "suction": self.robot_env.io.do(111),
            },
            "filter_wheel": {
                "commanded_angle_deg": self.arduino.commanded_angle_deg,
                "led_rgb": list(self.arduino.led_rgb),
            },
            "reject_bin": list(self.bin.contents),
            "metrics": self.metrics(),
            "last_command_id": self._last_command_id,
            "completed": self.completed,
        }
