"""Robot-side execution: program interpreter, registers, IO, and dispatcher.

The interpreter is resumable: zero-duration statements (IO writes, jumps,
register loads) run back to back, and each timed statement (wait, motion,
vision processing) hands the wake-up time to the caller. That lets the
simulation engine schedule the robot like any other node while unit tests can
just loop until completion.

The dispatcher is the small main program the physical cell leaves implicit:
wait for the controller's scan request, run the scan program, wait for the
verdict, copy the remove bit to the sort program's input, run the sort
program, repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import tp
from .optics import VisionRegister


class RuntimeFault(Exception):
    def __init__(self, statement, cause: str):
        super().__init__(f"{statement}: {cause}")
        self.statement = statement
        self.cause = cause


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    rz: float = 0.0

    def translated(self, dx: float, dy: float, dz: float, drz: float = 0.0) -> "Pose":
        return Pose(self.x + dx, self.y + dy, self.z + dz, self.rz + drz)

    def distance_to(self, other: "Pose") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )


@dataclass(frozen=True)
class Workspace:
    x_min: float = 0.0
    x_max: float = 1200.0
    y_min: float = -500.0
    y_max: float = 500.0
    z_min: float = 0.0
    z_max: float = 600.0

    def contains(self, pose: Pose) -> bool:
        return (
            self.x_min <= pose.x <= self.x_max
            and self.y_min <= pose.y <= self.y_max
            and self.z_min <= pose.z <= self.z_max
        )


@dataclass(frozen=True)
class RobotConfig:
    joint_move_s: float = 2.0
    vision_processing_s: float = 0.05
    pick_tolerance_mm: float = 10.0
    workspace: Workspace = field(default_factory=Workspace)


def default_positions(camera_x_mm: float = 600.0, bin_xy=(600.0, -300.0)) -> dict[int, Pose]:
    """P[] table: P[1] is the perch/drop pose above the reject bin."""
    return {1: Pose(bin_xy[0], bin_xy[1], 200.0)}


def default_position_registers(camera_x_mm: float = 600.0) -> dict[int, Pose]:
    """PR[80] is the taught vision reference (pick height at the window
    center); PR[81] is the vertical approach offset."""
    return {
        80: Pose(camera_x_mm, 0.0, 40.0),
        81: Pose(0.0, 0.0, 100.0),
    }


class RobotIO:
    """DO/DI tables; reads of unset indices default to OFF."""

    def __init__(self) -> None:
        self.do_table: dict[int, bool] = {}
        self.di_table: dict[int, bool] = {}
        self._do_hooks: list[Callable[[int, bool], None]] = []

    def add_do_hook(self, hook: Callable[[int, bool], None]) -> None:
        self._do_hooks.append(hook)

    def set_do(self, index: int, value: bool) -> None:
        old = self.do_table.get(index, False)
        self.do_table[index] = value
        if value != old:
            for hook in self._do_hooks:
                hook(index, value)

    def do(self, index: int) -> bool:
        return self.do_table.get(index, False)

    def set_di(self, index: int, value: bool) -> None:
        self.di_table[index] = value

    def di(self, index: int) -> bool:
        return self.di_table.get(index, False)


@dataclass
class RobotEnv:
    """Everything a running program touches.

    ``vision_find`` performs the actual frame grab and search for a named
    process at the current instant; ``emit`` records a trace event (may be a
    no-op outside the engine).
    """

    io: RobotIO
    positions: dict[int, Pose]
    position_registers: dict[int, Pose]
    vision_registers: dict[int, VisionRegister] = field(default_factory=dict)
    pose: Pose = Pose(600.0, -300.0, 200.0)
    config: RobotConfig = field(default_factory=RobotConfig)
    vision_find: Callable[[str], VisionRegister] = lambda process: VisionRegister(False)
    emit: Callable[[str, dict], None] = lambda kind, payload: None


class _PendingKind(Enum):
    WAIT = "wait"
    MOTION = "motion"
    VISION = "vision"


@dataclass
class _Pending:
    kind: _PendingKind
    wake_us: int
    target_pose: Pose | None = None
    process: str = ""
    result: VisionRegister | None = None


class TpInterpreter:
    """Executes one program on a robot environment, one timed step at a time."""

    def __init__(self, env: RobotEnv):
        self.env = env
        self.program: tp.TpProgram | None = None
        self.pc = 0
        self.pending: _Pending | None = None
        self.vision_results: dict[str, VisionRegister] = {}

    @property
    def running(self) -> bool:
        return self.program is not None

    @property
    def statement_index(self) -> int | None:
        return self.pc if self.program is not None else None

    def start(self, program: tp.TpProgram, now_us: int) -> int | None:
        if self.running:
            raise RuntimeFault(program.name, "interpreter already running a program")
        self.program = program
        self.pc = 0
        self.pending = None
        self.vision_results = {}
        self.env.emit("ProgramStart", {"program": program.name})
        return self.resume(now_us)

    def resume(self, now_us: int) -> int | None:
        """Run until the next timed statement; returns its wake time, or None at end."""
        assert self.program is not None
        if self.pending is not None:
            self._complete_pending(now_us)
        while self.pc < len(self.program.statements):
            stmt = self.program.statements[self.pc]
            wake = self._execute(stmt, now_us)
            if wake is not None:
                return wake
        name = self.program.name
        self.program = None
        self.env.emit("ProgramEnd", {"program": name})
        return None

    def _complete_pending(self, now_us: int) -> None:
        pending = self.pending
        self.pending = None
        assert pending is not None
        if pending.kind is _PendingKind.MOTION:
            self.env.pose = pending.target_pose
            self.env.emit(
                "MotionEnd",
                {"x": self.env.pose.x, "y": self.env.pose.y, "z": self.env.pose.z,
                 "rz": self.env.pose.rz},
            )
        elif pending.kind is _PendingKind.VISION:
            register = pending.result
            self.vision_results[pending.process] = register
            payload = {"process": pending.process, "found": register.found}
            if register.found:
                payload.update(
                    {"x_mm": register.x_mm, "y_mm": register.y_mm, "rz_deg": register.rz_deg}
                )
            self.env.emit("VisionResult", payload)

    def _execute(self, stmt, now_us: int) -> int | None:
        env = self.env
        if isinstance(stmt, tp.SetDO):
            env.io.set_do(stmt.index, stmt.value)
            self.pc += 1
            return None
        if isinstance(stmt, tp.Wait):
            self.pc += 1
            self.pending = _Pending(_PendingKind.WAIT, now_us + _us(stmt.seconds))
            return self.pending.wake_us
        if isinstance(stmt, tp.VisionRunFind):
            register = env.vision_find(stmt.process)
            self.pc += 1
            self.pending = _Pending(
                _PendingKind.VISION,
                now_us + _us(env.config.vision_processing_s),
                process=stmt.process,
                result=register,
            )
            return self.pending.wake_us
        if isinstance(stmt, tp.VisionGetOffset):
            if stmt.process not in self.vision_results:
                raise RuntimeFault(stmt, "RUN_FIND was never executed for this process")
            register = self.vision_results[stmt.process]
            if register.found:
                env.vision_registers[stmt.vr_index] = register
                self.pc += 1
            else:
                self._jump(stmt, stmt.jump_label_if_not_found)
            return None
        if isinstance(stmt, tp.Label):
            self.pc += 1
            return None
        if isinstance(stmt, tp.Jump):
            self._jump(stmt, stmt.n)
            return None
        if isinstance(stmt, tp.IfDiJump):
            # The jump is the failure path: fall through while the input is ON.
            if env.io.di(stmt.di_index):
                self.pc += 1
            else:
                self._jump(stmt, stmt.jump_label)
            return None
        if isinstance(stmt, (tp.SetUFrame, tp.SetUTool)):
            self.pc += 1
            return None
        if isinstance(stmt, tp.MotionJoint):
            target = self._resolve_target(stmt, stmt.target)
            return self._begin_motion(stmt, target, _us(env.config.joint_move_s), now_us)
        if isinstance(stmt, tp.MotionLinear):
            target = self._resolve_target(stmt, stmt.target)
            if stmt.voffset_vr is not None:
                if stmt.voffset_vr not in env.vision_registers:
                    raise RuntimeFault(stmt, f"VR[{stmt.voffset_vr}] not loaded")
                vr = env.vision_registers[stmt.voffset_vr]
                target = target.translated(vr.x_mm, vr.y_mm, 0.0, vr.rz_deg)
            if stmt.offset_pr is not None:
                offset = env.position_registers.get(stmt.offset_pr)
                if offset is None:
                    raise RuntimeFault(stmt, f"PR[{stmt.offset_pr}] not set")
                target = target.translated(offset.x, offset.y, offset.z)
            duration = _us(env.pose.distance_to(target) / stmt.speed_mm_s)
            return self._begin_motion(stmt, target, duration, now_us)
        raise RuntimeFault(stmt, "statement not executable")

    def _jump(self, stmt, label: int) -> None:
        assert self.program is not None
        target = self.program.label_index.get(label)
        if target is None:
            raise RuntimeFault(stmt, f"LBL[{label}] does not exist")
        self.pc = target

    def _resolve_target(self, stmt, target: tp.Target) -> Pose:
        env = self.env
        table = env.positions if target.kind == "P" else env.position_registers
        pose = table.get(target.index)
        if pose is None:
            raise RuntimeFault(stmt, f"{target.kind}[{target.index}] not set")
        return pose

    def _begin_motion(self, stmt, target: Pose, duration_us: int, now_us: int) -> int:
        env = self.env
        if not env.config.workspace.contains(target):
            raise RuntimeFault(stmt, f"target {target} outside workspace")
        env.emit(
            "MotionStart",
            {"x": target.x, "y": target.y, "z": target.z, "rz": target.rz,
             "duration_us": duration_us},
        )
        self.pc += 1
        self.pending = _Pending(
            _PendingKind.MOTION, now_us + duration_us, target_pose=target
        )
        return self.pending.wake_us


def _us(seconds: float) -> int:
    return round(seconds * 1_000_000)


def run_program(
    interpreter: TpInterpreter, program: tp.TpProgram, start_us: int = 0
) -> int:
    """Run a program to completion outside the engine; returns the end time (us)."""
    wake = interpreter.start(program, start_us)
    now = start_us
    while wake is not None:
        now = wake
        wake = interpreter.resume(now)
    return now


def scan_cycle_sequence(env: RobotEnv, start_us: int = 0) -> dict[str, bool]:
    """Run the scan program and report the latched color outputs."""
    interpreter = TpInterpreter(env)
    run_program(interpreter, tp.scanpart(), start_us)
    return {
        "red": env.io.do(123),
        "green": env.io.do(124),
        "blue": env.io.do(125),
        "scan_complete": env.io.do(130),
    }


class DispatcherState(Enum):
    IDLE = "idle"
    SCANNING = "scanning"
    WAIT_VERDICT = "wait_verdict"
    SORTING = "sorting"


class RobotDispatcher:
    """Implicit main loop of the robot node.

    Driven by the consumed controller assembly: a scan request launches the
    scan program; once a verdict bit appears the remove flag is copied to
    DI[121] and the sort program runs; then back to idle.
    """

    def __init__(
        self,
        env: RobotEnv,
        scan_program: tp.TpProgram | None = None,
        sort_program: tp.TpProgram | None = None,
    ):
        self.env = env
        self.interpreter = TpInterpreter(env)
        self.scan_program = scan_program if scan_program is not None else tp.scanpart()
        self.sort_program = sort_program if sort_program is not None else tp.sortpart()
        self.state = DispatcherState.IDLE
        self.scan_request = False
        self.part_match = False
        self.remove_program = False

    @property
    def current_program(self) -> str | None:
        return self.interpreter.program.name if self.interpreter.running else None

    @property
    def busy(self) -> bool:
        return self.state is not DispatcherState.IDLE

    def update_inputs(
        self, scan_request: bool, part_match: bool, remove_program: bool
    ) -> None:
        self.scan_request = scan_request
        self.part_match = part_match
        self.remove_program = remove_program
        self.env.io.set_di(121, remove_program)

    def poll(self, now_us: int) -> int | None:
        """Advance the dispatcher; returns the next wake time when one is pending."""
        if self.interpreter.running:
            return None  # a scheduled resume is already owed to the interpreter
        if self.state is DispatcherState.IDLE and self.scan_request:
            self.state = DispatcherState.SCANNING
            return self.interpreter.start(self.scan_program, now_us)
        if self.state is DispatcherState.SCANNING:
            self.state = DispatcherState.WAIT_VERDICT
            # fall through: the verdict may already be visible
        if self.state is DispatcherState.WAIT_VERDICT and (
            self.part_match or self.remove_program
        ):
            self.state = DispatcherState.SORTING
            return self.interpreter.start(self.sort_program, now_us)
        if self.state is DispatcherState.SORTING:
            self.state = DispatcherState.IDLE
        return None

    def resume(self, now_us: int) -> int | None:
        wake = self.interpreter.resume(now_us)
        if wake is not None:
            return wake
        return self.poll(now_us)
