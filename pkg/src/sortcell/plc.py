"""Ladder-logic IR, scan cycle, and the cell's controller program.

A rung is a series/parallel contact network feeding one or more output
instructions (energize / latch / unlatch coils or an on-delay timer). An
output may carry its own guard contacts, mirroring ladder branches that place
contacts ahead of a coil. Rungs evaluate top to bottom against the tag
database; physical inputs are frozen into the database before the scan and
outputs are copied out after it, so one scan is atomic to the outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .workcell import ColorClass


class LadderError(Exception):
    """Structural problem in a ladder program (bad tag, duplicate coil, ...)."""


@dataclass(frozen=True)
class Contact:
    tag: str
    negated: bool = False


@dataclass(frozen=True)
class Series:
    items: tuple


@dataclass(frozen=True)
class Parallel:
    items: tuple


Net = Union[Contact, Series, Parallel, None]  # None = unconditional rung


def xic(tag: str) -> Contact:
    """Examine-on contact (closes when the bit is 1)."""
    return Contact(tag, negated=False)


def xio(tag: str) -> Contact:
    """Examine-off contact (closes when the bit is 0)."""
    return Contact(tag, negated=True)


class CoilKind(Enum):
    ENERGIZE = "ote"
    LATCH = "otl"
    UNLATCH = "otu"


@dataclass(frozen=True)
class Coil:
    tag: str
    kind: CoilKind = CoilKind.ENERGIZE
    guard: Net = None


@dataclass(frozen=True)
class TimerOn:
    timer: str
    preset_ms: int
    guard: Net = None


Output = Union[Coil, TimerOn]


@dataclass(frozen=True)
class Rung:
    logic: Net
    outputs: tuple
    comment: str = ""


@dataclass
class LadderProgram:
    rungs: list[Rung]


@dataclass
class Timer:
    preset_ms: int
    acc_ms: int = 0
    dn: bool = False


@dataclass
class TagDatabase:
    """Flat named-bit store plus timers; addresses kept for display only."""

    bits: dict[str, bool]
    timers: dict[str, Timer]
    addresses: dict[str, str] = field(default_factory=dict)

    def read(self, ref: str) -> bool:
        if ref.endswith(".DN"):
            return self.timers[ref[:-3]].dn
        return self.bits[ref]

    def write(self, tag: str, value: bool) -> None:
        if tag not in self.bits:
            raise KeyError(tag)
        self.bits[tag] = value


def _eval(net: Net, db: TagDatabase) -> bool:
    if net is None:
        return True
    if isinstance(net, Contact):
        value = db.read(net.tag)
        return not value if net.negated else value
    if isinstance(net, Series):
        return all(_eval(item, db) for item in net.items)
    if isinstance(net, Parallel):
        return any(_eval(item, db) for item in net.items)
    raise TypeError(f"not a ladder network: {net!r}")


def _net_refs(net: Net) -> list[str]:
    if net is None:
        return []
    if isinstance(net, Contact):
        return [net.tag]
    return [ref for item in net.items for ref in _net_refs(item)]


def validate(program: LadderProgram, db: TagDatabase) -> None:
    """Reject unknown tag references and coils written by more than one output.

    A latch/unlatch pair on one tag (one OTL rung plus one OTU rung) is the
    standard ladder idiom and is allowed; any other repeat write is not.
    """
    written: dict[tuple[str, CoilKind], int] = {}
    ote_written: dict[str, int] = {}
    for i, rung in enumerate(program.rungs):
        for ref in _net_refs(rung.logic):
            _check_ref(ref, db, i)
        for out in rung.outputs:
            for ref in _net_refs(out.guard):
                _check_ref(ref, db, i)
            if isinstance(out, Coil):
                if out.tag not in db.bits:
                    raise LadderError(f"rung {i}: coil writes unknown tag {out.tag!r}")
                key = (out.tag, out.kind)
                if key in written:
                    raise LadderError(
                        f"rung {i}: coil {out.tag!r} already written by rung {written[key]}"
                    )
                if out.kind is CoilKind.ENERGIZE:
                    conflict = (
                        (out.tag, CoilKind.LATCH) in written
                        or (out.tag, CoilKind.UNLATCH) in written
                    )
                    if conflict or out.tag in ote_written:
                        raise LadderError(
                            f"rung {i}: coil {out.tag!r} written by multiple rungs"
                        )
                    ote_written[out.tag] = i
                elif out.tag in ote_written:
                    raise LadderError(
                        f"rung {i}: coil {out.tag!r} written by multiple rungs"
                    )
                written[key] = i
            elif isinstance(out, TimerOn):
                if out.timer not in db.timers:
                    raise LadderError(f"rung {i}: unknown timer {out.timer!r}")
                if out.preset_ms <= 0:
                    raise LadderError(f"rung {i}: timer preset must be positive")
                key = f"timer:{out.timer}"
                if key in written:
                    raise LadderError(
                        f"rung {i}: timer {out.timer!r} already driven by rung {written[key]}"
                    )
                written[key] = i
            else:
                raise LadderError(f"rung {i}: unknown output {out!r}")


def _check_ref(ref: str, db: TagDatabase, rung_no: int) -> None:
    if ref.endswith(".DN"):
        if ref[:-3] not in db.timers:
            raise LadderError(f"rung {rung_no}: unknown timer reference {ref!r}")
    elif ref not in db.bits:
        raise LadderError(f"rung {rung_no}: unknown tag {ref!r}")


def scan_once(program: LadderProgram, db: TagDatabase, scan_period_ms: int) -> TagDatabase:
    """One PLC scan: evaluate rungs in order, advancing timers by the scan period.

    The database is mutated in place (coil writes become visible to later
    rungs, as on a real controller) and also returned for convenience.
    """
    for rung in program.rungs:
        rung_value = _eval(rung.logic, db)
        for out in rung.outputs:
            value = rung_value and _eval(out.guard, db)
            if isinstance(out, Coil):
                if out.kind is CoilKind.ENERGIZE:
                    db.write(out.tag, value)
                elif out.kind is CoilKind.LATCH:
                    if value:
                        db.write(out.tag, True)
                elif out.kind is CoilKind.UNLATCH:
                    if value:
                        db.write(out.tag, False)
            else:
                timer = db.timers[out.timer]
                if value:
                    timer.acc_ms = min(timer.acc_ms + scan_period_ms, out.preset_ms)
                    timer.dn = timer.acc_ms >= out.preset_ms
                else:
                    timer.acc_ms = 0
                    timer.dn = False
    return db


def verdict(
    detected: set[ColorClass], selected: set[ColorClass], override_enabled: bool
) -> tuple[bool, bool]:
    """(part_match, remove) for one scanned part.

    With the override on, a simultaneous green+blue detection is treated as
    blue only (an off-center blue part leaks into the green scan). A part
    that matched nothing is removed: the flow only ever keeps or rejects.
    """
    effective = set(detected)
    if (
        override_enabled
        and ColorClass.GREEN in effective
        and ColorClass.BLUE in effective
    ):
        effective = {ColorClass.BLUE}
    part_match = bool(effective & set(selected))
    return part_match, not part_match


# --- The cell's controller program -----------------------------------------

INPUT_TAGS = {
    "Start_PB": "Local:1:I.Data.0",
    "Stop_PB": "Local:1:I.Data.1",
    "Fault_Reset_PB": "Local:1:I.Data.2",
    "Red_Sel_PB": "Local:1:I.Data.4",
    "Blue_Sel_PB": "Local:1:I.Data.5",
    "Green_Sel_PB": "Local:1:I.Data.6",
    "Beam": "Local:1:I.Data.14",
}

HMI_TAGS = ["HMI_Start", "HMI_Stop", "HMI_Red", "HMI_Green", "HMI_Blue", "HMI_Override"]

ROBOT_INPUT_TAGS = {
    "Robot_Red": "ROBOT:I.Data[0].10",
    "Robot_Green": "ROBOT:I.Data[0].11",
    "Robot_Blue": "ROBOT:I.Data[0].12",
    "Robot_ConveyorFwd": "ROBOT:I.Data[0].13",
    "Robot_ScanDone": "ROBOT:I.Data[1].1",
}

ROBOT_OUTPUT_TAGS = {
    "UI_IMSTP": "ROBOT:O.Data[0].0",
    "UI_HOLD": "ROBOT:O.Data[0].1",
    "UI_SFSPD": "ROBOT:O.Data[0].2",
    "UI_Stop": "ROBOT:O.Data[0].3",
    "UI_FaultReset": "ROBOT:O.Data[0].4",
    "UI_Stat": "ROBOT:O.Data[0].5",
    "PartMatch": "ROBOT:O.Data[0].6",
    "RobotEnable": "ROBOT:O.Data[0].7",
    "ScanProgram": "ROBOT:O.Data[0].8",
    "RemoveProgram": "ROBOT:O.Data[0].9",
}

INTERNAL_TAGS = ["Enable", "PartPresent", "ConveyorRun"]

# Bit alias (bus direction plc->robot) -> output tag, used when packing the
# outbound assembly.
OUTPUT_ALIAS_TO_TAG = {
    "IMSTP": "UI_IMSTP",
    "HOLD": "UI_HOLD",
    "SFSPD": "UI_SFSPD",
    "Stop": "UI_Stop",
    "Fault Reset": "UI_FaultReset",
    "Stat": "UI_Stat",
    "Part match": "PartMatch",
    "Enable": "RobotEnable",
    "Scan Program": "ScanProgram",
    "Remove Program": "RemoveProgram",
}

# Inbound assembly alias -> consumed-image tag.
INPUT_ALIAS_TO_TAG = {
    "Red": "Robot_Red",
    "Green": "Robot_Green",
    "Blue": "Robot_Blue",
    "Conveyor fwd": "Robot_ConveyorFwd",
    "Scan Done": "Robot_ScanDone",
}

T1_PRESET_MS = 200
FAULT_PULSE_MS = 500


def build_tag_database(t1_preset_ms: int = T1_PRESET_MS) -> TagDatabase:
    bits = {name: False for name in INPUT_TAGS}
    bits.update({name: False for name in HMI_TAGS})
    bits.update({name: False for name in ROBOT_INPUT_TAGS})
    bits.update({name: False for name in ROBOT_OUTPUT_TAGS})
    bits.update({name: False for name in INTERNAL_TAGS})
    addresses = dict(INPUT_TAGS)
    addresses.update(ROBOT_INPUT_TAGS)
    addresses.update(ROBOT_OUTPUT_TAGS)
    timers = {
        "T1": Timer(preset_ms=t1_preset_ms),
        "T_FaultReset": Timer(preset_ms=FAULT_PULSE_MS),
    }
    return TagDatabase(bits=bits, timers=timers, addresses=addresses)


def _selected(color: str) -> Parallel:
    return Parallel((xic(f"{color}_Sel_PB"), xic(f"HMI_{color}")))


def build_default_program(t1_preset_ms: int = T1_PRESET_MS) -> LadderProgram:
    """The reconstructed ten-rung controller program."""
    rungs = [
        # R0: start/stop with seal-in.
        Rung(
            logic=Series(
                (
                    Parallel((xic("Start_PB"), xic("HMI_Start"), xic("Enable"))),
                    xio("Stop_PB"),
                    xio("HMI_Stop"),
                )
            ),
            outputs=(Coil("Enable"),),
            comment="seal-in enable from start/stop (pushbutton or HMI)",
        ),
        # R1: robot UI safe defaults, plus Enable forwarded to the robot.
        Rung(
            logic=None,
            outputs=(
                Coil("UI_IMSTP"),
                Coil("UI_SFSPD"),
                Coil("UI_Stop"),
                Coil("RobotEnable", guard=xic("Enable")),
            ),
            comment="robot UI constants held true; enable forwarded",
        ),
        # R2: fault-reset pushbutton stretched into a bounded pulse.
        Rung(
            logic=xic("Fault_Reset_PB"),
            outputs=(
                TimerOn("T_FaultReset", FAULT_PULSE_MS),
                Coil("UI_FaultReset", guard=xio("T_FaultReset.DN")),
            ),
            comment="fault reset one-shot (500 ms)",
        ),
        # R3: part-present latch from the beam sensor.
        Rung(
            logic=xic("Beam"),
            outputs=(Coil("PartPresent", kind=CoilKind.LATCH),),
            comment="latch part presence on beam break",
        ),
        # R4: conveyor runs while enabled and no part is held at the beam,
        # or while the robot requests a forward pulse.
        Rung(
            logic=Parallel(
                (
                    Series((xic("Enable"), xio("PartPresent"))),
                    xic("Robot_ConveyorFwd"),
                )
            ),
            outputs=(Coil("ConveyorRun"),),
            comment="conveyor interlock",
        ),
        # R5: request a scan while the part physically blocks the beam and no
        # scan-done has been reported. The beam contact keeps the request from
        # re-arming during the single scan between scan-done falling and the
        # latch clearing.
        Rung(
            logic=Series((xic("PartPresent"), xic("Beam"), xio("Robot_ScanDone"))),
            outputs=(Coil("ScanProgram"),),
            comment="scan request",
        ),
        # R6: verdict delay timer, armed by scan-done.
        Rung(
            logic=xic("Robot_ScanDone"),
            outputs=(TimerOn("T1", t1_preset_ms),),
            comment="verdict delay",
        ),
        # R7: part match = any detected color that is also selected, with the
        # green/blue override folded in as contact logic.
        Rung(
            logic=Series(
                (
                    xic("T1.DN"),
                    Parallel(
                        (
                            Series(
                                (
                                    xic("Robot_Red"),
                                    _selected("Red"),
                                    Parallel(
                                        (
                                            xio("HMI_Override"),
                                            xio("Robot_Green"),
                                            xio("Robot_Blue"),
                                        )
                                    ),
                                )
                            ),
                            Series(
                                (
                                    xic("Robot_Green"),
                                    _selected("Green"),
                                    Parallel((xio("HMI_Override"), xio("Robot_Blue"))),
                                )
                            ),
                            Series((xic("Robot_Blue"), _selected("Blue"))),
                        )
                    ),
                )
            ),
            outputs=(Coil("PartMatch"),),
            comment="verdict: match",
        ),
        # R8: anything not matched is removed.
        Rung(
            logic=Series((xic("T1.DN"), xio("PartMatch"))),
            outputs=(Coil("RemoveProgram"),),
            comment="verdict: remove",
        ),
        # R9: clear the latch once the part has left the beam and the robot
        # has dropped scan-done.
        Rung(
            logic=Series((xio("Beam"), xio("Robot_ScanDone"))),
            outputs=(Coil("PartPresent", kind=CoilKind.UNLATCH),),
            comment="cycle reset",
        ),
    ]
    return LadderProgram(rungs=rungs)


# --- Structured-text (JSON-shaped) ladder documents -------------------------


def _net_to_doc(net: Net):
    if net is None:
        return True
    if isinstance(net, Contact):
        return {"xio" if net.negated else "xic": net.tag}
    key = "and" if isinstance(net, Series) else "or"
    return {key: [_net_to_doc(item) for item in net.items]}


def _net_from_doc(doc) -> Net:
    if doc is True:
        return None
    if not isinstance(doc, dict) or len(doc) != 1:
        raise LadderError(f"bad network node: {doc!r}")
    key, value = next(iter(doc.items()))
    if key == "xic":
        return Contact(str(value))
    if key == "xio":
        return Contact(str(value), negated=True)
    if key == "and":
        return Series(tuple(_net_from_doc(item) for item in value))
    if key == "or":
        return Parallel(tuple(_net_from_doc(item) for item in value))
    raise LadderError(f"unknown network operator {key!r}")


def program_to_document(program: LadderProgram) -> dict:
    rungs = []
    for rung in program.rungs:
        outputs = []
        for out in rung.outputs:
            if isinstance(out, Coil):
                entry = {"type": out.kind.value, "tag": out.tag}
            else:
                entry = {"type": "ton", "timer": out.timer, "preset_ms": out.preset_ms}
            if out.guard is not None:
                entry["guard"] = _net_to_doc(out.guard)
            outputs.append(entry)
        rungs.append(
            {"comment": rung.comment, "logic": _net_to_doc(rung.logic), "outputs": outputs}
        )
    return {"schema": 1, "rungs": rungs}


_COIL_KINDS = {kind.value: kind for kind in CoilKind}


def program_from_document(doc: dict) -> LadderProgram:
    if not isinstance(doc, dict):
        raise LadderError("ladder document must be an object")
    unknown = set(doc) - {"schema", "rungs"}
    if unknown:
        raise LadderError(f"unknown ladder document keys: {sorted(unknown)}")
    if doc.get("schema") != 1:
        raise LadderError("unsupported ladder document schema")
    rungs = []
    for i, rung_doc in enumerate(doc.get("rungs", [])):
        unknown = set(rung_doc) - {"comment", "logic", "outputs"}
        if unknown:
            raise LadderError(f"rung {i}: unknown keys {sorted(unknown)}")
        outputs: list[Output] = []
        for out_doc in rung_doc.get("outputs", []):
            unknown = set(out_doc) - {"type", "tag", "timer", "preset_ms", "guard"}
            if unknown:
                raise LadderError(f"rung {i}: unknown output keys {sorted(unknown)}")
            guard = _net_from_doc(out_doc["guard"]) if "guard" in out_doc else None
            kind = out_doc.get("type")
            if kind == "ton":
                outputs.append(
                    TimerOn(str(out_doc["timer"]), int(out_doc["preset_ms"]), guard)
                )
            elif kind in _COIL_KINDS:
                outputs.append(Coil(str(out_doc["tag"]), _COIL_KINDS[kind], guard))
            else:
                raise LadderError(f"rung {i}: unknown output type {kind!r}")
        rungs.append(
            Rung(
                logic=_net_from_doc(rung_doc.get("logic", True)),
                outputs=tuple(outputs),
                comment=str(rung_doc.get("comment", "")),
            )
        )
    return LadderProgram(rungs=rungs)
