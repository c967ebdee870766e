"""Parser and printer for the robot-program dialect used by the cell.

The dialect covers digital output writes, waits, vision calls, labels and
jumps, a conditional digital-input jump, frame/tool selection, and joint or
linear motions with optional vision-register and position-register offsets.
Line numbers are accepted and ignored (listings renumber freely), blank
numbered lines are skipped, a trailing " ;" is tolerated, and a line starting
with ":" continues the previous motion statement.

Conditional convention of this dialect: the JMP on a statement is the
*failure* path. ``VISION GET_OFFSET ... JMP LBL[n]`` jumps when nothing was
found, and ``IF DI[k]=ON, JMP LBL[n]`` jumps when the input reads OFF — the
statement guards the block that follows it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ParseError(Exception):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class Target:
    kind: str  # "P" or "PR"
    index: int
    label_text: str = ""

    def __str__(self) -> str:
        if self.label_text:
            return f"{self.kind}[{self.index}:{self.label_text}]"
        return f"{self.kind}[{self.index}]"


@dataclass(frozen=True)
class SetDO:
    index: int
    label_text: str
    value: bool

    def __str__(self) -> str:
        name = f"DO[{self.index}:{self.label_text}]" if self.label_text else f"DO[{self.index}]"
        return f"{name}={'ON' if self.value else 'OFF'}"


@dataclass(frozen=True)
class Wait:
    seconds: float

    def __str__(self) -> str:
        text = f"{self.seconds:.2f}"
        if text.startswith("0."):
            text = text[1:]
        return f"WAIT {text}(sec)"


@dataclass(frozen=True)
class VisionRunFind:
    process: str

    def __str__(self) -> str:
        return f"VISION RUN_FIND '{self.process}'"


@dataclass(frozen=True)
class VisionGetOffset:
    process: str
    vr_index: int
    jump_label_if_not_found: int

    def __str__(self) -> str:
        return (
            f"VISION GET_OFFSET '{self.process}' VR[{self.vr_index}] "
            f"JMP LBL[{self.jump_label_if_not_found}]"
        )


@dataclass(frozen=True)
class Label:
    n: int

    def __str__(self) -> str:
        return f"LBL[{self.n}]"


@dataclass(frozen=True)
class Jump:
    n: int

    def __str__(self) -> str:
        return f"JMP LBL[{self.n}]"


@dataclass(frozen=True)
class IfDiJump:
    """Guard: run the following block when DI[index] is ON, else take the jump."""

    di_index: int
    label_text: str
    jump_label: int

    def __str__(self) -> str:
        name = (
            f"DI[{self.di_index}:{self.label_text}]"
            if self.label_text
            else f"DI[{self.di_index}]"
        )
        return f"IF {name}=ON, JMP LBL[{self.jump_label}]"


@dataclass(frozen=True)
class SetUFrame:
    n: int

    def __str__(self) -> str:
        return f"UFRAME_NUM={self.n}"


@dataclass(frozen=True)
class SetUTool:
    n: int

    def __str__(self) -> str:
        return f"UTOOL_NUM={self.n}"


@dataclass(frozen=True)
class MotionJoint:
    target: Target
    speed_pct: float
    term: str

    def __str__(self) -> str:
        return f"J {self.target} {_num(self.speed_pct)}% {self.term}"


@dataclass(frozen=True)
class MotionLinear:
    target: Target
    speed_mm_s: float
    term: str
    voffset_vr: int | None = None
    offset_pr: int | None = None
    offset_pr_label: str = ""

    def __str__(self) -> str:
        parts = [f"L {self.target} {_num(self.speed_mm_s)}mm/sec {self.term}"]
        if self.voffset_vr is not None:
            parts.append(f"VOFFSET,VR[{self.voffset_vr}]")
        if self.offset_pr is not None:
            label = f":{self.offset_pr_label}" if self.offset_pr_label else ""
            parts.append(f"Offset,PR[{self.offset_pr}{label}]")
        return " ".join(parts)


TpStatement = (
    SetDO
    | Wait
    | VisionRunFind
    | VisionGetOffset
    | Label
    | Jump
    | IfDiJump
    | SetUFrame
    | SetUTool
    | MotionJoint
    | MotionLinear
)


def _num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else str(value)


@dataclass
class TpProgram:
    name: str
    statements: list[TpStatement]
    label_index: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.label_index:
            self.label_index = _build_label_index(self.name, self.statements)


def _build_label_index(name: str, statements: list[TpStatement]) -> dict[int, int]:
    index: dict[int, int] = {}
    for i, stmt in enumerate(statements):
        if isinstance(stmt, Label):
            if stmt.n in index:
                raise ValueError(f"{name}: duplicate label LBL[{stmt.n}]")
            index[stmt.n] = i
    for stmt in statements:
        target = None
        if isinstance(stmt, Jump):
            target = stmt.n
        elif isinstance(stmt, VisionGetOffset):
            target = stmt.jump_label_if_not_found
        elif isinstance(stmt, IfDiJump):
            target = stmt.jump_label
        if target is not None and target not in index:
            raise ValueError(f"{name}: jump target LBL[{target}] does not exist")
    return index


_RE_LINE_NO = re.compile(r"^\s*(\d+)\s*:\s*(.*)$")
_RE_CONT = re.compile(r"^\s*:\s*(.*)$")
_RE_SET_DO = re.compile(r"^DO\[(\d+)(?::([^\]]*))?\]\s*=\s*(ON|OFF)$")
_RE_WAIT = re.compile(r"^WAIT\s+(\d*\.?\d+)\(sec\)$")
_RE_RUN_FIND = re.compile(r"^VISION\s+RUN_FIND\s+'([^']+)'$")
_RE_GET_OFFSET = re.compile(
    r"^VISION\s+GET_OFFSET\s+'([^']+)'\s+VR\[(\d+)\]\s+JMP\s+LBL\[(\d+)\]$"
)
_RE_LABEL = re.compile(r"^LBL\[(\d+)\]$")
_RE_JUMP = re.compile(r"^JMP\s+LBL\[(\d+)\]$")
_RE_IF_DI = re.compile(
    r"^IF\s+DI\[(\d+)(?::([^\]]*))?\]\s*=\s*(ON|OFF)\s*,\s*JMP\s+LBL\[(\d+)\]$"
)
_RE_UFRAME = re.compile(r"^UFRAME_NUM\s*=\s*(\d+)$")
_RE_UTOOL = re.compile(r"^UTOOL_NUM\s*=\s*(\d+)$")
_RE_JOINT = re.compile(r"^J\s+(P|PR)\[(\d+)(?::([^\]]*))?\]\s+(\d*\.?\d+)%\s+(FINE|CNT\d+)$")
_RE_LINEAR = re.compile(
    r"^L\s+(P|PR)\[(\d+)(?::([^\]]*))?\]\s+(\d*\.?\d+)mm/sec\s+(FINE|CNT\d+)(.*)$"
)
_RE_VOFFSET = re.compile(r"VOFFSET\s*,\s*VR\[(\d+)\]")
_RE_OFFSET = re.compile(r"Offset\s*,\s*PR\[(\d+)(?::([^\]]*))?\]")


def parse(source: str) -> TpProgram:
    """Parse program text; listings with arbitrary line numbers parse unchanged."""
    name = ""
    logical: list[tuple[int, str]] = []  # (first source line no, joined text)
    in_body = False
    for line_no, raw in enumerate(source.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("/PROG"):
            if in_body:
                raise ParseError(line_no, "nested /PROG")
            parts = stripped.split(None, 1)
            if len(parts) != 2 or not parts[1].strip():
                raise ParseError(line_no, "/PROG requires a program name")
            name = parts[1].strip()
            in_body = True
            continue
        if stripped == "/END":
            in_body = False
            continue
        if not in_body:
            raise ParseError(line_no, "statement outside /PROG .. /END")
        cont = _RE_CONT.match(line)
        if cont and not _RE_LINE_NO.match(line):
            if not logical:
                raise ParseError(line_no, "continuation with no statement to continue")
            prev_no, prev_text = logical[-1]
            logical[-1] = (prev_no, f"{prev_text} {cont.group(1).strip()}")
            continue
        numbered = _RE_LINE_NO.match(line)
        text = numbered.group(2).strip() if numbered else stripped
        if not text:
            continue  # blank numbered line
        logical.append((line_no, text))
    if not name:
        raise ParseError(1, "missing /PROG header")

    statements = [_parse_statement(line_no, text) for line_no, text in logical]
    try:
        return TpProgram(name=name, statements=statements)
    except ValueError as exc:
        raise ParseError(0, str(exc)) from exc


def _parse_statement(line_no: int, text: str) -> TpStatement:
    text = text.strip()
    if text.endswith(";"):
        text = text[:-1].rstrip()

    m = _RE_SET_DO.match(text)
    if m:
        return SetDO(int(m.group(1)), m.group(2) or "", m.group(3) == "ON")
    m = _RE_WAIT.match(text)
    if m:
        return Wait(float(m.group(1)))
    m = _RE_RUN_FIND.match(text)
    if m:
        return VisionRunFind(m.group(1))
    m = _RE_GET_OFFSET.match(text)
    if m:
        return VisionGetOffset(m.group(1), int(m.group(2)), int(m.group(3)))
    m = _RE_LABEL.match(text)
    if m:
        return Label(int(m.group(1)))
    m = _RE_JUMP.match(text)
    if m:
        return Jump(int(m.group(1)))
    m = _RE_IF_DI.match(text)
    if m:
        if m.group(3) != "ON":
            raise ParseError(line_no, "only IF DI[..]=ON is supported")
        return IfDiJump(int(m.group(1)), m.group(2) or "", int(m.group(4)))
    m = _RE_UFRAME.match(text)
    if m:
        return SetUFrame(int(m.group(1)))
    m = _RE_UTOOL.match(text)
    if m:
        return SetUTool(int(m.group(1)))
    m = _RE_JOINT.match(text)
    if m:
        return MotionJoint(
            Target(m.group(1), int(m.group(2)), m.group(3) or ""),
            float(m.group(4)),
            m.group(5),
        )
    m = _RE_LINEAR.match(text)
    if m:
        tail = m.group(6)
        voffset = _RE_VOFFSET.search(tail)
        offset = _RE_OFFSET.search(tail)
        leftover = _RE_OFFSET.sub("", _RE_VOFFSET.sub("", tail)).strip()
        if leftover:
            raise ParseError(line_no, f"unrecognized motion modifier {leftover!r}")
        return MotionLinear(
            Target(m.group(1), int(m.group(2)), m.group(3) or ""),
            float(m.group(4)),
            m.group(5),
            voffset_vr=int(voffset.group(1)) if voffset else None,
            offset_pr=int(offset.group(1)) if offset else None,
            offset_pr_label=(offset.group(2) or "") if offset else "",
        )
    raise ParseError(line_no, f"unrecognized statement {text!r}")


def format_program(program: TpProgram) -> str:
    """Normalized listing: sequential numbering, one statement per line."""
    lines = [f"/PROG {program.name}"]
    for i, stmt in enumerate(program.statements, start=1):
        lines.append(f"{i}: {stmt}")
    lines.append("/END")
    return "\n".join(lines) + "\n"


# Embedded corpus: the two robot programs of the physical cell, verbatim
# (original line numbering, blank lines, continuations, trailing ';').

SCANPART_SOURCE = """\
/PROG SCANPART
1: DO[123:RED]=OFF
2: DO[124:GREEN]=OFF
3: DO[125:BLUE]=OFF
4:
5: DO[110:CALL GREEN]=OFF
6: DO[112:CALL BLUE]=OFF
7: WAIT .50(sec)
8: VISION RUN_FIND 'REDSCAN'
9: VISION GET_OFFSET 'REDSCAN' VR[1] JMP LBL[10]
10: DO[123:RED]=ON
11: LBL[10]
12:
13: DO[110:CALL GREEN]=ON
14: WAIT .50(sec)
15: VISION RUN_FIND 'GRNSCAN'
16: VISION GET_OFFSET 'GRNSCAN' VR[1] JMP LBL[20]
17: DO[124:GREEN]=ON
18: LBL[20]
19: DO[110:CALL GREEN]=OFF
20:
21: DO[112:CALL BLUE]=ON
22: WAIT .80(sec)
23: VISION RUN_FIND 'BLUSCAN'
24: VISION GET_OFFSET 'BLUSCAN' VR[1] JMP LBL[30]
25: DO[125:BLUE]=ON
26: LBL[30]
27: DO[112:CALL BLUE]=OFF
28:
29: DO[130:SCAN COMPLETE]=ON
/END
"""

SORTPART_SOURCE = """\
/PROG SORTPART
1: UFRAME_NUM=8
2: UTOOL_NUM=8
3: J P[1] 2% FINE
4:
5: IF DI[121:REMOVE PART]=ON, JMP LBL[10]
6:
7: L PR[80:VISION REF] 100mm/sec FINE VOFFSET,VR[1]
   : Offset,PR[81:Z_OFFSET]
8: L PR[80:VISION REF] 50mm/sec FINE VOFFSET,VR[1]
9: WAIT .50(sec)
10: DO[111:SUCTION CUP]=ON
11: WAIT .50(sec)
12: L PR[80:VISION REF] 50mm/sec FINE VOFFSET,VR[1]
   : Offset,PR[81:Z_OFFSET]
13: L P[1] 100mm/sec FINE Offset,PR[81:Z_OFFSET]
14: L P[1] 75mm/sec FINE
15: WAIT .50(sec)
16: DO[111:SUCTION CUP]=OFF
17: WAIT .50(sec)
18:
19: JMP LBL[11]
20: LBL[10]
21: DO[126:CONVEYOR FWD]=ON
22: WAIT .75(sec)
23: DO[126:CONVEYOR FWD]=OFF
24:
25: LBL[11]
26: DO[123:RED]=OFF
27: DO[124:GREEN]=OFF
28: DO[125:BLUE]=OFF
29: DO[130:SCAN COMPLETE]=OFF ;
/END
"""


def scanpart() -> TpProgram:
    return parse(SCANPART_SOURCE)


def sortpart() -> TpProgram:
    return parse(SORTPART_SOURCE)
