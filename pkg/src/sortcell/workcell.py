"""Geometric state of the sorting cell: belt, parts, beam sensor, reject bin."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class ColorClass(Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    UNKNOWN = "unknown"


class PartState(Enum):
    ON_BELT = "on_belt"
    HELD_BY_ROBOT = "held_by_robot"
    IN_REJECT_BIN = "in_reject_bin"
    PASSED_THROUGH = "passed_through"


@dataclass(frozen=True)
class ReflectanceRGB:
    """Fraction of red/green/blue light a surface reflects, each in [0, 1]."""

    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name, value in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"reflectance {name}={value} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)


@dataclass(frozen=True)
class Part:
    """A colored block. Position is (x along belt, y lateral from centerline), mm."""

    id: int
    color_class: ColorClass
    reflectance: ReflectanceRGB
    position_mm: tuple[float, float]
    rotation_deg: float = 0.0
    size_mm: float = 40.0
    state: PartState = PartState.ON_BELT

    @property
    def x(self) -> float:
        return self.position_mm[0]

    @property
    def y(self) -> float:
        return self.position_mm[1]

    def moved_to(self, x: float, y: float) -> "Part":
        return replace(self, position_mm=(x, y))

    def with_state(self, state: PartState) -> "Part":
        return replace(self, state=state)


@dataclass
class ConveyorState:
    running: bool = False
    speed_mm_per_s: float = 100.0
    belt_length_mm: float = 1200.0
    belt_half_width_mm: float = 150.0
    beam_sensor_x_mm: float = 600.0
    camera_window_x_mm: float = 600.0

    def __post_init__(self) -> None:
        if self.speed_mm_per_s < 0:
            raise ValueError("conveyor speed must be >= 0")
        if not 0 <= self.beam_sensor_x_mm <= self.belt_length_mm:
            raise ValueError("beam sensor must sit within the belt length")


@dataclass
class RejectBin:
    """Drop target next to the belt; contents are append-only during a run."""

    location_mm: tuple[float, float] = (600.0, -300.0)
    radius_mm: float = 100.0
    contents: list[int] = field(default_factory=list)

    def accepts(self, x: float, y: float) -> bool:
        dx = x - self.location_mm[0]
        dy = y - self.location_mm[1]
        return dx * dx + dy * dy <= self.radius_mm * self.radius_mm


def advance_conveyor(state: ConveyorState, parts: list[Part], dt: float) -> list[Part]:
    """Move every on-belt part forward by speed*dt; parts past the belt end pass through.

    No-op when the belt is stopped or dt == 0. Part order is preserved.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if not state.running or dt == 0:
        return list(parts)
    dx = state.speed_mm_per_s * dt
    out = []
    for part in parts:
        if part.state is not PartState.ON_BELT:
            out.append(part)
            continue
        moved = part.moved_to(part.x + dx, part.y)
        if moved.x > state.belt_length_mm:
            moved = moved.with_state(PartState.PASSED_THROUGH)
        out.append(moved)
    return out


def beam_blocked(state: ConveyorState, parts: list[Part]) -> bool:
    """True iff some on-belt part's x-extent straddles the beam sensor line."""
    bx = state.beam_sensor_x_mm
    for part in parts:
        if part.state is not PartState.ON_BELT:
            continue
        half = part.size_mm / 2.0
        if part.x - half <= bx <= part.x + half:
            return True
    return False
