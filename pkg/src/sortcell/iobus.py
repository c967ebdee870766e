"""Cyclic tag exchange between PLC and robot plus the discrete wiring table.

Each direction carries a fixed assembly of 4 x 16-bit words. The bit layout
mirrors the controller tag dumps of the physical cell; unlisted bits are
reserved and stay zero. Delivery is periodic: a producer-side snapshot
reaches the consumer exactly once per RPI tick, so any change is visible
within one RPI and never before the instant it was produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class UnknownAlias(Exception):
    pass


class BusFault(Exception):
    pass


class Direction(Enum):
    ROBOT_TO_PLC = "robot_to_plc"
    PLC_TO_ROBOT = "plc_to_robot"


WORDS_PER_ASSEMBLY = 4

# (word, bit) -> alias. Unlisted bits are reserved-zero.
ROBOT_TO_PLC_ALIASES: dict[tuple[int, int], str] = {
    (0, 1): "Cmd enabled",
    (0, 2): "System ready",
    (0, 3): "Prg running",
    (0, 4): "Prg paused",
    (0, 5): "Motion held",
    (0, 6): "Fault",
    (0, 7): "At perch",
    (0, 8): "TP enabled",
    (0, 10): "Red",
    (0, 11): "Green",
    (0, 12): "Blue",
    (0, 13): "Conveyor fwd",
    (1, 1): "Scan Done",
    (1, 12): "Robot DO 141",  # named spare, never driven
}

PLC_TO_ROBOT_ALIASES: dict[tuple[int, int], str] = {
    (0, 0): "IMSTP",
    (0, 1): "HOLD",
    (0, 2): "SFSPD",
    (0, 3): "Stop",
    (0, 4): "Fault Reset",
    (0, 5): "Stat",
    (0, 6): "Part match",
    (0, 7): "Enable",
    (0, 8): "Scan Program",
    (0, 9): "Remove Program",
}

_ALIAS_TABLES = {
    Direction.ROBOT_TO_PLC: ROBOT_TO_PLC_ALIASES,
    Direction.PLC_TO_ROBOT: PLC_TO_ROBOT_ALIASES,
}


def alias_table(direction: Direction) -> dict[tuple[int, int], str]:
    return dict(_ALIAS_TABLES[direction])


def _name_index(direction: Direction) -> dict[str, tuple[int, int]]:
    return {name: addr for addr, name in _ALIAS_TABLES[direction].items()}


def pack(bit_values: dict[str, bool], direction: Direction) -> list[int]:
    """Assemble the 4 words from named bits; reserved bits stay zero."""
    index = _name_index(direction)
    words = [0] * WORDS_PER_ASSEMBLY
    for name, value in bit_values.items():
        if name not in index:
            raise UnknownAlias(f"{name!r} is not a {direction.value} alias")
        if value:
            word, bit = index[name]
            words[word] |= 1 << bit
    return words


def unpack(words: list[int], direction: Direction) -> dict[str, bool]:
    """Named bit values for an assembly snapshot (aliased bits only)."""
    if len(words) != WORDS_PER_ASSEMBLY:
        raise ValueError(f"assembly must be {WORDS_PER_ASSEMBLY} words")
    return {
        name: bool(words[word] >> bit & 1)
        for (word, bit), name in _ALIAS_TABLES[direction].items()
    }


def set_bit_names(words: list[int], direction: Direction) -> list[str]:
    """Aliases of the bits currently set, in table order."""
    return [name for name, value in unpack(words, direction).items() if value]


@dataclass(frozen=True)
class TagAssembly:
    direction: Direction
    words: tuple[int, int, int, int]

    def bit(self, name: str) -> bool:
        index = _name_index(self.direction)
        if name not in index:
            raise UnknownAlias(f"{name!r} is not a {self.direction.value} alias")
        word, bit = index[name]
        return bool(self.words[word] >> bit & 1)


# Robot digital outputs that ride the assembly toward the PLC.
DO_TO_ASSEMBLY_BIT: dict[int, tuple[int, int]] = {
    123: (0, 10),  # Red
    124: (0, 11),  # Green
    125: (0, 12),  # Blue
    126: (0, 13),  # Conveyor fwd
    130: (1, 1),  # Scan Done
}

# Robot digital outputs wired discretely (relays / valve), not via the bus.
DO_RELAY_TO_ARDUINO_A = 110  # CALL GREEN
DO_RELAY_TO_ARDUINO_B = 112  # CALL BLUE
DO_SUCTION = 111

# PLC-to-robot assembly bit consumed as a robot digital input.
REMOVE_PROGRAM_BIT_TO_DI = 121

DO_LABELS = {
    110: "CALL GREEN",
    111: "SUCTION CUP",
    112: "CALL BLUE",
    123: "RED",
    124: "GREEN",
    125: "BLUE",
    126: "CONVEYOR FWD",
    130: "SCAN COMPLETE",
}


def relay_line_level(do_on: bool):
    """Relay coupling polarity: an energized robot output pulls the pull-up line Low."""
    from .arduino import LineLevel

    return LineLevel.LOW if do_on else LineLevel.HIGH


@dataclass
class CyclicBus:
    """Periodic producer-to-consumer assembly copy with fixed RPI and zero jitter."""

    rpi_us: int = 10_000
    extra_latency_us: int = 0
    producers: dict[Direction, object] = field(default_factory=dict)
    consumer_images: dict[Direction, list[int]] = field(
        default_factory=lambda: {
            Direction.ROBOT_TO_PLC: [0] * WORDS_PER_ASSEMBLY,
            Direction.PLC_TO_ROBOT: [0] * WORDS_PER_ASSEMBLY,
        }
    )

    def register_producer(self, direction: Direction, produce) -> None:
        """`produce()` must return the 4 current words for `direction`."""
        self.producers[direction] = produce

    def capture(self) -> dict[Direction, list[int]]:
        """Producer-side snapshot of both assemblies (the on-wire packet)."""
        snapshot = {}
        for direction in (Direction.ROBOT_TO_PLC, Direction.PLC_TO_ROBOT):
            produce = self.producers.get(direction)
            if produce is None:
                raise BusFault(f"no producer registered for {direction.value}")
            words = list(produce())
            if len(words) != WORDS_PER_ASSEMBLY:
                raise BusFault(f"{direction.value} producer returned {len(words)} words")
            snapshot[direction] = words
        return snapshot

    def deliver(
        self, snapshot: dict[Direction, list[int]]
    ) -> list[tuple[Direction, list[int], list[int]]]:
        """Apply a captured snapshot to the consumer images; returns changes."""
        changes = []
        for direction, words in snapshot.items():
            old = self.consumer_images[direction]
            if words != old:
                changes.append((direction, list(old), list(words)))
                self.consumer_images[direction] = list(words)
        return changes

    def exchange(self) -> list[tuple[Direction, list[int], list[int]]]:
        """One RPI tick: deliver both directions; returns (direction, old, new) per change."""
        return self.deliver(self.capture())

    def consumed(self, direction: Direction) -> TagAssembly:
        return TagAssembly(direction, tuple(self.consumer_images[direction]))
