"""Filter-wheel / LED controller node.

Two pull-up inputs select the active color; an undriven line reads High and
the relay from a robot output pulls it Low. Input A is tested first, so a
simultaneous (Low, Low) resolves to green. The servo carries the filter
holder: 90 degrees puts the red filter in front of the camera, 180 the green
one, 0 the blue one. That angle-to-filter binding is the single source of
truth used by the imaging model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .optics import FilterName


class LineLevel(Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class ArduinoConfig:
    n_leds: int = 241
    led_pin: int = 6
    servo_pin: int = 9
    servo_min_us: int = 500
    servo_max_us: int = 2500
    input1_pin: int = 2
    input2_pin: int = 3
    servo_travel_deg_per_s: float = 300.0
    settle_tolerance_deg: float = 1.0


ANGLE_TO_FILTER = {
    90: FilterName.RED_FILTER,
    180: FilterName.GREEN_FILTER,
    0: FilterName.BLUE_FILTER,
}


def evaluate(input_a: LineLevel, input_b: LineLevel) -> tuple[int, tuple[int, int, int]]:
    """Servo angle and LED color for the two selector lines.

    A Low wins over B Low (A is tested first); both High selects red.
    """
    if input_a is LineLevel.LOW:
        return 180, (0, 255, 0)
    if input_b is LineLevel.LOW:
        return 0, (0, 0, 255)
    return 90, (255, 0, 0)


@dataclass(frozen=True)
class ArduinoState:
    input_a: LineLevel = LineLevel.HIGH
    input_b: LineLevel = LineLevel.HIGH
    commanded_angle_deg: int = 90
    led_rgb: tuple[int, int, int] = (255, 0, 0)
    servo_actual_angle_deg: float = 90.0

    def with_inputs(self, input_a: LineLevel, input_b: LineLevel) -> "ArduinoState":
        angle, rgb = evaluate(input_a, input_b)
        return replace(
            self,
            input_a=input_a,
            input_b=input_b,
            commanded_angle_deg=angle,
            led_rgb=rgb,
        )

    def settled(self, config: ArduinoConfig) -> bool:
        return (
            abs(self.servo_actual_angle_deg - self.commanded_angle_deg)
            < config.settle_tolerance_deg
        )

    @property
    def current_filter(self) -> FilterName:
        return ANGLE_TO_FILTER[self.commanded_angle_deg]


def step_servo(state: ArduinoState, dt: float, config: ArduinoConfig) -> ArduinoState:
    """Advance the servo toward the commanded angle at the configured speed."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    target = float(state.commanded_angle_deg)
    actual = state.servo_actual_angle_deg
    if actual == target or dt == 0:
        return state
    travel = config.servo_travel_deg_per_s * dt
    if abs(target - actual) <= travel:
        new_angle = target
    else:
        new_angle = actual + travel if target > actual else actual - travel
    return replace(state, servo_actual_angle_deg=new_angle)


def settle_time_s(state: ArduinoState, config: ArduinoConfig) -> float:
    """Seconds until the wheel reports settled; 0 when already there."""
    remaining = abs(state.commanded_angle_deg - state.servo_actual_angle_deg)
    if remaining < config.settle_tolerance_deg:
        return 0.0
    # Settled means within tolerance, but travel runs to the commanded angle.
    return remaining / config.servo_travel_deg_per_s
