import pytest

from sortcell.arduino import (
    ANGLE_TO_FILTER,
    ArduinoConfig,
    ArduinoState,
    LineLevel,
    evaluate,
    settle_time_s,
    step_servo,
)
from sortcell.optics import FilterName

HIGH = LineLevel.HIGH
LOW = LineLevel.LOW


class TestEvaluate:
    def test_both_high_defaults_to_red(self):
        assert evaluate(HIGH, HIGH) == (90, (255, 0, 0))

    def test_a_low_selects_green(self):
        assert evaluate(LOW, HIGH) == (180, (0, 255, 0))

    def test_b_low_selects_blue(self):
        assert evaluate(HIGH, LOW) == (0, (0, 0, 255))

    def test_both_low_resolves_to_green_a_first(self):
        assert evaluate(LOW, LOW) == (180, (0, 255, 0))

    def test_total_over_all_inputs(self):
        for a in (HIGH, LOW):
            for b in (HIGH, LOW):
                angle, rgb = evaluate(a, b)
                assert angle in (0, 90, 180)
                assert rgb in ((255, 0, 0), (0, 255, 0), (0, 0, 255))


class TestAngleFilterBinding:
    def test_bindings(self):
        assert ANGLE_TO_FILTER[90] is FilterName.RED_FILTER
        assert ANGLE_TO_FILTER[180] is FilterName.GREEN_FILTER
        assert ANGLE_TO_FILTER[0] is FilterName.BLUE_FILTER

    def test_state_current_filter(self):
        state = ArduinoState().with_inputs(LOW, HIGH)
        assert state.current_filter is FilterName.GREEN_FILTER


class TestServo:
    CONFIG = ArduinoConfig()

    def test_travel_completes_in_time(self):
        state = ArduinoState(
            commanded_angle_deg=180, servo_actual_angle_deg=90.0
        )
        state = step_servo(state, 0.3, self.CONFIG)
        assert state.servo_actual_angle_deg == 180.0
        assert state.settled(self.CONFIG)

    def test_commanded_equals_actual_unchanged(self):
        state = ArduinoState()
        assert step_servo(state, 1.0, self.CONFIG) == state

    def test_zero_dt_unchanged(self):
        state = ArduinoState(commanded_angle_deg=0, servo_actual_angle_deg=90.0)
        assert step_servo(state, 0.0, self.CONFIG) == state

    def test_partial_travel(self):
        state = ArduinoState(commanded_angle_deg=180, servo_actual_angle_deg=90.0)
        state = step_servo(state, 0.1, self.CONFIG)
        assert state.servo_actual_angle_deg == pytest.approx(120.0)
        assert not state.settled(self.CONFIG)

    def test_travel_downward(self):
        state = ArduinoState(commanded_angle_deg=0, servo_actual_angle_deg=180.0)
        state = step_servo(state, 0.3, self.CONFIG)
        assert state.servo_actual_angle_deg == pytest.approx(90.0)

    def test_settle_time(self):
        state = ArduinoState(commanded_angle_deg=180, servo_actual_angle_deg=90.0)
        assert settle_time_s(state, self.CONFIG) == pytest.approx(0.3)
        assert settle_time_s(ArduinoState(), self.CONFIG) == 0.0

    def test_scan_waits_cover_worst_case_travel(self):
        # green transition: 90 degrees within the 0.50 s wait; blue
        # transition: 180 degrees within the 0.80 s wait.
        assert 90.0 / self.CONFIG.servo_travel_deg_per_s <= 0.5
        assert 180.0 / self.CONFIG.servo_travel_deg_per_s <= 0.8


class TestInputBinding:
    def test_with_inputs_reevaluates(self):
        state = ArduinoState()
        state = state.with_inputs(HIGH, LOW)
        assert state.commanded_angle_deg == 0
        assert state.led_rgb == (0, 0, 255)
        state = state.with_inputs(HIGH, HIGH)
        assert state.commanded_angle_deg == 90
        assert state.led_rgb == (255, 0, 0)

    def test_firmware_pin_constants(self):
        config = ArduinoConfig()
        assert config.n_leds == 241
        assert config.led_pin == 6
        assert config.servo_pin == 9
        assert config.servo_min_us == 500
        assert config.servo_max_us == 2500
        assert config.input1_pin == 2
        assert config.input2_pin == 3
