import random

import pytest

from sortcell.workcell import (
    ColorClass,
    ConveyorState,
    Part,
    PartState,
    ReflectanceRGB,
    RejectBin,
    advance_conveyor,
    beam_blocked,
)


def make_part(pid=1, x=0.0, y=0.0, state=PartState.ON_BELT):
    return Part(
        id=pid,
        color_class=ColorClass.RED,
        reflectance=ReflectanceRGB(0.8, 0.1, 0.08),
        position_mm=(x, y),
        state=state,
    )


class TestReflectance:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ReflectanceRGB(1.2, 0.0, 0.0)
        with pytest.raises(ValueError):
            ReflectanceRGB(0.5, -0.1, 0.0)

    def test_as_tuple(self):
        assert ReflectanceRGB(0.1, 0.2, 0.3).as_tuple() == (0.1, 0.2, 0.3)


class TestAdvanceConveyor:
    def test_moves_by_speed_times_dt(self):
        state = ConveyorState(running=True, speed_mm_per_s=100.0)
        parts = advance_conveyor(state, [make_part(x=100.0)], 0.75)
        assert parts[0].x == pytest.approx(175.0)  # 100 + 100*0.75

    def test_stopped_belt_is_noop(self):
        state = ConveyorState(running=False)
        parts = advance_conveyor(state, [make_part(x=100.0)], 10.0)
        assert parts[0].x == 100.0

    def test_zero_dt_is_identity(self):
        state = ConveyorState(running=True)
        before = [make_part(x=42.0)]
        assert advance_conveyor(state, before, 0.0) == before

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            advance_conveyor(ConveyorState(), [], -1.0)

    def test_part_past_belt_end_passes_through(self):
        state = ConveyorState(running=True, speed_mm_per_s=100.0, belt_length_mm=1200.0)
        parts = advance_conveyor(state, [make_part(x=1190.0)], 0.5)
        assert parts[0].state is PartState.PASSED_THROUGH

    def test_only_on_belt_parts_move(self):
        state = ConveyorState(running=True)
        held = make_part(x=300.0, state=PartState.HELD_BY_ROBOT)
        parts = advance_conveyor(state, [held], 1.0)
        assert parts[0].x == 300.0

    def test_order_preserved_and_count_conserved(self):
        state = ConveyorState(running=True)
        rng = random.Random(7)
        parts = [make_part(pid=i, x=rng.uniform(0, 1100)) for i in range(10)]
        for _ in range(50):
            parts = advance_conveyor(state, parts, rng.uniform(0, 0.5))
        assert [p.id for p in parts] == list(range(10))
        assert len(parts) == 10

    def test_x_never_decreases(self):
        state = ConveyorState(running=True)
        rng = random.Random(13)
        parts = [make_part(pid=i, x=i * 100.0) for i in range(5)]
        for _ in range(100):
            before = {p.id: p.x for p in parts}
            parts = advance_conveyor(state, parts, rng.uniform(0, 0.2))
            for p in parts:
                assert p.x >= before[p.id]


class TestBeamBlocked:
    def test_center_on_sensor_blocks(self):
        state = ConveyorState(beam_sensor_x_mm=600.0)
        assert beam_blocked(state, [make_part(x=600.0)])

    def test_no_parts(self):
        assert not beam_blocked(ConveyorState(), [])

    def test_just_past_sensor_by_one_size_clear(self):
        state = ConveyorState(beam_sensor_x_mm=600.0)
        # 40 mm part at 640: extent [620, 660] does not straddle 600.
        assert not beam_blocked(state, [make_part(x=640.0)])

    def test_edges_inclusive(self):
        state = ConveyorState(beam_sensor_x_mm=600.0)
        assert beam_blocked(state, [make_part(x=580.0)])
        assert beam_blocked(state, [make_part(x=620.0)])
        assert not beam_blocked(state, [make_part(x=620.0001)])

    def test_pure_function(self):
        state = ConveyorState(beam_sensor_x_mm=600.0)
        parts = [make_part(x=595.0)]
        assert beam_blocked(state, parts) == beam_blocked(state, parts)

    def test_ignores_non_belt_parts(self):
        state = ConveyorState(beam_sensor_x_mm=600.0)
        held = make_part(x=600.0, state=PartState.HELD_BY_ROBOT)
        assert not beam_blocked(state, [held])


class TestGeometryValidation:
    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            ConveyorState(speed_mm_per_s=-1.0)

    def test_beam_outside_belt_rejected(self):
        with pytest.raises(ValueError):
            ConveyorState(beam_sensor_x_mm=2000.0)


class TestRejectBin:
    def test_accepts_within_radius(self):
        bin_ = RejectBin(location_mm=(600.0, -300.0), radius_mm=100.0)
        assert bin_.accepts(600.0, -300.0)
        assert bin_.accepts(660.0, -300.0)
        assert not bin_.accepts(710.0, -300.0)
