"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
go by. Tolerances are pinned here, not configurable: intensity comparisons
use the stated contrast margins, timing assertions are exact on the
microsecond clock, and trace identity is byte-for-byte.
"""

from contextlib import contextmanager
from itertools import combinations, product
from pathlib import Path

import pytest

from sortcell import iobus, tp
from sortcell.arduino import LineLevel, evaluate
from sortcell.engine import Engine, US
from sortcell.iobus import Direction
from sortcell.optics import (
    BLUSCAN,
    GRNSCAN,
    REDSCAN,
    CameraConfig,
    FilterName,
    OpticsDefaults,
    VisionProcess,
    VisionRegister,
    pixel_intensity,
    render,
    run_find,
)
from sortcell.plc import verdict
from sortcell.robot import RobotEnv, RobotIO, TpInterpreter, default_position_registers, default_positions
from sortcell.scenario import PartSpawn, Scenario, scenario_hash
from sortcell.trace import (
    compare_traces,
    event_lines,
    parse_trace,
    read_trace,
    render_trace,
    trace_hash,
)
from sortcell.workcell import ColorClass, Part

DATA_DIR = Path(__file__).resolve().parent / "data"
GOLDEN_TRACE = DATA_DIR / "golden_sort_rgbgr.jsonl"

OPTICS = OpticsDefaults()
CAMERA = CameraConfig()
SCAN_FILTER = {
    REDSCAN: FilterName.RED_FILTER,
    GRNSCAN: FilterName.GREEN_FILTER,
    BLUSCAN: FilterName.BLUE_FILTER,
}
SCAN_LED = {
    REDSCAN: (255, 0, 0),
    GRNSCAN: (0, 255, 0),
    BLUSCAN: (0, 0, 255),
}
BLOCK = {
    "red": ColorClass.RED,
    "green": ColorClass.GREEN,
    "blue": ColorClass.BLUE,
}


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} FAIL: {description}")
        raise
    print(f"ACCEPTANCE {number} PASS: {description}")


def centered_part(color: ColorClass, y_mm: float = 0.0) -> Part:
    return Part(
        id=1,
        color_class=color,
        reflectance=OPTICS.block_reflectance[color],
        position_mm=(CAMERA.center_x_mm, y_mm),
    )


def scan_frame(part: Part | None, scan: str, light_emission=None):
    filt = OPTICS.filters[SCAN_FILTER[scan]]
    light = (
        OPTICS.ambient_light
        if light_emission == "ambient"
        else OPTICS.led_light(SCAN_LED[scan])
    )
    return render(
        [part] if part else [],
        filt,
        light,
        CAMERA,
        OPTICS.belt_reflectance,
        edge_leak=OPTICS.edge_leak,
    )


def find(part: Part | None, scan: str, light_emission=None):
    return run_find(VisionProcess(scan), scan_frame(part, scan, light_emission))


def five_part_scenario():
    return Scenario(
        duration_s=150.0,
        seed=7,
        selected_colors={"red": True, "green": False, "blue": False},
        parts=[
            PartSpawn(0.0, "red"),
            PartSpawn(2.5, "green"),
            PartSpawn(5.0, "blue"),
            PartSpawn(7.5, "green"),
            PartSpawn(10.0, "red"),
        ],
        network={
            "plc_ip": "192.168.1.10",
            "robot_ip": "192.168.1.20",
            "vision_pc_ip": "192.168.1.30",
            "subnet_mask": "255.255.0.0",
        },
    )


@pytest.fixture(scope="module")
def e2e_run():
    engine = Engine(five_part_scenario())
    events, metrics = engine.run()
    return engine, events, metrics


def test_criterion_1_filter_only_failure():
    with criterion(1, "filter-only sensing fails to separate green from blue"):
        ambient = OPTICS.ambient_light
        green_f = OPTICS.filters[FilterName.GREEN_FILTER]
        red_f = OPTICS.filters[FilterName.RED_FILTER]
        g = OPTICS.block_reflectance[ColorClass.GREEN]
        b = OPTICS.block_reflectance[ColorClass.BLUE]
        r = OPTICS.block_reflectance[ColorClass.RED]
        assert abs(
            pixel_intensity(g, green_f, ambient) - pixel_intensity(b, green_f, ambient)
        ) < 0.05
        red_margin = pixel_intensity(r, red_f, ambient) - max(
            pixel_intensity(g, red_f, ambient), pixel_intensity(b, red_f, ambient)
        )
        assert red_margin > 0.25
        for scan in (GRNSCAN, BLUSCAN):
            found_green = find(centered_part(ColorClass.GREEN), scan, "ambient").found
            found_blue = find(centered_part(ColorClass.BLUE), scan, "ambient").found
            assert found_green == found_blue, scan


def test_criterion_2_filter_plus_led_success():
    with criterion(2, "matched filter+LED ratios >= 3 and 3x3 scans classify cleanly"):
        for scan, target in ((REDSCAN, "red"), (GRNSCAN, "green"), (BLUSCAN, "blue")):
            filt = OPTICS.filters[SCAN_FILTER[scan]]
            light = OPTICS.led_light(SCAN_LED[scan])
            own = pixel_intensity(OPTICS.block_reflectance[BLOCK[target]], filt, light)
            for other in ("red", "green", "blue"):
                if other == target:
                    continue
                foreign = pixel_intensity(
                    OPTICS.block_reflectance[BLOCK[other]], filt, light
                )
                assert own >= 3.0 * foreign, (scan, other)
        for scan, target in ((REDSCAN, "red"), (GRNSCAN, "green"), (BLUSCAN, "blue")):
            for color in ("red", "green", "blue"):
                found = find(centered_part(BLOCK[color]), scan).found
                assert found == (color == target), (scan, color)


def test_criterion_3_selector_truth_table():
    with criterion(3, "selector program truth table, branch order included"):
        HIGH, LOW = LineLevel.HIGH, LineLevel.LOW
        assert evaluate(HIGH, HIGH) == (90, (255, 0, 0))
        assert evaluate(LOW, HIGH) == (180, (0, 255, 0))
        assert evaluate(HIGH, LOW) == (0, (0, 0, 255))
        assert evaluate(LOW, LOW) == (180, (0, 255, 0))


def _interpreter_env(di_remove=False, vision_results=None):
    io = RobotIO()
    log = []
    clock = {"now": 0}
    io.add_do_hook(lambda idx, val: log.append((clock["now"], idx, val)))
    env = RobotEnv(
        io=io,
        positions=default_positions(),
        position_registers=default_position_registers(),
        pose=default_positions()[1],
        vision_find=lambda name: (vision_results or {}).get(name, VisionRegister(False)),
    )
    io.set_di(121, di_remove)
    return env, log, clock


def _run(env, clock, program):
    interp = TpInterpreter(env)
    wake = interp.start(program, 0)
    while wake is not None:
        clock["now"] = wake
        wake = interp.resume(wake)
    return clock["now"]


def test_criterion_4_program_corpus(e2e_run):
    with criterion(4, "robot program corpus: verbatim parse, exact waits, golden trace"):
        scanpart = tp.parse(tp.SCANPART_SOURCE)
        sortpart = tp.parse(tp.SORTPART_SOURCE)
        assert scanpart.name == "SCANPART" and sortpart.name == "SORTPART"

        env, log, clock = _interpreter_env()
        end = _run(env, clock, scanpart)
        # waits 0.50 / 0.50 / 0.80 plus 50 ms vision processing per snap
        assert log == [
            (550_000, 110, True),
            (1_100_000, 110, False),
            (1_100_000, 112, True),
            (1_950_000, 112, False),
            (1_950_000, 130, True),
        ]
        assert end == 1_950_000

        # pass branch: conveyor pulse of exactly 0.75 s, cleanup all OFF
        env, log, clock = _interpreter_env(di_remove=False)
        env.io.set_do(124, True)
        env.io.set_do(130, True)
        log.clear()
        _run(env, clock, sortpart)
        pulse = [(t, v) for t, idx, v in log if idx == 126]
        assert pulse[0][1] is True and pulse[1][1] is False
        assert pulse[1][0] - pulse[0][0] == 750_000
        for idx in (123, 124, 125, 130):
            assert not env.io.do(idx)

        # remove branch: suction cycle, cleanup all OFF
        env, log, clock = _interpreter_env(di_remove=True)
        env.vision_registers[1] = VisionRegister(True, 0.0, 0.0, 0.0)
        env.io.set_do(125, True)
        env.io.set_do(130, True)
        _run(env, clock, sortpart)
        assert [v for _, idx, v in log if idx == 111] == [True, False]
        for idx in (123, 124, 125, 130):
            assert not env.io.do(idx)

        # golden end-to-end trace: byte-identical events
        engine, events, metrics = e2e_run
        golden = read_trace(GOLDEN_TRACE)
        current = parse_trace(
            render_trace(scenario_hash(five_part_scenario()), 7, events, metrics)
        )
        diff = compare_traces(golden, current)
        assert diff.equal, diff.describe()


def test_criterion_5_word_encodings():
    with criterion(5, "assembly word encodings 48 / 141 and pack round trip"):
        assert iobus.pack(
            {"Prg paused": True, "Motion held": True}, Direction.ROBOT_TO_PLC
        ) == [48, 0, 0, 0]
        assert iobus.pack(
            {"IMSTP": True, "SFSPD": True, "Stop": True, "Enable": True},
            Direction.PLC_TO_ROBOT,
        ) == [141, 0, 0, 0]
        for direction, table in (
            (Direction.ROBOT_TO_PLC, iobus.ROBOT_TO_PLC_ALIASES),
            (Direction.PLC_TO_ROBOT, iobus.PLC_TO_ROBOT_ALIASES),
        ):
            names = [n for (w, _), n in table.items() if w == 0]
            for count in range(len(names) + 1):
                for combo in combinations(names, count):
                    words = iobus.pack({n: True for n in combo}, direction)
                    decoded = iobus.unpack(words, direction)
                    assert {n for n, v in decoded.items() if v} == set(combo)


def test_criterion_6_verdict_truth_table():
    with criterion(6, "verdict truth table 8x8x2 and the edge-confusion override"):
        R, G, B = ColorClass.RED, ColorClass.GREEN, ColorClass.BLUE
        subsets = [
            {c for c, on in zip((R, G, B), bits) if on}
            for bits in product((False, True), repeat=3)
        ]

        def brute_force(detected, selected, override):
            effective = {B} if (override and G in detected and B in detected) else detected
            keep = any(c in selected for c in effective)
            return keep, not keep

        for detected in subsets:
            for selected in subsets:
                for override in (False, True):
                    assert verdict(detected, selected, override) == brute_force(
                        detected, selected, override
                    )

        def leak_run(override):
            engine = Engine(
                Scenario(
                    duration_s=60.0,
                    selected_colors={"red": False, "green": True, "blue": False},
                    override_enabled=override,
                    parts=[PartSpawn(0.0, "blue", y_mm=80.0)],
                )
            )
            engine.run()
            return engine.part_stats[1].final_state

        assert leak_run(override=False) == "passed_through"  # falsely kept
        assert leak_run(override=True) == "in_reject_bin"


def test_criterion_7_end_to_end_sorting_and_determinism(e2e_run):
    with criterion(7, "five-part sort outcome, replay hash, verdict latency"):
        engine, events, metrics = e2e_run
        reject_colors = [engine.part_stats[i].color for i in metrics["reject_bin"]]
        assert reject_colors == ["green", "blue", "green"]
        passed = [
            s for s in engine.part_stats.values() if s.final_state == "passed_through"
        ]
        assert len(passed) == 2 and all(s.color == "red" for s in passed)

        replay = Engine(five_part_scenario())
        replay_events, _ = replay.run()
        assert trace_hash(event_lines(events)) == trace_hash(event_lines(replay_events))

        for stats in engine.part_stats.values():
            assert (stats.verdict_us - stats.beam_rise_us) / US >= 2.00


def test_criterion_8_bus_latency_bound(e2e_run):
    with criterion(8, "every robot DO change visible to the PLC within one RPI"):
        _, events, _ = e2e_run
        rpi_us = 10_000
        deliveries = [
            e for e in events
            if e.kind == "TagChange" and e.payload.get("assembly") == "robot_to_plc"
        ]
        checked = 0
        for event in events:
            signal = event.payload.get("signal", "") if event.kind == "TagChange" else ""
            if not signal.startswith("DO["):
                continue
            index = int(signal[3:-1])
            if index not in iobus.DO_TO_ASSEMBLY_BIT:
                continue
            word, bit = iobus.DO_TO_ASSEMBLY_BIT[index]
            value = event.payload["value"]
            window = [
                d for d in deliveries if event.t_us <= d.t_us <= event.t_us + rpi_us
            ]
            assert any(
                bool(d.payload["words"][word] >> bit & 1) == value for d in window
            ), f"DO[{index}] change at {event.t_us} not visible within one RPI"
            checked += 1
        assert checked >= 20
