import json
from pathlib import Path

import pytest

from sortcell.cli import (
    EXIT_DEADLOCK,
    EXIT_DIFF,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_VALIDATION,
    main,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def write_scenario(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def small_doc(**extra):
    doc = {
        "schema_version": 1,
        "duration_s": 40.0,
        "seed": 5,
        "selected_colors": {"red": True, "green": False, "blue": False},
        "parts": [
            {"t_s": 0.0, "color": "red"},
            {"t_s": 2.5, "color": "green"},
        ],
    }
    doc.update(extra)
    return doc


class TestRun:
    def test_valid_scenario_exit_zero_and_trace(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path, small_doc())
        out = tmp_path / "trace.jsonl"
        assert main(["run", str(scenario), "-o", str(out)]) == EXIT_OK
        assert out.exists()
        lines = out.read_text().splitlines()
        assert json.loads(lines[0])["type"] == "header"
        assert json.loads(lines[-1])["type"] == "footer"
        terminal = [
            json.loads(l) for l in lines
            if '"kind":"PartState"' in l
        ]
        states = [t["data"]["state"] for t in terminal]
        assert states.count("passed_through") + states.count("in_reject_bin") == 2

    def test_missing_file_names_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert main(["run", str(missing), "-o", str(tmp_path / "t.jsonl")]) == EXIT_PARSE
        assert str(missing) in capsys.readouterr().err

    def test_overlapping_spawns_validation_exit(self, tmp_path, capsys):
        doc = small_doc(parts=[{"t_s": 0.0, "color": "red"}, {"t_s": 0.1, "color": "red"}])
        scenario = write_scenario(tmp_path, doc)
        out = tmp_path / "t.jsonl"
        assert main(["run", str(scenario), "-o", str(out)]) == EXIT_VALIDATION
        assert not out.exists()

    def test_malformed_json_parse_exit(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{,}")
        assert main(["run", str(path), "-o", str(tmp_path / "t.jsonl")]) == EXIT_PARSE

    def test_unknown_key_parse_exit(self, tmp_path):
        scenario = write_scenario(tmp_path, small_doc(frob=1))
        assert main(["run", str(scenario), "-o", str(tmp_path / "t.jsonl")]) == EXIT_PARSE

    def test_five_part_scenario_terminal_count(self, tmp_path):
        out = tmp_path / "t.jsonl"
        assert main(["run", str(SCENARIO_DIR / "sort_rgbgr.json"), "-o", str(out)]) == EXIT_OK
        records = [json.loads(l) for l in out.read_text().splitlines()]
        terminal = [
            r for r in records
            if r.get("kind") == "PartState"
            and r["data"]["state"] in ("passed_through", "in_reject_bin")
        ]
        assert len(terminal) == 5


class TestCompare:
    def test_rerun_identical_and_self_compare(self, tmp_path):
        scenario = write_scenario(tmp_path, small_doc())
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["run", str(scenario), "-o", str(a)]) == EXIT_OK
        assert main(["run", str(scenario), "-o", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        assert main(["compare", str(a), str(b)]) == EXIT_OK
        assert main(["compare", str(a), str(a)]) == EXIT_OK

    def test_seed_mismatch_refused_then_allowed(self, tmp_path):
        scenario = write_scenario(tmp_path, small_doc())
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(["run", str(scenario), "-o", str(a)]) == EXIT_OK
        assert main(["run", str(scenario), "-o", str(b), "--seed", "123"]) == EXIT_OK
        assert main(["compare", str(a), str(b)]) == EXIT_VALIDATION
        assert main(["compare", str(a), str(b), "--allow-seed-mismatch"]) == EXIT_OK

    def test_different_scenarios_header_mismatch(self, tmp_path):
        s1 = write_scenario(tmp_path, small_doc(), "s1.json")
        s2 = write_scenario(tmp_path, small_doc(duration_s=41.0), "s2.json")
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["run", str(s1), "-o", str(a)])
        main(["run", str(s2), "-o", str(b)])
        assert main(["compare", str(a), str(b)]) == EXIT_VALIDATION

    def test_divergent_traces_nonzero(self, tmp_path, capsys):
        scenario = write_scenario(tmp_path, small_doc())
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["run", str(scenario), "-o", str(a)])
        text = a.read_text().splitlines()
        # tamper: flip a payload value and rewrite footer hash accordingly
        from sortcell.trace import trace_hash

        idx = next(i for i, l in enumerate(text) if '"rising":true' in l)
        text[idx] = text[idx].replace('"rising":true', '"rising":false')
        footer = json.loads(text[-1])
        footer["trace_hash"] = trace_hash([l for l in text if '"type":"event"' in l])
        text[-1] = json.dumps(footer, sort_keys=True, separators=(",", ":"))
        b.write_text("\n".join(text) + "\n")
        assert main(["compare", str(a), str(b)]) == EXIT_DIFF
        assert "divergence" in capsys.readouterr().out


class TestDeadlockExit:
    def test_deadlock_exit_code(self, tmp_path, monkeypatch):
        # force the latch-release rung away so the first cycle wedges the cell
        import sortcell.cli as cli_mod
        from sortcell.engine import Engine as RealEngine

        class BrokenEngine(RealEngine):
            def __init__(self, scenario):
                super().__init__(scenario)
                self.plc_program.rungs = [
                    r for r in self.plc_program.rungs if r.comment != "cycle reset"
                ]

        monkeypatch.setattr(cli_mod, "Engine", BrokenEngine)
        scenario = write_scenario(tmp_path, small_doc())
        assert main(["run", str(scenario), "-o", str(tmp_path / "t.jsonl")]) == EXIT_DEADLOCK


class TestTables:
    def test_pgm_frames_written(self, tmp_path):
        out = tmp_path / "tables"
        assert main(["tables", "--out", str(out)]) == EXIT_OK
        files = sorted(p.name for p in out.glob("*.pgm"))
        assert files == [
            "filter_led_blue.pgm",
            "filter_led_green.pgm",
            "filter_led_red.pgm",
            "filter_only_blue.pgm",
            "filter_only_green.pgm",
            "filter_only_red.pgm",
        ]
        header = (out / "filter_led_red.pgm").read_bytes()[:15]
        assert header.startswith(b"P5\n640 480\n255\n")
