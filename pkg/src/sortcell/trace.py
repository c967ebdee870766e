"""Line-delimited trace files and golden-trace comparison.

One JSON record per line: a header (scenario digest, seed, tool version),
then every simulation event in order, then a footer carrying the metrics and
a digest over the event lines. Record serialization is canonical (sorted
keys, no whitespace) so a replayed run is byte-identical and diff-friendly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .engine import SimEvent

TOOL_VERSION = "sortcell/0.1.0"


class TraceError(Exception):
    pass


class HeaderMismatch(Exception):
    """The two traces were produced from different scenarios (or seeds)."""


def _dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def event_lines(events: list[SimEvent]) -> list[str]:
    return [_dumps(e.to_record()) for e in events]


def trace_hash(lines: list[str]) -> str:
    digest = hashlib.sha256()
    for line in lines:
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def render_trace(
    scenario_sha256: str, seed: int, events: list[SimEvent], metrics: dict
) -> str:
    lines = event_lines(events)
    header = _dumps(
        {
            "type": "header",
            "schema": 1,
            "tool": TOOL_VERSION,
            "scenario_sha256": scenario_sha256,
            "seed": seed,
        }
    )
    footer = _dumps(
        {
            "type": "footer",
            "event_count": len(lines),
            "trace_hash": trace_hash(lines),
            "metrics": metrics,
        }
    )
    return "\n".join([header, *lines, footer]) + "\n"


def write_trace(
    path, scenario_sha256: str, seed: int, events: list[SimEvent], metrics: dict
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_trace(scenario_sha256, seed, events, metrics))


@dataclass
class TraceFile:
    header: dict
    events: list[dict]
    footer: dict
    event_texts: list[str] = field(default_factory=list)


def parse_trace(text: str) -> TraceFile:
    header = None
    footer = None
    events: list[dict] = []
    event_texts: list[str] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {line_no}: not valid JSON: {exc}") from exc
        kind = record.get("type")
        if kind == "header":
            if header is not None:
                raise TraceError(f"line {line_no}: duplicate header")
            header = record
        elif kind == "event":
            events.append(record)
            event_texts.append(_dumps(record))
        elif kind == "footer":
            footer = record
        else:
            raise TraceError(f"line {line_no}: unknown record type {kind!r}")
    if header is None or footer is None:
        raise TraceError("trace is missing its header or footer")
    if footer.get("event_count") != len(events):
        raise TraceError(
            f"footer claims {footer.get('event_count')} events, file has {len(events)}"
        )
    stored_hash = footer.get("trace_hash")
    actual = trace_hash(event_texts)
    if stored_hash != actual:
        raise TraceError("event lines do not match the footer trace_hash")
    return TraceFile(header=header, events=events, footer=footer, event_texts=event_texts)


def read_trace(path) -> TraceFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


@dataclass
class TraceDiff:
    equal: bool
    first_divergence: dict | None = None

    def describe(self) -> str:
        if self.equal:
            return "traces are identical"
        d = self.first_divergence
        return (
            f"first divergence at index {d['index']} "
            f"(t_us={d.get('t_us')}, seq={d.get('seq')}):\n"
            f"  a: {d['a']}\n  b: {d['b']}"
        )


def compare_traces(a: TraceFile, b: TraceFile, allow_seed_mismatch: bool = False) -> TraceDiff:
    """Byte-level event comparison; refuses to compare different scenarios."""
    if a.header.get("scenario_sha256") != b.header.get("scenario_sha256"):
        raise HeaderMismatch("scenario hashes differ; these runs are not comparable")
    if a.header.get("seed") != b.header.get("seed") and not allow_seed_mismatch:
        raise HeaderMismatch(
            "seeds differ; pass allow_seed_mismatch to diff the event streams anyway"
        )
    for index, (ta, tb) in enumerate(zip(a.event_texts, b.event_texts)):
        if ta != tb:
            ra, rb = a.events[index], b.events[index]
            return TraceDiff(
                equal=False,
                first_divergence={
                    "index": index,
                    "t_us": ra.get("t_us"),
                    "seq": ra.get("seq"),
                    "a": ta,
                    "b": tb,
                },
            )
    if len(a.events) != len(b.events):
        index = min(len(a.events), len(b.events))
        longer = a if len(a.events) > len(b.events) else b
        return TraceDiff(
            equal=False,
            first_divergence={
                "index": index,
                "t_us": longer.events[index].get("t_us"),
                "seq": longer.events[index].get("seq"),
                "a": a.event_texts[index] if index < len(a.events) else "<end>",
                "b": b.event_texts[index] if index < len(b.events) else "<end>",
            },
        )
    return TraceDiff(equal=True)
