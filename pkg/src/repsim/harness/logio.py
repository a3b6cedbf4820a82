"""Reading and structurally validating JSON-lines event logs."""

from __future__ import annotations

import json
from pathlib import Path

from repsim.errors import GapDetected, LogError, OrderViolation, TruncatedLog


def parse_log(text: str) -> list[dict]:
    lines = []
    for n, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        try:
            lines.append(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise LogError(f"line {n}: not JSON ({exc.msg})") from None
    return lines


def read_log(path) -> list[dict]:
    return parse_log(Path(path).read_text())


def check_log(lines: list[dict]) -> None:
    """Raise unless the log has a header, a contiguous seq run and an end marker."""
    if not lines or lines[0].get("kind") != "header":
        raise LogError("log does not start with a header line")
    if lines[-1].get("kind") != "end":
        raise TruncatedLog("log has no end marker")
    body = lines[1:-1]
    seqs = []
    for line in body:
        if not isinstance(line.get("seq"), int):
            raise LogError(f"line without seq after header: {line.get('kind')}")
        seqs.append(line["seq"])
    missing = sorted(set(range(len(seqs))) - set(seqs))
    if missing:
        raise GapDetected(f"seq {missing[0]} is missing")
    tick = 0
    for expected, line in enumerate(body):
        if line["seq"] != expected:
            raise OrderViolation(f"seq {line['seq']} appears where {expected} belongs")
        if line.get("tick", 0) < tick:
            raise OrderViolation(f"tick goes backwards at seq {expected}")
        tick = line.get("tick", 0)
    if lines[-1].get("count") != len(body):
        raise TruncatedLog(f"end marker counts {lines[-1].get('count')} lines, found {len(body)}")
