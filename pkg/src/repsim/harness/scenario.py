"""Scenario files: schema, validation and line-aware diagnostics.

A scenario is a JSON object::

    {
      "seed": 7,
      "businesses": [{"name": "acme", "jurisdiction": "DE", "self_rating": [0.9, 0.8]}, ...],
      "system_profile": {"aggregation_model": "weighted_mean", ...},
      "he_params": {"slot_count": 8, "depth_budget": 3, "epsilon": 1e-6},
      "engine_count": 3,
      "engine_policy": "round_robin",
      "dimensions": 2,
      "events": [
        {"kind": "contract", "a": "acme", "b": "beta"},
        {"kind": "rate", "voter": "acme", "votee": "beta", "rating": [0.8, 0.6]},
        {"kind": "query", "requester": "gamma", "votee": "beta", "mode": {"threshold": 0.5}},
        {"kind": "advance_epoch"},
        {"kind": "depart", "business": "beta"}
      ]
    }

``rate`` events may carry ``"misbehavior"``, one of :data:`MISBEHAVIORS`.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from repsim.errors import DanglingRating, InvalidParams, ScenarioError
from repsim.he import HeParams
from repsim.reputation import SystemProfile
from repsim.signing import canonical

MISBEHAVIORS = ("token_replay", "ticket_replay", "double_spend_race", "ciphertext_tamper",
                "forged_signature", "depth_violation")
EVENT_KINDS = ("contract", "rate", "query", "advance_epoch", "depart")
_TOP_KEYS = {"seed", "businesses", "system_profile", "he_params", "engine_count", "engine_policy",
             "dimensions", "epoch_length", "ticket_window", "pseudonym_lifetime", "events", "name"}


@dataclass
class BusinessSpec:
    name: str
    jurisdiction: str = ""
    self_rating: list | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "jurisdiction": self.jurisdiction, "self_rating": self.self_rating}


@dataclass
class Scenario:
    seed: int
    businesses: list[BusinessSpec]
    events: list[dict]
    system_profile: SystemProfile = field(default_factory=SystemProfile)
    he_params: HeParams = field(default_factory=lambda: HeParams(slot_count=8, depth_budget=3, epsilon=1e-6))
    engine_count: int = 3
    engine_policy: str = "round_robin"
    dimensions: int = 2
    epoch_length: int = 100
    ticket_window: int = 1000
    pseudonym_lifetime: int = 10
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name, "seed": self.seed,
            "businesses": [b.to_dict() for b in self.businesses],
            "system_profile": self.system_profile.to_dict(), "he_params": self.he_params.to_dict(),
            "engine_count": self.engine_count, "engine_policy": self.engine_policy,
            "dimensions": self.dimensions, "epoch_length": self.epoch_length,
            "ticket_window": self.ticket_window, "pseudonym_lifetime": self.pseudonym_lifetime,
            "events": self.events,
        }

    def digest(self) -> str:
        return hashlib.sha256(canonical(self.to_dict())).hexdigest()

    @classmethod
    def from_dict(cls, d: dict, text: str = "") -> "Scenario":
        return _parse(d, _Lines(text))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


class _Lines:
    """Maps field paths back to source lines, when the source text is known."""

    def __init__(self, text: str):
        self.text = text
        self._events: list[int] | None = None

    def _line_at(self, pos: int) -> int:
        return self.text.count("\n", 0, pos) + 1

    def top(self, key: str) -> int | None:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self._line_at(m.start()) if m else None

    def event(self, i: int) -> int | None:
        if self._events is None:
            self._events = []
            m = re.search(r'"events"\s*:\s*\[', self.text)
            if m:
                dec, pos = json.JSONDecoder(), m.end()
                try:
                    while True:
                        while self.text[pos] in " \t\r\n,":
                            pos += 1
                        if self.text[pos] == "]":
                            break
                        self._events.append(self._line_at(pos))
                        _, pos = dec.raw_decode(self.text, pos)
                except (ValueError, IndexError):
                    pass
        return self._events[i] if i < len(self._events) else None


def _need(d: dict, key: str, kind, path: str, lines: _Lines, line=None):
    if key not in d:
        raise ScenarioError(f"missing required field {key!r}", path=path, line=line)
    value = d[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ScenarioError(f"expected {getattr(kind, '__name__', kind)}", path=f"{path}.{key}".lstrip("."),
                            line=line if line is not None else lines.top(key))
    return value


def _rating(value, dims: int, path: str, line) -> list[float]:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                              for v in value):
        raise ScenarioError("expected a list of numbers", path=path, line=line)
    if len(value) != dims:
        raise ScenarioError(f"expected {dims} dimensions, got {len(value)}", path=path, line=line)
    if not all(0.0 <= v <= 1.0 for v in value):
        raise ScenarioError("rating components must lie in [0, 1]", path=path, line=line)
    return [float(v) for v in value]


def _parse(d: dict, lines: _Lines) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object", line=1)
    for key in d:
        if key not in _TOP_KEYS:
            raise ScenarioError(f"unknown key {key!r}", path=key, line=lines.top(key))
    seed = _need(d, "seed", int, "", lines)
    dims = d.get("dimensions", 2)
    if not isinstance(dims, int) or dims < 1:
        raise ScenarioError("dimensions must be a positive integer", path="dimensions", line=lines.top("dimensions"))

    try:
        profile = SystemProfile.from_dict(d.get("system_profile", {}))
    except ScenarioError as exc:
        raise ScenarioError(str(exc).split(": ", 1)[-1], path=exc.path,
                            line=lines.top(exc.path.rsplit(".", 1)[-1])) from None
    try:
        params = HeParams.from_dict({"slot_count": 8, "depth_budget": 3, "epsilon": 1e-6,
                                     **d.get("he_params", {})})
    except (InvalidParams, TypeError, KeyError) as exc:
        raise ScenarioError(str(exc), path="he_params", line=lines.top("he_params")) from None
    if dims > params.slot_count:
        raise ScenarioError("more dimensions than slots", path="dimensions", line=lines.top("dimensions"))

    engine_count = d.get("engine_count", 3)
    if not isinstance(engine_count, int) or engine_count < 1:
        raise ScenarioError("engine_count must be at least 1", path="engine_count",
                            line=lines.top("engine_count"))
    policy = d.get("engine_policy", "round_robin")
    if policy not in ("round_robin", "random"):
        raise ScenarioError(f"unknown engine policy {policy!r}", path="engine_policy",
                            line=lines.top("engine_policy"))
    ints = {}
    for key, default in (("epoch_length", 100), ("ticket_window", 1000), ("pseudonym_lifetime", 10)):
        value = d.get(key, default)
        if not isinstance(value, int) or value < 1:
            raise ScenarioError("expected a positive integer", path=key, line=lines.top(key))
        ints[key] = value

    businesses, names = [], set()
    raw_b = _need(d, "businesses", list, "", lines)
    for i, b in enumerate(raw_b):
        path = f"businesses[{i}]"
        if not isinstance(b, dict):
            raise ScenarioError("expected an object", path=path, line=lines.top("businesses"))
        name = _need(b, "name", str, path, lines, lines.top("businesses"))
        if name in names:
            raise ScenarioError(f"duplicate business {name!r}", path=f"{path}.name", line=lines.top("businesses"))
        names.add(name)
        sr = b.get("self_rating")
        if sr is not None:
            sr = _rating(sr, dims, f"{path}.self_rating", lines.top("businesses"))
        businesses.append(BusinessSpec(name, str(b.get("jurisdiction", "")), sr))

    events = _need(d, "events", list, "", lines)
    tickets: dict[tuple, int] = {}
    for i, ev in enumerate(events):
        path, line = f"events[{i}]", lines.event(i)
        if not isinstance(ev, dict):
            raise ScenarioError("expected an object", path=path, line=line)
        kind = ev.get("kind")
        if kind not in EVENT_KINDS:
            raise ScenarioError(f"unknown event kind {kind!r}", path=f"{path}.kind", line=line)

        def ref(key):
            value = ev.get(key)
            if value not in names:
                raise ScenarioError(f"unknown business {value!r}", path=f"{path}.{key}", line=line)
            return value

        if kind == "contract":
            a, b = ref("a"), ref("b")
            if a == b:
                raise ScenarioError("a business cannot contract with itself", path=path, line=line)
            tickets[(a, b)] = tickets.get((a, b), 0) + 1
            tickets[(b, a)] = tickets.get((b, a), 0) + 1
        elif kind == "rate":
            voter, votee = ref("voter"), ref("votee")
            if tickets.get((voter, votee), 0) < 1:
                raise DanglingRating(f"no unused contract ticket for {voter} -> {votee}", path=path, line=line)
            tickets[(voter, votee)] -= 1
            _rating(ev.get("rating"), dims, f"{path}.rating", line)
            mis = ev.get("misbehavior")
            if mis is not None and mis not in MISBEHAVIORS:
                raise ScenarioError(f"unknown misbehavior {mis!r}", path=f"{path}.misbehavior", line=line)
        elif kind == "query":
            ref("requester"), ref("votee")
            mode = ev.get("mode", "encrypted")
            if mode != "encrypted":
                t = mode.get("threshold") if isinstance(mode, dict) else None
                if not isinstance(t, (int, float)) or isinstance(t, bool) or not 0 <= t <= 1:
                    raise ScenarioError('mode must be "encrypted" or {"threshold": t} with t in [0, 1]',
                                        path=f"{path}.mode", line=line)
        elif kind == "depart":
            ref("business")

    return Scenario(seed=seed, businesses=businesses, events=events, system_profile=profile,
                    he_params=params, engine_count=engine_count, engine_policy=policy,
                    dimensions=dims, name=str(d.get("name", "")), **ints)


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", path=str(p)) from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return _parse(d, _Lines(text))
