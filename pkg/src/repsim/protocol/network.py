"""Deterministic in-memory message delivery with an append-only event log."""

from __future__ import annotations

from collections import Counter, deque

from repsim.protocol.messages import NETWORK, Message
from repsim.signing import canonical


class EventLog:
    """JSON-lines log. Every line after the header carries ``seq`` and ``tick``."""

    def __init__(self):
        self.lines: list[dict] = []
        self._seq = 0

    def header(self, **fields) -> None:
        self.lines.append({"kind": "header", **fields})

    def append(self, kind: str, tick: int, **fields) -> dict:
        line = {"kind": kind, "seq": self._seq, "tick": tick, **fields}
        self._seq += 1
        self.lines.append(line)
        return line

    def close(self) -> None:
        self.lines.append({"kind": "end", "count": self._seq})

    def dumps(self) -> str:
        return "".join(canonical(line).decode() + "\n" for line in self.lines)


class Network:
    """FIFO delivery between registered handles.

    A message to a departed or unknown handle is answered with an
    ``Undeliverable`` notice to its sender instead of being delivered.
    """

    def __init__(self, log: EventLog | None = None):
        self.log = log or EventLog()
        self.tick = 0
        self._nodes: dict[str, object] = {}
        self._queue: deque[Message] = deque()
        self.departed: set[str] = set()
        self.transcripts: dict[str, list[int]] = {}
        self.delivered = Counter()

    def bind(self, handle: str, node) -> None:
        self._nodes[handle] = node

    def node(self, handle: str):
        return self._nodes.get(handle)

    def depart(self, node) -> None:
        for handle, n in self._nodes.items():
            if n is node:
                self.departed.add(handle)

    def reachable(self, handle: str) -> bool:
        return handle in self._nodes and handle not in self.departed

    def send(self, m: Message) -> None:
        line = self.log.append("msg", self.tick, **m.to_dict())
        self.transcripts.setdefault(m.sender, []).append(line["seq"])
        self._queue.append((line["seq"], m))

    def send_all(self, msgs) -> None:
        for m in msgs:
            self.send(m)

    def run(self, limit: int = 100_000) -> int:
        steps = 0
        while self._queue:
            steps += 1
            if steps > limit:
                raise RuntimeError("message storm: delivery limit exceeded")
            seq, m = self._queue.popleft()
            if not self.reachable(m.receiver):
                if m.sender != NETWORK and self.reachable(m.sender):
                    self.send(Message("Undeliverable", NETWORK, m.sender, m.session_id,
                                      {"seq": seq, "variant": m.variant, "receiver": m.receiver}))
                continue
            self.transcripts.setdefault(m.receiver, []).append(seq)
            self.delivered[m.receiver] += 1
            self.send_all(self._nodes[m.receiver].handle_message(m))
        return steps
