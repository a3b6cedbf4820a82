"""Deterministic scenario execution.

One event is processed at a time and the network is drained before the
next one starts, so the log is a legal serialisation by construction.
"""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass

import numpy as np

from repsim.errors import EmptyState, ReputationError
from repsim.harness.report import build_report
from repsim.harness.scenario import Scenario
from repsim.he import make_backend
from repsim.identity import Authority, ContractEvent, TokenRegistry
from repsim.protocol import (
    AuthorityNode,
    BusinessNode,
    EnginePool,
    EventLog,
    KeyManager,
    Network,
    ReputationEngine,
    ReputationManager,
)
from repsim.signing import Signer

LOG_FORMAT = "repsim-log/1"
ENGINE_FAULTS = ("ciphertext_tamper", "depth_violation")


@dataclass
class RunResult:
    report: dict
    log: EventLog
    authority: dict          # authority snapshot, including the secret pseudonym map
    names: dict              # business name -> standing pseudonym

    @property
    def log_text(self) -> str:
        return self.log.dumps()


class World:
    """All entities of one run, wired to a shared network."""

    def __init__(self, scenario: Scenario, backend_kind: str | None = None):
        self.scenario = s = scenario
        params = s.he_params
        if backend_kind is not None and backend_kind != params.backend_kind:
            params = dataclasses.replace(params, backend_kind=backend_kind)
        self.params = params
        seeds = iter(np.random.default_rng(s.seed).integers(0, 2**62, size=64).tolist())

        self.net = Network(EventLog())
        self.tokens = TokenRegistry(np.random.default_rng(next(seeds)))
        self.authority = Authority(next(seeds), epoch_length=s.epoch_length, ticket_window=s.ticket_window,
                                   pseudonym_lifetime=s.pseudonym_lifetime, token_registry=self.tokens)
        self.km = KeyManager(make_backend(params, next(seeds)), s.system_profile, seed=next(seeds))
        signer_rng = np.random.default_rng(next(seeds))
        self.engines = [ReputationEngine(f"engine:{i}", make_backend(params, next(seeds)),
                                         Signer.from_rng(signer_rng), seed=next(seeds))
                        for i in range(s.engine_count)]
        self.pool = EnginePool([e.handle for e in self.engines], s.engine_policy, seed=next(seeds))
        self.pool.public_keys = {e.handle: e.public_key for e in self.engines}
        self.rm = ReputationManager(make_backend(params, next(seeds)), s.system_profile, self.tokens,
                                    self.authority.public_key, dict(self.pool.public_keys),
                                    self.authority.is_standing, dims=s.dimensions,
                                    epoch_length=s.epoch_length, pseudonym_lifetime=s.pseudonym_lifetime,
                                    seed=next(seeds))
        self.auth_node = AuthorityNode(self.authority, seed=next(seeds))
        for ent in (self.km, self.rm, self.auth_node, *self.engines):
            ent.net = self.net
            self.net.bind(ent.handle, ent)

        biz_backend_seed = next(seeds)
        biz_seed = next(seeds)
        self.ids, self.nodes = {}, {}
        for i, b in enumerate(s.businesses):
            bid = self.authority.register_business(b.name, b.jurisdiction)
            standing = self.authority.standing_pseudonym(bid).handle
            node = BusinessNode(b.name, standing, make_backend(params, biz_backend_seed + i), self.pool,
                                dims=s.dimensions, self_rating=b.self_rating, seed=biz_seed + i)
            node.net = self.net
            self.net.bind(standing, node)
            self.ids[b.name], self.nodes[b.name] = bid, node
        self.tickets: dict[tuple, deque] = {}
        self.departed: set[str] = set()
        self._revealed: dict[str, int] = {}

    def standing(self, name: str) -> str:
        return self.nodes[name].handle

    def header(self) -> None:
        s = self.scenario
        self.net.log.header(
            format=LOG_FORMAT, seed=s.seed, backend=self.params.backend_kind,
            scenario_digest=s.digest(), he_params=self.params.to_dict(),
            system_profile=s.system_profile.to_dict(), dims=s.dimensions,
            engine_keys=dict(self.pool.public_keys), authority_key=self.authority.public_key,
            epoch_length=s.epoch_length, engine_policy=s.engine_policy,
        )

    # -- events --------------------------------------------------------------

    def step(self, index: int, ev: dict) -> None:
        self.authority.advance(1)
        if ev["kind"] == "advance_epoch":
            self.authority.advance_epoch()
        self.net.tick = self.authority.tick
        try:
            outcome = getattr(self, "_" + ev["kind"])(ev)
        except ReputationError as exc:
            outcome = {"status": exc.code, "detail": str(exc)}
        self.net.log.append("event", self.net.tick, index=index, type=ev["kind"], **outcome)
        if ev["kind"] == "rate":
            self.reveal(self.standing(ev["votee"]))

    def _contract(self, ev):
        a, b = ev["a"], ev["b"]
        t_ab, t_ba = self.authority.establish_contract(
            ContractEvent(self.ids[a], self.ids[b], ev.get("metadata", {}), self.authority.tick))
        for voter, votee, t in ((a, b, t_ab), (b, a, t_ba)):
            self.tickets.setdefault((voter, votee), deque()).append(t)
            self.net.bind(t.voter_pseudonym, self.nodes[voter])
        return {"status": "ok", "tickets": [t_ab.ticket_id, t_ba.ticket_id]}

    def _rate(self, ev):
        voter, votee = ev["voter"], ev["votee"]
        ticket = self.tickets[(voter, votee)].popleft()
        if voter in self.departed:
            return {"status": "skipped", "reason": "voter departed"}
        mis = ev.get("misbehavior")
        if mis in ENGINE_FAULTS:
            for e in self.engines:
                e.misbehave = mis
        job, msgs = self.nodes[voter].start_rating(ticket, ev["rating"], mis)
        self.net.send_all(msgs)
        self.net.run()
        for e in self.engines:
            e.misbehave = None
        out = {"status": job["status"], "errors": list(job["errors"])}
        if "version" in job:
            out["version"] = job["version"]
        return out

    def _query(self, ev):
        requester, votee = ev["requester"], ev["votee"]
        if requester in self.departed:
            return {"status": "skipped", "reason": "requester departed"}
        cred = self.authority.issue_pseudonym(self.ids[requester])
        self.net.bind(cred.handle, self.nodes[requester])
        mode = ev.get("mode", "encrypted")
        threshold = None if mode == "encrypted" else float(mode["threshold"])
        job, msgs = self.nodes[requester].start_query(cred, self.standing(votee), threshold)
        self.net.send_all(msgs)
        self.net.run()
        out = {"status": job["status"], "mode": "encrypted" if threshold is None else "threshold"}
        resp = job.get("response", {})
        if "version" in resp:
            out["version"] = resp["version"]
        if "result" in resp:
            out["result"] = resp["result"]
        if job["errors"]:
            out["errors"] = list(job["errors"])
        return out

    def _advance_epoch(self, ev):
        return {"status": "ok", "epoch": self.authority.epoch}

    def _depart(self, ev):
        name = ev["business"]
        self.departed.add(name)
        self.net.depart(self.nodes[name])
        return {"status": "ok"}

    # -- reporting -----------------------------------------------------------

    def reveal(self, record: str, force: bool = False) -> None:
        st = self.rm.state(record)
        if st is None or (not force and self._revealed.get(record) == st.version):
            return
        try:
            score = self.km.reveal(st)
        except EmptyState:
            return
        self._revealed[record] = st.version
        self.net.log.append("reveal", self.net.tick, votee=record, version=st.version, score=score,
                            final=force)


def execute(scenario: Scenario, backend_kind: str | None = None) -> World:
    w = World(scenario, backend_kind)
    w.header()
    for i, ev in enumerate(scenario.events):
        w.step(i, ev)
    for record in sorted(w.rm.states):
        w.reveal(record, force=True)
    w.net.log.close()
    return w


def run(scenario: Scenario, backend_kind: str | None = None) -> RunResult:
    w = execute(scenario, backend_kind)
    report = build_report(w.net.log.lines)
    names = {name: node.handle for name, node in w.nodes.items()}
    return RunResult(report, w.net.log, w.authority.snapshot(), names)
