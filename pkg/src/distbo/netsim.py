"""Deterministic simulated broadcast network connecting optimization nodes.

Two modes:

* SyncBatch: rounds in which every active node performs one evaluation,
  then all round messages reach all nodes before the next round starts
  (models a synchronized fleet evaluating in batches).
* Async: a discrete-event loop with per-delivery latency and message
  loss. Every broadcast carries a compact summary of the sender's record
  keys; receivers note gaps and request them, and holders piggyback the
  missing records on their next broadcast, so the fleet converges to a
  consistent record set even under heavy loss.

Simulated time is integer ticks. All randomness flows from the config
seed, so equal seeds give bit-identical traces.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .node import BroadcastMessage, Node
from .surrogate import ObservationRecord

__all__ = [
    "NetMode",
    "NetworkConfig",
    "EvalRecord",
    "RunTrace",
    "ConsistencyReport",
    "run",
    "quiesce",
]

_MAX_DRAIN_ROUNDS = 200


class NetMode(str, enum.Enum):
    SYNC_BATCH = "sync"
    ASYNC = "async"


@dataclass(frozen=True)
class NetworkConfig:
    """Network behavior knobs.

    ``latency`` and ``eval_ticks`` are distribution specs, either
    ("fixed", k) or ("uniform", lo, hi) over integer ticks. ``drop_prob``
    applies independently per (message, receiver) in async mode.
    """

    mode: NetMode = NetMode.SYNC_BATCH
    latency: tuple = ("uniform", 1, 4)
    eval_ticks: tuple = ("fixed", 1)
    drop_prob: float = 0.0
    seed: int = 0
    piggyback: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", NetMode(self.mode))
        object.__setattr__(self, "latency", tuple(self.latency))
        object.__setattr__(self, "eval_ticks", tuple(self.eval_ticks))
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigurationError(f"drop_prob must be in [0, 1), got {self.drop_prob}")
        for spec in (self.latency, self.eval_ticks):
            _check_dist(spec)


def _check_dist(spec: tuple) -> None:
    if spec[0] == "fixed" and len(spec) == 2 and int(spec[1]) >= 0:
        return
    if spec[0] == "uniform" and len(spec) == 3 and 0 <= int(spec[1]) <= int(spec[2]):
        return
    raise ConfigurationError(f"bad distribution spec {spec!r}")


def _sample_dist(spec: tuple, rng: np.random.Generator) -> int:
    if spec[0] == "fixed":
        return int(spec[1])
    return int(rng.integers(int(spec[1]), int(spec[2]) + 1))


@dataclass(frozen=True)
class EvalRecord:
    """One function evaluation as seen by the simulator."""

    global_index: int
    tick: int
    node_id: int
    x: tuple[float, ...]
    y: float


@dataclass
class RunTrace:
    """Everything a run produced, in simulated-time order."""

    evals: list[EvalRecord] = field(default_factory=list)
    joins: list[tuple[int, int]] = field(default_factory=list)  # (tick, node_id)
    flags: list[str] = field(default_factory=list)
    history: list[BroadcastMessage] = field(default_factory=list)

    @property
    def record_keys(self) -> frozenset:
        return frozenset(m.record.key for m in self.history)


@dataclass(frozen=True)
class ConsistencyReport:
    """Per-node missing-record counts after a run."""

    missing: dict[int, int]

    @property
    def consistent(self) -> bool:
        return all(v == 0 for v in self.missing.values())


def quiesce(trace: RunTrace, nodes) -> ConsistencyReport:
    """Compare every node's record set against the global broadcast set."""
    global_keys = trace.record_keys
    missing = {node.node_id: len(global_keys - node.dataset.keys()) for node in nodes}
    return ConsistencyReport(missing=missing)


def run(nodes, objective, config: NetworkConfig, budget: int, join_schedule=()) -> RunTrace:
    """Drive the fleet until the global evaluation budget is spent.

    ``budget`` counts all evaluations including initialization.
    ``join_schedule`` is a list of (tick, Node) pairs; each node joins at
    its tick with the full broadcast history (empty history falls back to
    LD initialization). A protocol violation in any node aborts the run.
    """
    nodes = sorted(nodes, key=lambda n: n.node_id)
    if not nodes:
        raise ConfigurationError("need at least one node")
    seen = set()
    for n in nodes + [jn for _, jn in join_schedule]:
        if n.node_id in seen:
            raise ConfigurationError(f"duplicate node_id {n.node_id}")
        seen.add(n.node_id)
    total_init = sum(n.config.p for n in nodes)
    if budget < total_init:
        raise ConfigurationError(
            f"budget {budget} is below the {total_init} initialization evaluations"
        )
    if config.mode is NetMode.SYNC_BATCH:
        return _run_sync(nodes, objective, budget, join_schedule)
    return _run_async(nodes, objective, config, budget, join_schedule)


def _collect_flags(trace: RunTrace, node: Node, tick: int) -> None:
    for flag in node.flags:
        trace.flags.append(f"tick={tick} {flag}")
    node.flags.clear()


# -- synchronous batch rounds ---------------------------------------------


def _run_sync(nodes, objective, budget, join_schedule) -> RunTrace:
    trace = RunTrace()
    active = list(nodes)
    pending = sorted(join_schedule, key=lambda e: (e[0], e[1].node_id))
    count = 0

    def record(node, msg, tick):
        nonlocal count
        rec = msg.record
        trace.evals.append(EvalRecord(count, tick, node.node_id, rec.x, rec.y))
        trace.history.append(msg)
        count += 1

    # Round 0: every starting node evaluates its init slice.
    round_msgs = []
    for node in active:
        msgs = node.run_init(objective)
        for msg in msgs:
            record(node, msg, 0)
        round_msgs.extend(msgs)
        _collect_flags(trace, node, 0)
    _deliver_sync(active, round_msgs)

    tick = 1
    while count < budget:
        round_msgs = []
        while pending and pending[0][0] <= tick:
            _, joiner = pending.pop(0)
            joiner.join_from(trace.history)
            trace.joins.append((tick, joiner.node_id))
            if not joiner.initialized:
                for msg in joiner.run_init(objective):
                    record(joiner, msg, tick)
                    round_msgs.append(msg)
            active.append(joiner)
            active.sort(key=lambda n: n.node_id)
        stepped = False
        for node in active:
            if count >= budget:
                break
            if node.done:
                continue
            msg = node.step(objective)
            _collect_flags(trace, node, tick)
            if msg is None:
                continue
            record(node, msg, tick)
            round_msgs.append(msg)
            stepped = True
        _deliver_sync(active, round_msgs)
        if not stepped and not pending:
            break  # every node exhausted its local budget
        tick += 1
    return trace


def _deliver_sync(active, msgs) -> None:
    for node in active:
        node.ingest(m for m in msgs if m.record.node_id != node.node_id)


# -- asynchronous discrete-event loop --------------------------------------


@dataclass(frozen=True)
class _Envelope:
    """What actually travels in async mode: payload plus gossip metadata."""

    sender: int
    payloads: tuple[BroadcastMessage, ...]
    have: frozenset | None = None
    want: frozenset | None = None


class _Port:
    """Per-node mailbox and gossip bookkeeping (local state only)."""

    def __init__(self, node: Node):
        self.node = node
        self.inbox: list[_Envelope] = []
        self.wanted: set = set()
        self.serve: set = set()
        self.busy_until = 0

    def process_inbox(self) -> None:
        for env in self.inbox:
            self.node.ingest(env.payloads)
            if env.have is not None:
                self.wanted |= set(env.have)
            if env.want:
                self.serve |= set(env.want) & self.node.dataset.keys()
        self.inbox.clear()
        self.wanted -= self.node.dataset.keys()

    def gossip_fields(self, piggyback: bool):
        if not piggyback:
            return None, None, ()
        have = frozenset(self.node.dataset.keys())
        want = frozenset(self.wanted) if self.wanted else None
        extras = []
        records = {r.key: r for r in self.node.dataset.canonical()} if self.serve else {}
        for key in sorted(self.serve):
            if key in records:
                extras.append(BroadcastMessage(records[key]))
        self.serve.clear()
        return have, want, tuple(extras)


def _run_async(nodes, objective, config, budget, join_schedule) -> RunTrace:
    trace = RunTrace()
    rng = np.random.default_rng(config.seed)
    ports: dict[int, _Port] = {n.node_id: _Port(n) for n in nodes}
    heap: list = []
    counter = 0
    count = 0
    raw_evals: list[tuple[int, int, int, tuple, float]] = []  # tick, node_id, seq, x, y

    def push(tick, kind, data):
        nonlocal counter
        heapq.heappush(heap, (tick, counter, kind, data))
        counter += 1

    def broadcast(port: _Port, tick: int, payloads, service=False):
        have, want, extras = port.gossip_fields(config.piggyback)
        env = _Envelope(port.node.node_id, tuple(payloads) + extras, have, want)
        trace.history.extend(payloads)
        for nid in sorted(ports):
            if nid == port.node.node_id:
                continue
            if config.drop_prob > 0 and rng.random() < config.drop_prob:
                continue
            push(tick + _sample_dist(config.latency, rng), "deliver", (nid, env))

    def wake(tick: int, nid: int):
        nonlocal count
        port = ports[nid]
        port.process_inbox()
        node = port.node
        if tick < port.busy_until:
            return
        if not node.initialized:
            msgs = node.run_init(objective)
            dur = sum(_sample_dist(config.eval_ticks, rng) for _ in msgs)
            done = tick + dur
            for m in msgs:
                raw_evals.append((done, nid, m.record.seq, m.record.x, m.record.y))
            count += len(msgs)
            port.busy_until = done
            push(done, "emit", (nid, tuple(msgs)))
            push(done, "wake", nid)
            _collect_flags(trace, node, tick)
        elif count < budget and not node.done:
            msg = node.step(objective)
            _collect_flags(trace, node, tick)
            if msg is None:
                return
            count += 1
            dur = _sample_dist(config.eval_ticks, rng)
            done = tick + dur
            raw_evals.append((done, nid, msg.record.seq, msg.record.x, msg.record.y))
            port.busy_until = done
            push(done, "emit", (nid, (msg,)))
            push(done, "wake", nid)
        elif config.piggyback and (port.serve or port.wanted):
            broadcast(port, tick, [])

    for nid in sorted(ports):
        push(0, "wake", nid)
    for tick, joiner in sorted(join_schedule, key=lambda e: (e[0], e[1].node_id)):
        push(tick, "join", joiner)

    last_tick = 0
    while heap:
        tick, _, kind, data = heapq.heappop(heap)
        last_tick = max(last_tick, tick)
        if kind == "deliver":
            nid, env = data
            ports[nid].inbox.append(env)
            push(tick, "wake", nid)
        elif kind == "emit":
            nid, msgs = data
            broadcast(ports[nid], tick, msgs)
        elif kind == "join":
            joiner = data
            ports[joiner.node_id] = _Port(joiner)
            joiner.join_from(trace.history)
            trace.joins.append((tick, joiner.node_id))
            push(tick, "wake", joiner.node_id)
        else:
            wake(tick, data)

        if not heap and config.piggyback:
            # Anti-entropy drain: wake everyone to re-advertise summaries
            # until every node holds the full record set.
            for attempt in range(_MAX_DRAIN_ROUNDS):
                if _consistent(trace, ports):
                    break
                last_tick += 1
                for nid in sorted(ports):
                    port = ports[nid]
                    port.process_inbox()
                    broadcast(port, last_tick, [])
                while heap:
                    t, _, kind2, data2 = heapq.heappop(heap)
                    last_tick = max(last_tick, t)
                    if kind2 == "deliver":
                        nid, env = data2
                        ports[nid].inbox.append(env)
                        ports[nid].process_inbox()
                        if ports[nid].serve or ports[nid].wanted:
                            broadcast(ports[nid], t, [])
            else:
                trace.flags.append("drain_incomplete")

    raw_evals.sort(key=lambda e: (e[0], e[1], e[2]))
    trace.evals = [
        EvalRecord(i, tick, nid, x, y) for i, (tick, nid, _, x, y) in enumerate(raw_evals)
    ]
    return trace


def _consistent(trace: RunTrace, ports) -> bool:
    global_keys = trace.record_keys
    return all(global_keys <= p.node.dataset.keys() for p in ports.values())
