"""Bounded explicit-state exploration of the two-block protocol.

The model abstracts each event to a per-direction sequence number and lets any
enabled transition fire next, so the verdicts hold for every assignment of
delays.  Breadth-first search with successors taken in sorted label order makes
the counterexample for each property the shortest path, and among the
shortest the lexicographically smallest.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigurationError
from .kernel import HIGH, LOW, Kernel
from .transceiver import TransceiverState, sw_control_outputs

NAMES = ("L", "R")
IDLE, REQ, RELEASE = 0, 1, 2


class Block(NamedTuple):
    src: int            # events not yet offered to the TX FIFO
    txq: tuple          # TX FIFO, head is the token at the TX buffer input
    sw_ack: bool
    sw_req: bool
    tx_en: bool
    rx_en: bool
    tx_p: bool
    rx_p: bool
    tx_phase: int       # IDLE / REQ / RELEASE
    ack_out: bool
    rxq: tuple          # RX FIFO
    delivered: int      # events of the peer delivered here, in order
    lost: int
    order_error: bool


class ProtoState(NamedTuple):
    blocks: tuple       # (left, right)
    bus_req: bool
    bus_ack: bool
    bus_data: int | None
    violation: str | None


@dataclass(frozen=True)
class ExplorationBound:
    events: tuple = (2, 2)
    depth: int = 2
    max_states: int = 1_000_000

    def __post_init__(self):
        events = self.events
        if isinstance(events, int):
            object.__setattr__(self, "events", (events, events))
        if len(self.events) != 2 or min(self.events) < 0:
            raise ConfigurationError(f"events must be two non-negative counts, got {self.events}")
        if self.depth < 1 or self.max_states < 1:
            raise ConfigurationError("depth and max_states must be positive")


@dataclass(frozen=True)
class Mutations:
    """Seeded faults.  Every flag True is the correct model."""

    issue_guard: bool = True             # TX buffer waits while the peer requests
    rx_p_reset_exception: bool = True     # block reset to RX may request at once
    fifo_backpressure: bool = True        # full FIFO stalls (False: drops)

    @classmethod
    def named(cls, name: str | None) -> "Mutations":
        table = {
            None: cls(),
            "none": cls(),
            "drop-issue-guard": cls(issue_guard=False),
            "drop-rx-p-exception": cls(rx_p_reset_exception=False),
            "drop-fifo-backpressure": cls(fifo_backpressure=False),
        }
        if name not in table:
            raise ConfigurationError(f"unknown mutation {name!r}; choose from {sorted(k for k in table if k)}")
        return table[name]


MUTATIONS = ("drop-issue-guard", "drop-rx-p-exception", "drop-fifo-backpressure")


class Model:
    def __init__(self, bound: ExplorationBound, mutations: Mutations | None = None):
        self.bound = bound
        self.mutations = mutations or Mutations()

    def initial(self) -> ProtoState:
        n_left, n_right = self.bound.events
        left = Block(n_left, (), True, False, True, False, False, False, IDLE, False, (), 0, 0, False)
        right = Block(n_right, (), False, True, False, True, False, self.mutations.rx_p_reset_exception,
                      IDLE, False, (), 0, 0, False)
        return ProtoState((left, right), False, False, None, None)

    @staticmethod
    def driving(b: Block) -> bool:
        return b.tx_en and b.tx_phase != IDLE

    def successors(self, s: ProtoState) -> list[tuple[str, ProtoState]]:
        if s.violation is not None:
            return []
        out = []
        depth = self.bound.depth
        m = self.mutations
        for i in (0, 1):
            b, peer = s.blocks[i], s.blocks[1 - i]
            n = NAMES[i]

            def put(label, nb=None, **bus):
                blocks = list(s.blocks)
                blocks[i] = nb if nb is not None else b
                ns = s._replace(blocks=tuple(blocks), **bus)
                out.append((f"{n}.{label}", self._check(ns)))

            total = self.bound.events[i]
            if b.src > 0:
                seq = total - b.src
                if len(b.txq) < depth:
                    put(f"inject#{seq}", b._replace(src=b.src - 1, txq=b.txq + (seq,)))
                elif not m.fifo_backpressure:
                    put(f"inject#{seq}:drop", b._replace(src=b.src - 1, lost=b.lost + 1))

            if b.sw_req != peer.sw_ack:
                put("sw_req" + ("+" if peer.sw_ack else "-"), b._replace(sw_req=peer.sw_ack))

            ts = TransceiverState(b.sw_ack, b.sw_req, b.tx_en, b.rx_en, b.rx_p, b.tx_p, bool(b.txq))
            for fld, target in sorted(sw_control_outputs(ts).items()):
                nb = b._replace(**{fld: target})
                if fld == "rx_en" and not target:
                    nb = nb._replace(rx_p=False)
                put(fld + ("+" if target else "-"), nb)

            # TX buffer
            if (b.tx_phase == IDLE and b.txq and b.tx_en and not s.bus_ack
                    and (not b.sw_req or not m.issue_guard)):
                put(f"issue#{b.txq[0]}", b._replace(tx_phase=REQ, tx_p=True), bus_req=True, bus_data=b.txq[0])
            if b.tx_phase == REQ and s.bus_ack:
                put("req-", b._replace(tx_phase=RELEASE), bus_req=False)
            if b.tx_phase == RELEASE and not s.bus_ack:
                put("complete", b._replace(tx_phase=IDLE, txq=b.txq[1:]))
            if b.tx_phase == IDLE and b.tx_p:
                put("tx_p-", b._replace(tx_p=False))

            # RX buffer
            if b.rx_en and s.bus_req and not b.ack_out:
                if len(b.rxq) < depth:
                    put(f"receive#{s.bus_data}",
                        b._replace(ack_out=True, rxq=b.rxq + (s.bus_data,), rx_p=True), bus_ack=True)
                elif not m.fifo_backpressure:
                    put(f"receive#{s.bus_data}:drop",
                        b._replace(ack_out=True, rx_p=True, lost=b.lost + 1), bus_ack=True)
            if b.ack_out and not s.bus_req:
                put("ack-", b._replace(ack_out=False), bus_ack=False)
            if b.rxq:
                head = b.rxq[0]
                put(f"deliver#{head}", b._replace(rxq=b.rxq[1:], delivered=b.delivered + 1,
                                                  order_error=b.order_error or head != b.delivered))
        out.sort(key=lambda item: item[0])
        return out

    def _check(self, s: ProtoState) -> ProtoState:
        left, right = s.blocks
        if self.driving(left) and self.driving(right):
            return s._replace(violation="mutex")
        return s

    def pending_work(self, s: ProtoState) -> bool:
        for b in s.blocks:
            if b.src or b.txq or b.rxq or b.tx_phase != IDLE or b.ack_out:
                return True
        return False


@dataclass
class StateGraph:
    states: list
    edges: list                       # (src index, label, dst index)
    frontier_exhausted: bool
    parent: list                      # (parent index, label) or None for the initial state
    model: Model = field(repr=False)

    def __len__(self):
        return len(self.states)

    def successors(self, i: int):
        return [(label, j) for src, label, j in self._by_src().get(i, ())]

    def _by_src(self):
        if not hasattr(self, "_adj"):
            adj = {}
            for src, label, dst in self.edges:
                adj.setdefault(src, []).append((src, label, dst))
            self._adj = adj
        return self._adj

    def path_to(self, i: int) -> list[str]:
        path = []
        while self.parent[i] is not None:
            i, label = self.parent[i]
            path.append(label)
        return path[::-1]

    def terminal(self) -> list[int]:
        adj = self._by_src()
        return [i for i in range(len(self.states)) if i not in adj]


def explore(bound: ExplorationBound, mutations: Mutations | None = None) -> StateGraph:
    model = Model(bound, mutations)
    init = model.initial()
    index = {init: 0}
    states = [init]
    parent = [None]
    edges = []
    queue = deque([0])
    exhausted = True
    while queue:
        i = queue.popleft()
        for label, ns in model.successors(states[i]):
            j = index.get(ns)
            if j is None:
                if len(states) >= bound.max_states:
                    exhausted = False
                    continue
                j = len(states)
                index[ns] = j
                states.append(ns)
                parent.append((i, label))
                queue.append(j)
            edges.append((i, label, j))
    return StateGraph(states, edges, exhausted, parent, model)


class Verdict(NamedTuple):
    property: str
    passed: bool
    path: list
    detail: str = ""

    def as_dict(self) -> dict:
        return {"property": self.property, "verdict": "pass" if self.passed else "fail",
                "path": list(self.path), "detail": self.detail}


def _incomplete(g: StateGraph, name: str) -> Verdict | None:
    if not g.frontier_exhausted:
        return Verdict(name, False, [], "state cap reached; graph is partial, nothing verified")
    return None


def check_mutex(g: StateGraph) -> Verdict:
    """No reachable state has both blocks driving the bus."""
    for i, s in enumerate(g.states):
        if s.violation == "mutex":
            return Verdict("mutex", False, g.path_to(i), "both blocks driving the bus")
    return _incomplete(g, "mutex") or Verdict("mutex", True, [])


def check_deadlock(g: StateGraph) -> Verdict:
    """Every state with outstanding work has an enabled transition."""
    for i in g.terminal():
        s = g.states[i]
        if s.violation is None and g.model.pending_work(s):
            return Verdict("deadlock", False, g.path_to(i), f"stuck with pending work: {describe(s)}")
    return _incomplete(g, "deadlock") or Verdict("deadlock", True, [])


def check_delivery(g: StateGraph) -> Verdict:
    """Exactly-once, in-order delivery per direction on every maximal path."""
    totals = g.model.bound.events
    for i, s in enumerate(g.states):
        for b in s.blocks:
            if b.order_error:
                return Verdict("delivery", False, g.path_to(i), "event delivered out of order or twice")
    for i in g.terminal():
        s = g.states[i]
        if s.violation is not None:
            continue
        left, right = s.blocks
        if right.delivered != totals[0] or left.delivered != totals[1]:
            return Verdict("delivery", False, g.path_to(i),
                           f"delivered L->R {right.delivered}/{totals[0]}, R->L {left.delivered}/{totals[1]}")
    return _incomplete(g, "delivery") or Verdict("delivery", True, [])


CHECKS = {"mutex": check_mutex, "deadlock": check_deadlock, "delivery": check_delivery}


def check_all(g: StateGraph) -> list[Verdict]:
    return [fn(g) for fn in CHECKS.values()]


def report(verdicts, bound: ExplorationBound, g: StateGraph | None = None, mutation: str | None = None) -> dict:
    out = {
        "bound": {"events": list(bound.events), "depth": bound.depth, "max_states": bound.max_states},
        "mutation": mutation,
        "verdicts": [v.as_dict() for v in verdicts],
    }
    if g is not None:
        out["states"] = len(g.states)
        out["edges"] = len(g.edges)
        out["frontier_exhausted"] = g.frontier_exhausted
    return out


def dumps_report(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True)


def describe(s: ProtoState) -> str:
    parts = []
    for n, b in zip(NAMES, s.blocks):
        mode = "TX" if b.tx_en else "RX" if b.rx_en else "SW"
        parts.append(f"{n}[{mode} ack={int(b.sw_ack)} req={int(b.sw_req)} rx_p={int(b.rx_p)} "
                     f"tx_p={int(b.tx_p)} src={b.src} txq={list(b.txq)} rxq={list(b.rxq)}]")
    return " ".join(parts)


# -- replay ------------------------------------------------------------------


def replay(model: Model, path) -> ProtoState:
    """Re-execute a label path from reset; each label must be enabled in turn."""
    s = model.initial()
    for step, label in enumerate(path):
        succ = dict(model.successors(s))
        if label not in succ:
            raise ConfigurationError(f"step {step}: {label!r} not enabled in {describe(s)}")
        s = succ[label]
    return s


_REPLAY_FIELDS = ("sw_ack", "sw_req", "tx_en", "rx_en", "tx_p", "rx_p", "ack_out")


def replay_in_kernel(model: Model, path, step: int = 1000) -> tuple[Kernel, ProtoState]:
    """Replay a path as kernel transitions, one label per ``step`` picoseconds.

    Each label's effect on the block control wires, the bus handshake wires and
    the per-block ``drive`` flag becomes a traced transition, so the ordering is
    forced by distinct timestamps and the violation can be read back from the
    kernel rather than from the abstract state.
    """
    k = Kernel()
    s = model.initial()
    for n, b in zip(NAMES, s.blocks):
        for f in _REPLAY_FIELDS:
            k.declare(f"{n}.{f}", HIGH if getattr(b, f) else LOW)
        k.declare(f"{n}.drive", HIGH if model.driving(b) else LOW)
    k.declare("bus.req")
    k.declare("bus.ack")
    for t, label in enumerate(path, start=1):
        succ = dict(model.successors(s))
        if label not in succ:
            raise ConfigurationError(f"step {t}: {label!r} not enabled")
        ns = succ[label]
        when = t * step - k.now
        for n, old, new in zip(NAMES, s.blocks, ns.blocks):
            for f in _REPLAY_FIELDS:
                if getattr(old, f) != getattr(new, f):
                    k.schedule(f"{n}.{f}", HIGH if getattr(new, f) else LOW, when, label)
            if model.driving(old) != model.driving(new):
                k.schedule(f"{n}.drive", HIGH if model.driving(new) else LOW, when, label)
        for wire in ("bus_req", "bus_ack"):
            if getattr(s, wire) != getattr(ns, wire):
                k.schedule(wire.replace("_", "."), HIGH if getattr(ns, wire) else LOW, when, label)
        k.run_until(t * step)
        s = ns
    return k, s


def kernel_shows_dual_drive(k: Kernel) -> bool:
    return k.read("L.drive") is HIGH and k.read("R.drive") is HIGH


def replay_reproduces(model: Model, verdict: Verdict) -> bool:
    """True when replaying the counterexample reproduces the same failure."""
    k, s = replay_in_kernel(model, verdict.path)
    if verdict.property == "mutex":
        return kernel_shows_dual_drive(k)
    if verdict.property == "deadlock":
        return not model.successors(s) and model.pending_work(s)
    if verdict.property == "delivery":
        if any(b.order_error for b in s.blocks):
            return True
        totals = model.bound.events
        return (not model.successors(s) and
                (s.blocks[1].delivered != totals[0] or s.blocks[0].delivered != totals[1]))
    raise ConfigurationError(f"unknown property {verdict.property!r}")
