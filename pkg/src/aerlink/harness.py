"""Workloads, measurement and calibration.

A workload is one JSON document (``schema_version`` 1)::

    {
      "schema_version": 1,
      "initial_tx": "right",
      "fifo_depth": 4,
      "run_limit_ps": null,
      "energy_per_event_pj": 11.0,
      "seed": 0,
      "delay_profile": {"io_pad": 2000},
      "left":  {"generator": {"count": 10000, "rate": null, "addresses": "sequential"}},
      "right": {"events": [[0, 17], [40000, 99]]}
    }

A generator with ``rate: null`` offers every event at ``start_ps`` (saturated
traffic); otherwise inter-arrival times are exponential with the given mean
rate in events per second.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (CalibrationError, ConfigurationError, ProtocolViolation,
                     SimulationViolation)
from .handshake import EVENT_MASK, edges
from .kernel import HIGH, NS, DelayProfile, Kernel
from .link import SIDES, make_link, switch_episodes

SCHEMA_VERSION = 1
ENERGY_PER_EVENT_PJ = 11.0
WARMUP_EVENTS = 10
DIRECTIONS = {"left": "left_to_right", "right": "right_to_left"}


class ConfigKeyError(ConfigurationError):
    """A configuration error anchored to a key path inside the document."""

    def __init__(self, key_path, message):
        self.key_path = tuple(key_path)
        where = ".".join(str(k) for k in self.key_path) or "<root>"
        super().__init__(f"{where}: {message}")


@dataclass
class Workload:
    left: list = field(default_factory=list)      # [(time_ps, address)]
    right: list = field(default_factory=list)
    profile: DelayProfile = field(default_factory=DelayProfile)
    fifo_depth: int = 4
    run_limit: int | None = None
    initial_tx: str = "left"
    energy_per_event_pj: float = ENERGY_PER_EVENT_PJ

    def __post_init__(self):
        if self.initial_tx not in SIDES:
            raise ConfigurationError(f"initial_tx must be one of {SIDES}")
        for side in SIDES:
            events = [(int(t), int(a)) for t, a in getattr(self, side)]
            last = 0
            for t, a in events:
                if t < last:
                    raise ConfigurationError(f"{side}: injection times must be non-decreasing")
                if not 0 <= a <= EVENT_MASK:
                    raise ConfigurationError(f"{side}: address {a} is not a 26-bit word")
                last = t
            setattr(self, side, events)


# -- config ------------------------------------------------------------------


def generate_events(gen: dict, rng: np.random.Generator, key=("generator",)) -> list:
    allowed = {"count", "rate", "seed", "start_ps", "addresses"}
    unknown = set(gen) - allowed
    if unknown:
        raise ConfigKeyError(key + (sorted(unknown)[0],), "unknown generator field")
    count = gen.get("count")
    if not isinstance(count, int) or isinstance(count, bool) or count < 0:
        raise ConfigKeyError(key + ("count",), "must be a non-negative integer")
    if "seed" in gen:
        rng = np.random.default_rng(gen["seed"])
    start = gen.get("start_ps", 0)
    rate = gen.get("rate")
    if rate is None:
        times = np.full(count, start, dtype=np.int64)
    else:
        if not isinstance(rate, (int, float)) or rate <= 0:
            raise ConfigKeyError(key + ("rate",), "must be a positive number of events/s or null")
        gaps = rng.exponential(1e12 / rate, size=count)
        times = start + np.cumsum(np.rint(gaps)).astype(np.int64)
    mode = gen.get("addresses", "random")
    if mode == "random":
        addresses = rng.integers(0, EVENT_MASK + 1, size=count)
    elif mode == "sequential":
        addresses = np.arange(count) & EVENT_MASK
    else:
        raise ConfigKeyError(key + ("addresses",), "must be 'random' or 'sequential'")
    return [(int(t), int(a)) for t, a in zip(times, addresses)]


def workload_from_dict(doc: dict, seed: int | None = None) -> Workload:
    if not isinstance(doc, dict):
        raise ConfigKeyError((), "configuration must be a JSON object")
    allowed = {"schema_version", "initial_tx", "fifo_depth", "run_limit_ps", "energy_per_event_pj",
               "seed", "delay_profile", "left", "right", "description"}
    for key in doc:
        if key not in allowed:
            raise ConfigKeyError((key,), "unknown field")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigKeyError(("schema_version",), f"must be {SCHEMA_VERSION}")
    if seed is None:
        seed = doc.get("seed", 0)
    try:
        profile = DelayProfile().replace(**doc.get("delay_profile", {}))
    except ConfigurationError as exc:
        raise ConfigKeyError(("delay_profile",), str(exc)) from None
    except TypeError:
        raise ConfigKeyError(("delay_profile",), "must be an object of integer ps delays") from None
    sides = {}
    for i, side in enumerate(SIDES):
        side_doc = doc.get(side, {})
        if not isinstance(side_doc, dict):
            raise ConfigKeyError((side,), "must be an object")
        if "events" in side_doc and "generator" in side_doc:
            raise ConfigKeyError((side,), "give either events or generator, not both")
        if "events" in side_doc:
            events = side_doc["events"]
            if not isinstance(events, list) or not all(
                    isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e) for e in events):
                raise ConfigKeyError((side, "events"), "must be a list of [time_ps, address] integer pairs")
            sides[side] = events
        elif "generator" in side_doc:
            gen = side_doc["generator"]
            if not isinstance(gen, dict):
                raise ConfigKeyError((side, "generator"), "must be an object")
            sides[side] = generate_events(gen, np.random.default_rng([seed, i]), (side, "generator"))
        else:
            extra = set(side_doc) - {"events", "generator"}
            if extra:
                raise ConfigKeyError((side, sorted(extra)[0]), "unknown field")
            sides[side] = []
    depth = doc.get("fifo_depth", 4)
    if not isinstance(depth, int) or depth < 1:
        raise ConfigKeyError(("fifo_depth",), "must be a positive integer")
    limit = doc.get("run_limit_ps")
    if limit is not None and (not isinstance(limit, int) or limit < 0):
        raise ConfigKeyError(("run_limit_ps",), "must be a non-negative integer or null")
    energy = doc.get("energy_per_event_pj", ENERGY_PER_EVENT_PJ)
    if not isinstance(energy, (int, float)) or energy < 0:
        raise ConfigKeyError(("energy_per_event_pj",), "must be a non-negative number")
    try:
        return Workload(sides["left"], sides["right"], profile, depth, limit,
                        doc.get("initial_tx", "left"), float(energy))
    except ConfigurationError as exc:
        raise ConfigKeyError((), str(exc)) from None


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def apply_override(doc: dict, key: str, value) -> dict:
    """Copy of ``doc`` with a dotted key set, e.g. ``delay_profile.io_pad``."""
    doc = copy.deepcopy(doc)
    target = doc
    parts = key.split(".")
    for p in parts[:-1]:
        target = target.setdefault(p, {})
        if not isinstance(target, dict):
            raise ConfigKeyError(tuple(parts), "cannot override inside a non-object")
    target[parts[-1]] = value
    return doc


# -- metrics -----------------------------------------------------------------


def measure_energy(delivered: int, energy_per_event_pj: float = ENERGY_PER_EVENT_PJ) -> float:
    """Energy of ``delivered`` events, constant per event, pad energy excluded."""
    return delivered * energy_per_event_pj


def stats(values) -> dict:
    if len(values) == 0:
        return {"count": 0, "min": None, "mean": None, "max": None}
    arr = np.asarray(values, dtype=np.int64)
    return {"count": int(arr.size), "min": int(arr.min()), "mean": float(arr.mean()), "max": int(arr.max())}


def steady_window(n: int, warm: int = WARMUP_EVENTS) -> slice:
    return slice(warm, n - warm) if n > 2 * warm + 1 else slice(0, n)


@dataclass
class RunResult:
    report: dict
    kernel: Kernel
    link: object

    def write_trace(self, path) -> int:
        return self.kernel.export_trace(path)


def run_workload(w: Workload) -> RunResult:
    link = make_link(profile=w.profile, initial_tx=w.initial_tx, fifo_depth=w.fifo_depth)
    k = link.kernel
    for side in SIDES:
        block = link.blocks[side]
        for t, address in getattr(w, side):
            if w.run_limit is None or t <= w.run_limit:
                block.inject(address, t)
    try:
        k.run() if w.run_limit is None else k.run_until(w.run_limit)
    except ProtocolViolation as exc:
        raise SimulationViolation(f"protocol violation: {exc}", excerpt(k)) from exc
    if link.contentions:
        c = link.contentions[0]
        raise SimulationViolation(
            f"bus contention on {c.line} at t={c.at} ps ({len(link.contentions)} records)", excerpt(k, c.at))
    report = build_report(w, link)
    return RunResult(report, k, link)


def excerpt(k: Kernel, around: int | None = None, span: int = 20) -> list[str]:
    trace = k.trace
    if around is None:
        rows = trace[-span:]
    else:
        idx = next((i for i, r in enumerate(trace) if r[0] >= around), len(trace))
        rows = trace[max(0, idx - span):idx + span]
    return [f"{t},{name},{level.char}" for t, name, level, _ in rows]


def build_report(w: Workload, link) -> dict:
    k = link.kernel
    ledger = []
    delivered = {}
    in_flight = {}
    for side in SIDES:
        src = link.blocks[side]
        dst = link.blocks["right" if side == "left" else "left"]
        direction = DIRECTIONS[side]
        if [a for a, _ in dst.delivered] != [a for _, a, _ in src.sent[:len(dst.delivered)]]:
            raise SimulationViolation(f"{direction}: delivered sequence differs from the sent sequence")
        injected_at = {seq: t for seq, _, t in src.injected}
        for (seq, address, _), (_, t_del) in zip(src.sent, dst.delivered):
            t_inj = injected_at[seq]
            ledger.append({"direction": direction, "seq": seq, "address": address,
                           "injected_ps": t_inj, "delivered_ps": t_del, "latency_ps": t_del - t_inj})
        n_inj = len(src.injected)
        queued = src.pending_events()
        on_link = len(src.sent) - len(dst.delivered)
        if n_inj != queued + len(src.sent):
            raise SimulationViolation(f"{direction}: conservation broken ({n_inj} injected, "
                                      f"{queued} queued, {len(src.sent)} sent)")
        delivered[direction] = len(dst.delivered)
        in_flight[direction] = {"offered": len(getattr(w, side)), "injected": n_inj,
                                "delivered": len(dst.delivered), "queued": queued, "on_link": on_link,
                                "in_flight": queued + on_link}
    ledger.sort(key=lambda r: (r["delivered_ps"], r["direction"]))
    total = sum(delivered.values())

    req_rises = [t for t, level in edges(k.trace, "bus.req", k.initial["bus.req"]) if level is HIGH]
    window = steady_window(len(ledger))
    throughput = 0.0
    win = ledger[window]
    if win:
        first_req = req_rises[window.start]
        span_ps = win[-1]["delivered_ps"] - first_req
        throughput = len(win) / (span_ps * 1e-12) if span_ps > 0 else 0.0
    gaps = np.diff(req_rises[steady_window(len(req_rises))]).tolist()
    episodes = switch_episodes(k.trace, k.initial)
    return {
        "schema_version": SCHEMA_VERSION,
        "delivered": delivered,
        "throughput": throughput,
        "t_sw": stats([e.t_sw for e in episodes]),
        "t_sw2req": stats([e.t_sw2req for e in episodes if e.t_sw2req is not None]),
        "t_req2req": stats(gaps),
        "energy_per_event_pj": w.energy_per_event_pj,
        "energy_total": measure_energy(total, w.energy_per_event_pj),
        "delivery_ledger": ledger,
        "in_flight": in_flight,
        "stalls": [{"at": s.at, "where": s.where, "detail": s.detail} for s in k.stalls],
        "final_time_ps": k.now,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True)


# -- calibration -------------------------------------------------------------


def predicted_aggregates(p: DelayProfile) -> dict:
    """Closed-form aggregates of the block timing in picoseconds."""
    io, g, m = p.io_pad, p.gate_step, p.matched_delay
    return {
        "t_sw": 2 * io + g,
        "t_sw2req": io + m,
        "t_req2req": 4 * io + 5 * g + p.fifo_stage + m,
        "bidir_req2req": 6 * io + 7 * g + p.probe_update + m,
    }


def calibrate(t_sw: int = 5 * NS, t_req2req: int = 31 * NS, bidir_req2req: int = 35 * NS,
              gate_step: int = 1 * NS) -> DelayProfile:
    """Delay profile whose simulated aggregates hit the targets (ps).

    ``gate_step`` is held fixed.  The switch-to-request latency is set equal to
    ``t_sw``.  Targets that need a non-positive component raise
    :class:`CalibrationError` naming the binding constraint.
    """
    for name, v in (("t_sw", t_sw), ("t_req2req", t_req2req), ("bidir_req2req", bidir_req2req),
                    ("gate_step", gate_step)):
        if v <= 0:
            raise CalibrationError(f"{name} must be positive")
    if bidir_req2req < t_req2req:
        raise CalibrationError(f"bidir_req2req {bidir_req2req} ps < t_req2req {t_req2req} ps: "
                               "a direction switch cannot make requests closer together")
    g = gate_step
    io = (t_sw - g) // 2
    if io < g:
        raise CalibrationError(f"t_sw {t_sw} ps below the floor 3*gate_step = {3 * g} ps (io_pad >= gate_step)")
    m = t_sw - io
    cycle_floor = 4 * io + 5 * g + m
    fifo = t_req2req - cycle_floor
    if fifo <= 0:
        raise CalibrationError(f"t_req2req {t_req2req} ps not above the minimal 4-phase cycle "
                               f"4*io_pad+5*gate_step+matched_delay = {cycle_floor} ps")
    switch_floor = 6 * io + 7 * g + m
    probe = bidir_req2req - switch_floor
    if probe <= 0:
        raise CalibrationError(f"bidir_req2req {bidir_req2req} ps not above the switching floor "
                               f"6*io_pad+7*gate_step+matched_delay = {switch_floor} ps")
    if probe + 3 * g + io >= 3 * io + 5 * g + fifo:
        raise CalibrationError("probe_update too slow for per-event alternation: the peer's request "
                               "would arrive after the next token reaches the TX buffer")
    return DelayProfile(gate_step=g, io_pad=io, matched_delay=m, fifo_stage=fifo, probe_update=probe)


def saturated_workload(left: int = 0, right: int = 0, *, initial_tx: str = "left",
                       profile: DelayProfile | None = None, fifo_depth: int = 4) -> Workload:
    """Every event offered at t=0 with sequential addresses."""
    return Workload([(0, i & EVENT_MASK) for i in range(left)],
                    [(0, (i + (1 << 20)) & EVENT_MASK) for i in range(right)],
                    profile or DelayProfile(), fifo_depth, None, initial_tx)


def measured_aggregates(profile: DelayProfile, events: int = 40) -> dict:
    """Simulate the calibration scenarios and read the aggregates back."""
    single = run_workload(saturated_workload(left=events, initial_tx="right", profile=profile)).report
    bidir = run_workload(saturated_workload(left=events, right=events, profile=profile)).report
    return {
        "t_sw": single["t_sw"]["max"],
        "t_sw2req": single["t_sw2req"]["max"],
        "t_req2req": single["t_req2req"]["mean"],
        "bidir_req2req": bidir["t_req2req"]["mean"],
    }
