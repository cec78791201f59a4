"""Acceptance criteria, one test each, with a pass/fail line per criterion."""

import json
import time
from importlib.resources import files

import numpy as np
import pytest
from conftest import record_criterion

from aerlink.checker import MUTATIONS, ExplorationBound, Model, Mutations, check_all, explore, replay_reproduces
from aerlink.handshake import (EVENT_MASK, check_bundling, check_dual_rail, check_four_phase, dual_rail_decode,
                               dual_rail_encode)
from aerlink.harness import Workload, dumps_report, run_workload, workload_from_dict
from aerlink.kernel import NS
from aerlink.link import make_link, mode_history
from aerlink.transceiver import Mode

TOL = 0.01
NS_TICK = 1          # one kernel tick, in ps


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    record_criterion(line)
    assert ok, line


def fixture_workload(name):
    return workload_from_dict(json.loads(files("aerlink").joinpath("fixtures", name).read_text()))


@pytest.fixture(scope="module")
def one_direction():
    return run_workload(fixture_workload("one-direction.json"))


@pytest.fixture(scope="module")
def bi_direction():
    return run_workload(fixture_workload("bi-direction.json"))


def within(value, target, tol=TOL):
    return abs(value - target) <= tol * target


def test_criterion_1_single_direction_throughput(one_direction):
    rep = one_direction.report
    gap = rep["t_req2req"]
    thr = rep["throughput"]
    ok = (rep["delivered"]["left_to_right"] == 10_000
          and within(gap["mean"], 31 * NS) and gap["min"] == gap["max"]
          and within(thr, 32.3e6))
    verdict(1, ok, f"t_req2req={gap['mean'] / NS:.3f} ns (target 31), "
                   f"throughput={thr / 1e6:.3f} M/s (target 32.3, tol 1%)")


def test_criterion_2_bidirectional_throughput(bi_direction):
    rep = bi_direction.report
    dirs = [r["direction"] for r in rep["delivery_ledger"]]
    alternating = all(a != b for a, b in zip(dirs, dirs[1:]))
    gap = rep["t_req2req"]
    thr = rep["throughput"]
    ok = (alternating and sum(rep["delivered"].values()) == 10_000
          and within(gap["mean"], 35 * NS) and gap["min"] == gap["max"]
          and within(thr, 28.6e6))
    verdict(2, ok, f"alternating={alternating}, t_req2req={gap['mean'] / NS:.3f} ns (target 35), "
                   f"throughput={thr / 1e6:.3f} M/s (target 28.6, tol 1%)")


def test_criterion_3_switch_latency(one_direction, bi_direction):
    values = {}
    for name, result in (("one-direction", one_direction), ("bi-direction", bi_direction)):
        for key in ("t_sw", "t_sw2req"):
            s = result.report[key]
            values[(name, key)] = (s["min"], s["max"], s["count"])
    ok = all(c > 0 and abs(lo - 5 * NS) <= NS_TICK and abs(hi - 5 * NS) <= NS_TICK
             for lo, hi, c in values.values())
    detail = ", ".join(f"{n}.{k}=[{lo},{hi}] ps x{c}" for (n, k), (lo, hi, c) in values.items())
    verdict(3, ok, f"{detail} (target 5000 ps, tol 1 ps)")


def test_criterion_4_energy(one_direction, bi_direction):
    rows = []
    ok = True
    for result in (one_direction, bi_direction):
        rep = result.report
        total = sum(rep["delivered"].values())
        ok &= rep["energy_total"] == total * 11.0
        rows.append(f"{total} events -> {rep['energy_total']:.1f} pJ")
    verdict(4, ok, "; ".join(rows) + " (11 pJ/event, exact)")


MODE_SWITCH_ROWS = [
    # (stimulus at this block's pins, expected modes for L and R)
    ("reset", [Mode.TX], [Mode.RX]),
    ("sw_req L+", [Mode.TX], [Mode.RX]),
    ("sw_ack L-", [Mode.TX, Mode.SWITCHING_TO_RX, Mode.RX], [Mode.RX, Mode.SWITCHING_TO_TX, Mode.TX]),
    ("sw_ack L+", [Mode.RX], [Mode.TX]),
    ("sw_req L-", [Mode.RX, Mode.SWITCHING_TO_TX, Mode.TX], [Mode.TX, Mode.SWITCHING_TO_RX, Mode.RX]),
]


def stimulus_times(k):
    """Per block, the time each row's edge appears on that block's own pins.

    The left columns are sw_req L (= sw_ack R) and sw_ack L (= sw_req R); rows
    2-5 are req+, ack-, ack+, req- of those columns.
    """
    def edge_times(name):
        last, out = k.initial[name], []
        for t, n, lvl, _ in k.trace:
            if n == name and lvl != last:
                out.append(t)
                last = lvl
        return out

    pins = {"L": ("L.sw_req", "L.sw_ack"), "R": ("R.sw_ack", "R.sw_req")}
    times = {}
    for side, (req_col, ack_col) in pins.items():
        req, ack = edge_times(req_col), edge_times(ack_col)
        times[side] = [0, req[0], ack[0], ack[1], req[1]]
    return times


def modes_between(history, start, end):
    seen = [m for t, m in history if t <= start][-1:]
    seen += [m for t, m in history if start < t < end]
    return seen


def test_criterion_5_mode_switch_rows():
    link = make_link(initial_tx="left")
    link.blocks["left"].inject(1, 0)
    link.blocks["left"].inject(2, 0)
    link.blocks["right"].inject(3, 0)
    k = link.kernel
    k.run()
    stim = stimulus_times(k)
    failures = []
    for side in ("L", "R"):
        history = mode_history(k.trace, k.initial, side)
        bounds = stim[side] + [k.now + 1]
        for row, (label, *expected) in enumerate(MODE_SWITCH_ROWS):
            want = expected[0] if side == "L" else expected[1]
            got = modes_between(history, bounds[row], bounds[row + 1])
            if got != want:
                failures.append(f"row {row + 1} ({label}) {side}: {[m.value for m in got]}")
    delivered = ([a for a, _ in link.blocks["right"].delivered], [a for a, _ in link.blocks["left"].delivered])
    ok = not failures and delivered == ([1, 2], [3])
    verdict(5, ok, "all five rows match on both blocks" if ok else "; ".join(failures))


def test_criterion_6_checker():
    started = time.perf_counter()
    g = explore(ExplorationBound((2, 2), depth=2))
    main = {v.property: v.passed for v in check_all(g)}
    bounds = {
        "drop-issue-guard": (ExplorationBound((1, 1), depth=1), "mutex"),
        "drop-rx-p-exception": (ExplorationBound((0, 2), depth=2), "deadlock"),
        "drop-fifo-backpressure": (ExplorationBound((2, 2), depth=1), "delivery"),
    }
    caught = {}
    for name in MUTATIONS:
        bound, prop = bounds[name]
        m = Mutations.named(name)
        v = next(v for v in check_all(explore(bound, m)) if v.property == prop)
        caught[name] = (not v.passed) and bool(v.path) and replay_reproduces(Model(bound, m), v)
    elapsed = time.perf_counter() - started
    ok = g.frontier_exhausted and all(main.values()) and all(caught.values()) and elapsed < 60
    verdict(6, ok, f"(2,2,2): {len(g)} states, exhausted={g.frontier_exhausted}, {main}; "
                   f"mutations caught+replayed={caught}; {elapsed:.1f} s (limit 60 s)")


def random_workload(rng):
    def side():
        n = int(rng.integers(0, 12))
        times = np.sort(rng.integers(0, 500 * NS, size=n))
        return [(int(t), int(a)) for t, a in zip(times, rng.integers(0, EVENT_MASK + 1, size=n))]
    limit = None if rng.random() < 0.5 else int(rng.integers(50 * NS, 800 * NS))
    return Workload(side(), side(), fifo_depth=int(rng.integers(1, 5)), run_limit=limit,
                    initial_tx=str(rng.choice(["left", "right"])))


def test_criterion_7_property_suites():
    rng = np.random.default_rng(2024)
    words = rng.integers(0, EVENT_MASK + 1, size=10_000)
    round_trip = all(dual_rail_decode(dual_rail_encode(int(e))) == e for e in words)
    problems = {"four-phase": 0, "bundling": 0, "dual-rail": 0, "determinism": 0, "conservation": 0}
    runs = 40
    for _ in range(runs):
        w = random_workload(rng)
        a, b = run_workload(w), run_workload(w)
        tr = a.kernel.trace
        problems["four-phase"] += bool(check_four_phase(tr, "bus.req", "bus.ack"))
        problems["bundling"] += bool(check_bundling(tr, "bus.req", "bus.ack", [f"bus.d{i}" for i in range(26)]))
        problems["dual-rail"] += bool(check_dual_rail(tr, "L.rx") or check_dual_rail(tr, "R.rx"))
        problems["determinism"] += (dumps_report(a.report) != dumps_report(b.report)
                                    or a.kernel.trace_csv() != b.kernel.trace_csv())
        rows = a.report["in_flight"].values()
        problems["conservation"] += not all(r["injected"] == r["delivered"] + r["in_flight"] for r in rows)
    ok = round_trip and not any(problems.values())
    verdict(7, ok, f"round-trip over {len(words)} words={round_trip}; "
                   f"violations over {runs} random workloads: {problems}")
