"""The shared AER bus between two transceiver blocks.

Each block drives the bus through tri-state pads (``<side>.pad.*``).  The link
resolves every bus line from the two pads, keeps the last driven value when
both sides release (bus keeper), and records contention whenever both pads of
one line drive at the same time.  It also cross-wires each block's ``sw_ack``
onto the peer's ``sw_req`` through one pad delay.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigurationError, SimulationViolation
from .handshake import EVENT_BITS, WATCHDOG_PS, StallReport, bits_to_event, edges
from .kernel import HIGH, LOW, Z, DelayProfile, Kernel, Level
from .transceiver import Mode, ResetConfig, Transceiver, check_link_reset

SIDES = ("left", "right")
SIDE_PREFIX = {"left": "L", "right": "R"}


@dataclass(frozen=True)
class Contention:
    at: int
    line: str
    left: Level
    right: Level


@dataclass(frozen=True)
class LineState:
    left: Level
    right: Level
    resolved: Level | str     # a Level, or "contention"


@dataclass
class BusSnapshot:
    at: int
    lines: dict[str, LineState] = field(default_factory=dict)

    @property
    def contention(self) -> list[str]:
        return [name for name, st in self.lines.items() if st.resolved == "contention"]

    def value(self, names) -> int:
        return bits_to_event(int(self.lines[n].resolved) for n in names)


class SwitchEpisode(NamedTuple):
    granter: str
    grant_at: int
    settled_at: int
    first_req_at: int | None

    @property
    def t_sw(self) -> int:
        return self.settled_at - self.grant_at

    @property
    def t_sw2req(self) -> int | None:
        return None if self.first_req_at is None else self.first_req_at - self.settled_at


class BusLink:
    def __init__(self, kernel: Kernel, profile: DelayProfile | None = None):
        self.kernel = kernel
        self.profile = profile or DelayProfile()
        self.req = kernel.declare("bus.req", LOW, bus=True)
        self.ack = kernel.declare("bus.ack", LOW, bus=True)
        self.data = [kernel.declare(f"bus.d{i}", LOW, bus=True) for i in range(EVENT_BITS)]
        self.blocks: dict[str, Transceiver] = {}
        self.contentions: list[Contention] = []
        self._wire_target: dict[str, Level] = {}
        self._pads: dict[str, dict[str, str]] = {}

    @property
    def lines(self) -> list[str]:
        return [self.req, self.ack, *self.data]

    def read_data(self) -> int:
        r = self.kernel.read
        return bits_to_event(int(r(d)) for d in self.data)

    @property
    def runnable(self) -> bool:
        return len(self.blocks) == 2

    def attach_block(self, side: str, block: Transceiver) -> "BusLink":
        if side not in SIDES:
            raise ConfigurationError(f"side must be one of {SIDES}, got {side!r}")
        if side in self.blocks:
            raise ConfigurationError(f"{side} side already occupied")
        if block.link is not None:
            raise ConfigurationError(f"block {block.name} is already attached")
        self.blocks[side] = block
        k = self.kernel
        pads = {self.req: block.pad_req, self.ack: block.pad_ack}
        pads.update(zip(self.data, block.pad_data))
        self._pads[side] = pads
        for line, pad in pads.items():
            k.watch(pad, self._pad_watcher(line))
        if self.runnable:
            self._wire()
        return self

    def _wire(self):
        left, right = self.blocks["left"], self.blocks["right"]
        check_link_reset(left.reset_config, right.reset_config)
        k = self.kernel
        io = self.profile.io_pad
        for a, b in ((left, right), (right, left)):
            a.link, a.peer = self, b
            k.watch(a.sig["sw_ack"], self._crossing(b.sig["sw_req"], io))
        k.watch(self.req, self._on_req)
        k.watch(self.ack, self._on_ack)
        for block in (left, right):
            block._evaluate()

    @staticmethod
    def _crossing(target: str, delay: int):
        def watcher(kernel, name, old, new):
            kernel.schedule(target, new, delay, "link.cross")
        return watcher

    def _pad_watcher(self, line: str):
        def watcher(kernel, name, old, new):
            self._resolve(line)
        return watcher

    def _line_state(self, line: str) -> LineState:
        r = self.kernel.read
        left = r(self._pads["left"][line]) if "left" in self._pads else Z
        right = r(self._pads["right"][line]) if "right" in self._pads else Z
        if left is not Z and right is not Z:
            resolved = "contention"
        elif left is not Z:
            resolved = left
        elif right is not Z:
            resolved = right
        else:
            resolved = self._wire_target.get(line, r(line))
        return LineState(left, right, resolved)

    def _resolve(self, line: str):
        read = self.kernel.read
        left = read(self._pads["left"][line]) if "left" in self._pads else Z
        right = read(self._pads["right"][line]) if "right" in self._pads else Z
        if left is not Z and right is not Z:
            self.contentions.append(Contention(self.kernel.now, line, left, right))
            return
        resolved = left if left is not Z else right
        if resolved is Z:
            return
        current = self._wire_target.get(line)
        if current is None:
            current = read(line)
        if resolved != current:
            self._wire_target[line] = resolved
            self.kernel.schedule(line, resolved, 0, "bus.resolve")

    def _on_req(self, kernel, name, old, new):
        for side in SIDES:
            self.blocks[side].on_bus_req(new)

    def _on_ack(self, kernel, name, old, new):
        for side in SIDES:
            self.blocks[side].on_bus_ack(new)

    def resolve_lines(self) -> BusSnapshot:
        if not self.runnable:
            raise ConfigurationError("link needs both blocks attached")
        snap = BusSnapshot(self.kernel.now)
        for line in self.lines:
            snap.lines[line] = self._line_state(line)
        return snap

    def tx_side(self) -> str | None:
        for side in SIDES:
            if self.blocks[side].mode is Mode.TX:
                return side
        return None


def make_link(kernel: Kernel | None = None, profile: DelayProfile | None = None, *,
              initial_tx: str = "left", fifo_depth: int = 4, **block_options) -> BusLink:
    """Two blocks reset with ``initial_tx`` transmitting, attached to one bus."""
    if initial_tx not in SIDES:
        raise ConfigurationError(f"initial_tx must be one of {SIDES}")
    kernel = kernel or Kernel()
    profile = profile or DelayProfile()
    rx_p_exception = block_options.pop("rx_p_reset_exception", True)
    link = BusLink(kernel, profile)
    for side in SIDES:
        mode = Mode.TX if side == initial_tx else Mode.RX
        cfg = ResetConfig(initial_mode=mode, rx_p_reset_exception=rx_p_exception)
        block = Transceiver(kernel, SIDE_PREFIX[side], profile, cfg, fifo_depth=fifo_depth, **block_options)
        link.attach_block(side, block)
    return link


def switch_episodes(trace, initial: dict | None = None) -> list[SwitchEpisode]:
    """Direction switches found in a trace, measured edge to edge.

    The grant is the granter's ``sw_ack`` falling edge.  The switch is settled
    once the granter's ``rx_en`` and the requester's ``tx_en`` have both risen;
    the first request is the next ``bus.req`` rising edge.
    """
    initial = initial or {}
    ed = {name: edges(trace, name, initial.get(name)) for name in
          ("L.sw_ack", "R.sw_ack", "L.rx_en", "R.rx_en", "L.tx_en", "R.tx_en", "bus.req")}

    rises = {name: [t for t, level in e if level is HIGH] for name, e in ed.items()}

    def first_rise(name, after):
        times = rises[name]
        i = bisect_left(times, after)
        return times[i] if i < len(times) else None

    episodes = []
    for granter, requester in (("L", "R"), ("R", "L")):
        for t, level in ed[f"{granter}.sw_ack"]:
            if level is not LOW:
                continue
            rx = first_rise(f"{granter}.rx_en", t)
            tx = first_rise(f"{requester}.tx_en", t)
            if rx is None or tx is None:
                continue
            settled = max(rx, tx)
            episodes.append(SwitchEpisode(granter, t, settled, first_rise("bus.req", settled)))
    episodes.sort(key=lambda e: e.grant_at)
    return episodes


def direction_switch_episode(link: BusLink, address: int = 0, *, watchdog: int = WATCHDOG_PS) -> SwitchEpisode:
    """Drive one direction switch from the current steady state and measure it."""
    tx = link.tx_side()
    if tx is None:
        raise ConfigurationError("link is not in a steady direction")
    other = link.blocks["right" if tx == "left" else "left"]
    k = link.kernel
    start = k.now
    n_before = len(switch_episodes(k.trace, k.initial))
    if other.pending_events() == 0:
        other.inject(address)
    deadline = start + watchdog
    cursor = start
    while cursor < deadline and k.pending():
        cursor = min(deadline, cursor + 10_000)
        k.run_until(cursor)
        found = switch_episodes(k.trace, k.initial)
        if len(found) > n_before and found[n_before].first_req_at is not None:
            return found[n_before]
    report = StallReport(k.now, "link", "direction switch did not complete within watchdog")
    k.stalls.append(report)
    raise SimulationViolation(report)


def mode_history(trace, initial: dict, prefix: str) -> list[tuple[int, Mode]]:
    """Mode of one block after every change, rebuilt from the trace alone."""
    fields = ("sw_ack", "tx_en", "rx_en")
    names = {f"{prefix}.{f}": f for f in fields}
    cur = {f: initial[f"{prefix}.{f}"] is HIGH for f in fields}

    def mode():
        if cur["tx_en"]:
            return Mode.TX
        if cur["rx_en"]:
            return Mode.RX
        return Mode.SWITCHING_TO_TX if cur["sw_ack"] else Mode.SWITCHING_TO_RX

    out = [(0, mode())]
    for t, name, level, *_ in trace:
        f = names.get(name)
        if f is None:
            continue
        cur[f] = level is HIGH
        m = mode()
        if m is not out[-1][1]:
            out.append((t, m))
    return out
