"""Asynchronous channel building blocks.

Pure helpers for the dual-rail code and a bounded FIFO, plus kernel-attached
components: a 4-phase bundled-data channel with a stock receiver, a dual-rail
word with completion detection, and trace scanners for the 4-phase and
bundling disciplines.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .errors import ConfigurationError, ProtocolViolation
from .kernel import HIGH, LOW, Kernel, Level

EVENT_BITS = 26
EVENT_MASK = (1 << EVENT_BITS) - 1
WATCHDOG_PS = 1_000_000


def check_event(e: int) -> int:
    if not isinstance(e, int) or isinstance(e, bool) or not 0 <= e <= EVENT_MASK:
        raise ConfigurationError(f"address event must be a 26-bit unsigned int, got {e!r}")
    return e


def event_bits(e: int, width: int = EVENT_BITS) -> list[int]:
    """LSB-first bit list."""
    return [(e >> i) & 1 for i in range(width)]


def bits_to_event(bits: Iterable[int]) -> int:
    return sum(int(b) << i for i, b in enumerate(bits))


@dataclass(frozen=True)
class StallReport:
    at: int
    where: str
    detail: str


# -- dual rail ---------------------------------------------------------------


class Validity(Enum):
    VALID = "valid"
    NEUTRAL = "neutral"
    INTERMEDIATE = "intermediate"
    ILLEGAL = "illegal"


NEUTRAL_PAIR = (0, 0)


def dual_rail_encode(e: int, width: int = EVENT_BITS) -> list[tuple[int, int]]:
    """(true_rail, false_rail) per bit, LSB first."""
    return [(1, 0) if b else (0, 1) for b in event_bits(e, width)]


def dual_rail_decode(pairs: Sequence[tuple[int, int]]) -> int:
    if dual_rail_validity(pairs) is not Validity.VALID:
        raise ProtocolViolation("cannot decode a dual-rail word that is not valid")
    return bits_to_event(t for t, _ in pairs)


def dual_rail_validity(pairs: Sequence[tuple[int, int]]) -> Validity:
    n_valid = n_neutral = 0
    for t, f in pairs:
        if t and f:
            return Validity.ILLEGAL
        if t or f:
            n_valid += 1
        else:
            n_neutral += 1
    if n_neutral == len(pairs):
        return Validity.NEUTRAL
    if n_valid == len(pairs):
        return Validity.VALID
    return Validity.INTERMEDIATE


class DualRailWord:
    """A word of rail pairs living in a kernel, with completion detection.

    ``on_valid(event)`` fires one ``detect_delay`` after the last pair becomes
    valid; ``on_neutral()`` fires one ``detect_delay`` after the last pair
    returns to neutral.  A word that leaves neutral and does not complete within
    the watchdog is logged as a stall.  Any pair reaching (1, 1) raises
    :class:`ProtocolViolation` from inside the run.
    """

    def __init__(self, kernel: Kernel, prefix: str, width: int = EVENT_BITS, *,
                 detect_delay: int = 1000, watchdog: int = WATCHDOG_PS,
                 on_valid: Callable[[int], None] | None = None,
                 on_neutral: Callable[[], None] | None = None):
        self.kernel = kernel
        self.prefix = prefix
        self.width = width
        self.detect_delay = detect_delay
        self.watchdog = watchdog
        self.on_valid = on_valid
        self.on_neutral = on_neutral
        self.true_rails = [kernel.declare(f"{prefix}.t{i}") for i in range(width)]
        self.false_rails = [kernel.declare(f"{prefix}.f{i}") for i in range(width)]
        self.valid_signal = kernel.declare(f"{prefix}.valid")
        self._pair_state = [0] * width
        self._n_valid = 0
        self._timer = None
        self._detected = False
        for i in range(width):
            kernel.watch(self.true_rails[i], self._rail_watcher(i))
            kernel.watch(self.false_rails[i], self._rail_watcher(i))
        kernel.watch(self.valid_signal, self._on_valid_edge)

    def _rail_watcher(self, i):
        t_name, f_name = self.true_rails[i], self.false_rails[i]

        def watcher(kernel, name, old, new):
            t, f = kernel.read(t_name), kernel.read(f_name)
            if t and f:
                raise ProtocolViolation(f"illegal dual-rail code (1,1) on {self.prefix} bit {i} at t={kernel.now}")
            was = self._pair_state[i]
            now = 1 if (t or f) else 0
            if was == now:
                return
            self._pair_state[i] = now
            self._n_valid += 1 if now else -1
            if now and self._n_valid == 1 and self._timer is None:
                self._timer = kernel.call_after(self.watchdog, self._stall)
            if self._n_valid == self.width:
                self._cancel()
                kernel.schedule(self.valid_signal, HIGH, self.detect_delay, cause=f"{self.prefix}.complete")
            elif self._n_valid == 0:
                self._cancel()
                kernel.schedule(self.valid_signal, LOW, self.detect_delay, cause=f"{self.prefix}.neutral")

        return watcher

    def _cancel(self):
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def _stall(self):
        self._timer = None
        self.kernel.stalls.append(StallReport(
            self.kernel.now, self.prefix,
            f"word stuck {self.validity().value} with {self._n_valid}/{self.width} pairs valid"))

    def _on_valid_edge(self, kernel, name, old, new):
        if new is HIGH:
            if self.on_valid is not None:
                self.on_valid(self.decode())
        elif self.on_neutral is not None:
            self.on_neutral()

    def pairs(self) -> list[tuple[int, int]]:
        k = self.kernel
        return [(int(k.read(t)), int(k.read(f))) for t, f in zip(self.true_rails, self.false_rails)]

    def validity(self) -> Validity:
        return dual_rail_validity(self.pairs())

    def decode(self) -> int:
        return dual_rail_decode(self.pairs())

    def encode(self, e: int, after: int = 0, cause: str = "encode", *, suppress: Iterable[int] = ()) -> None:
        """Raise one rail per pair.  ``suppress`` lists bit indices left neutral (fault fixtures)."""
        if self.validity() is not Validity.NEUTRAL:
            raise ProtocolViolation(f"encode on non-neutral word {self.prefix}")
        skip = set(suppress)
        for i, (t, f) in enumerate(dual_rail_encode(e, self.width)):
            if i in skip:
                continue
            self.kernel.schedule(self.true_rails[i] if t else self.false_rails[i], HIGH, after, cause)

    def return_to_neutral(self, after: int = 0, cause: str = "rtz") -> None:
        k = self.kernel
        for t, f in zip(self.true_rails, self.false_rails):
            if k.read(t):
                k.schedule(t, LOW, after, cause)
            if k.read(f):
                k.schedule(f, LOW, after, cause)


# -- bundled data ------------------------------------------------------------


class BundledChannel:
    """4-phase bundled-data channel: req, ack and ``width`` data lines.

    The sender side lives here (:meth:`send`); pair it with a
    :class:`BundledReceiver` or drive ``ack`` from elsewhere.
    """

    def __init__(self, kernel: Kernel, prefix: str, width: int = EVENT_BITS, *,
                 matched_delay: int = 3000, step: int = 1000, watchdog: int = WATCHDOG_PS):
        if matched_delay < step:
            raise ConfigurationError("matched_delay must be >= step")
        self.kernel = kernel
        self.prefix = prefix
        self.width = width
        self.matched_delay = matched_delay
        self.step = step
        self.watchdog = watchdog
        self.req = kernel.declare(f"{prefix}.req")
        self.ack = kernel.declare(f"{prefix}.ack")
        self.data = [kernel.declare(f"{prefix}.d{i}") for i in range(width)]
        self._busy = False
        self._on_done = None
        self._timer = None
        self.completions: list[int] = []
        kernel.watch(self.ack, self._on_ack)

    def idle(self) -> bool:
        k = self.kernel
        return not self._busy and k.read(self.req) is LOW and k.read(self.ack) is LOW

    def send(self, e: int, on_done: Callable[[int], None] | None = None) -> None:
        check_event(e)
        k = self.kernel
        if k.read(self.req) is not LOW or k.read(self.ack) is not LOW or self._busy:
            raise ProtocolViolation(f"send on busy channel {self.prefix}")
        self._busy = True
        self._on_done = on_done
        for line, b in zip(self.data, event_bits(e, self.width)):
            if b:
                k.schedule(line, HIGH, 0, f"{self.prefix}.drive")
        k.schedule(self.req, HIGH, self.matched_delay, f"{self.prefix}.matched")
        self._timer = k.call_after(self.matched_delay + self.watchdog, self._stall)

    def _stall(self):
        self._timer = None
        self.kernel.stalls.append(StallReport(self.kernel.now, self.prefix, "no acknowledge within watchdog"))

    def _on_ack(self, kernel, name, old, new):
        if new is HIGH:
            if self._timer is not None:
                self._timer.cancel()
                self._timer = None
            kernel.schedule(self.req, LOW, self.step, f"{self.prefix}.release")
            for line in self.data:
                if kernel.read(line):
                    kernel.schedule(line, LOW, self.step, f"{self.prefix}.rtz")
        else:
            self._busy = False
            self.completions.append(kernel.now)
            done, self._on_done = self._on_done, None
            if done is not None:
                done(kernel.now)


class BundledReceiver:
    """Acknowledges a :class:`BundledChannel`, reading data on ``req`` rising."""

    def __init__(self, channel: BundledChannel, delay: int = 1000, *, stuck: bool = False):
        self.channel = channel
        self.delay = delay
        self.stuck = stuck
        self.received: list[int] = []
        channel.kernel.watch(channel.req, self._on_req)

    def _on_req(self, kernel, name, old, new):
        if self.stuck:
            return
        ch = self.channel
        if new is HIGH:
            self.received.append(bits_to_event(int(kernel.read(d)) for d in ch.data))
            kernel.schedule(ch.ack, HIGH, self.delay, f"{ch.prefix}.rx_ack")
        else:
            kernel.schedule(ch.ack, LOW, self.delay, f"{ch.prefix}.rx_ack")


# -- FIFO --------------------------------------------------------------------


class Fifo:
    """Bounded FIFO with back-pressure.

    A push on a full FIFO is held (the producer's handshake stalls) and is
    admitted by the next pop.  ``overflow="drop"`` discards instead; it exists
    only as a seeded fault for the verification tests.
    """

    def __init__(self, depth: int = 4, overflow: str = "stall"):
        if depth < 1:
            raise ConfigurationError(f"FIFO depth must be positive, got {depth}")
        if overflow not in ("stall", "drop"):
            raise ConfigurationError(f"unknown overflow policy {overflow!r}")
        self.depth = depth
        self.overflow = overflow
        self.slots: deque = deque()
        self.stalled: deque = deque()
        self.dropped: list = []

    def __len__(self):
        return len(self.slots)

    @property
    def occupancy(self) -> int:
        return len(self.slots)

    def full(self) -> bool:
        return len(self.slots) >= self.depth

    def push(self, e) -> bool:
        """True if accepted now; False if the push is stalled (or dropped)."""
        if not self.full() and not self.stalled:
            self.slots.append(e)
            return True
        if self.overflow == "drop":
            self.dropped.append(e)
        else:
            self.stalled.append(e)
        return False

    def peek(self):
        return self.slots[0] if self.slots else None

    def pop(self):
        """Oldest event, or None when empty (the consumer stalls)."""
        if not self.slots:
            return None
        e = self.slots.popleft()
        if self.stalled:
            self.slots.append(self.stalled.popleft())
        return e


# -- trace scanners ----------------------------------------------------------


def edges(trace, name: str, initial: Level | None = None):
    """(time, level) for every level change of ``name`` in a trace.

    With ``initial`` unknown the first record of ``name`` counts as an edge.
    """
    last = initial
    out = []
    for rec in trace:
        if rec[1] != name:
            continue
        level = Level(rec[2])
        if level != last:
            out.append((rec[0], level))
        last = level
    return out


def check_four_phase(trace, req: str, ack: str) -> list[str]:
    """Violations of the (req+ ack+ req- ack-)* edge order."""
    expected = [(req, HIGH), (ack, HIGH), (req, LOW), (ack, LOW)]
    last = {req: LOW, ack: LOW}
    phase = 0
    problems = []
    for rec in trace:
        name = rec[1]
        if name not in last:
            continue
        level = Level(rec[2])
        if level == last[name]:
            continue
        last[name] = level
        if (name, level) != expected[phase]:
            problems.append(f"t={rec[0]}: {name}->{level.char} out of order (expected "
                            f"{expected[phase][0]}->{expected[phase][1].char})")
        else:
            phase = (phase + 1) % 4
    return problems


def check_bundling(trace, req: str, ack: str, data: Sequence[str]) -> list[str]:
    """Data-line changes between req rising and ack rising."""
    data = set(data)
    levels = {req: LOW, ack: LOW}
    current = {}
    window = False
    problems = []
    for rec in trace:
        name = rec[1]
        level = Level(rec[2])
        if name in data:
            if window and current.get(name, LOW) != level:
                problems.append(f"t={rec[0]}: {name} changed inside the bundling window")
            current[name] = level
            continue
        if name not in levels or levels[name] == level:
            continue
        levels[name] = level
        if name == req and level is HIGH:
            window = True
        elif name == ack and level is HIGH:
            window = False
    return problems


def check_dual_rail(trace, prefix: str, width: int = EVENT_BITS) -> list[str]:
    """Instants where a rail pair of ``prefix`` sits at (1, 1)."""
    rails = {}
    for i in range(width):
        rails[f"{prefix}.t{i}"] = (i, 0)
        rails[f"{prefix}.f{i}"] = (i, 1)
    pairs = [[0, 0] for _ in range(width)]
    problems = []
    for rec in trace:
        hit = rails.get(rec[1])
        if hit is None:
            continue
        i, r = hit
        pairs[i][r] = int(Level(rec[2]) is HIGH)
        if pairs[i] == [1, 1]:
            problems.append(f"t={rec[0]}: pair {i} of {prefix} is (1, 1)")
    return problems
