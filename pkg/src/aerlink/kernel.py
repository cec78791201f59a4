"""Deterministic discrete-event kernel.

Time is an integer count of picoseconds.  Signals are named wires holding one
of three levels; transitions are queued on a heap ordered by
``(time, insertion sequence)`` so ties always resolve in insertion order and
two identical runs produce identical traces.
"""

from __future__ import annotations

import csv
import heapq
import io
import os
from dataclasses import dataclass, fields
from enum import IntEnum
from typing import Callable, Iterator, NamedTuple

from .errors import ConfigurationError, OscillationError

NS = 1000
MAX_DELTA_ITERATIONS = 10_000


class Level(IntEnum):
    LOW = 0
    HIGH = 1
    Z = 2

    @property
    def char(self) -> str:
        return "Z" if self is Level.Z else str(int(self))

    @classmethod
    def of(cls, value) -> "Level":
        if isinstance(value, Level):
            return value
        if value in ("Z", "z"):
            return cls.Z
        if value in (0, 1, "0", "1", True, False):
            return cls(int(value))
        raise ValueError(f"not a logic level: {value!r}")


LOW, HIGH, Z = Level.LOW, Level.HIGH, Level.Z


class Transition(NamedTuple):
    at: int
    signal: str
    level: Level
    cause: str


class RunSummary(NamedTuple):
    processed_count: int
    final_time: int


@dataclass(frozen=True)
class DelayProfile:
    """Component delays in picoseconds.

    The defaults are the calibrated profile: they reproduce a 5 ns direction
    switch, 5 ns switch-to-request, 31 ns single-direction request spacing and
    35 ns bi-directional request spacing.
    """

    gate_step: int = 1 * NS
    io_pad: int = 2 * NS
    matched_delay: int = 3 * NS
    fifo_stage: int = 15 * NS
    probe_update: int = 13 * NS

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigurationError(f"{f.name} must be an integer ps count, got {value!r}")
            if value <= 0:
                raise ConfigurationError(f"{f.name} must be strictly positive, got {value}")
        if self.matched_delay < self.gate_step:
            raise ConfigurationError("matched_delay must be >= gate_step (bundled-data constraint)")

    def replace(self, **overrides) -> "DelayProfile":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(overrides) - set(values)
        if unknown:
            raise ConfigurationError(f"unknown delay names: {sorted(unknown)}")
        values.update(overrides)
        return DelayProfile(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


Watcher = Callable[["Kernel", str, Level, Level], None]


class Timer:
    __slots__ = ("fn", "cancelled")

    def __init__(self, fn):
        self.fn = fn
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Kernel:
    """Single-threaded event scheduler with a transition trace."""

    def __init__(self):
        self._levels: dict[str, Level] = {}
        self._bus: set[str] = set()
        self._watchers: dict[str, list[Watcher]] = {}
        self._queue: list = []
        self._seq = 0
        self._now = 0
        self._finalized = False
        self.stalls: list = []
        self.initial: dict[str, Level] = {}
        self.trace: list[tuple[int, str, Level, str]] = []

    # -- declaration -------------------------------------------------------

    def declare(self, name: str, level=LOW, *, bus: bool = False) -> str:
        if name in self._levels:
            raise ConfigurationError(f"signal {name!r} declared twice")
        level = Level.of(level)
        if level is Z and not bus:
            raise ConfigurationError(f"HighZ is only legal on bus-attached signals ({name!r})")
        self._levels[name] = level
        self.initial[name] = level
        if bus:
            self._bus.add(name)
        return name

    def declared(self, name: str) -> bool:
        return name in self._levels

    @property
    def signals(self) -> list[str]:
        return list(self._levels)

    def watch(self, name: str, fn: Watcher) -> None:
        self._check(name)
        self._watchers.setdefault(name, []).append(fn)

    # -- scheduling --------------------------------------------------------

    @property
    def now(self) -> int:
        return self._now

    def _check(self, name):
        if name not in self._levels:
            raise ConfigurationError(f"unknown signal {name!r}")

    def schedule(self, name: str, level, after: int = 0, cause: str = "") -> int:
        if self._finalized:
            raise ConfigurationError("simulation already finalized")
        if name not in self._levels:
            raise ConfigurationError(f"unknown signal {name!r}")
        if after < 0:
            raise ValueError(f"negative delay {after}")
        if type(level) is not Level:
            level = Level.of(level)
        if level is Z and name not in self._bus:
            raise ConfigurationError(f"HighZ is only legal on bus-attached signals ({name!r})")
        self._seq += 1
        heapq.heappush(self._queue, (self._now + after, self._seq, name, level, cause))
        return self._seq

    def call_after(self, after: int, fn: Callable[[], None]) -> Timer:
        """Run ``fn`` after a delay.  Timers are not transitions and are not traced."""
        if after < 0:
            raise ValueError(f"negative delay {after}")
        timer = Timer(fn)
        self._seq += 1
        heapq.heappush(self._queue, (self._now + after, self._seq, None, timer, ""))
        return timer

    def read(self, name: str) -> Level:
        try:
            return self._levels[name]
        except KeyError:
            raise ConfigurationError(f"unknown signal {name!r}") from None

    read_signal = read

    # -- execution ---------------------------------------------------------

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, limit: int) -> RunSummary:
        queue = self._queue
        levels = self._levels
        watchers = self._watchers
        trace = self.trace
        processed = 0
        stamp = None
        at_stamp = 0
        while queue and queue[0][0] <= limit:
            at, _, name, payload, cause = heapq.heappop(queue)
            if name is None:
                if payload.cancelled:
                    continue
                self._now = at
                payload.fn()
                continue
            if at != stamp:
                stamp, at_stamp = at, 0
            at_stamp += 1
            if at_stamp > MAX_DELTA_ITERATIONS:
                raise OscillationError(
                    f"more than {MAX_DELTA_ITERATIONS} transitions at t={at} ps; last on {name!r}"
                )
            self._now = at
            old = levels[name]
            levels[name] = payload
            trace.append((at, name, payload, cause))
            processed += 1
            if old != payload:
                for fn in watchers.get(name, ()):
                    fn(self, name, old, payload)
        return RunSummary(processed, self._now)

    def run(self) -> RunSummary:
        """Drain the queue completely."""
        return self.run_until(2**62)

    def finalize(self) -> None:
        self._finalized = True

    # -- trace -------------------------------------------------------------

    def transitions(self) -> Iterator[Transition]:
        for at, name, level, cause in self.trace:
            yield Transition(at, name, level, cause)

    def export_trace(self, sink) -> int:
        """Write the trace as ``time_ps,signal,level`` CSV.  Returns the row count."""
        if isinstance(sink, (str, os.PathLike)):
            with open(sink, "w", newline="") as fh:
                return self.export_trace(fh)
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(("time_ps", "signal", "level"))
        for at, name, level, _ in self.trace:
            writer.writerow((at, name, level.char))
        return len(self.trace)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        self.export_trace(buf)
        return buf.getvalue()


def read_trace_csv(source) -> list[tuple[int, str, Level]]:
    """Parse a trace written by :meth:`Kernel.export_trace`."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_trace_csv(fh)
    reader = csv.reader(source)
    header = next(reader)
    if header != ["time_ps", "signal", "level"]:
        raise ConfigurationError(f"unexpected trace header {header}")
    return [(int(t), name, Level.of(level)) for t, name, level in reader]
