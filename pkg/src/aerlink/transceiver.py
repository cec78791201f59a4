"""The AE transceiver block.

A block owns its switch controller, the TX buffer (4-phase bundled data onto
the bus pads) and the RX buffer (dual-rail ingress with completion detection),
plus one FIFO on each side.  The switch-controller rules are written once, as
the pure function :func:`sw_control_outputs`, and the simulated block calls
that function every time one of its inputs moves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigurationError
from .handshake import (EVENT_BITS, WATCHDOG_PS, DualRailWord, Fifo, StallReport,
                        check_event, event_bits)
from .kernel import HIGH, LOW, Z, DelayProfile, Kernel, Level


class Mode(Enum):
    TX = "TX"
    RX = "RX"
    SWITCHING_TO_TX = "RX->TX"
    SWITCHING_TO_RX = "TX->RX"


@dataclass(frozen=True)
class TransceiverState:
    sw_ack: bool
    sw_req: bool
    tx_en: bool
    rx_en: bool
    rx_p: bool
    tx_p: bool
    tx_in_req: bool = False

    @property
    def mode(self) -> Mode:
        if self.tx_en and self.rx_en:
            raise ConfigurationError("tx_en and rx_en both high")
        if self.tx_en:
            return Mode.TX
        if self.rx_en:
            return Mode.RX
        return Mode.SWITCHING_TO_TX if self.sw_ack else Mode.SWITCHING_TO_RX


@dataclass(frozen=True)
class ResetConfig:
    initial_mode: Mode = Mode.TX
    srst_width: int = 0
    prst_width: int = 0
    # Seeded fault: drop the "initially reset to RX" rx_p exception.
    rx_p_reset_exception: bool = True

    def __post_init__(self):
        if self.initial_mode not in (Mode.TX, Mode.RX):
            raise ConfigurationError("a block resets to TX or RX")
        if self.srst_width < 0 or self.prst_width < 0:
            raise ConfigurationError("reset pulse widths must be >= 0")

    def state(self) -> TransceiverState:
        if self.initial_mode is Mode.TX:
            return TransceiverState(sw_ack=True, sw_req=False, tx_en=True, rx_en=False,
                                    rx_p=False, tx_p=False)
        return TransceiverState(sw_ack=False, sw_req=True, tx_en=False, rx_en=True,
                                rx_p=self.rx_p_reset_exception, tx_p=False)


def reset_state(cfg: ResetConfig) -> TransceiverState:
    return cfg.state()


def check_link_reset(left: ResetConfig, right: ResetConfig) -> None:
    if (left.initial_mode is Mode.TX) == (right.initial_mode is Mode.TX):
        raise ConfigurationError("exactly one block of a link must reset to TX")


def sw_control_outputs(s: TransceiverState) -> dict[str, bool]:
    """Next output levels the switch controller is driving towards.

    Only entries that differ from the current state are returned.
    """
    out = {}
    if not s.sw_ack and s.rx_en and s.rx_p and s.tx_in_req:
        out["sw_ack"] = True                      # request RX -> TX
    elif s.sw_ack and s.sw_req and s.tx_en and not s.tx_p:
        out["sw_ack"] = False                     # grant TX -> RX
    if s.sw_ack and not s.sw_req:                 # latched TX condition
        if s.rx_en:
            out["rx_en"] = False
        elif not s.tx_en:
            out["tx_en"] = True
    elif s.sw_req and not s.sw_ack:               # latched RX condition
        if s.tx_en:
            out["tx_en"] = False
        elif not s.rx_en:
            out["rx_en"] = True
    return out


_FIELDS = ("sw_ack", "sw_req", "tx_en", "rx_en", "rx_p", "tx_p", "tx_in_req")


def sw_control_react(s: TransceiverState, signal: str, level) -> tuple[TransceiverState, dict[str, bool]]:
    """Apply one input edge and return the new state plus requested outputs."""
    if signal not in _FIELDS:
        raise ConfigurationError(f"switch controller has no input {signal!r}")
    s = replace(s, **{signal: bool(int(Level.of(level)))})
    if signal == "rx_en" and not s.rx_en:
        s = replace(s, rx_p=False)
    return s, sw_control_outputs(s)


class Transceiver:
    """One simulated AE transceiver block.

    Signals are declared under ``name`` (``L`` or ``R`` in a link).  The block
    is inert until a :class:`~aerlink.link.BusLink` attaches it.
    """

    def __init__(self, kernel: Kernel, name: str, profile: DelayProfile | None = None,
                 reset: ResetConfig | None = None, *, fifo_depth: int = 4,
                 fifo_overflow: str = "stall", issue_guard: bool = True,
                 watchdog: int = WATCHDOG_PS):
        self.kernel = kernel
        self.name = name
        self.profile = profile or DelayProfile()
        self.reset_config = reset or ResetConfig()
        self.issue_guard = issue_guard
        self.watchdog = watchdog
        self.link = None
        self.peer = None

        s0 = self.reset_config.state()
        self._declare(s0)
        self.tx_fifo = Fifo(fifo_depth, fifo_overflow)
        self.rx_fifo = Fifo(fifo_depth, fifo_overflow)
        self.rx = DualRailWord(kernel, f"{name}.rx", EVENT_BITS, detect_delay=self.profile.gate_step,
                               watchdog=watchdog, on_valid=self._rx_valid, on_neutral=self._rx_neutral)

        self._tx_p = s0.tx_p
        self._token = None            # event presented at the TX buffer input
        self._token_in_transit = None
        self._tx_phase = None         # None | "req" | "release"
        self._tx_timer = None
        self._rx_waiting = None
        self._rx_in_flight = 0
        self._pending: dict[str, Level] = {}
        self._in_reset = False
        self._seq = 0

        self.injected: list[tuple[int, int, int]] = []   # (seq, address, time)
        self.sent: list[tuple[int, int, int]] = []       # (seq, address, req issue time)
        self.delivered: list[tuple[int, int]] = []       # (address, time)
        self.received_words: list[int] = []

        for sig in ("sw_ack", "sw_req", "tx_en", "rx_en", "rx_p", "tx_p", "tx_in_req"):
            kernel.watch(self.sig[sig], self._on_control)
        self._start_reset()

    # -- construction ------------------------------------------------------

    def _declare(self, s0: TransceiverState):
        k, n = self.kernel, self.name
        self.sig = {f: k.declare(f"{n}.{f}", HIGH if getattr(s0, f) else LOW) for f in _FIELDS}
        self.sig["srst"] = k.declare(f"{n}.srst")
        self.sig["prst"] = k.declare(f"{n}.prst")
        tx_pad = LOW if s0.tx_en else Z
        rx_pad = LOW if s0.rx_en else Z
        self.pad_req = k.declare(f"{n}.pad.req", tx_pad, bus=True)
        self.pad_ack = k.declare(f"{n}.pad.ack", rx_pad, bus=True)
        self.pad_data = [k.declare(f"{n}.pad.d{i}", tx_pad, bus=True) for i in range(EVENT_BITS)]
        self._tx_pad_values = {p: LOW for p in [self.pad_req, *self.pad_data]}
        self._ack_value = LOW

    def _start_reset(self):
        cfg = self.reset_config
        if not (cfg.srst_width or cfg.prst_width):
            return
        k = self.kernel
        self._in_reset = True
        k.schedule(self.sig["srst"], HIGH, 0, "reset")
        k.schedule(self.sig["prst"], HIGH, 0, "reset")
        k.schedule(self.sig["srst"], LOW, cfg.srst_width, "reset")
        k.schedule(self.sig["prst"], LOW, cfg.prst_width, "reset")
        k.watch(self.sig["prst"], self._on_prst)
        k.watch(self.sig["srst"], self._on_srst)

    def _on_prst(self, kernel, name, old, new):
        if new is LOW:
            # probes latch their reset value on PRst release
            s0 = self.reset_config.state()
            kernel.schedule(self.sig["rx_p"], HIGH if s0.rx_p else LOW, 0, "prst")
            kernel.schedule(self.sig["tx_p"], LOW, 0, "prst")

    def _on_srst(self, kernel, name, old, new):
        if new is LOW:
            self._in_reset = False
            self._evaluate()

    # -- state -------------------------------------------------------------

    def level(self, field: str) -> Level:
        return self.kernel.read(self.sig[field])

    def state(self) -> TransceiverState:
        r = self.kernel.read
        sig = self.sig
        return TransceiverState(
            sw_ack=r(sig["sw_ack"]) is HIGH, sw_req=r(sig["sw_req"]) is HIGH,
            tx_en=r(sig["tx_en"]) is HIGH, rx_en=r(sig["rx_en"]) is HIGH,
            rx_p=r(sig["rx_p"]) is HIGH, tx_p=self._tx_p,
            tx_in_req=self._token is not None)

    @property
    def mode(self) -> Mode:
        return self.state().mode

    def pending_events(self) -> int:
        """Events accepted or offered on the TX side and not yet on the bus."""
        waiting = self._token is not None and self._tx_phase is None
        return (len(self.tx_fifo) + len(self.tx_fifo.stalled)
                + (self._token_in_transit is not None) + waiting)

    # -- workload ----------------------------------------------------------

    def inject(self, address: int, at: int | None = None) -> int:
        """Offer an event to the TX FIFO at absolute time ``at`` (default now)."""
        check_event(address)
        seq = self._seq
        self._seq += 1
        k = self.kernel
        when = k.now if at is None else at
        if when < k.now:
            raise ConfigurationError(f"injection at {when} ps is in the past (now {k.now})")
        k.call_after(when - k.now, lambda: self._push(seq, address))
        return seq

    def _push(self, seq, address):
        self.injected.append((seq, address, self.kernel.now))
        self.tx_fifo.push((seq, address, self.kernel.now))
        self._advance_tx_fifo()

    def _advance_tx_fifo(self):
        if self._token is not None or self._token_in_transit is not None:
            return
        head = self.tx_fifo.pop()
        if head is None:
            return
        self._token_in_transit = head
        self.kernel.call_after(self.profile.fifo_stage, self._present_token)

    def _present_token(self):
        self._token, self._token_in_transit = self._token_in_transit, None
        self._set(self.sig["tx_in_req"], HIGH, 0, "tx_fifo")

    # -- helpers -----------------------------------------------------------

    def _set(self, name: str, level: Level, after: int, cause: str):
        if self._pending.get(name) == level:
            return
        if name not in self._pending and self.kernel.read(name) == level:
            return
        self._pending[name] = level
        self.kernel.schedule(name, level, after, f"{self.name}.{cause}")

    def _on_control(self, kernel, name, old, new):
        if self._pending.get(name) == new:
            del self._pending[name]
        field = name.split(".", 1)[1]
        if field == "tx_en":
            self._drive_tx_pads(new is HIGH)
        elif field == "rx_en":
            kernel.schedule(self.pad_ack, self._ack_value if new is HIGH else Z, 0, f"{self.name}.rx_en")
            if new is LOW and kernel.read(self.sig["rx_p"]) is HIGH:
                kernel.schedule(self.sig["rx_p"], LOW, 0, f"{self.name}.leave_rx")
        elif field == "tx_p" and new is LOW:
            self._tx_p = False
        self._evaluate()

    def _drive_tx_pads(self, enabled: bool):
        k = self.kernel
        for pad, value in self._tx_pad_values.items():
            k.schedule(pad, value if enabled else Z, 0, f"{self.name}.tx_en")

    def _evaluate(self):
        if self._in_reset or self.link is None:
            return
        p = self.profile
        s = self.state()
        out = sw_control_outputs(s)
        for field, target in out.items():
            level = HIGH if target else LOW
            if field == "sw_ack":
                delay, cause = p.gate_step, ("request" if target else "grant")
            elif field == "rx_en":
                delay = p.io_pad + p.gate_step if target else p.gate_step
                cause = "rx_en"
            else:
                delay = p.io_pad if target else p.gate_step
                cause = "tx_en"
            self._set(self.sig[field], level, delay, cause)
        self._try_issue()

    # -- TX buffer ---------------------------------------------------------

    def _try_issue(self):
        k = self.kernel
        if self._token is None or self._tx_phase is not None:
            return
        if k.read(self.sig["tx_en"]) is not HIGH or "tx_en" in self._pending:
            return
        if self.issue_guard and k.read(self.sig["sw_req"]) is HIGH:
            return
        if k.read(self.link.ack) is not LOW:
            return
        seq, address, injected_at = self._token
        p = self.profile
        self._tx_phase = "req"
        self._tx_p = True
        k.schedule(self.sig["tx_p"], HIGH, 0, f"{self.name}.issue")
        for pad, bit in zip(self.pad_data, event_bits(address)):
            if bit:
                self._tx_pad(pad, HIGH, p.io_pad, "data")
        self._tx_pad(self.pad_req, HIGH, p.matched_delay + p.io_pad, "matched")
        self.sent.append((seq, address, k.now))
        self._tx_timer = k.call_after(p.matched_delay + p.io_pad + self.watchdog, self._tx_stall)

    def _tx_probe_idle(self):
        # a cycle issued since completion keeps the probe up
        if self._tx_phase is None and self._tx_p:
            self._tx_p = False
            self.kernel.schedule(self.sig["tx_p"], LOW, 0, f"{self.name}.tx_probe")
            self._evaluate()

    def _tx_pad(self, pad, level, after, cause):
        self._tx_pad_values[pad] = level
        self.kernel.schedule(pad, level, after, f"{self.name}.{cause}")

    def _tx_stall(self):
        self._tx_timer = None
        self.kernel.stalls.append(StallReport(self.kernel.now, f"{self.name}.tx",
                                              f"no bus acknowledge (phase {self._tx_phase})"))

    def on_bus_ack(self, level: Level):
        k = self.kernel
        p = self.profile
        if self._tx_phase == "req" and level is HIGH:
            if self._tx_timer is not None:
                self._tx_timer.cancel()
                self._tx_timer = None
            self._tx_phase = "release"
            for pad in [self.pad_req, *self.pad_data]:
                if self._tx_pad_values[pad] is HIGH:
                    self._tx_pad(pad, LOW, p.gate_step + p.io_pad, "rtz")
        elif self._tx_phase == "release" and level is LOW:
            self._tx_phase = None
            self._token = None
            self._set(self.sig["tx_in_req"], LOW, 0, "consume")
            k.call_after(p.probe_update, self._tx_probe_idle)
            self._advance_tx_fifo()
        elif level is LOW:
            self._try_issue()

    # -- RX buffer ---------------------------------------------------------

    def on_bus_req(self, level: Level):
        k = self.kernel
        if k.read(self.sig["rx_en"]) is not HIGH or self._tx_phase is not None:
            return
        if level is HIGH:
            word = self.link.read_data()
            self.received_words.append(word)
            self.rx.encode(word, self.profile.gate_step, f"{self.name}.rx_ingress")
        else:
            self.rx.return_to_neutral(self.profile.gate_step, f"{self.name}.rx_rtz")

    def _rx_valid(self, address: int):
        if self.rx_fifo.full():
            self._rx_waiting = address
            return
        self._rx_accept(address)

    def _rx_accept(self, address: int):
        k = self.kernel
        p = self.profile
        accepted = self.rx_fifo.push((address, k.now))
        if accepted:
            self._rx_in_flight += 1
            k.call_after(p.fifo_stage, self._rx_deliver)
        self._ack_value = HIGH
        k.schedule(self.pad_ack, HIGH, p.io_pad, f"{self.name}.rx_ack")
        if k.read(self.sig["rx_p"]) is LOW and k.read(self.sig["rx_en"]) is HIGH:
            self._set(self.sig["rx_p"], HIGH, p.probe_update, "rx_probe")

    def _rx_deliver(self):
        item = self.rx_fifo.pop()
        self._rx_in_flight -= 1
        self.delivered.append((item[0], self.kernel.now))
        if self._rx_waiting is not None and not self.rx_fifo.full():
            address, self._rx_waiting = self._rx_waiting, None
            self._rx_accept(address)

    def _rx_neutral(self):
        self._ack_value = LOW
        self.kernel.schedule(self.pad_ack, LOW, self.profile.io_pad, f"{self.name}.rx_ack")

    def in_flight_rx(self) -> int:
        return len(self.rx_fifo) + (self._rx_waiting is not None)
