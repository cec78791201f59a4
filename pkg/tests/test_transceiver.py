from dataclasses import replace

import pytest

from aerlink.errors import ConfigurationError
from aerlink.handshake import edges
from aerlink.kernel import HIGH, LOW, DelayProfile
from aerlink.link import make_link, mode_history
from aerlink.transceiver import (Mode, ResetConfig, TransceiverState, check_link_reset,
                                 sw_control_outputs, sw_control_react)


def state(**kw):
    base = dict(sw_ack=False, sw_req=True, tx_en=False, rx_en=True, rx_p=True, tx_p=False, tx_in_req=False)
    base.update(kw)
    return TransceiverState(**base)


def test_reset_states():
    tx = ResetConfig(Mode.TX).state()
    rx = ResetConfig(Mode.RX).state()
    assert (tx.sw_ack, tx.tx_en, tx.rx_p, tx.mode) == (True, True, False, Mode.TX)
    assert (rx.sw_ack, rx.rx_en, rx.rx_p, rx.mode) == (False, True, True, Mode.RX)
    assert ResetConfig(Mode.RX, rx_p_reset_exception=False).state().rx_p is False


def test_link_reset_needs_exactly_one_tx():
    check_link_reset(ResetConfig(Mode.TX), ResetConfig(Mode.RX))
    with pytest.raises(ConfigurationError):
        check_link_reset(ResetConfig(Mode.TX), ResetConfig(Mode.TX))
    with pytest.raises(ConfigurationError):
        check_link_reset(ResetConfig(Mode.RX), ResetConfig(Mode.RX))
    with pytest.raises(ConfigurationError):
        ResetConfig(Mode.SWITCHING_TO_TX)


def test_steady_states_need_no_action():
    assert sw_control_outputs(ResetConfig(Mode.TX).state()) == {}
    assert sw_control_outputs(ResetConfig(Mode.RX).state()) == {}


def test_request_needs_one_received_event():
    assert sw_control_outputs(state(rx_p=False, tx_in_req=True)) == {}
    assert sw_control_outputs(state(rx_p=True, tx_in_req=True)) == {"sw_ack": True}
    assert sw_control_outputs(state(rx_p=True, tx_in_req=False)) == {}


def test_grant_waits_for_tx_probe():
    busy = state(sw_ack=True, sw_req=True, tx_en=True, rx_en=False, rx_p=False, tx_p=True)
    assert sw_control_outputs(busy) == {}
    assert sw_control_outputs(replace(busy, tx_p=False)) == {"sw_ack": False}


def test_grant_then_enables_hand_over():
    s = state(sw_ack=True, sw_req=True, tx_en=True, rx_en=False, rx_p=False)
    s, out = sw_control_react(s, "sw_ack", LOW)
    assert out == {"tx_en": False} and s.mode is Mode.TX
    s, out = sw_control_react(s, "tx_en", LOW)
    assert out == {"rx_en": True} and s.mode is Mode.SWITCHING_TO_RX
    s, out = sw_control_react(s, "rx_en", HIGH)
    assert out == {} and s.mode is Mode.RX


def test_requester_hands_over_after_grant():
    s = state(sw_ack=True, sw_req=True, rx_en=True, rx_p=True, tx_in_req=True)
    s, out = sw_control_react(s, "sw_req", LOW)
    assert out == {"rx_en": False}
    s, out = sw_control_react(s, "rx_en", LOW)
    assert s.rx_p is False                      # leaving RX clears the probe
    assert out == {"tx_en": True} and s.mode is Mode.SWITCHING_TO_TX
    s, out = sw_control_react(s, "tx_en", HIGH)
    assert out == {} and s.mode is Mode.TX


def test_request_in_flight_holds_modes():
    # both control lines High: each side keeps its enables until the grant
    tx_side = state(sw_ack=True, sw_req=True, tx_en=True, rx_en=False, rx_p=False, tx_p=True)
    rx_side = state(sw_ack=True, sw_req=True, rx_en=True, rx_p=True, tx_in_req=True)
    assert sw_control_outputs(tx_side) == {}
    assert sw_control_outputs(rx_side) == {}


def test_react_rejects_unknown_input():
    with pytest.raises(ConfigurationError):
        sw_control_react(state(), "bogus", HIGH)


def test_both_enables_high_is_inconsistent():
    with pytest.raises(ConfigurationError):
        state(tx_en=True, rx_en=True).mode


def test_initially_rx_block_may_request_without_receiving():
    link = make_link(initial_tx="left")
    link.blocks["right"].inject(7, 0)
    link.kernel.run()
    assert link.blocks["left"].delivered and link.blocks["left"].delivered[0][0] == 7


def test_without_rx_p_exception_the_rx_block_never_requests():
    link = make_link(initial_tx="left", rx_p_reset_exception=False)
    link.blocks["right"].inject(7, 0)
    k = link.kernel
    k.run()
    assert link.blocks["left"].delivered == []
    assert edges(k.trace, "R.sw_ack", k.initial["R.sw_ack"]) == []


def test_tx_buffer_holds_while_peer_requests():
    link = make_link(initial_tx="left")
    k = link.kernel
    link.blocks["right"].inject(1, 0)           # right requests first
    link.blocks["left"].inject(2, 20_000)       # token ready after the request arrived
    k.run()
    req_rise = [t for t, lvl in edges(k.trace, "bus.req", LOW) if lvl is HIGH]
    sw_req_fall = [t for t, lvl in edges(k.trace, "L.sw_req", LOW) if lvl is LOW]
    # the right event goes first; left issues only once its sw_req has dropped again
    assert [a for a, _ in link.blocks["left"].delivered] == [1]
    assert [a for a, _ in link.blocks["right"].delivered] == [2]
    assert req_rise[1] > sw_req_fall[0]


def test_back_to_back_events_are_one_cycle_apart():
    link = make_link(initial_tx="left")
    for i in range(5):
        link.blocks["left"].inject(i, 0)
    k = link.kernel
    k.run()
    rises = [t for t, lvl in edges(k.trace, "bus.req", LOW) if lvl is HIGH]
    assert [b - a for a, b in zip(rises, rises[1:])] == [31_000] * 4


def test_single_handover_mode_sequence():
    link = make_link(initial_tx="left")
    k = link.kernel
    link.blocks["right"].inject(9, 0)
    k.run()
    assert [m for _, m in mode_history(k.trace, k.initial, "R")] == [Mode.RX, Mode.SWITCHING_TO_TX, Mode.TX]
    assert [m for _, m in mode_history(k.trace, k.initial, "L")] == [Mode.TX, Mode.SWITCHING_TO_RX, Mode.RX]


def test_prst_release_latches_probe_reset_values():
    from aerlink.kernel import Kernel
    from aerlink.link import BusLink
    from aerlink.transceiver import Transceiver
    k = Kernel()
    link = BusLink(k, DelayProfile())
    left = Transceiver(k, "L", reset=ResetConfig(Mode.TX, srst_width=4000, prst_width=2000))
    right = Transceiver(k, "R", reset=ResetConfig(Mode.RX, srst_width=4000, prst_width=2000))
    link.attach_block("left", left)
    link.attach_block("right", right)
    right.inject(5, 0)
    k.run()
    assert k.read("R.rx_p") is LOW                  # left RX after the hand-over
    sw_ack_rise = [t for t, lvl in edges(k.trace, "R.sw_ack", LOW) if lvl is HIGH]
    assert sw_ack_rise and sw_ack_rise[0] >= 4000     # controller idle during SRst
    assert [a for a, _ in left.delivered] == [5]
