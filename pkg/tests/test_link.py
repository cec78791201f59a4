import pytest

from aerlink.errors import ConfigurationError
from aerlink.handshake import edges
from aerlink.kernel import HIGH, LOW, Z, DelayProfile, Kernel
from aerlink.link import BusLink, direction_switch_episode, make_link, switch_episodes
from aerlink.transceiver import Mode, ResetConfig, Transceiver


def bare_link():
    k = Kernel()
    link = BusLink(k)
    left = Transceiver(k, "L", reset=ResetConfig(Mode.TX))
    right = Transceiver(k, "R", reset=ResetConfig(Mode.RX))
    return k, link, left, right


def test_attach_both_sides_makes_link_runnable():
    k, link, left, right = bare_link()
    link.attach_block("left", left)
    assert not link.runnable
    with pytest.raises(ConfigurationError):
        link.resolve_lines()
    link.attach_block("right", right)
    assert link.runnable


def test_attach_errors():
    k, link, left, right = bare_link()
    link.attach_block("left", left)
    with pytest.raises(ConfigurationError):
        link.attach_block("left", right)
    with pytest.raises(ConfigurationError):
        link.attach_block("middle", right)
    with pytest.raises(ConfigurationError):
        make_link(initial_tx="up")


def test_only_left_driving_pattern_resolves():
    link = make_link(initial_tx="left")
    k = link.kernel
    for i, pad in enumerate(link.blocks["left"].pad_data):
        k.schedule(pad, HIGH if (0x155 >> i) & 1 else LOW, 0)
    k.run()
    snap = link.resolve_lines()
    assert snap.value(link.data) == 0x155
    assert snap.contention == []


def test_keeper_holds_last_driven_value():
    link = make_link(initial_tx="left")
    k = link.kernel
    pad = link.blocks["left"].pad_data[3]
    k.schedule(pad, HIGH, 0)
    k.schedule(pad, Z, 1000)
    k.run()
    assert k.read("bus.d3") is HIGH
    assert link.resolve_lines().lines["bus.d3"].resolved is HIGH


def test_both_sides_driving_is_contention():
    link = make_link(initial_tx="left")
    k = link.kernel
    k.schedule("R.pad.d0", HIGH, 500)
    k.run()
    assert [(c.line, c.at) for c in link.contentions] == [("bus.d0", 500)]
    assert link.resolve_lines().contention == ["bus.d0"]


def test_cross_wiring_follows_with_pad_delay():
    link = make_link(initial_tx="left")
    link.blocks["right"].inject(1, 0)
    k = link.kernel
    k.run()
    io = DelayProfile().io_pad
    for a, b in (("L", "R"), ("R", "L")):
        src = edges(k.trace, f"{a}.sw_ack", k.initial[f"{a}.sw_ack"])
        dst = edges(k.trace, f"{b}.sw_req", k.initial[f"{b}.sw_req"])
        assert [(t + io, lvl) for t, lvl in src] == dst


def test_switch_latency_default_profile():
    link = make_link(initial_tx="left")
    k = link.kernel
    link.blocks["left"].inject(3, 0)
    k.run()
    ep = direction_switch_episode(link, address=11)
    assert ep.granter == "L"
    assert ep.t_sw == 5000 and ep.t_sw2req == 5000


def test_switch_latency_composes_linearly_in_pad_delay():
    # t_sw = 2*io_pad + gate_step: doubling io_pad doubles the pad share only
    measured = {}
    for io in (2000, 4000):
        link = make_link(profile=DelayProfile(io_pad=io), initial_tx="left")
        measured[io] = direction_switch_episode(link).t_sw
    gate = DelayProfile().gate_step
    assert measured[2000] - gate == 4000
    assert measured[4000] - gate == 2 * (measured[2000] - gate)


def test_switch_without_progress_is_a_stall():
    link = make_link(initial_tx="left", rx_p_reset_exception=False)
    from aerlink.errors import SimulationViolation
    with pytest.raises(SimulationViolation):
        direction_switch_episode(link, watchdog=200_000)
    assert link.kernel.stalls


def test_released_window_between_directions():
    link = make_link(initial_tx="left")
    link.blocks["left"].inject(1, 0)
    link.blocks["right"].inject(2, 0)
    k = link.kernel
    k.run()
    level = {"L.pad.req": k.initial["L.pad.req"], "R.pad.req": k.initial["R.pad.req"]}
    released = []
    for t, name, lvl, _ in k.trace:
        if name in level:
            level[name] = lvl
            if all(v is Z for v in level.values()):
                released.append(t)
    assert released
    assert link.contentions == []


def test_episodes_from_trace_alone():
    link = make_link(initial_tx="left")
    link.blocks["left"].inject(1, 0)
    link.blocks["left"].inject(2, 0)
    link.blocks["right"].inject(3, 0)
    k = link.kernel
    k.run()
    eps = switch_episodes(k.trace, k.initial)
    assert [e.granter for e in eps] == ["L", "R"]
    assert all(e.t_sw == 5000 and e.t_sw2req == 5000 for e in eps)
