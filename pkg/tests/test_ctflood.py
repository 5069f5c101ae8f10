import random

import pytest

from sixpp.core import make_grid_topology, make_line_topology
from sixpp.ctflood import (CtFloodConfig, FloodError, flood_outcome, flood_step,
                           initial_states, lossless_receive, on_ct_rx)
from sixpp.phy import CtTiming


def trace_oracle(topo, n_tx, n_h, heard):
    """Hand-rolled micro-slot simulation of the flood rules.

    heard(node, senders, m) decides decoding. Returns {node: (first_rx, relay)}.
    """
    first = {0: -1}
    relay = {0: 0}
    sent = {0: 0}
    for m in range(n_tx + n_h):
        if m > n_h:
            break
        tx = [v for v in first if first[v] < m and sent[v] < n_tx]
        for v in tx:
            sent[v] += 1
        new = {}
        for node in range(topo.node_count):
            if node in first:
                continue
            senders = [s for s in tx if topo.prr(s, node) > 0]
            if senders and heard(node, senders, m):
                new[node] = m
        for node, mm in new.items():
            first[node], relay[node], sent[node] = mm, mm, 0
    return {v: (first[v], relay[v]) for v in first if v != 0}


def outcome_map(results):
    return {i: (r.first_rx_micro_slot, r.relay_cnt)
            for i, r in enumerate(results) if r.reached and i != 0}


@pytest.mark.parametrize("n_tx,n_h", [(1, 3), (2, 3), (3, 5), (2, 9)])
def test_lossless_line_matches_trace(n_tx, n_h):
    topo = make_line_topology(12, 1.0)
    cfg = CtFloodConfig(n_tx, n_h)
    got = outcome_map(flood_outcome(cfg, topo, lossless_receive(topo)))
    assert got == trace_oracle(topo, n_tx, n_h, lambda *a: True)


def test_hop_budget_caps_reach():
    # n_h = 5 on a line: nodes up to hop 6 hear the frame, hop 7 never does.
    topo = make_line_topology(10, 1.0)
    res = flood_outcome(CtFloodConfig(2, 5), topo, lossless_receive(topo))
    reached = [i for i, r in enumerate(res) if r.reached]
    assert reached == list(range(7))
    assert res[6].relay_cnt == 5


def test_lossy_grid_matches_trace_with_shared_draws():
    topo = make_grid_topology(4, 5, 0.6)
    table = {}
    rng = random.Random(11)

    def heard(node, senders, m):
        key = (node, m)
        if key not in table:
            table[key] = rng.random() < 0.6
        return table[key]

    cfg = CtFloodConfig(2, 7)
    got = outcome_map(flood_outcome(cfg, topo, heard))
    assert got == trace_oracle(topo, 2, 7, heard)


def test_receive_called_in_ascending_node_order():
    topo = make_line_topology(3, 1.0)
    topo.add_link(0, 2, 1.0, both_ways=True)
    calls = []

    def receive(node, senders, m):
        calls.append((m, node, tuple(senders)))
        return True

    flood_outcome(CtFloodConfig(1, 2), topo, receive)
    assert calls[:2] == [(0, 1, (0,)), (0, 2, (0,))]


def test_sync_reference_and_rx_time():
    topo = make_line_topology(4, 1.0)
    cfg = CtFloodConfig(2, 3)
    res = flood_outcome(cfg, topo, lossless_receive(topo), flood_start=5000)
    for hop in range(1, 4):
        r = res[hop]
        assert r.sync.ct0 == 5000
        assert r.rx_time == 5000 + (hop - 1) * 320 + 320
    assert res[0].sync.ct0 == 5000 and res[0].rx_time is None


def test_on_ct_rx_arithmetic_and_errors():
    timing = CtTiming()
    assert on_ct_rx(10_000 + 4 * 320, 4, timing).ct0 == 10_000
    with pytest.raises(FloodError):
        on_ct_rx(100, 1, timing)
    with pytest.raises(FloodError):
        on_ct_rx(10_000, 6, timing, n_h=5)


def test_step_outside_window():
    cfg = CtFloodConfig(2, 3)
    with pytest.raises(FloodError):
        flood_step(cfg, initial_states(cfg, 2), 5)


def test_initiator_budget():
    cfg = CtFloodConfig(3, 3)
    states = initial_states(cfg, 1)
    kinds = [flood_step(cfg, states, m)[0].kind for m in range(6)]
    assert kinds == ["TX", "TX", "TX", "RX", "RX", "RX"]


def test_participants_mask():
    topo = make_line_topology(4, 1.0)
    res = flood_outcome(CtFloodConfig(2, 5), topo, lossless_receive(topo),
                        participants=[True, True, False, True])
    assert [r.reached for r in res] == [True, True, False, False]


def test_invalid_config():
    with pytest.raises(FloodError):
        CtFloodConfig(0, 3)
