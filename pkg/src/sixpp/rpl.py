"""Min-hop RPL subset: parent choice, DAO registration, DAO-ACK return paths."""

from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field

from .core import COORDINATOR, Frame, FrameKind

DAO_TIMEOUT_US = 3_000_000
DAO_TIMEOUT_MAX_US = 60_000_000
ACK_ID_BYTES = 2
FLOOD_HEADER_BYTES = 6


class DaoState(str, enum.Enum):
    IDLE = "IDLE"
    WAITING_ACK = "WAITING_ACK"
    ACKED = "ACKED"


@dataclass
class RplNodeState:
    node: int
    parent: int | None = None
    rank: int | None = None
    dao_state: DaoState = DaoState.IDLE
    dao_seq: int = 0
    retransmit_timer: int = DAO_TIMEOUT_US
    dao_sent_at: int | None = None
    dao_first_tx: int | None = None
    dao_epoch: int = 0

    def __post_init__(self) -> None:
        if self.node == COORDINATOR:
            self.rank = 0


@dataclass
class RootRoutingTable:
    routes: dict[int, list[int]] = field(default_factory=dict)
    pending_acks: "OrderedDict[int, None]" = field(default_factory=OrderedDict)

    def record(self, dao: Frame) -> list[int]:
        """Store the downward source route (root first) carried by ``dao``."""
        path = dao.meta["path"]
        route = [COORDINATOR] + list(reversed(path))
        self.routes[path[0]] = route
        return route


def select_parent(state: RplNodeState, neighbor_ranks: dict[int, int]) -> int | None:
    """Lowest-rank neighbour, ties to the lowest id. The root never has a parent."""
    if state.node == COORDINATOR:
        state.parent, state.rank = None, 0
        return None
    if not neighbor_ranks:
        return None
    parent = min(neighbor_ranks, key=lambda n: (neighbor_ranks[n], n))
    state.parent = parent
    state.rank = neighbor_ranks[parent] + 1
    return parent


def dao_tick(state: RplNodeState, now: int) -> Frame | None:
    """Emit a DAO toward the root and arm the retransmission timer."""
    if state.parent is None or state.dao_state is DaoState.ACKED:
        return None
    if state.dao_state is DaoState.IDLE:
        state.retransmit_timer = DAO_TIMEOUT_US
        if state.dao_first_tx is None:
            state.dao_first_tx = now
    else:
        state.retransmit_timer = min(2 * state.retransmit_timer, DAO_TIMEOUT_MAX_US)
    state.dao_state = DaoState.WAITING_ACK
    state.dao_seq += 1
    state.dao_sent_at = now
    return Frame(FrameKind.DAO, state.node, COORDINATOR, state.dao_seq, 24, now,
                 {"path": [state.node]})


def next_dao_deadline(state: RplNodeState) -> int:
    """When to retransmit if no ACK arrives (3 s, then doubling up to 60 s)."""
    return state.dao_sent_at + state.retransmit_timer


def on_parent_lost(state: RplNodeState) -> None:
    state.parent = None
    state.rank = None if state.node != COORDINATOR else 0
    if state.dao_state is not DaoState.ACKED:
        state.dao_state = DaoState.IDLE
    state.dao_epoch += 1


def on_dao_ack(state: RplNodeState, now: int) -> int | None:
    """Mark ACKED; returns the DAO delta on the first ACK, else None."""
    if state.dao_state is DaoState.ACKED or state.dao_first_tx is None:
        return None
    state.dao_state = DaoState.ACKED
    state.dao_epoch += 1
    return now - state.dao_first_tx


def root_ack_baseline(table: RootRoutingTable, dao: Frame, now: int, seq: int) -> Frame:
    """DAO-ACK source-routed back down the path the DAO came up."""
    route = table.record(dao)
    target = route[-1]
    return Frame(FrameKind.DAO_ACK, COORDINATOR, target, seq, 16, now,
                 {"route": route, "hop": 0})


def ack_capacity(payload_bytes: int) -> int:
    return max(0, (payload_bytes - FLOOD_HEADER_BYTES) // ACK_ID_BYTES)


def queue_ack_6pp(table: RootRoutingTable, dao: Frame) -> None:
    table.record(dao)
    table.pending_acks.setdefault(dao.meta["path"][0], None)


def root_ack_6pp(table: RootRoutingTable, payload_bytes: int = 64) -> list[int]:
    """Pop the FIFO batch of node ids that fits in one flood payload."""
    take = ack_capacity(payload_bytes)
    batch = []
    while table.pending_acks and len(batch) < take:
        node, _ = table.pending_acks.popitem(last=False)
        batch.append(node)
    return batch
