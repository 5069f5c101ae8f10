"""Deterministic discrete-event engine running either MAC stack over one topology.

Time advances over a single true-time event queue. Shared slots are only
materialised when some node has a frame queued; in sixpp mode the CT region
at the head of every slotframe runs the configured floods. All randomness comes
from per-(node, purpose) substreams so toggling one mechanism does not shift
unrelated draws.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import itertools
import logging
import statistics
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from . import ctflood, rpl, tschmac
from .core import BROADCAST, COORDINATOR, Frame, FrameKind, Rng, Topology
from .metrics import MetricsRecord, latency_stats
from .rpl import DaoState, RootRoutingTable, RplNodeState
from .scenario import ScenarioConfig, ScenarioError
from .schedule import (SlotRole, ct_channel, next_shared_asn, slot_role,
                       tsch_channel)
from .tschmac import ClockModel, MacMode, TschNodeState

log = logging.getLogger(__name__)


class EventKind(enum.IntEnum):
    # Same-time order: timers and application events queue frames before the
    # slot that may carry them is resolved.
    TIMER = 0
    APP_GEN = 1
    CT_MICRO_SLOT = 2
    SLOT_BOUNDARY = 3


@dataclass(order=True)
class Event:
    at: int
    kind: int
    node: int
    seq: int
    tag: str = field(compare=False, default="")
    data: Any = field(compare=False, default=None)


class EventQueue:
    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._seq = itertools.count()
        self.now = 0

    def push(self, at: int, kind: EventKind, node: int = -1, tag: str = "", data: Any = None) -> Event:
        if at < self.now:
            raise RuntimeError(f"event scheduled in the past ({at} < {self.now})")
        ev = Event(at, int(kind), node, next(self._seq), tag, data)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Event:
        ev = heapq.heappop(self._heap)
        self.now = ev.at
        return ev

    def peek_time(self) -> int | None:
        return self._heap[0].at if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


# -- reception --------------------------------------------------------------

@dataclass(frozen=True)
class ReceptionModel:
    """CT success = gamma(k) * (1 - prod(1 - PRR_i)); TSCH plane has no capture."""
    gamma_low: float = 1.0
    gamma_high: float = 0.9
    threshold: int = 3

    def capture_gamma(self, k: int) -> float:
        return self.gamma_low if k <= self.threshold else self.gamma_high

    def ct_success_prob(self, prrs: Sequence[float]) -> float:
        miss = 1.0
        for p in prrs:
            miss *= 1.0 - p
        return self.capture_gamma(len(prrs)) * (1.0 - miss)


class Plane(str, enum.Enum):
    CT = "CT"
    TSCH = "TSCH"


def resolve_reception(receiver: int, transmitters: dict[int, Frame], channel: int,
                      topology: Topology, plane: Plane, draw: Callable[[], float],
                      model: ReceptionModel = ReceptionModel(),
                      jam_factor: float = 1.0) -> Frame | None:
    """Frame decoded by ``receiver`` given every concurrent sender, or None.

    ``draw`` returns a uniform [0, 1) variate and is called at most once.
    """
    in_range = [t for t in sorted(transmitters)
                if t != receiver and topology.prr(t, receiver, channel) > 0]
    if not in_range:
        return None
    if plane is Plane.CT:
        frames = [transmitters[t] for t in in_range]
        first = frames[0]
        for f in frames[1:]:
            if (f.kind, f.src, f.seq, f.payload_bytes, f.meta) != (
                    first.kind, first.src, first.seq, first.payload_bytes, first.meta):
                raise ScenarioError("CT transmitters carry divergent payloads")
        p = model.ct_success_prob([topology.prr(t, receiver, channel) for t in in_range])
        return first if draw() < p * jam_factor else None
    if len(in_range) > 1:
        return None
    t = in_range[0]
    return transmitters[t] if draw() < topology.prr(t, receiver, channel) * jam_factor else None


# -- run state --------------------------------------------------------------

@dataclass
class Node:
    mac: TschNodeState
    rpl: RplNodeState
    clock: ClockModel
    sync_gen: int = 0


@dataclass
class TraceRow:
    t_us: int
    node: int
    event: str
    detail: str


@dataclass
class NodeSummary:
    node: int
    hops: int | None
    association_latency_us: int | None
    dao_delta_us: int | None
    delivered: int
    lost: int
    max_sync_error_us: int | None


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    trace: list[TraceRow]
    nodes: list[NodeSummary]
    metrics: MetricsRecord
    flood_rows: list[tuple[int, int, int, int | None, int | None]]
    end_time: int

    def reliability(self) -> float | None:
        return self.metrics.reliability()

    def latencies_ms(self) -> list[float]:
        return [v / 1000.0 for v in self.metrics.delivery_latencies()]

    def events_csv(self) -> str:
        buf = _csv_buffer(self.config, self.seed)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t_us", "node", "event", "detail"))
        for r in self.trace:
            w.writerow((r.t_us, r.node, r.event, r.detail))
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = _csv_buffer(self.config, self.seed)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node", "hops", "association_latency_us", "dao_delta_us",
                    "delivered", "lost", "max_sync_error_us"))
        for s in self.nodes:
            w.writerow((s.node, _blank(s.hops), _blank(s.association_latency_us),
                        _blank(s.dao_delta_us), s.delivered, s.lost, _blank(s.max_sync_error_us)))
        return buf.getvalue()

    def floods_csv(self) -> str:
        buf = _csv_buffer(self.config, self.seed)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("flood_idx", "node", "reached", "first_rx_uslot", "relay_cnt"))
        for row in self.flood_rows:
            w.writerow(tuple(_blank(v) for v in row))
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in (("events.csv", self.events_csv()), ("summary.csv", self.summary_csv())):
            (out / name).write_text(text)
            written.append(out / name)
        if self.flood_rows:
            (out / "floods.csv").write_text(self.floods_csv())
            written.append(out / "floods.csv")
        return written


def _blank(v: Any) -> Any:
    return "" if v is None else v


def _csv_buffer(config: ScenarioConfig, seed: int) -> io.StringIO:
    buf = io.StringIO()
    buf.write(f"# config_hash={config.config_hash()} seed={seed} mode={config.mode.short}\n")
    return buf


# -- engine -----------------------------------------------------------------

class Simulation:
    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.cfg = config
        self.mode = config.mode
        self.topology = config.build_topology()
        self.n = self.topology.node_count
        self.layout = config.layout()
        self.hopping = config.hopping_config()
        self.flood_cfg = config.flood_config()
        self.window = config.ct_window()
        self.model = ReceptionModel(config.reception.gamma_low, config.reception.gamma_high,
                                    config.reception.gamma_threshold)
        self.rng = Rng(config.run.seed)
        self.queue = EventQueue()
        self.metrics = MetricsRecord()
        self.trace: list[TraceRow] = []
        self.flood_rows: list[tuple] = []
        self.routes = RootRoutingTable()
        self.end = config.run.duration_ms * 1000
        self.slot_us = self.layout.slot_duration
        self.guard = config.mac.guard_us
        self.max_retries = config.mac.max_retries
        self._pending_slots: set[int] = set()
        self._seq = itertools.count(1)
        self._flood_index = 0
        self._data_queue: deque[list] = deque()
        self._jammed = set(config.jammer.channels) if config.jammer.enabled else set()
        self._nbrs = [sorted(set(self.topology.in_neighbors(i)) & set(self.topology.out_neighbors(i)))
                      for i in range(self.n)]

        ppb = config.mac.drift_ppm * 1000
        self.nodes: list[Node] = []
        for i in range(self.n):
            drift = self.rng.stream(i, "drift").randint(-ppb, ppb)
            mac = TschNodeState(i, eb_period=config.mac.eb_period_ms * 1000,
                                ka_period=config.mac.ka_period_ms * 1000)
            self.nodes.append(Node(mac, RplNodeState(i), ClockModel(drift)))

    # -- helpers ------------------------------------------------------------

    def _log(self, t: int, node: int, event: str, detail: str = "") -> None:
        self.trace.append(TraceRow(t, node, event, detail))

    def _ref_drift(self, node: int) -> int:
        if self.mode is MacMode.SIXPP:
            return self.nodes[COORDINATOR].clock.drift_ppb
        src = self.nodes[node].mac.time_source
        return self.nodes[src].clock.drift_ppb if src is not None else 0

    def _jam_factor(self, channel: int, t: int) -> float:
        if channel not in self._jammed:
            return 1.0
        windows = self.cfg.jammer.windows
        if windows and not any(a * 1000 <= t < b * 1000 for a, b in windows):
            return 1.0
        return 1.0 - self.cfg.jammer.jam_loss

    def _asn_at(self, t: int) -> int:
        return -(-t // self.slot_us)

    def _request_slot(self, min_asn: int) -> None:
        if self.layout.shared_slots == 0:
            return
        asn = next_shared_asn(self.layout, min_asn)
        if asn in self._pending_slots or asn * self.slot_us > self.end:
            return
        self._pending_slots.add(asn)
        self.queue.push(asn * self.slot_us, EventKind.SLOT_BOUNDARY, -1, "slot", asn)

    def _enqueue(self, node: int, frame: Frame, next_hop: int, min_asn: int) -> bool:
        mac = self.nodes[node].mac
        if len(mac.tx_queue) >= self.cfg.mac.queue_limit:
            self._log(self.queue.now, node, "queue_drop", frame.kind.value)
            return False
        mac.tx_queue.append((frame, next_hop))
        self._request_slot(min_asn)
        return True

    def _neighbor_ranks(self, node: int) -> dict[int, int]:
        ranks = {}
        for nb in self._nbrs[node]:
            other = self.nodes[nb]
            if (other.mac.associated or nb == COORDINATOR) and other.rpl.rank is not None:
                ranks[nb] = other.rpl.rank
        return ranks

    def _arm_sync_timers(self, node: int, now: int) -> None:
        st = self.nodes[node]
        st.sync_gen += 1
        at = st.clock.desync_time(self.guard, self._ref_drift(node))
        if at is not None and at <= self.end:
            self.queue.push(max(at, now), EventKind.TIMER, node, "desync", st.sync_gen)
        if self.mode is MacMode.BASELINE and node != COORDINATOR:
            ka_at = st.mac.last_sync_at + st.mac.ka_period
            if ka_at <= self.end:
                self.queue.push(max(ka_at, now), EventKind.TIMER, node, "ka", st.sync_gen)

    def _do_resync(self, node: int, now: int) -> None:
        st = self.nodes[node]
        before = tschmac.resync(st.clock, now, self._ref_drift(node))
        self.metrics.note_sync_error(node, before)
        st.mac.last_sync_at = now
        st.mac.ka_pending = False
        self._arm_sync_timers(node, now)

    def _schedule_dao(self, node: int, now: int) -> None:
        st = self.nodes[node]
        if st.rpl.dao_state is DaoState.ACKED or st.rpl.parent is None:
            return
        delay_us = self.cfg.rpl.dao_delay_ms * 1000
        jitter = self.rng.stream(node, "dao").randrange(delay_us) if delay_us > 0 else 0
        self.queue.push(now + jitter, EventKind.TIMER, node, "dao", st.rpl.dao_epoch)

    def _schedule_eb(self, node: int, start: int) -> None:
        mac = self.nodes[node].mac
        at = tschmac.next_eb_time(mac, start, self.rng.stream(node, "eb"))
        if at <= self.end:
            self.queue.push(at, EventKind.TIMER, node, "eb", (mac.eb_epoch, start))

    # -- association / desync -------------------------------------------------

    def _associate(self, node: int, frame: Frame, now: int, via: int | None,
                   anchor: int | None = None) -> bool:
        st = self.nodes[node]
        if not tschmac.try_associate(st.mac, frame, now):
            return False
        st.clock.anchor = now if anchor is None else anchor
        st.clock.anchor_error = 0
        if self.metrics.record_association(node, now):
            self._log(now, node, "assoc", f"via={via}")
        else:
            self._log(now, node, "reassoc", f"via={via}")
        if self.mode is MacMode.BASELINE:
            ranks = self._neighbor_ranks(node)
            if not ranks and via is not None and frame.meta.get("rank") is not None:
                ranks = {via: frame.meta["rank"]}
            parent = rpl.select_parent(st.rpl, ranks)
            st.mac.time_source = parent
            self._arm_sync_timers(node, now)
            self._schedule_eb(node, now)
            self._schedule_dao(node, now)
        else:
            st.mac.time_source = COORDINATOR
            self._arm_sync_timers(node, now)
        return True

    def _desync(self, node: int, now: int) -> None:
        st = self.nodes[node]
        err = st.clock.sync_error(now, self._ref_drift(node))
        self.metrics.note_sync_error(node, err)
        self.metrics.note_desync(node, now)
        self._log(now, node, "desync", f"error_us={err}")
        tschmac.disassociate(st.mac)
        rpl.on_parent_lost(st.rpl)
        st.sync_gen += 1

    def _sixpp_parent_pass(self, now: int, order: Iterable[int]) -> None:
        waiting = [i for i in order
                   if i != COORDINATOR and self.nodes[i].mac.associated and self.nodes[i].rpl.parent is None]
        progress = True
        while waiting and progress:
            progress = False
            rest = []
            for i in waiting:
                ranks = self._neighbor_ranks(i)
                if ranks:
                    rpl.select_parent(self.nodes[i].rpl, ranks)
                    self._schedule_dao(i, now)
                    progress = True
                else:
                    rest.append(i)
            waiting = rest

    # -- run ------------------------------------------------------------------

    def _bootstrap(self) -> None:
        coord = self.nodes[COORDINATOR]
        coord.mac.associated = True
        coord.mac.joined_at = 0
        coord.mac.asn_estimate = 0
        coord.rpl.rank = 0
        if self.cfg.run.bootstrap == "formed":
            self._form_network()
        if self.mode is MacMode.BASELINE:
            self._schedule_eb(COORDINATOR, 0)
            if self.cfg.run.bootstrap == "formed":
                for i in range(1, self.n):
                    phase = self.rng.stream(i, "eb").randrange(self.nodes[i].mac.eb_period)
                    self._schedule_eb(i, phase)
        else:
            self.queue.push(0, EventKind.CT_MICRO_SLOT, COORDINATOR, "frame", 0)
        if self.cfg.run.app_enabled:
            start = self.cfg.run.app_start_ms * 1000
            if start <= self._app_last():
                self.queue.push(start, EventKind.APP_GEN, COORDINATOR, "app", 0)

    def _form_network(self) -> None:
        dist = self.topology.bfs_distances(COORDINATOR)
        for i in sorted(range(1, self.n), key=lambda k: (dist[k] is None, dist[k] or 0, k)):
            if dist[i] is None:
                continue
            st = self.nodes[i]
            st.mac.associated = True
            st.mac.joined_at = 0
            st.mac.asn_estimate = 0
            ranks = self._neighbor_ranks(i)
            rpl.select_parent(st.rpl, ranks)
            st.rpl.dao_state = DaoState.ACKED
            st.mac.time_source = st.rpl.parent if self.mode is MacMode.BASELINE else COORDINATOR
            path = [i]
            p = st.rpl.parent
            while p is not None and p != COORDINATOR:
                path.append(p)
                p = self.nodes[p].rpl.parent
            self.routes.record(Frame(FrameKind.DAO, i, COORDINATOR, 0, 24, 0, {"path": path}))
        for i in range(1, self.n):
            st = self.nodes[i]
            if not st.mac.associated:
                continue
            if self.mode is MacMode.BASELINE:
                # Spread the first keep-alives over one period.
                st.mac.last_sync_at = -self.rng.stream(i, "ka").randrange(st.mac.ka_period)
                st.clock.anchor = 0
            self._arm_sync_timers(i, 0)

    def _app_last(self) -> int:
        return self.end - self.cfg.run.app_drain_ms * 1000

    def run(self) -> RunResult:
        self._bootstrap()
        handlers = {
            EventKind.TIMER: self._on_timer,
            EventKind.APP_GEN: self._on_app,
            EventKind.CT_MICRO_SLOT: self._on_ct,
            EventKind.SLOT_BOUNDARY: self._on_slot,
        }
        while self.queue and self.queue.peek_time() <= self.end:
            ev = self.queue.pop()
            handlers[EventKind(ev.kind)](ev)
        log.debug("%s seed=%d finished: %d trace rows, %d events left",
                  self.mode.short, self.cfg.run.seed, len(self.trace), len(self.queue))
        return self._finish()

    def _finish(self) -> RunResult:
        for i in range(1, self.n):
            st = self.nodes[i]
            if st.mac.associated:
                self.metrics.note_sync_error(i, st.clock.sync_error(self.end, self._ref_drift(i)))
        for (msg, dst), lat in sorted(self.metrics.dissemination.items()):
            if lat is None:
                self._log(self.end, dst, "data_lost", f"msg={msg}")
        self.trace.sort(key=lambda r: r.t_us)
        dist = self.topology.bfs_distances(COORDINATOR)
        per_node_delivered = [0] * self.n
        per_node_lost = [0] * self.n
        for (_, dst), lat in self.metrics.dissemination.items():
            if lat is None:
                per_node_lost[dst] += 1
            else:
                per_node_delivered[dst] += 1
        summaries = [NodeSummary(i, dist[i], self.metrics.association_latency.get(i),
                                 self.metrics.dao_delta.get(i), per_node_delivered[i],
                                 per_node_lost[i], self.metrics.max_sync_error.get(i))
                     for i in range(self.n)]
        return RunResult(self.cfg, self.cfg.run.seed, self.trace, summaries, self.metrics,
                         self.flood_rows, self.end)

    # -- event handlers ---------------------------------------------------------

    def _on_timer(self, ev: Event) -> None:
        node, now = ev.node, ev.at
        st = self.nodes[node]
        if ev.tag == "desync":
            if ev.data == st.sync_gen and st.mac.associated and node != COORDINATOR:
                self._desync(node, now)
        elif ev.tag == "ka":
            if ev.data != st.sync_gen:
                return
            frame = tschmac.keepalive_tick(st.mac, now, next(self._seq), self.mode)
            if frame is not None:
                self._enqueue(node, frame, frame.dst, self._asn_at(now))
        elif ev.tag == "eb":
            epoch, start = ev.data
            if epoch != st.mac.eb_epoch:
                return
            frame = tschmac.baseline_eb_tick(st.mac, now, self._asn_at(now), st.rpl.rank,
                                            next(self._seq), node == COORDINATOR, self.mode)
            if frame is not None:
                self._enqueue(node, frame, BROADCAST, self._asn_at(now))
            self._schedule_eb(node, start)
        elif ev.tag == "dao":
            if ev.data != st.rpl.dao_epoch or not st.mac.associated:
                return
            first = st.rpl.dao_state is DaoState.IDLE
            frame = rpl.dao_tick(st.rpl, now)
            if frame is None:
                return
            self._log(now, node, "dao_tx" if first else "dao_retx", f"hops={st.rpl.rank}")
            self._enqueue(node, frame, st.rpl.parent, self._asn_at(now))
            deadline = rpl.next_dao_deadline(st.rpl)
            if deadline <= self.end:
                self.queue.push(deadline, EventKind.TIMER, node, "dao", st.rpl.dao_epoch)

    def _on_app(self, ev: Event) -> None:
        now = ev.at
        msg = ev.data
        self.metrics.generated_at[msg] = now
        self._log(now, COORDINATOR, "data_gen", f"msg={msg}")
        for dst in range(1, self.n):
            self.metrics.expect(msg, dst)
        if self.mode is MacMode.SIXPP:
            self._data_queue.append([msg, self.cfg.ct.data_repeats])
        else:
            for dst in range(1, self.n):
                route = self.routes.routes.get(dst)
                if route is None:
                    continue
                frame = Frame(FrameKind.DATA, COORDINATOR, dst, next(self._seq),
                              self.cfg.ct.payload_bytes, now,
                              {"route": route, "hop": 0, "msg": msg})
                self._enqueue(COORDINATOR, frame, route[1], self._asn_at(now))
        nxt = now + self.cfg.run.app_period_ms * 1000
        if nxt <= self._app_last():
            self.queue.push(nxt, EventKind.APP_GEN, COORDINATOR, "app", msg + 1)

    # -- CT plane -------------------------------------------------------------------

    def _on_ct(self, ev: Event) -> None:
        if ev.tag == "frame":
            asn = ev.data
            start = ev.at
            fpf = self.window.floods_per_frame
            for f in range(fpf):
                self.queue.push(start + f * self.window.flood_us, EventKind.CT_MICRO_SLOT,
                                COORDINATOR, "flood", (asn, f))
            nxt = asn + self.layout.total_slots
            if nxt * self.slot_us <= self.end:
                self.queue.push(nxt * self.slot_us, EventKind.CT_MICRO_SLOT, COORDINATOR, "frame", nxt)
            return
        asn, f = ev.data
        self._run_flood(ev.at, asn, f)

    def _flood_content(self, now: int, asn: int, f: int) -> Frame | None:
        payload = self.cfg.ct.payload_bytes
        if f == 0:
            acks = rpl.root_ack_6pp(self.routes, payload)
            return Frame(FrameKind.EB, COORDINATOR, BROADCAST, next(self._seq), payload, now,
                         {"asn": asn, "acks": tuple(acks)})
        if self._data_queue:
            entry = self._data_queue[0]
            entry[1] -= 1
            if entry[1] <= 0:
                self._data_queue.popleft()
            return Frame(FrameKind.DATA, COORDINATOR, BROADCAST, next(self._seq), payload, now,
                         {"msg": entry[0]})
        if self.routes.pending_acks:
            acks = rpl.root_ack_6pp(self.routes, payload)
            return Frame(FrameKind.EB, COORDINATOR, BROADCAST, next(self._seq), payload, now,
                         {"asn": asn, "acks": tuple(acks)})
        return None

    def _run_flood(self, now: int, asn: int, f: int) -> None:
        frame = self._flood_content(now, asn, f)
        if frame is None:
            return
        g = self._flood_index
        self._flood_index += 1
        channel = ct_channel(self.hopping, g)
        jam = self._jam_factor(channel, now)
        topo = self.topology
        model = self.model
        streams = [self.rng.stream(i, "ct") for i in range(self.n)]

        def receive(node: int, senders: list[int], micro_slot: int) -> bool:
            p = model.ct_success_prob([topo.prr(s, node, channel) for s in senders])
            return streams[node].random() < p * jam

        results = ctflood.flood_outcome(self.flood_cfg, topo, receive, frame, now)
        reached = [i for i in range(1, self.n) if results[i].reached]
        self.metrics.control_frames["CT_" + frame.kind.value] += 1
        self._log(now, COORDINATOR, "flood",
                  f"idx={g} kind={frame.kind.value} ch={channel} reached={len(reached)}/{self.n - 1}")
        if self.cfg.output.trace_floods:
            for i, r in enumerate(results):
                self.flood_rows.append((g, i, int(r.reached), r.first_rx_micro_slot, r.relay_cnt))
        reached.sort(key=lambda i: (results[i].first_rx_micro_slot, i))
        acks = set(frame.meta.get("acks", ()))
        for i in reached:
            res = results[i]
            st = self.nodes[i]
            t_rx = res.rx_time
            if not st.mac.associated:
                # CT_0 anchors the TSCH timer, so the residual error is zero.
                if frame.kind is FrameKind.EB:
                    self._associate(i, frame, t_rx, COORDINATOR, anchor=res.sync.ct0)
            elif self.cfg.mac.resync:
                self._do_resync(i, res.sync.ct0)
            if st.mac.associated and i in acks and st.rpl.dao_state is DaoState.WAITING_ACK:
                delta = rpl.on_dao_ack(st.rpl, t_rx)
                if delta is not None and self.metrics.record_dao_delta(i, delta):
                    self._log(t_rx, i, "dao_ack_rx", f"hops={st.rpl.rank}")
            if frame.kind is FrameKind.DATA:
                msg = frame.meta["msg"]
                if self.metrics.deliver(msg, i, t_rx - self.metrics.generated_at[msg]):
                    self._log(t_rx, i, "data_rx", f"msg={msg}")
        reached_set = set(reached)
        self._sixpp_parent_pass(now, reached + [i for i in range(1, self.n) if i not in reached_set])

    # -- TSCH shared slots ----------------------------------------------------------

    def _listens(self, node: int, asn: int, channel: int) -> bool:
        mac = self.nodes[node].mac
        if mac.associated or node == COORDINATOR:
            return True
        if self.mode is not MacMode.BASELINE:
            return False
        chans = self.hopping.tsch_channels
        dwell = max(1, self.cfg.mac.scan_dwell_slots)
        idx = self.rng.hash_draw(node, "scan", asn // dwell, len(chans))
        return chans[idx] == channel

    def _on_slot(self, ev: Event) -> None:
        asn = ev.data
        self._pending_slots.discard(asn)
        now = ev.at
        if slot_role(self.layout, asn) is not SlotRole.SHARED:
            return
        contenders = {i: st.mac for i, st in enumerate(self.nodes)
                      if st.mac.tx_queue and (st.mac.associated or i == COORDINATOR)}
        decision = tschmac.shared_slot_contention(contenders)
        tx = {i: self.nodes[i].mac.tx_queue[0] for i, d in decision.items() if d == "TX"}
        if tx:
            self._resolve_shared(now, asn, tx)
        if any(st.mac.tx_queue for st in self.nodes):
            self._request_slot(asn + 1)

    def _resolve_shared(self, now: int, asn: int, tx: dict[int, tuple[Frame, int]]) -> None:
        channel = tsch_channel(self.hopping, asn)
        jam = self._jam_factor(channel, now)
        t_rx = now + self.slot_us
        frames = {i: fr for i, (fr, _) in tx.items()}
        candidates: set[int] = set()
        for i, (fr, nh) in tx.items():
            if nh == BROADCAST:
                candidates.update(self.topology.out_neighbors(i))
            else:
                candidates.add(nh)
        decoded: dict[int, int] = {}
        for r in sorted(candidates):
            if r in tx or not self._listens(r, asn, channel):
                continue
            senders = {t: frames[t] for t in self.topology.in_neighbors(r) if t in frames}
            if not senders:
                continue
            stream = self.rng.stream(r, "tsch")
            got = resolve_reception(r, senders, channel, self.topology, Plane.TSCH,
                                    stream.random, self.model, jam)
            if got is not None:
                decoded[r] = next(t for t, fr in senders.items() if fr is got)
        for i in sorted(tx):
            frame, nh = tx[i]
            self.metrics.control_frames[frame.kind.value] += 1
            mac = self.nodes[i].mac
            if nh == BROADCAST:
                tschmac.on_tx_done(mac, True, self.rng.stream(i, "csma"), self.max_retries)
                for r in sorted(r for r, s in decoded.items() if s == i):
                    self._on_broadcast_rx(r, i, frame, t_rx)
                continue
            # Unicast needs an associated receiver to acknowledge it.
            ok = decoded.get(nh) == i and (self.nodes[nh].mac.associated or nh == COORDINATOR)
            left = tschmac.on_tx_done(mac, ok, self.rng.stream(i, "csma"), self.max_retries)
            if ok:
                self._on_unicast_rx(nh, i, frame, t_rx, asn)
            elif left is not None:
                self._on_drop(i, frame, now)

    def _on_broadcast_rx(self, r: int, sender: int, frame: Frame, t_rx: int) -> None:
        if frame.kind is not FrameKind.EB:
            return
        st = self.nodes[r]
        if not st.mac.associated and r != COORDINATOR:
            self._associate(r, frame, t_rx, sender)
        elif st.mac.time_source == sender and r != COORDINATOR:
            self._do_resync(r, t_rx)

    def _on_drop(self, node: int, frame: Frame, now: int) -> None:
        self._log(now, node, "tx_drop", frame.kind.value)
        if frame.kind is FrameKind.KA:
            mac = self.nodes[node].mac
            mac.ka_pending = False
            if mac.associated:
                self.queue.push(now, EventKind.TIMER, node, "ka", self.nodes[node].sync_gen)

    def _on_unicast_rx(self, r: int, sender: int, frame: Frame, t_rx: int, asn: int) -> None:
        kind = frame.kind
        if kind is FrameKind.KA:
            if self.nodes[sender].mac.time_source == r:
                self._do_resync(sender, t_rx)
            return
        if kind is FrameKind.DAO:
            if r == COORDINATOR:
                if self.mode is MacMode.BASELINE:
                    ack = rpl.root_ack_baseline(self.routes, frame, t_rx, next(self._seq))
                    self._enqueue(COORDINATOR, ack, ack.meta["route"][1], asn + 1)
                else:
                    rpl.queue_ack_6pp(self.routes, frame)
                return
            st = self.nodes[r]
            if st.mac.associated and st.rpl.parent is not None and r not in frame.meta["path"]:
                fwd = Frame(kind, frame.src, frame.dst, frame.seq, frame.payload_bytes,
                            frame.born_at, {"path": frame.meta["path"] + [r]})
                self._enqueue(r, fwd, st.rpl.parent, asn + 1)
            return
        # Source-routed downward frames: DAO_ACK and DATA.
        route = frame.meta["route"]
        hop = frame.meta["hop"] + 1
        if r != route[hop]:
            return
        if r == frame.dst:
            if kind is FrameKind.DAO_ACK:
                st = self.nodes[r]
                delta = rpl.on_dao_ack(st.rpl, t_rx)
                if delta is not None and self.metrics.record_dao_delta(r, delta):
                    self._log(t_rx, r, "dao_ack_rx", f"hops={st.rpl.rank}")
            elif kind is FrameKind.DATA:
                msg = frame.meta["msg"]
                if self.metrics.deliver(msg, r, t_rx - self.metrics.generated_at[msg]):
                    self._log(t_rx, r, "data_rx", f"msg={msg}")
            return
        fwd = Frame(kind, frame.src, frame.dst, frame.seq, frame.payload_bytes, frame.born_at,
                    dict(frame.meta, hop=hop))
        self._enqueue(r, fwd, route[hop + 1], asn + 1)


def run(config: ScenarioConfig) -> RunResult:
    return Simulation(config).run()


# -- experiment matrix --------------------------------------------------------------

MATRIX_HEADER = ("mode", "jam", "seed", "reliability_pct", "mean_latency_ms", "median_latency_ms")


@dataclass(frozen=True)
class MatrixRow:
    mode: str
    jam: bool
    seed: int
    reliability_pct: float | None
    mean_latency_ms: float | None
    median_latency_ms: float | None


@dataclass(frozen=True)
class CellSummary:
    mode: str
    jam: bool
    runs: int
    reliability_pct: float | None
    mean_latency_ms: float | None
    median_latency_ms: float | None
    latency_sd_ms: float | None


def _cell_config(base: ScenarioConfig, mode: MacMode, jam: bool, seed: int) -> ScenarioConfig:
    return base.with_overrides(run={"mode": mode.short, "seed": seed},
                               jammer={"enabled": jam})


def _run_cell(args: tuple[ScenarioConfig, str, bool, int]) -> MatrixRow:
    cfg, mode, jam, seed = args
    res = run(cfg)
    lat = res.latencies_ms()
    _, mean, median, _ = latency_stats(lat)
    rel = res.reliability()
    return MatrixRow(mode, jam, seed, None if rel is None else 100.0 * rel, mean, median)


def run_matrix(base: ScenarioConfig, seeds: Sequence[int],
               modes: Sequence[MacMode] = (MacMode.SIXPP, MacMode.BASELINE),
               jams: Sequence[bool] = (False, True), workers: int = 1) -> list[MatrixRow]:
    """Run every (mode, jam, seed) cell; rows come back in a fixed sorted order."""
    if not seeds:
        raise ValueError("run_matrix needs at least one seed")
    jobs = [(_cell_config(base, m, j, s), m.short, j, s)
            for m in modes for j in jams for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    order = {m.short: k for k, m in enumerate(modes)}
    rows.sort(key=lambda r: (order[r.mode], r.jam, r.seed))
    return rows


def summarize_matrix(rows: Iterable[MatrixRow]) -> list[CellSummary]:
    """Per-(mode, jam) means over seeds with the across-seed spread of mean latency."""
    cells: dict[tuple[str, bool], list[MatrixRow]] = {}
    for r in rows:
        cells.setdefault((r.mode, r.jam), []).append(r)
    out = []
    for (mode, jam), rs in cells.items():
        rel = [r.reliability_pct for r in rs if r.reliability_pct is not None]
        means = [r.mean_latency_ms for r in rs if r.mean_latency_ms is not None]
        medians = [r.median_latency_ms for r in rs if r.median_latency_ms is not None]
        out.append(CellSummary(
            mode, jam, len(rs),
            statistics.fmean(rel) if rel else None,
            statistics.fmean(means) if means else None,
            statistics.median(medians) if medians else None,
            statistics.stdev(means) if len(means) > 1 else None))
    return out


def matrix_csv(rows: Iterable[MatrixRow], base: ScenarioConfig, seeds: Sequence[int]) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={base.config_hash()} seeds={','.join(map(str, seeds))}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATRIX_HEADER)
    for r in rows:
        w.writerow((r.mode, int(r.jam), r.seed, _fmt(r.reliability_pct),
                    _fmt(r.mean_latency_ms), _fmt(r.median_latency_ms)))
    return buf.getvalue()


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.3f}"
