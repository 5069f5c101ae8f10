"""Per-run metric records and summary statistics.

All latencies are true simulated time in microseconds. Dissemination latency
is counted per (message, destination) pair.
"""

from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable


@dataclass
class MetricsRecord:
    association_latency: dict[int, int] = field(default_factory=dict)
    dao_delta: dict[int, int] = field(default_factory=dict)
    # (msg_seq, destination) -> latency, or None if lost
    dissemination: dict[tuple[int, int], int | None] = field(default_factory=dict)
    generated_at: dict[int, int] = field(default_factory=dict)
    control_frames: Counter = field(default_factory=Counter)
    max_sync_error: dict[int, int] = field(default_factory=dict)
    desync_times: dict[int, list[int]] = field(default_factory=dict)

    def record_association(self, node: int, latency: int) -> bool:
        if node in self.association_latency:
            return False
        self.association_latency[node] = latency
        return True

    def record_dao_delta(self, node: int, delta: int) -> bool:
        if node in self.dao_delta:
            return False
        self.dao_delta[node] = delta
        return True

    def expect(self, msg: int, destination: int) -> None:
        self.dissemination.setdefault((msg, destination), None)

    def deliver(self, msg: int, destination: int, latency: int) -> bool:
        if self.dissemination.get((msg, destination)) is not None:
            return False
        self.dissemination[(msg, destination)] = latency
        return True

    def note_sync_error(self, node: int, error: int) -> None:
        if abs(error) > self.max_sync_error.get(node, -1):
            self.max_sync_error[node] = abs(error)

    def note_desync(self, node: int, at: int) -> None:
        self.desync_times.setdefault(node, []).append(at)

    def delivery_latencies(self) -> list[int]:
        return [v for _, v in sorted(self.dissemination.items()) if v is not None]

    def reliability(self) -> float | None:
        if not self.dissemination:
            return None
        delivered = sum(1 for v in self.dissemination.values() if v is not None)
        return delivered / len(self.dissemination)


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float | None
    median: float | None
    p95: float | None
    reliability: float | None
    control_frames: dict[str, int]

    @property
    def empty(self) -> bool:
        return self.count == 0


def percentile(values: list[float], q: float) -> float:
    """Linear-interpolation percentile (numpy's default method)."""
    data = sorted(values)
    if not data:
        raise ValueError("percentile of empty data")
    pos = (len(data) - 1) * q / 100.0
    lo = int(pos)
    hi = min(lo + 1, len(data) - 1)
    return data[lo] + (data[hi] - data[lo]) * (pos - lo)


def latency_stats(latencies: Iterable[float]) -> tuple[int, float | None, float | None, float | None]:
    values = list(latencies)
    if not values:
        return 0, None, None, None
    return (len(values), statistics.fmean(values), statistics.median(values),
            percentile(values, 95))


def aggregate(records: Iterable[MetricsRecord]) -> Summary:
    """Pool dissemination outcomes over ``records``.

    Latency statistics use delivered pairs only; with nothing delivered they
    are ``None`` (the empty-summary marker) rather than zero.
    """
    latencies: list[int] = []
    delivered = expected = 0
    control: Counter = Counter()
    for rec in records:
        latencies.extend(rec.delivery_latencies())
        expected += len(rec.dissemination)
        delivered += sum(1 for v in rec.dissemination.values() if v is not None)
        control.update(rec.control_frames)
    count, mean, median, p95 = latency_stats(latencies)
    reliability = delivered / expected if expected else None
    return Summary(count, mean, median, p95, reliability, dict(sorted(control.items())))


def spearman_rho(xs: list[float], ys: list[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length samples of size >= 2")

    def ranks(v: list[float]) -> list[float]:
        order = sorted(range(len(v)), key=v.__getitem__)
        r = [0.0] * len(v)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
                j += 1
            avg = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                r[order[k]] = avg
            i = j + 1
        return r

    rx, ry = ranks(xs), ranks(ys)
    mx, my = statistics.fmean(rx), statistics.fmean(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / (vx * vy) ** 0.5
