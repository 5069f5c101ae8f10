"""Shared domain types: time base, node ids, topologies, frames and seeded RNG."""

from __future__ import annotations

import enum
import hashlib
import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

# Simulated time is an integer count of microseconds since experiment start.
SimTime = int
US_PER_MS = 1_000
US_PER_S = 1_000_000

BROADCAST = -1
COORDINATOR = 0
UNREACHABLE = None


class TopologyError(ValueError):
    pass


class FrameKind(str, enum.Enum):
    EB = "EB"
    KA = "KA"
    DAO = "DAO"
    DAO_ACK = "DAO_ACK"
    DATA = "DATA"


@dataclass
class Frame:
    kind: FrameKind
    src: int
    dst: int
    seq: int
    payload_bytes: int
    born_at: SimTime
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.payload_bytes < 1:
            raise ValueError("payload_bytes must be >= 1")


class Topology:
    """Directed link graph with a per-channel packet reception ratio.

    ``links[(src, dst)]`` is either a single PRR applied on every channel or a
    dict ``{channel: prr}`` with an optional ``None`` key used as default.
    """

    def __init__(self, node_count: int, symmetric: bool = False,
                 positions: dict[int, tuple[float, float]] | None = None):
        if node_count < 1:
            raise TopologyError("node_count must be >= 1")
        self.node_count = node_count
        self.symmetric = symmetric
        self.positions = positions
        self.links: dict[tuple[int, int], float | dict] = {}
        self._nbrs_in: list[list[int]] | None = None
        self._nbrs_out: list[list[int]] | None = None

    def _check(self, node: int) -> None:
        if not (0 <= node < self.node_count):
            raise TopologyError(f"unknown node id {node}")

    def add_link(self, src: int, dst: int, prr: float | dict,
                 both_ways: bool = False) -> None:
        self._check(src)
        self._check(dst)
        if src == dst:
            raise TopologyError("self-links are not allowed")
        values = prr.values() if isinstance(prr, dict) else [prr]
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise TopologyError(f"PRR {v} outside [0, 1]")
        self.links[(src, dst)] = prr
        if both_ways:
            self.links[(dst, src)] = prr
        self._nbrs_in = self._nbrs_out = None

    def prr(self, src: int, dst: int, channel: int | None = None) -> float:
        value = self.links.get((src, dst))
        if value is None:
            return 0.0
        if isinstance(value, dict):
            return value.get(channel, value.get(None, 0.0))
        return value

    def has_edge(self, src: int, dst: int) -> bool:
        value = self.links.get((src, dst))
        if value is None:
            return False
        if isinstance(value, dict):
            return any(v > 0 for v in value.values())
        return value > 0

    def _build_adjacency(self) -> None:
        nin: list[list[int]] = [[] for _ in range(self.node_count)]
        nout: list[list[int]] = [[] for _ in range(self.node_count)]
        for (s, d) in sorted(self.links):
            if self.has_edge(s, d):
                nout[s].append(d)
                nin[d].append(s)
        self._nbrs_in, self._nbrs_out = nin, nout

    def out_neighbors(self, node: int) -> list[int]:
        if self._nbrs_out is None:
            self._build_adjacency()
        return self._nbrs_out[node]

    def in_neighbors(self, node: int) -> list[int]:
        if self._nbrs_in is None:
            self._build_adjacency()
        return self._nbrs_in[node]

    def nodes(self) -> range:
        return range(self.node_count)

    def is_symmetric(self) -> bool:
        for (s, d), v in self.links.items():
            if self.links.get((d, s)) != v:
                return False
        return True

    def bfs_distances(self, source: int) -> list[int | None]:
        self._check(source)
        dist: list[int | None] = [None] * self.node_count
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.out_neighbors(u):
                if dist[v] is None:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def eccentricity(self, source: int) -> int | None:
        dist = self.bfs_distances(source)
        if any(d is None for d in dist):
            return UNREACHABLE
        return max(dist)

    def is_connected(self, source: int = COORDINATOR) -> bool:
        return self.eccentricity(source) is not None

    def to_edge_list(self) -> str:
        lines = []
        for (s, d), v in sorted(self.links.items()):
            if isinstance(v, dict):
                raise TopologyError("per-channel PRR cannot be written as an edge list")
            lines.append(f"{s} {d} {v!r}")
        return "\n".join(lines) + "\n"


def hop_distance(topology: Topology, src: int, dst: int) -> int | None:
    """Shortest-path hop count over links with PRR > 0; ``None`` if unreachable."""
    topology._check(dst)
    return topology.bfs_distances(src)[dst]


def make_line_topology(n: int, prr: float) -> Topology:
    if n < 2:
        raise TopologyError("a line needs at least 2 nodes")
    if not 0.0 < prr <= 1.0:
        raise TopologyError("prr must be in (0, 1]")
    topo = Topology(n, symmetric=True,
                    positions={i: (float(i), 0.0) for i in range(n)})
    for i in range(n - 1):
        topo.add_link(i, i + 1, prr, both_ways=True)
    return topo


def make_grid_topology(rows: int, cols: int, prr: float) -> Topology:
    """4-neighbour grid, ids row-major so node 0 sits in a corner."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise TopologyError("grid needs at least 2 nodes")
    if not 0.0 < prr <= 1.0:
        raise TopologyError("prr must be in (0, 1]")
    n = rows * cols
    topo = Topology(n, symmetric=True,
                    positions={r * cols + c: (float(c), float(r))
                               for r in range(rows) for c in range(cols)})
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                topo.add_link(i, i + 1, prr, both_ways=True)
            if r + 1 < rows:
                topo.add_link(i, i + cols, prr, both_ways=True)
    return topo


def make_random_geometric_topology(n: int, radius: float, prr: float, seed: int,
                                   max_tries: int = 1000) -> Topology:
    """Nodes uniform in the unit square, linked when closer than ``radius``.

    Placements are redrawn until the graph is connected.
    """
    if n < 2:
        raise TopologyError("need at least 2 nodes")
    if not 0.0 < prr <= 1.0:
        raise TopologyError("prr must be in (0, 1]")
    rng = random.Random(seed)
    for _ in range(max_tries):
        pos = {i: (rng.random(), rng.random()) for i in range(n)}
        topo = Topology(n, symmetric=True, positions=pos)
        for i in range(n):
            for j in range(i + 1, n):
                if math.dist(pos[i], pos[j]) <= radius:
                    topo.add_link(i, j, prr, both_ways=True)
        if topo.is_connected():
            return topo
    raise TopologyError(f"no connected placement after {max_tries} tries")


def parse_edge_list(text: str, node_count: int | None = None) -> Topology:
    """Parse ``src dst prr`` lines; ``#`` starts a comment."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TopologyError(f"line {lineno}: expected 'src dst prr', got {raw!r}")
        try:
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise TopologyError(f"line {lineno}: {exc}") from None
    if node_count is None:
        node_count = 1 + max((max(s, d) for s, d, _ in edges), default=0)
    topo = Topology(node_count)
    for s, d, p in edges:
        topo.add_link(s, d, p)
    topo.symmetric = topo.is_symmetric()
    return topo


def load_edge_list(path: str | Path, node_count: int | None = None) -> Topology:
    return parse_edge_list(Path(path).read_text(), node_count)


class Rng:
    """Seeded source handing out one independent stream per (node, purpose)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[tuple[int, str], random.Random] = {}

    def _derive(self, node: int, purpose: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{node}:{purpose}".encode()).digest()
        return int.from_bytes(digest[:8], "big")

    def stream(self, node: int, purpose: str) -> random.Random:
        key = (node, purpose)
        s = self._streams.get(key)
        if s is None:
            s = self._streams[key] = random.Random(self._derive(node, purpose))
        return s

    def hash_draw(self, node: int, purpose: str, index: int, modulus: int) -> int:
        """Stateless draw in [0, modulus) keyed by ``index``."""
        x = (self._derive(node, purpose) ^ (index * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        x ^= x >> 31
        return x % modulus

