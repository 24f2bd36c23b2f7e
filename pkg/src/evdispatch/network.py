"""Road network model: loading, validation, grid generation, shortest paths.

Positions on the network are (edge id, offset-in-meters) pairs: vehicles and
charging stations live on directed edges, not at nodes. Routing minimizes
travel time under caller-supplied per-edge weights, with deterministic tie
breaking (shorter total length first, then lexicographically smallest edge-id
sequence) so that equal-cost alternatives never depend on iteration order.
"""
from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import IO, Iterable, Sequence

import numpy as np

FORMAT_TAG = "evdispatch-network/1"

_INF = float("inf")


class NetworkParseError(ValueError):
    """Malformed network document: bad schema, bad field, dangling reference."""


class NetworkValidationError(ValueError):
    """Well-formed network that violates a graph-level requirement."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Edge:
    id: int
    src: int          # node id
    dst: int          # node id
    length: float     # meters
    speed: float      # free-flow speed, m/s
    capacity: float   # congestion threshold, vehicles


@dataclass(frozen=True)
class Station:
    id: int
    edge: int         # anchor edge id
    offset: float     # meters from the anchor edge's start
    plugs: int
    power_kw: float


@dataclass(frozen=True)
class Path:
    """A routing result.

    ``edges`` lists edge ids after the starting edge, ending with the target
    edge; it is empty when start and target are the same edge. ``total_length``
    sums the member edge lengths (the partial starting edge contributes 0).
    ``est_travel_time`` includes the remainder of the starting edge.
    """

    edges: tuple[int, ...]
    total_length: float
    est_travel_time: float


class RoadNetwork:
    """Directed road graph plus charging stations, indexed for routing.

    Construction checks record-level consistency (unique ids, endpoints
    exist, positive lengths, anchors on real edges). Graph-level checks
    (strong connectivity, station spacing) live in :func:`validate_network`
    and run on every load.
    """

    def __init__(self, nodes: Sequence[Node], edges: Sequence[Edge],
                 stations: Sequence[Station], min_station_dist: float = 0.0):
        self.nodes = tuple(sorted(nodes, key=lambda n: n.id))
        self.edges = tuple(sorted(edges, key=lambda e: e.id))
        self.stations = tuple(sorted(stations, key=lambda s: s.id))
        self.min_station_dist = float(min_station_dist)
        self._check_records()

        self._nid_to_idx = {n.id: i for i, n in enumerate(self.nodes)}
        self._eid_to_idx = {e.id: i for i, e in enumerate(self.edges)}
        self.edge_ids = np.array([e.id for e in self.edges], dtype=np.int64)

        ne = len(self.edges)
        self.edge_len = np.array([e.length for e in self.edges], dtype=np.float64)
        self.edge_speed = np.array([e.speed for e in self.edges], dtype=np.float64)
        self.edge_cap = np.array([e.capacity for e in self.edges], dtype=np.float64)
        self.edge_src = np.array(
            [self._nid_to_idx[e.src] for e in self.edges], dtype=np.int32)
        self.edge_dst = np.array(
            [self._nid_to_idx[e.dst] for e in self.edges], dtype=np.int32)

        out: list[list[int]] = [[] for _ in self.nodes]
        for i in range(ne):  # ascending edge id, so out lists stay id-sorted
            out[self.edge_src[i]].append(i)
        self._out_edges = [np.array(o, dtype=np.int32) for o in out]

        self.station_edge = np.array(
            [self._eid_to_idx[s.edge] for s in self.stations], dtype=np.int32)
        self.station_offset = np.array(
            [s.offset for s in self.stations], dtype=np.float64)
        self.station_plugs = np.array(
            [s.plugs for s in self.stations], dtype=np.int32)
        self.station_power = np.array(
            [s.power_kw for s in self.stations], dtype=np.float64)
        self._ff_weights = self.edge_len / self.edge_speed
        self._ff_label_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    # -- basic queries -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def edge_idx(self, edge_id: int) -> int:
        try:
            return self._eid_to_idx[edge_id]
        except KeyError:
            raise KeyError(f"unknown edge id {edge_id}") from None

    def free_flow_weights(self) -> np.ndarray:
        """Seconds to traverse each edge at free flow, in ``self.edges`` order."""
        return self._ff_weights.copy()

    # -- consistency ---------------------------------------------------

    def _check_records(self) -> None:
        seen: set[int] = set()
        for n in self.nodes:
            if n.id in seen:
                raise NetworkParseError(f"duplicate node id {n.id}")
            seen.add(n.id)
        node_ids = seen
        eseen: set[int] = set()
        for e in self.edges:
            if e.id in eseen:
                raise NetworkParseError(f"duplicate edge id {e.id}")
            eseen.add(e.id)
            for end in (e.src, e.dst):
                if end not in node_ids:
                    raise NetworkParseError(f"edge {e.id}: unknown node {end}")
            if e.src == e.dst:
                raise NetworkParseError(f"edge {e.id}: self loop at node {e.src}")
            if not (e.length > 0.0):
                raise NetworkParseError(f"edge {e.id}: length must be > 0")
            if not (e.speed > 0.0):
                raise NetworkParseError(f"edge {e.id}: speed must be > 0")
            if not (e.capacity > 0.0):
                raise NetworkParseError(f"edge {e.id}: capacity must be > 0")
        for want, s in enumerate(self.stations):
            if s.id != want:
                raise NetworkParseError(
                    f"station ids must be 0..{len(self.stations) - 1} "
                    f"with no gaps; found {s.id}")
            if s.edge not in eseen:
                raise NetworkParseError(f"station {s.id}: unknown edge {s.edge}")
            length = next(e.length for e in self.edges if e.id == s.edge)
            if not (0.0 <= s.offset <= length):
                raise NetworkParseError(
                    f"station {s.id}: offset {s.offset} outside edge "
                    f"length {length}")
            if s.plugs < 1:
                raise NetworkParseError(f"station {s.id}: plugs must be >= 1")
            if not (s.power_kw > 0.0):
                raise NetworkParseError(f"station {s.id}: power_kw must be > 0")


# ---------------------------------------------------------------------------
# serialization


def _network_from_doc(doc: dict) -> RoadNetwork:
    if not isinstance(doc, dict):
        raise NetworkParseError("top-level document must be an object")
    tag = doc.get("format")
    if tag != FORMAT_TAG:
        raise NetworkParseError(f"unsupported format tag {tag!r}")

    def _num(rec, kind, i, key, typ=float):
        if key not in rec:
            raise NetworkParseError(f"{kind} record {i}: missing field '{key}'")
        try:
            return typ(rec[key])
        except (TypeError, ValueError):
            raise NetworkParseError(
                f"{kind} record {i}: field '{key}' is not a number") from None

    nodes = []
    for i, rec in enumerate(doc.get("nodes", [])):
        nodes.append(Node(_num(rec, "node", i, "id", int),
                          _num(rec, "node", i, "x"),
                          _num(rec, "node", i, "y")))
    edges = []
    for i, rec in enumerate(doc.get("edges", [])):
        edges.append(Edge(_num(rec, "edge", i, "id", int),
                          _num(rec, "edge", i, "from", int),
                          _num(rec, "edge", i, "to", int),
                          _num(rec, "edge", i, "length"),
                          _num(rec, "edge", i, "speed"),
                          _num(rec, "edge", i, "capacity")))
    stations = []
    for i, rec in enumerate(doc.get("stations", [])):
        stations.append(Station(_num(rec, "station", i, "id", int),
                                _num(rec, "station", i, "edge", int),
                                _num(rec, "station", i, "offset"),
                                _num(rec, "station", i, "plugs", int),
                                _num(rec, "station", i, "power_kw")))
    if not nodes:
        raise NetworkParseError("network has no nodes")
    if not edges:
        raise NetworkParseError("network has no edges")
    return RoadNetwork(nodes, edges, stations,
                       min_station_dist=float(doc.get("min_station_dist", 0.0)))


def load_network(source: str | os.PathLike | IO[str]) -> RoadNetwork:
    """Load and fully validate a network from a JSON file (path or stream)."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
    else:
        with open(source, "r", encoding="utf-8") as fp:
            text = fp.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(f"invalid JSON: {exc}") from None
    net = _network_from_doc(doc)
    validate_network(net)
    return net


def network_to_doc(net: RoadNetwork) -> dict:
    return {
        "format": FORMAT_TAG,
        "min_station_dist": net.min_station_dist,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in net.nodes],
        "edges": [
            {"id": e.id, "from": e.src, "to": e.dst, "length": e.length,
             "speed": e.speed, "capacity": e.capacity}
            for e in net.edges
        ],
        "stations": [
            {"id": s.id, "edge": s.edge, "offset": s.offset, "plugs": s.plugs,
             "power_kw": s.power_kw}
            for s in net.stations
        ],
    }


def save_network(net: RoadNetwork, dest: str | os.PathLike | IO[str]) -> None:
    """Write the canonical JSON form (stable key order, stable float repr)."""
    text = json.dumps(network_to_doc(net), indent=2) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)  # type: ignore[union-attr]
    else:
        with open(dest, "w", encoding="utf-8") as fp:
            fp.write(text)


def validate_network(net: RoadNetwork) -> None:
    """Graph-level checks: strong connectivity and station spacing."""
    fwd = _reachable(net, 0, forward=True)
    bwd = _reachable(net, 0, forward=False)
    bad = sorted(net.nodes[i].id for i in range(net.n_nodes)
                 if not (fwd[i] and bwd[i]))
    if bad:
        raise NetworkValidationError(
            f"network is not strongly connected; unreachable nodes: {bad}")
    if net.min_station_dist > 0.0 and net.n_stations > 1:
        lengths = net.edge_len  # meters-as-weights: min-length paths
        for j, sj in enumerate(net.stations):
            dists, reach = station_distances(
                net, (sj.edge, float(net.station_offset[j])), lengths)
            for k in range(net.n_stations):
                if k == j:
                    continue
                if not reach[k]:
                    raise NetworkValidationError(
                        f"station {k} unreachable from station {j}")
                if dists[k] < net.min_station_dist:
                    raise NetworkValidationError(
                        f"stations {j} and {k} are {dists[k]:.1f} m apart "
                        f"(minimum {net.min_station_dist:.1f} m)")


def _reachable(net: RoadNetwork, start: int, forward: bool) -> np.ndarray:
    seen = np.zeros(net.n_nodes, dtype=bool)
    seen[start] = True
    stack = [start]
    src = net.edge_src if forward else net.edge_dst
    dst = net.edge_dst if forward else net.edge_src
    adj: list[list[int]] = [[] for _ in range(net.n_nodes)]
    for i in range(net.n_edges):
        adj[src[i]].append(dst[i])
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


# ---------------------------------------------------------------------------
# generation


def gen_grid(rows: int, cols: int, block_len: float, n_stations: int = 0,
             min_station_dist: float = 0.0, seed: int = 0, *,
             speed: float = 13.9, capacity: float = 4.0, plugs: int = 2,
             power_kw: float = 100.0) -> RoadNetwork:
    """Generate a rows x cols street grid with stations placed by rejection.

    Every adjacent node pair gets one edge per direction. Stations anchor at
    the midpoint of distinct, uniformly drawn edges; a draw is accepted only
    if every station pair is at least ``min_station_dist`` apart by road in
    both directions. Same arguments always produce the identical network.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs rows >= 2 and cols >= 2")
    if block_len <= 0:
        raise ValueError("block_len must be > 0")
    nodes = [Node(r * cols + c, c * block_len, r * block_len)
             for r in range(rows) for c in range(cols)]
    edges = []
    eid = 0
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                v = u + 1
                edges.append(Edge(eid, u, v, block_len, speed, capacity)); eid += 1
                edges.append(Edge(eid, v, u, block_len, speed, capacity)); eid += 1
            if r + 1 < rows:
                w = u + cols
                edges.append(Edge(eid, u, w, block_len, speed, capacity)); eid += 1
                edges.append(Edge(eid, w, u, block_len, speed, capacity)); eid += 1

    if n_stations == 0:
        net = RoadNetwork(nodes, edges, (), min_station_dist)
        validate_network(net)
        return net

    if n_stations > len(edges):
        raise NetworkValidationError(
            f"cannot place {n_stations} stations on {len(edges)} edges")
    rng = np.random.default_rng(seed)
    for _ in range(500):
        picks = rng.choice(len(edges), size=n_stations, replace=False)
        stations = tuple(
            Station(j, int(picks[j]), block_len / 2.0, plugs, power_kw)
            for j in range(n_stations))
        net = RoadNetwork(nodes, edges, stations, min_station_dist)
        try:
            validate_network(net)
        except NetworkValidationError:
            continue
        return net
    raise NetworkValidationError(
        f"could not place {n_stations} stations at least "
        f"{min_station_dist} m apart after 500 draws; relax the spacing")


# ---------------------------------------------------------------------------
# shortest paths


def _dijkstra(net: RoadNetwork, start: int,
              w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Node labels (time, path length) from ``start``; lexicographic order.

    Among equal-time paths the one with smaller total length wins, so the
    length label is the unique optimum too. Unreached nodes stay at inf.
    """
    nn = net.n_nodes
    time = np.full(nn, _INF)
    plen = np.full(nn, _INF)
    time[start] = 0.0
    plen[start] = 0.0
    heap: list[tuple[float, float, int]] = [(0.0, 0.0, start)]
    out_edges = net._out_edges
    src = net.edge_src
    dst = net.edge_dst
    elen = net.edge_len
    while heap:
        t, l, u = heappop(heap)
        if t > time[u] or (t == time[u] and l > plen[u]):
            continue
        for e in out_edges[u]:
            v = dst[e]
            nt = t + w[e]
            nl = l + elen[e]
            if nt < time[v] or (nt == time[v] and nl < plen[v]):
                time[v] = nt
                plen[v] = nl
                heappush(heap, (nt, nl, int(v)))
    return time, plen


def _lex_walk(net: RoadNetwork, time: np.ndarray, plen: np.ndarray,
              w: np.ndarray, start: int, goal: int) -> list[int]:
    """Lexicographically smallest edge-id optimal path start -> goal.

    Works on the DAG of tight edges (edges that preserve both labels,
    compared exactly). From every node the walk only enters tight edges
    whose head can still complete a tight chain to ``goal``; picking the
    smallest edge id at each hop yields the lexicographic minimum.
    """
    src = net.edge_src
    dst = net.edge_dst
    elen = net.edge_len
    rev: list[list[int]] = [[] for _ in range(net.n_nodes)]
    for e in range(net.n_edges):
        u = src[e]
        v = dst[e]
        if time[u] != _INF and time[u] + w[e] == time[v] \
                and plen[u] + elen[e] == plen[v]:
            rev[v].append(u)
    can_finish = np.zeros(net.n_nodes, dtype=bool)
    can_finish[goal] = True
    queue = deque([goal])
    while queue:
        v = queue.popleft()
        for u in rev[v]:
            if not can_finish[u]:
                can_finish[u] = True
                queue.append(u)
    seq: list[int] = []
    u = start
    while u != goal:
        nxt = -1
        for e in net._out_edges[u]:
            v = dst[e]
            if not can_finish[v]:
                continue
            if time[u] + w[e] == time[v] and plen[u] + elen[e] == plen[v]:
                nxt = int(e)
                break  # out edges are id-sorted: first hit is the minimum
        if nxt < 0:  # pragma: no cover - contradicts can_finish[start]
            raise RuntimeError("tight-path reconstruction failed")
        seq.append(nxt)
        u = int(dst[nxt])
    return seq


def _check_weights(net: RoadNetwork, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (net.n_edges,):
        raise ValueError(
            f"weights must have one entry per edge ({net.n_edges}), "
            f"got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("edge weights must be positive and finite")
    return w


def _route_idx(net: RoadNetwork, from_idx: int, offset: float, to_idx: int,
               w: np.ndarray, allow_empty: bool = True
               ) -> tuple[list[int], float, float] | None:
    """Route in edge-index space: (edge seq incl. target, length, time).

    ``allow_empty=False`` forces a loop even when start and target edge
    coincide (used when a vehicle has already passed its stop on the edge).
    """
    flen = net.edge_len[from_idx]
    rem_time = w[from_idx] * (flen - offset) / flen
    if from_idx == to_idx and allow_empty:
        return [], 0.0, rem_time
    time, plen = _dijkstra(net, int(net.edge_dst[from_idx]), w)
    gate = int(net.edge_src[to_idx])
    if time[gate] == _INF:
        return None
    seq = _lex_walk(net, time, plen, w, int(net.edge_dst[from_idx]), gate)
    seq.append(to_idx)
    total_len = float(plen[gate] + net.edge_len[to_idx])
    est = float(rem_time + time[gate] + w[to_idx])
    return seq, total_len, est


def shortest_path(net: RoadNetwork, from_edge: int, offset: float,
                  to_edge: int, weights) -> Path | None:
    """Minimum-travel-time path from (from_edge, offset) onto to_edge.

    Cost of the starting edge is its weight scaled by the remaining
    fraction; every other member edge contributes its full weight. Ties on
    time break by total length, then by lexicographically smallest edge-id
    sequence. Returns None when the target edge cannot be reached.
    """
    w = _check_weights(net, weights)
    fi = net.edge_idx(from_edge)
    ti = net.edge_idx(to_edge)
    if not (0.0 <= offset <= net.edge_len[fi]):
        raise ValueError(
            f"offset {offset} outside edge {from_edge} "
            f"(length {net.edge_len[fi]})")
    res = _route_idx(net, fi, float(offset), ti, w)
    if res is None:
        return None
    seq, total_len, est = res
    ids = tuple(int(net.edge_ids[e]) for e in seq)
    return Path(ids, total_len, est)


def station_distances(net: RoadNetwork, pos: tuple[int, float],
                      weights) -> tuple[np.ndarray, np.ndarray]:
    """Road distance (meters) from ``pos`` to every station's anchor edge.

    Distances follow the Path convention: length of the minimum-time path's
    member edges, 0 when already on the anchor edge. Returns (distances,
    reachable); unreachable stations hold inf and a False flag.
    """
    w = _check_weights(net, weights)
    fi = net.edge_idx(pos[0])
    offset = float(pos[1])
    if not (0.0 <= offset <= net.edge_len[fi]):
        raise ValueError(f"offset {offset} outside edge {pos[0]}")
    m = net.n_stations
    dists = np.full(m, _INF)
    reach = np.zeros(m, dtype=bool)
    time = plen = None
    for j in range(m):
        aj = int(net.station_edge[j])
        if aj == fi:
            dists[j] = 0.0
            reach[j] = True
            continue
        if time is None:
            time, plen = _dijkstra(net, int(net.edge_dst[fi]), w)
        gate = int(net.edge_src[aj])
        if time[gate] == _INF:
            continue
        dists[j] = plen[gate] + net.edge_len[aj]
        reach[j] = True
    return dists, reach
