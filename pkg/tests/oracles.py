"""Independent reference implementations the tests compare against.

Everything here is deliberately slow and simple: exhaustive enumeration
instead of Dijkstra, dense recounts instead of incremental bookkeeping.
"""
import numpy as np

from evdispatch import Edge, Node, RoadNetwork, Station


def random_graph(rng, max_nodes=10, p_edge=0.35, n_stations=0,
                 parallel_frac=0.15):
    """Random directed multigraph wrapped in a RoadNetwork (no connectivity
    requirement; routing must cope with unreachable targets)."""
    n = int(rng.integers(2, max_nodes + 1))
    nodes = [Node(i, float(rng.uniform(0, 1000)), float(rng.uniform(0, 1000)))
             for i in range(n)]
    edges = []
    eid = 0
    for a in range(n):
        for b in range(n):
            if a == b or rng.random() >= p_edge:
                continue
            edges.append(Edge(eid, a, b, float(rng.uniform(50, 800)),
                              float(rng.uniform(5, 25)), 4.0))
            eid += 1
            if rng.random() < parallel_frac:  # duplicate pair, distinct id
                edges.append(Edge(eid, a, b, float(rng.uniform(50, 800)),
                                  float(rng.uniform(5, 25)), 4.0))
                eid += 1
    if not edges:  # guarantee at least one edge so the wrapper constructs
        edges.append(Edge(0, 0, 1, 100.0, 10.0, 4.0))
    stations = []
    if n_stations:
        picks = rng.choice(len(edges), size=min(n_stations, len(edges)),
                           replace=False)
        for sid, k in enumerate(sorted(int(p) for p in picks)):
            e = edges[k]
            stations.append(Station(sid, e.id, e.length * 0.5, 1, 50.0))
    return RoadNetwork(nodes, edges, stations)


def brute_force_path(net, from_edge, offset, to_edge, weights):
    """Exhaustive minimum over node-simple edge sequences.

    Mirrors the routing contract: cost (time, length, edge-id seq) compared
    lexicographically, starting edge contributes its remaining fraction of
    weight and zero length, target edge contributes fully. Returns
    (ids, total_length, est_time) or None.
    """
    w = np.asarray(weights, dtype=np.float64)
    fi = net.edge_idx(from_edge)
    ti = net.edge_idx(to_edge)
    rem = w[fi] * (net.edge_len[fi] - offset) / net.edge_len[fi]
    if fi == ti:
        return (), 0.0, float(rem)
    start = int(net.edge_dst[fi])
    gate = int(net.edge_src[ti])

    out = {}
    for e in range(net.n_edges):
        out.setdefault(int(net.edge_src[e]), []).append(e)

    # Compare candidates at the gate node, exactly like the router's labels:
    # (arrival time, path length, edge-id sequence), floats accumulated
    # left-to-right along the walk so equal paths are equal bit-for-bit.
    best = None

    def walk(node, seen, time, length, ids):
        nonlocal best
        if node == gate:
            cand = (time, length, tuple(ids))
            if best is None or cand < best:
                best = cand
        for e in out.get(node, ()):
            nxt = int(net.edge_dst[e])
            if nxt in seen:
                continue
            walk(nxt, seen | {nxt}, time + w[e], length + net.edge_len[e],
                 ids + [int(net.edge_ids[e])])

    walk(start, {start}, 0.0, 0.0, [])
    if best is None:
        return None
    t, ln, ids = best
    return (ids + (int(net.edge_ids[ti]),), float(ln + net.edge_len[ti]),
            float(rem + t + w[ti]))
