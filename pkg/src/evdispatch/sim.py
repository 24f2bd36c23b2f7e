"""Mesoscopic traffic and charging simulator.

One world = one simulated day on a road network. Vehicles spawn from a
schedule pre-drawn at init (the stepping itself never touches an RNG, so a
world advances deterministically), drive shortest-time routes under
congestion-dependent edge speeds, and EVs divert to charging stations when
their battery runs low. Stations serve FIFO queues on a fixed plug count.

Step phases, in order: spawn due vehicles; snapshot edge speeds from current
occupancy; advance every driving vehicle (kernel); reroute low-battery EVs;
process arrivals (trip end or queue join); per station, apply charging energy
and departures, then promote queue heads into free plugs. Newly promoted
vehicles begin gaining energy on the next step.
"""
from __future__ import annotations

import hashlib
import json
import struct
from bisect import insort
from collections import deque
from dataclasses import dataclass, field
from typing import IO

import numpy as np

from . import backend
from .network import RoadNetwork, _dijkstra, _lex_walk, _route_idx

UNSPAWNED, DRIVING, QUEUED, CHARGING, DEPARTED = 0, 1, 2, 3, 4
STATUS_NAMES = ("unspawned", "driving", "queued", "charging", "departed")

CONVENTIONAL, BACKGROUND_EV, TARGET_EV = 0, 1, 2
CLASS_NAMES = ("conventional", "background_ev", "target_ev")

_INF = float("inf")


@dataclass
class SimParams:
    """World-level physical constants."""

    dt: float = 30.0                    # seconds per step
    horizon: float = 86400.0            # one day
    bpr_alpha: float = 0.15             # congestion multiplier 1 + a*(occ/cap)^4
    recharge_frac: float = 0.3          # EV diverts below this battery fraction
    consumption_kwh_per_km: float = 0.2
    battery_capacity_range: tuple[float, float] = (40.0, 60.0)
    initial_charge_range: tuple[float, float] = (0.2, 0.8)

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be a whole number of steps")
        lo, hi = self.battery_capacity_range
        if not (0 < lo <= hi):
            raise ValueError("bad battery_capacity_range")
        lo, hi = self.initial_charge_range
        if not (0 <= lo <= hi <= 1):
            raise ValueError("bad initial_charge_range")
        if not (0 <= self.recharge_frac < 1):
            raise ValueError("recharge_frac must be in [0, 1)")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class DemandProfile:
    """Hourly spawn-rate weights (24 values) per vehicle class.

    Totals are exact counts given at world_init; these weights only shape
    when during the day the spawns land.
    """

    conventional: np.ndarray
    background_ev: np.ndarray

    def __post_init__(self) -> None:
        for name in ("conventional", "background_ev"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (24,):
                raise ValueError(f"{name} rates must have 24 entries")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} rates must be finite and >= 0")
            setattr(self, name, arr)

    @classmethod
    def default(cls) -> "DemandProfile":
        """Flat base rate with 4x commuter peaks at 07-09 and 17-19."""
        base = np.ones(24)
        base[[7, 8, 17, 18]] = 4.0
        return cls(base.copy(), base.copy())


class ChargingStation:
    """Runtime queue/plug state for one station."""

    def __init__(self, sid: int, edge_idx: int, offset: float, plugs: int,
                 power_kw: float):
        self.id = sid
        self.edge_idx = edge_idx
        self.offset = offset
        self.plugs = plugs
        self.power_kw = power_kw
        self.queue: deque[int] = deque()
        self.in_service: list[int] = []

    def load(self) -> int:
        return len(self.queue) + len(self.in_service)


@dataclass(frozen=True)
class Vehicle:
    """Read-only snapshot of one vehicle, for inspection and tests."""

    id: int
    vclass: str
    status: str
    edge: int
    offset: float
    battery_kwh: float
    capacity_kwh: float
    stranded: bool
    dest_station: int
    stop_offset: float
    route_remaining: tuple[int, ...]
    spawn_time: float
    queue_join_t: float
    charge_start_t: float


class WorldState:
    """Mutable simulation state; build via :func:`world_init`."""

    def __init__(self, net: RoadNetwork, params: SimParams, kernels=None):
        self.net = net
        self.params = params
        self.kernels = kernels if kernels is not None else backend.kernels
        self.t = 0.0
        self.step_count = 0
        self.counters = {"spawned": 0, "departed": 0, "charge_visits": 0}
        self.stations = [
            ChargingStation(j, int(net.station_edge[j]),
                            float(net.station_offset[j]),
                            int(net.station_plugs[j]),
                            float(net.station_power[j]))
            for j in range(net.n_stations)
        ]
        self.edge_occ = np.zeros(net.n_edges, dtype=np.int32)
        self._speed_buf = np.empty(net.n_edges, dtype=np.float64)
        self._n = 0
        self._cap = 0
        self._alloc(8)
        self._pool = np.zeros(256, dtype=np.int32)
        self._pool_used = 0
        self._driving: list[int] = []
        self._driving_arr = np.empty(0, dtype=np.int32)
        self._driving_dirty = False
        self._arr_buf = np.empty(8, dtype=np.int32)
        self._need_buf = np.empty(8, dtype=np.int32)
        self._moved_buf = np.empty(8, dtype=np.float64)
        # spawn schedule (filled by world_init)
        self._sched_order = np.empty(0, dtype=np.int64)
        self._sched_ptr = 0
        self._traj: hashlib.blake2b | None = None
        self._trace: IO[str] | None = None

    # -- storage -------------------------------------------------------

    def _alloc(self, cap: int) -> None:
        def grow(name, dtype, fill=0):
            old = getattr(self, name, None)
            arr = np.full(cap, fill, dtype=dtype)
            if old is not None and self._n:
                arr[: self._n] = old[: self._n]
            setattr(self, name, arr)

        grow("status", np.int8, UNSPAWNED)
        grow("vclass", np.int8, CONVENTIONAL)
        grow("cur_edge", np.int32, -1)
        grow("offset", np.float64)
        grow("battery", np.float64)
        grow("battery_cap", np.float64)
        grow("stranded", np.uint8)
        grow("dest_station", np.int32, -1)
        grow("stop_offset", np.float64)
        grow("route_start", np.int32)
        grow("route_len", np.int32)
        grow("route_pos", np.int32)
        grow("spawn_time", np.float64, np.nan)
        grow("origin_edge", np.int32, -1)
        grow("dest_edge", np.int32, -1)
        grow("queue_join_t", np.float64, np.nan)
        grow("charge_start_t", np.float64, np.nan)
        self._cap = cap

    def _new_slot(self) -> int:
        if self._n == self._cap:
            self._alloc(max(8, self._cap * 2))
        vid = self._n
        self._n += 1
        if self._arr_buf.size < self._n:
            self._arr_buf = np.empty(self._n, dtype=np.int32)
            self._need_buf = np.empty(self._n, dtype=np.int32)
            self._moved_buf = np.empty(self._n, dtype=np.float64)
        return vid

    def _set_route(self, vid: int, edges_idx: list[int]) -> None:
        n = len(edges_idx)
        if self._pool_used + n > self._pool.size:
            new = np.zeros(max(self._pool.size * 2, self._pool_used + n),
                           dtype=np.int32)
            new[: self._pool_used] = self._pool[: self._pool_used]
            self._pool = new
        start = self._pool_used
        self._pool[start: start + n] = edges_idx
        self._pool_used += n
        self.route_start[vid] = start
        self.route_len[vid] = n
        self.route_pos[vid] = 0

    def _driving_add(self, vid: int) -> None:
        insort(self._driving, vid)
        self._driving_dirty = True

    def _driving_remove(self, vid: int) -> None:
        self._driving.remove(vid)
        self._driving_dirty = True

    def _driving_candidates(self) -> np.ndarray:
        if self._driving_dirty:
            self._driving_arr = np.array(self._driving, dtype=np.int32)
            self._driving_dirty = False
        return self._driving_arr

    # -- queries ---------------------------------------------------------

    def current_weights(self) -> np.ndarray:
        """Per-edge travel time (s) under the current occupancy."""
        self.kernels.edge_speeds(self.edge_occ, self.net.edge_cap,
                                 self.net.edge_speed, self.params.bpr_alpha,
                                 self._speed_buf)
        return self.net.edge_len / self._speed_buf

    def status_counts(self) -> np.ndarray:
        return np.bincount(self.status[: self._n], minlength=5)

    def n_stranded(self) -> int:
        return int(self.stranded[: self._n].sum())

    def vehicle(self, vid: int) -> Vehicle:
        if not (0 <= vid < self._n):
            raise KeyError(f"unknown vehicle {vid}")
        rs = self.route_start[vid]
        rem = self._pool[rs + self.route_pos[vid]: rs + self.route_len[vid]]
        return Vehicle(
            id=vid,
            vclass=CLASS_NAMES[self.vclass[vid]],
            status=STATUS_NAMES[self.status[vid]],
            edge=int(self.net.edge_ids[self.cur_edge[vid]])
            if self.cur_edge[vid] >= 0 else -1,
            offset=float(self.offset[vid]),
            battery_kwh=float(self.battery[vid]),
            capacity_kwh=float(self.battery_cap[vid]),
            stranded=bool(self.stranded[vid]),
            dest_station=int(self.dest_station[vid]),
            stop_offset=float(self.stop_offset[vid]),
            route_remaining=tuple(int(self.net.edge_ids[e]) for e in rem),
            spawn_time=float(self.spawn_time[vid]),
            queue_join_t=float(self.queue_join_t[vid]),
            charge_start_t=float(self.charge_start_t[vid]),
        )

    def recount_edge_occupancy(self) -> np.ndarray:
        """Occupancy recomputed from scratch (test oracle for the counters)."""
        occ = np.zeros(self.net.n_edges, dtype=np.int32)
        for vid in range(self._n):
            if self.status[vid] == DRIVING:
                occ[self.cur_edge[vid]] += 1
        return occ

    # -- determinism hooks -----------------------------------------------

    def _digest(self) -> bytes:
        h = hashlib.blake2b(digest_size=16)
        n = self._n
        h.update(struct.pack("<dq", self.t, self.step_count))
        h.update(self.status[:n].tobytes())
        h.update(self.cur_edge[:n].tobytes())
        h.update(self.offset[:n].tobytes())
        h.update(self.battery[:n].tobytes())
        h.update(self.route_pos[:n].tobytes())
        h.update(self.stranded[:n].tobytes())
        h.update(self.edge_occ.tobytes())
        for st in self.stations:
            h.update(struct.pack("<i", st.id))
            h.update(np.array(list(st.queue) + [-1] + st.in_service,
                              dtype=np.int32).tobytes())
        return h.digest()

    def state_hash(self) -> str:
        return self._digest().hex()

    def enable_hashing(self) -> None:
        self._traj = hashlib.blake2b(digest_size=16)

    def trajectory_hash(self) -> str:
        if self._traj is None:
            raise RuntimeError("call enable_hashing() before stepping")
        return self._traj.hexdigest()

    def attach_trace(self, fp: IO[str]) -> None:
        self._trace = fp

    # -- vehicle injection -------------------------------------------------

    def inject_parked(self, vclass: int, edge_idx: int, offset: float,
                      battery_kwh: float, capacity_kwh: float) -> int:
        """Place a vehicle on the road with no route; it moves once routed."""
        vid = self._new_slot()
        self.status[vid] = DRIVING
        self.vclass[vid] = vclass
        self.cur_edge[vid] = edge_idx
        self.offset[vid] = offset
        self.battery[vid] = battery_kwh
        self.battery_cap[vid] = capacity_kwh
        self.stop_offset[vid] = offset
        self.spawn_time[vid] = self.t
        self._set_route(vid, [edge_idx])
        self.edge_occ[edge_idx] += 1
        self.counters["spawned"] += 1
        return vid

    def inject_driving(self, vclass: int, edge_idx: int, offset: float,
                       battery_kwh: float, capacity_kwh: float,
                       seq_idx: list[int], stop_offset: float,
                       dest_station: int = -1) -> int:
        """Place a moving vehicle mid-route (test/experiment hook)."""
        vid = self.inject_parked(vclass, edge_idx, offset, battery_kwh,
                                 capacity_kwh)
        self._set_route(vid, [edge_idx] + list(seq_idx))
        self.stop_offset[vid] = stop_offset
        self.dest_station[vid] = dest_station
        self._driving_add(vid)
        return vid

    def set_station_route(self, vid: int, station: int,
                          seq_idx: list[int] | None = None,
                          weights: np.ndarray | None = None) -> None:
        """Point a driving vehicle at a station's anchor.

        ``seq_idx`` may carry a precomputed edge sequence (index space,
        excluding the current edge); otherwise the route is computed from
        the supplied or current weights. A vehicle already past the anchor
        on the anchor edge gets a loop route back to it.
        """
        if self.status[vid] != DRIVING:
            raise ValueError(f"vehicle {vid} is not driving")
        st = self.stations[station]
        e = int(self.cur_edge[vid])
        off = float(self.offset[vid])
        if seq_idx is None or (not seq_idx and e == st.edge_idx
                               and off > st.offset):
            w = weights if weights is not None else self.current_weights()
            allow_empty = not (e == st.edge_idx and off > st.offset)
            res = _route_idx(self.net, e, off, st.edge_idx, w,
                             allow_empty=allow_empty)
            if res is None:
                raise RuntimeError(
                    f"station {station} unreachable from edge "
                    f"{int(self.net.edge_ids[e])}")
            seq_idx = res[0]
        self._set_route(vid, [e] + list(seq_idx))
        self.stop_offset[vid] = st.offset
        self.dest_station[vid] = station
        if vid not in self._driving:
            self._driving_add(vid)


def world_init(net: RoadNetwork, profile: DemandProfile, n_background_ev: int,
               n_conventional: int, seed: int, params: SimParams | None = None,
               kernels=None) -> WorldState:
    """Build a world with the full day's spawn schedule drawn up front.

    Spawn times land in hours drawn from the profile weights (uniform within
    the hour); origin/destination edges are uniform over distinct edge pairs;
    EV battery capacity and initial charge are uniform over the configured
    ranges. Identical arguments give an identical schedule.
    """
    if n_background_ev < 0 or n_conventional < 0:
        raise ValueError("vehicle counts must be >= 0")
    params = params if params is not None else SimParams()
    world = WorldState(net, params, kernels)
    rng = np.random.default_rng(seed)
    n_total = n_conventional + n_background_ev

    def spawn_times(count: int, weights: np.ndarray, label: str) -> np.ndarray:
        if count == 0:
            return np.empty(0)
        total = weights.sum()
        if total <= 0:
            raise ValueError(
                f"{label} spawn rates are all zero but {count} requested")
        hours = rng.choice(24, size=count, p=weights / total)
        return hours * 3600.0 + rng.uniform(0.0, 3600.0, size=count)

    t_conv = spawn_times(n_conventional, profile.conventional, "conventional")
    t_bg = spawn_times(n_background_ev, profile.background_ev, "background_ev")
    times = np.concatenate([t_conv, t_bg])
    times = np.minimum(times, params.horizon - params.dt)

    origins = rng.integers(0, net.n_edges, size=n_total).astype(np.int32)
    dests = rng.integers(0, net.n_edges, size=n_total).astype(np.int32)
    clash = dests == origins
    while clash.any():
        dests[clash] = rng.integers(0, net.n_edges, size=int(clash.sum()))
        clash = dests == origins
    caps = rng.uniform(*params.battery_capacity_range, size=n_background_ev)
    fracs = rng.uniform(*params.initial_charge_range, size=n_background_ev)

    world._alloc(max(8, n_total + 1))
    world._n = n_total  # slots 0..n_total-1 are the scheduled vehicles
    world.spawn_time[:n_total] = times
    world.origin_edge[:n_total] = origins
    world.dest_edge[:n_total] = dests
    world.vclass[:n_conventional] = CONVENTIONAL
    world.vclass[n_conventional:n_total] = BACKGROUND_EV
    world.battery_cap[n_conventional:n_total] = caps
    world.battery[n_conventional:n_total] = caps * fracs
    world._sched_order = np.lexsort((np.arange(n_total), times))
    world._arr_buf = np.empty(max(8, n_total + 1), dtype=np.int32)
    world._need_buf = np.empty(max(8, n_total + 1), dtype=np.int32)
    world._moved_buf = np.empty(max(8, n_total + 1), dtype=np.float64)
    return world


# ---------------------------------------------------------------------------
# stepping


def _route_via_cache(world: WorldState, from_idx: int, to_idx: int
                     ) -> list[int] | None:
    """Free-flow route; node labels cached on the network across worlds."""
    net = world.net
    start = int(net.edge_dst[from_idx])
    labels = net._ff_label_cache.get(start)
    if labels is None:
        labels = _dijkstra(net, start, net._ff_weights)
        net._ff_label_cache[start] = labels
    time, plen = labels
    gate = int(net.edge_src[to_idx])
    if time[gate] == _INF:
        return None
    seq = _lex_walk(net, time, plen, net._ff_weights, start, gate)
    seq.append(to_idx)
    return seq


def _spawn(world: WorldState, vid: int) -> None:
    net = world.net
    o = int(world.origin_edge[vid])
    d = int(world.dest_edge[vid])
    if np.count_nonzero(world.edge_occ) == 0:
        seq = _route_via_cache(world, o, d)
    else:
        res = _route_idx(net, o, 0.0, d, world.current_weights())
        seq = res[0] if res is not None else None
    if seq is None:  # pragma: no cover - impossible on validated networks
        raise RuntimeError(f"no route for vehicle {vid}")
    world.status[vid] = DRIVING
    world.cur_edge[vid] = o
    world.offset[vid] = 0.0
    world._set_route(vid, [o] + seq)
    world.stop_offset[vid] = 0.5 * net.edge_len[d]
    world.edge_occ[o] += 1
    world._driving_add(vid)
    world.counters["spawned"] += 1


def _reroute_to_station(world: WorldState, vid: int, w: np.ndarray) -> None:
    """Send a low-battery EV to the station nearest by current travel time."""
    net = world.net
    e = int(world.cur_edge[vid])
    off = float(world.offset[vid])
    elen = net.edge_len[e]
    rem_time = w[e] * (elen - off) / elen
    labels = None
    best = -1
    best_t = _INF
    for j, st in enumerate(world.stations):
        if st.edge_idx == e and off <= st.offset:
            tj = w[e] * (st.offset - off) / elen
        else:
            if labels is None:
                labels = _dijkstra(net, int(net.edge_dst[e]), w)
            gate = int(net.edge_src[st.edge_idx])
            if labels[0][gate] == _INF:
                continue
            tj = rem_time + labels[0][gate] + w[st.edge_idx]
        if tj < best_t:
            best_t = tj
            best = j
    if best < 0:  # nowhere to charge; keep driving toward the old destination
        return
    st = world.stations[best]
    if st.edge_idx == e and off <= st.offset:
        seq: list[int] = []
    else:
        time, plen = labels  # type: ignore[misc]
        gate = int(net.edge_src[st.edge_idx])
        seq = _lex_walk(net, time, plen, w, int(net.edge_dst[e]), gate)
        seq.append(st.edge_idx)
    world._set_route(vid, [e] + seq)
    world.stop_offset[vid] = st.offset
    world.dest_station[vid] = best
    world.counters["charge_visits"] += 1


def step(world: WorldState) -> WorldState:
    """Advance the world by one dt. Mutates and returns ``world``."""
    params = world.params
    if world.t >= params.horizon:
        raise RuntimeError("cannot step past the horizon")
    t_end = world.t + params.dt

    # 1. spawns due in [t, t+dt)
    order = world._sched_order
    while (world._sched_ptr < order.size
           and world.spawn_time[order[world._sched_ptr]] < t_end):
        _spawn(world, int(order[world._sched_ptr]))
        world._sched_ptr += 1

    # 2. speed snapshot + movement
    net = world.net
    world.kernels.edge_speeds(world.edge_occ, net.edge_cap, net.edge_speed,
                              params.bpr_alpha, world._speed_buf)
    cands = world._driving_candidates()
    n_arr, n_need = world.kernels.advance_vehicles(
        params.dt, cands, world.stranded, world.vclass, world.cur_edge,
        world.offset, world._pool, world.route_start, world.route_len,
        world.route_pos, world.stop_offset, world.dest_station, world.battery,
        world.battery_cap, params.consumption_kwh_per_km / 1000.0,
        params.recharge_frac, net.edge_len, world._speed_buf, world.edge_occ,
        world._arr_buf, world._need_buf, world._moved_buf)

    # 3. low-battery EVs divert to the nearest station
    if n_need:
        w = world.current_weights()
        for i in range(n_need):
            _reroute_to_station(world, int(world._need_buf[i]), w)

    # 4. arrivals leave the road: trip end or queue join
    for i in range(n_arr):
        vid = int(world._arr_buf[i])
        world._driving_remove(vid)
        j = int(world.dest_station[vid])
        if j < 0:
            world.status[vid] = DEPARTED
            world.counters["departed"] += 1
        else:
            world.status[vid] = QUEUED
            world.queue_join_t[vid] = t_end
            world.stations[j].queue.append(vid)

    # 5. stations: energy + departures first, then promotions (a plug freed
    # this step is refilled this step; the newcomer charges from next step)
    for st in world.stations:
        if st.in_service:
            gain = st.power_kw * params.dt / 3600.0
            done = []
            for vid in st.in_service:
                b = world.battery[vid] + gain
                if b >= world.battery_cap[vid]:
                    world.battery[vid] = world.battery_cap[vid]
                    world.status[vid] = DEPARTED
                    world.counters["departed"] += 1
                    done.append(vid)
                else:
                    world.battery[vid] = b
            for vid in done:
                st.in_service.remove(vid)
        while len(st.in_service) < st.plugs and st.queue:
            vid = st.queue.popleft()
            world.charge_start_t[vid] = t_end
            if world.battery[vid] >= world.battery_cap[vid]:
                world.status[vid] = DEPARTED  # nothing to charge
                world.counters["departed"] += 1
            else:
                world.status[vid] = CHARGING
                st.in_service.append(vid)

    world.t = t_end
    world.step_count += 1

    counts = world.status_counts()
    if int(counts[1:].sum()) != world.counters["spawned"]:
        raise RuntimeError(
            f"vehicle conservation violated at t={world.t:.0f}: "
            f"spawned={world.counters['spawned']} but statuses sum to "
            f"{int(counts[1:].sum())}")

    if world._traj is not None:
        world._traj.update(world._digest())
    if world._trace is not None:
        rec = {
            "t": world.t,
            "unspawned": int(counts[UNSPAWNED]),
            "driving": int(counts[DRIVING]),
            "queued": int(counts[QUEUED]),
            "charging": int(counts[CHARGING]),
            "departed": int(counts[DEPARTED]),
            "stranded": world.n_stranded(),
            "station_load": [st.load() for st in world.stations],
            "edge_occupancy": world.edge_occ.tolist(),
        }
        world._trace.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return world


# ---------------------------------------------------------------------------
# inspection helpers


def station_load(world: WorldState) -> np.ndarray:
    """Queued plus in-service count per station (the Z channel)."""
    return np.array([st.load() for st in world.stations], dtype=np.int64)


def enroute_counts(world: WorldState, pos: tuple[int, float]
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Driving vehicles on the current best path from ``pos`` to each station.

    Counts cover the path's member edges (the partial starting edge is not
    a member, so vehicles sharing it are excluded; a station on the current
    edge counts 0). Returns (counts, reachable).
    """
    net = world.net
    fi = net.edge_idx(pos[0])
    off = float(pos[1])
    w = world.current_weights()
    m = net.n_stations
    counts = np.zeros(m, dtype=np.int64)
    reach = np.zeros(m, dtype=bool)
    labels = None
    for j in range(m):
        aj = int(net.station_edge[j])
        if aj == fi:
            reach[j] = True
            continue
        if labels is None:
            labels = _dijkstra(net, int(net.edge_dst[fi]), w)
        time, plen = labels
        gate = int(net.edge_src[aj])
        if time[gate] == _INF:
            continue
        seq = _lex_walk(net, time, plen, w, int(net.edge_dst[fi]), gate)
        seq.append(aj)
        counts[j] = int(world.edge_occ[seq].sum())
        reach[j] = True
    return counts, reach


def charge_demand(world: WorldState, vid: int) -> float:
    """kWh needed to fill vehicle ``vid`` (EVs only)."""
    if not (0 <= vid < world._n):
        raise KeyError(f"unknown vehicle {vid}")
    if world.vclass[vid] == CONVENTIONAL:
        raise ValueError(f"vehicle {vid} is conventional; it never charges")
    return float(world.battery_cap[vid] - world.battery[vid])
