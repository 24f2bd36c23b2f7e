"""Pure-Python reference kernels for the simulation hot loop.

The compiled extension (``evdispatch._kernels``) mirrors these functions
operation for operation, in the same order, so trajectories are
bit-identical across backends. Any change here must be mirrored there.
"""
from __future__ import annotations

import numpy as np

# Vehicle class codes shared with sim.py and the compiled kernel.
CONVENTIONAL = 0
BACKGROUND_EV = 1
TARGET_EV = 2


def edge_speeds(occ, cap, free, alpha, out):
    """Fill ``out`` with congested speeds: free / (1 + alpha * (occ/cap)^4)."""
    r = occ / cap
    r2 = r * r
    np.divide(free, 1.0 + alpha * (r2 * r2), out=out)


def advance_vehicles(
    dt,
    candidates,
    stranded,
    vclass,
    cur_edge,
    offset,
    route_pool,
    route_start,
    route_len,
    route_pos,
    stop_offset,
    dest_station,
    battery,
    battery_cap,
    consumption_per_m,
    recharge_frac,
    edge_len,
    edge_speed,
    edge_occ,
    out_arrived,
    out_needs,
    out_moved,
):
    """Advance driving vehicles by one step of ``dt`` seconds.

    Each vehicle gets a distance budget of speed(current edge) * dt, taken
    from the step-start speed snapshot; leftover distance carries across
    edge boundaries. A vehicle reaching ``stop_offset`` on its final route
    edge leaves the road (occupancy decremented) and is reported in
    ``out_arrived``. Battery drain may strand an EV (flag set, vehicle
    halts from the next step). Background EVs dropping below the recharge
    threshold while still heading to a plain destination are reported in
    ``out_needs``; the caller reroutes them.

    Returns ``(n_arrived, n_needs)``, the counts written to the two output
    buffers. ``out_moved[i]`` records meters moved by ``candidates[i]``.
    """
    n_arr = 0
    n_need = 0
    for i in range(len(candidates)):
        v = int(candidates[i])
        moved = 0.0
        arrived = False
        if not stranded[v]:
            e = int(cur_edge[v])
            dist = float(edge_speed[e]) * dt
            off = float(offset[v])
            rs = int(route_start[v])
            rp = int(route_pos[v])
            rl = int(route_len[v])
            while True:
                last = rp == rl - 1
                limit = float(stop_offset[v]) if last else float(edge_len[e])
                gap = limit - off
                if dist < gap:
                    off += dist
                    moved += dist
                    break
                moved += gap
                dist -= gap
                edge_occ[e] -= 1
                if last:
                    off = limit
                    out_arrived[n_arr] = v
                    n_arr += 1
                    arrived = True
                    break
                rp += 1
                e = int(route_pool[rs + rp])
                edge_occ[e] += 1
                off = 0.0
            cur_edge[v] = e
            offset[v] = off
            route_pos[v] = rp
            if vclass[v] != CONVENTIONAL and moved > 0.0:
                b = float(battery[v]) - consumption_per_m * moved
                if b <= 0.0:
                    b = 0.0
                    stranded[v] = 1
                battery[v] = b
        if (
            vclass[v] == BACKGROUND_EV
            and not arrived  # an off-road vehicle must not be rerouted
            and not stranded[v]
            and dest_station[v] < 0
            and battery[v] < recharge_frac * battery_cap[v]
        ):
            out_needs[n_need] = v
            n_need += 1
        out_moved[i] = moved
    return n_arr, n_need
