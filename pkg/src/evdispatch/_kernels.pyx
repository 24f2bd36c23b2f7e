# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the simulation hot loop.

Mirrors evdispatch._kernels_py operation for operation; results must stay
bit-identical (the build disables FP contraction for that reason).
"""

import numpy as np

cimport numpy as cnp

CONVENTIONAL = 0
BACKGROUND_EV = 1
TARGET_EV = 2

cdef int _CONVENTIONAL = 0
cdef int _BACKGROUND_EV = 1


def edge_speeds(int[:] occ, double[:] cap, double[:] free, double alpha,
                double[:] out):
    cdef Py_ssize_t i, n = occ.shape[0]
    cdef double r, r2
    for i in range(n):
        r = occ[i] / cap[i]
        r2 = r * r
        out[i] = free[i] / (1.0 + alpha * (r2 * r2))


def advance_vehicles(
    double dt,
    int[:] candidates,
    unsigned char[:] stranded,
    signed char[:] vclass,
    int[:] cur_edge,
    double[:] offset,
    int[:] route_pool,
    int[:] route_start,
    int[:] route_len,
    int[:] route_pos,
    double[:] stop_offset,
    int[:] dest_station,
    double[:] battery,
    double[:] battery_cap,
    double consumption_per_m,
    double recharge_frac,
    double[:] edge_len,
    double[:] edge_speed,
    int[:] edge_occ,
    int[:] out_arrived,
    int[:] out_needs,
    double[:] out_moved,
):
    cdef Py_ssize_t i, n = candidates.shape[0]
    cdef int v, e, rs, rp, rl
    cdef int n_arr = 0, n_need = 0
    cdef double moved, dist, off, limit, gap, b
    cdef bint last, arrived
    for i in range(n):
        v = candidates[i]
        moved = 0.0
        arrived = False
        if not stranded[v]:
            e = cur_edge[v]
            dist = edge_speed[e] * dt
            off = offset[v]
            rs = route_start[v]
            rp = route_pos[v]
            rl = route_len[v]
            while True:
                last = rp == rl - 1
                limit = stop_offset[v] if last else edge_len[e]
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
                e = route_pool[rs + rp]
                edge_occ[e] += 1
                off = 0.0
            cur_edge[v] = e
            offset[v] = off
            route_pos[v] = rp
            if vclass[v] != _CONVENTIONAL and moved > 0.0:
                b = battery[v] - consumption_per_m * moved
                if b <= 0.0:
                    b = 0.0
                    stranded[v] = 1
                battery[v] = b
        if (
            vclass[v] == _BACKGROUND_EV
            and not arrived  # an off-road vehicle must not be rerouted
            and not stranded[v]
            and dest_station[v] < 0
            and battery[v] < recharge_frac * battery_cap[v]
        ):
            out_needs[n_need] = v
            n_need += 1
        out_moved[i] = moved
    return n_arr, n_need
