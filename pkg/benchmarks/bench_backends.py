"""Compare the compiled simulation kernels against the pure-Python fallback.

Two measurements:

1. End-to-end: a full simulated day on the default grid with both backends.
   Trajectory hashes must match bit for bit. At realistic vehicle counts
   most wall time goes to routing and station bookkeeping (plain Python in
   both cases), so this mainly demonstrates equivalence.

2. Kernel-only: the per-step vehicle advancement call on a dense synthetic
   driving population, where the compiled loop's advantage actually shows.

Usage: python benchmarks/bench_backends.py [--steps N] [--evs N]
       [--conventional N] [--vehicles N] [--repeat K]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from evdispatch import DemandProfile, step, world_init
from evdispatch import _kernels_py
from evdispatch.experiments import default_network

try:
    from evdispatch import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def run_day(net, kernels, steps, evs, conventional, seed=7):
    world = world_init(net, DemandProfile.default(), n_background_ev=evs,
                       n_conventional=conventional, seed=seed,
                       kernels=kernels)
    world.enable_hashing()
    t0 = time.perf_counter()
    for _ in range(steps):
        step(world)
    return world.trajectory_hash(), time.perf_counter() - t0


def _synthetic_population(net, n, seed=0):
    """Random multi-edge routes over the real adjacency, everyone driving."""
    rng = np.random.default_rng(seed)
    succ = [[] for _ in range(net.n_edges)]
    for e in range(net.n_edges):
        for e2 in range(net.n_edges):
            if net.edge_dst[e] == net.edge_src[e2] and e2 != e:
                succ[e].append(e2)
    pool, starts, lens = [], [], []
    for _ in range(n):
        route = [int(rng.integers(net.n_edges))]
        for _ in range(int(rng.integers(6, 14))):
            route.append(int(rng.choice(succ[route[-1]])))
        starts.append(len(pool))
        lens.append(len(route))
        pool.extend(route)
    return (np.array(pool, dtype=np.int32),
            np.array(starts, dtype=np.int32),
            np.array(lens, dtype=np.int32))


def run_kernel(net, kernels, n, reps):
    """Advance a dense synthetic state ``reps`` times, dropping arrivals
    from the candidate set after each call exactly as the simulator does."""
    route_pool, route_start, route_len = _synthetic_population(net, n)
    rng = np.random.default_rng(1)
    cur = route_pool[route_start].copy()
    offset = rng.uniform(0.0, 300.0, n)
    route_pos = np.zeros(n, dtype=np.int32)
    stop = np.full(n, 250.0)
    dest = np.full(n, -1, dtype=np.int32)
    bat = rng.uniform(20.0, 50.0, n)
    cap = np.full(n, 60.0)
    strand = np.zeros(n, dtype=np.uint8)
    vclass = rng.integers(0, 2, n).astype(np.int8)
    occ = np.zeros(net.n_edges, dtype=np.int32)
    np.add.at(occ, cur, 1)
    speeds = np.empty(net.n_edges)
    out_arr = np.empty(n, dtype=np.int32)
    out_need = np.empty(n, dtype=np.int32)
    out_moved = np.empty(n, dtype=np.float64)
    cand = np.arange(n, dtype=np.int32)

    advanced = 0
    t0 = time.perf_counter()
    for _ in range(reps):
        kernels.edge_speeds(occ, net.edge_cap, net.edge_speed, 0.15, speeds)
        n_arr, _ = kernels.advance_vehicles(
            30.0, cand, strand, vclass, cur, offset, route_pool, route_start,
            route_len, route_pos, stop, dest, bat, cap, 0.0002, 0.3,
            net.edge_len, speeds, occ, out_arr, out_need, out_moved)
        advanced += cand.size
        if n_arr:
            cand = np.setdiff1d(cand, out_arr[:n_arr], assume_unique=True)
    elapsed = time.perf_counter() - t0
    digest = hash((cur.tobytes(), offset.tobytes(), bat.tobytes(),
                   occ.tobytes(), strand.tobytes()))
    return digest, elapsed, advanced


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2880,
                    help="simulation steps (2880 = one day at 30 s)")
    ap.add_argument("--evs", type=int, default=400)
    ap.add_argument("--conventional", type=int, default=400)
    ap.add_argument("--vehicles", type=int, default=4000,
                    help="synthetic driving population for the kernel timing")
    ap.add_argument("--repeat", type=int, default=3,
                    help="repetitions per measurement (best is reported)")
    args = ap.parse_args()

    net = default_network()
    backends = [("pure", _kernels_py)]
    if _kernels_c is not None:
        backends.insert(0, ("compiled", _kernels_c))
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"[end-to-end] {args.steps} steps, {args.evs} EVs + "
          f"{args.conventional} conventional on "
          f"{net.n_nodes} nodes / {net.n_edges} edges")
    day: dict[str, tuple[str, float]] = {}
    for name, mod in backends:
        best = float("inf")
        digest = None
        for _ in range(args.repeat):
            h, dt = run_day(net, mod, args.steps, args.evs, args.conventional)
            best = min(best, dt)
            if digest is None:
                digest = h
            elif digest != h:
                raise AssertionError(f"{name}: non-deterministic trajectory")
        day[name] = (digest, best)
        print(f"  {name:>9}: {best:8.3f} s  "
              f"({args.steps / best:7.0f} steps/s)  trajectory {digest[:16]}")
    if len(day) == 2:
        if day["compiled"][0] != day["pure"][0]:
            raise AssertionError("backends disagree on the day trajectory")
        print(f"  trajectories identical; wall-clock ratio "
              f"{day['pure'][1] / day['compiled'][1]:.2f}x "
              "(routing-bound, see kernel timing below)")

    reps = 15
    print(f"[kernel-only] advance {args.vehicles} driving vehicles, "
          f"{reps} steps")
    kern: dict[str, tuple[int, float]] = {}
    for name, mod in backends:
        best = float("inf")
        digest = None
        for _ in range(args.repeat):
            h, dt, adv = run_kernel(net, mod, args.vehicles, reps)
            best = min(best, dt)
            digest = h if digest is None else digest
            if digest != h:
                raise AssertionError(f"{name}: kernel non-deterministic")
        kern[name] = (digest, best)
        print(f"  {name:>9}: {best * 1e3 / reps:8.3f} ms/step  "
              f"final-state {digest & 0xFFFFFFFF:08x}")
    if len(kern) == 2:
        if kern["compiled"][0] != kern["pure"][0]:
            raise AssertionError("backends disagree on the kernel final state")
        print(f"  final states identical; kernel speedup "
              f"{kern['pure'][1] / kern['compiled'][1]:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
