"""Release gate: nine end-to-end checks over the whole stack.

Each test prints exactly one `[PASS]`/`[FAIL]` verdict line (bypassing
pytest's capture) with the measured numbers, then asserts. Criteria 1 and 2
train real agents and take the bulk of the runtime; everything else runs in
seconds.
"""
import sys
import time

import numpy as np
import pytest

from evdispatch import (
    ChargingEnv,
    DemandProfile,
    DuelingParams,
    EpisodeConfig,
    MlpParams,
    QTrainer,
    RandomPolicy,
    ReplayBuffer,
    TrainConfig,
    Transition,
    backward,
    episode_reward,
    mse_loss,
    q_values,
    shortest_path,
    step,
    world_init,
)
from evdispatch.experiments import (default_network, evaluate_policy,
                                    make_policy, train_agent,
                                    tuned_train_config)
from oracles import brute_force_path, random_graph

SCENARIOS = (200, 300, 400)
SEEDS = (1, 2, 3)
EVAL_EPISODES = 50

NET = default_network()
ENV = ChargingEnv(NET)

_agents: dict = {}
_eval_means: dict = {}


def _verdict(capsys, ok: bool, label: str, detail: str) -> bool:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}",
              file=sys.stderr)
    return ok


def _agent(arch: str, scenario: int, seed: int):
    key = (arch, scenario, seed)
    if key not in _agents:
        res = train_agent(NET, scenario, tuned_train_config(arch, seed))
        _agents[key] = res.params
    return _agents[key]


def _eval_mean(kind: str, scenario: int, seed: int, params=None) -> float:
    key = (kind, scenario, seed)
    if key not in _eval_means:
        rows = evaluate_policy(ENV, make_policy(kind, NET.n_stations, params),
                               kind, scenario, episodes=EVAL_EPISODES,
                               seed=seed)
        _eval_means[key] = float(np.mean([r.t_travel_s for r in rows]))
    return _eval_means[key]


# ---------------------------------------------------------------------------
# 1. learned dispatch beats the nearest-station rule, which beats random


def test_criterion_1_policy_ordering(capsys):
    assert NET.n_nodes == 64 and NET.n_stations == 5
    assert ENV.cfg.n_conventional == 400

    for sc in SCENARIOS:  # train outside the evaluation clock
        for s in SEEDS:
            _agent("dqn", sc, s)

    slowest = 0.0
    greedy_ok = []
    dqn_wins = {}
    for sc in SCENARIOS:
        means = {}
        for kind in ("random", "greedy", "dqn"):
            t0 = time.perf_counter()
            means[kind] = [
                _eval_mean(kind, sc, s,
                           _agent("dqn", sc, s) if kind == "dqn" else None)
                for s in SEEDS]
            slowest = max(slowest, time.perf_counter() - t0)
        greedy_ok.append(np.mean(means["greedy"]) < np.mean(means["random"]))
        dqn_wins[sc] = sum(d < g for d, g in zip(means["dqn"],
                                                 means["greedy"]))
    ok = (all(greedy_ok)
          and all(w >= 2 for w in dqn_wins.values())
          and slowest <= 300.0)
    detail = (f"greedy<random in {sum(greedy_ok)}/3 scenarios; dqn<greedy "
              + ", ".join(f"{dqn_wins[sc]}/3 @ {sc} EVs" for sc in SCENARIOS)
              + f"; slowest policy eval {slowest:.0f}s (limit 300s)")
    assert _verdict(capsys, ok, "criterion 1", detail)


# ---------------------------------------------------------------------------
# 2. the dueling double-Q variant matches or beats the plain agent


def test_criterion_2_dueling_vs_dqn(capsys):
    sc = 400
    pairs = []
    for s in SEEDS:
        d = _eval_mean("dqn", sc, s, _agent("dqn", sc, s))
        u = _eval_mean("dueling_ddqn", sc, s, _agent("dueling_ddqn", sc, s))
        pairs.append((u, d))
    wins = sum(u <= d for u, d in pairs)
    ok = wins >= 2
    detail = (f"dueling<=dqn on {wins}/3 seeds @ {sc} EVs ("
              + ", ".join(f"{u:.0f} vs {d:.0f}" for u, d in pairs) + ")")
    assert _verdict(capsys, ok, "criterion 2", detail)


# ---------------------------------------------------------------------------
# 3. terminal reward arithmetic


def test_criterion_3_terminal_reward_values(capsys):
    exact = (episode_reward(7200.0) == 1.0
             and episode_reward(545.0) == 7200.0 / 545.0)
    rng = np.random.default_rng(3)
    ts = rng.uniform(1.0, 86400.0, 1000)
    worst = max(abs(episode_reward(float(t)) * t - 7200.0) for t in ts)
    tol = float(np.spacing(7200.0))
    ok = exact and worst <= tol
    detail = (f"reward(7200)={episode_reward(7200.0)!r}, "
              f"reward(545)*545 recovers 7200 exactly; worst |r*T-7200| "
              f"over 1000 draws = {worst:.3e} (tol {tol:.3e})")
    assert _verdict(capsys, ok, "criterion 3", detail)


# ---------------------------------------------------------------------------
# 4. reward is zero on every non-terminal step, one terminal per episode


def test_criterion_4_sparse_rewards(capsys):
    policy = RandomPolicy(NET.n_stations)
    nonzero_intermediate = 0
    bad_terminals = 0
    for ep in range(100):
        obs = ENV.reset(EpisodeConfig(n_background_ev=200, seed=90_000 + ep))
        policy.begin_episode(np.random.default_rng(ep))
        rewards = []
        dones = []
        done = False
        while not done:
            res = ENV.act_and_step(policy.act(obs))
            obs = res.obs
            rewards.append(res.reward)
            dones.append(res.done)
            done = res.done
        nonzero_intermediate += sum(r != 0.0 for r in rewards[:-1])
        bad_terminals += (sum(dones) != 1 or rewards[-1] <= 0.0)
    ok = nonzero_intermediate == 0 and bad_terminals == 0
    detail = (f"100 episodes: {nonzero_intermediate} nonzero intermediate "
              f"rewards, {bad_terminals} episodes without exactly one "
              "positive terminal")
    assert _verdict(capsys, ok, "criterion 4", detail)


# ---------------------------------------------------------------------------
# 5. analytic gradients match central finite differences


def _random_net(arch, rng):
    if arch == "dqn":
        params = MlpParams.init([3, 5, 4, 2], rng)
    else:
        params = DuelingParams.init([3, 5], rng).with_actions(2)
    for arr in params.arrays():
        arr[:] = rng.normal(scale=0.5, size=arr.shape)
    return params


def _kink_margin(params, states):
    from evdispatch.dqn import _dueling_forward, _mlp_forward
    if isinstance(params, MlpParams):
        _, (_, pres) = _mlp_forward(params, states)
    else:
        _, (_, pres, _, _) = _dueling_forward(params, states)
    return min(float(np.abs(p).min()) for p in pres)


def test_criterion_5_gradient_check(capsys):
    h = 1e-4
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    for arch in ("dqn", "dueling_ddqn"):
        for trial in range(20):
            rng = np.random.default_rng(1000 + trial)
            while True:  # keep every ReLU input clear of the probe step
                params = _random_net(arch, rng)
                states = rng.normal(size=(6, 3))
                if _kink_margin(params, states) > 10 * h:
                    break
            actions = rng.integers(0, 2, size=6)
            y = rng.normal(size=6)
            analytic, _ = backward(params, states, actions, y)

            def loss():
                pred = q_values(params, states)[np.arange(6), actions]
                return mse_loss(pred, y)

            for arr, g in zip(params.arrays(), analytic):
                flat, gf = arr.ravel(), g.ravel()
                for k in range(flat.size):
                    keep = flat[k]
                    flat[k] = keep + h
                    up = loss()
                    flat[k] = keep - h
                    down = loss()
                    flat[k] = keep
                    num = (up - down) / (2 * h)
                    rel = abs(gf[k] - num) / max(1e-6, abs(gf[k]), abs(num))
                    worst = max(worst, rel)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and elapsed < 10.0 and checked == 40
    detail = (f"{checked} nets (both architectures): worst elementwise "
              f"rel err {worst:.2e} (tol 1e-4) in {elapsed:.1f}s (limit 10s)")
    assert _verdict(capsys, ok, "criterion 5", detail)


# ---------------------------------------------------------------------------
# 6. router agrees with exhaustive path enumeration


def test_criterion_6_routing_vs_enumeration(capsys):
    rng = np.random.default_rng(60)
    t0 = time.perf_counter()
    graphs = 0
    queries = 0
    mismatches = 0
    while graphs < 200:
        net = random_graph(rng, max_nodes=10)
        w = rng.uniform(5.0, 60.0, net.n_edges)
        for _ in range(3):
            src = int(net.edge_ids[rng.integers(net.n_edges)])
            dst = int(net.edge_ids[rng.integers(net.n_edges)])
            off = float(rng.uniform(0.0, net.edge_len[net.edge_idx(src)]))
            got = shortest_path(net, src, off, dst, w)
            want = brute_force_path(net, src, off, dst, w)
            if got is None or want is None:
                mismatches += (got is None) != (want is None)
            else:
                same = (tuple(got.edges) == want[0]
                        and got.total_length == want[1]
                        and got.est_travel_time == want[2])
                mismatches += not same
            queries += 1
        graphs += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    detail = (f"{graphs} random graphs / {queries} queries: "
              f"{mismatches} mismatches vs exhaustive enumeration in "
              f"{elapsed:.1f}s (limit 30s)")
    assert _verdict(capsys, ok, "criterion 6", detail)


# ---------------------------------------------------------------------------
# 7. a full day conserves vehicles and replays bit-identically


def test_criterion_7_day_conservation_and_replay(capsys):
    def run(check: bool) -> str:
        w = world_init(NET, DemandProfile.default(), n_background_ev=400,
                       n_conventional=400, seed=2026)
        w.enable_hashing()
        for _ in range(2880):
            step(w)
            if check:
                counts = w.status_counts()
                assert int(counts[1:].sum()) == w.counters["spawned"]
                assert np.array_equal(w.recount_edge_occupancy(), w.edge_occ)
        assert w.t == w.params.horizon
        return w.trajectory_hash()

    t0 = time.perf_counter()
    h1 = run(check=True)
    h2 = run(check=False)
    elapsed = time.perf_counter() - t0
    ok = h1 == h2 and elapsed <= 30.0
    detail = (f"2880 steps conserve all 800 vehicles; replay hash "
              f"{'matches' if h1 == h2 else 'DIFFERS'} ({h1[:12]}) "
              f"in {elapsed:.1f}s (limit 30s)")
    assert _verdict(capsys, ok, "criterion 7", detail)


# ---------------------------------------------------------------------------
# 8. replay buffer eviction and frozen-network sync cadence


def test_criterion_8_replay_and_target_sync(capsys):
    buf = ReplayBuffer(capacity=10_000)
    sentinels = [Transition(np.zeros(2), 0, float(i), np.zeros(2), False)
                 for i in range(10_001)]
    for tr in sentinels:
        buf.push(tr)
    fifo_ok = (len(buf) == 10_000 and sentinels[0] not in buf
               and sentinels[1] in buf and sentinels[-1] in buf)

    rng = np.random.default_rng(8)
    cfg = TrainConfig(hidden=(16,), batch_size=32)  # sync default: 8000
    tr = QTrainer(4, 3, cfg)
    probe = rng.normal(size=4)
    snaps = {}
    want = {8000, 15_999, 16_000}
    while tr.grad_steps < 16_001:
        tr.record(Transition(rng.normal(size=4), int(rng.integers(3)),
                             float(rng.normal()), rng.normal(size=4),
                             bool(rng.random() < 0.1)))
        if tr.grad_steps in want and tr.grad_steps not in snaps:
            snaps[tr.grad_steps] = q_values(tr.target.params, probe).copy()
    sync_ok = tr.sync_events == [8000, 16_000]
    stable = np.array_equal(snaps[8000], snaps[15_999])
    moved = not np.array_equal(snaps[15_999], snaps[16_000])
    ok = fifo_ok and sync_ok and stable and moved
    detail = (f"capacity 10000 evicts oldest first: {fifo_ok}; syncs at "
              f"{tr.sync_events}; frozen outputs bit-stable for 7999 steps: "
              f"{stable}; refresh at 16000 changes them: {moved}")
    assert _verdict(capsys, ok, "criterion 8", detail)


# ---------------------------------------------------------------------------
# 9. out-of-the-box training improves its own reward trend


def test_criterion_9_default_training_trend(capsys):
    slopes = []
    longest = 0.0
    for seed in (0, 1, 2):
        t0 = time.perf_counter()
        res = train_agent(NET, 300, TrainConfig(seed=seed))
        longest = max(longest, time.perf_counter() - t0)
        rewards = np.array([s.reward for s in res.stats])
        ma = np.convolve(rewards, np.ones(5) / 5, mode="valid")
        slopes.append(float(np.polyfit(np.arange(ma.size), ma, 1)[0]))
    trending = sum(s > 0 for s in slopes)
    ok = trending >= 1 and longest <= 1800.0
    detail = (f"50-episode default run: 5-episode moving-average reward "
              f"slope > 0 on {trending}/3 seeds "
              f"({', '.join(f'{s:+.3f}' for s in slopes)}); slowest "
              f"training {longest:.0f}s (limit 1800s)")
    assert _verdict(capsys, ok, "criterion 9", detail)
