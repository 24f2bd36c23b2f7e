"""Shared experiment plumbing: canonical network, evaluation, summaries.

The CLI and the test suite both run experiments through these helpers so
results match exactly between the two entry points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dqn import TrainConfig, TrainResult, _episode_seed, train
from .env import ChargingEnv, EnvConfig, EpisodeConfig
from .network import RoadNetwork, gen_grid
from .policies import GreedyPolicy, QPolicy, RandomPolicy

# The canonical experiment map: an 8x8 grid with 5 stations. One block is
# 500 m; stations sit at least 1200 m apart by road so their catchments
# stay balanced, and each has a single 100 kW plug, which is what makes
# queue-aware dispatch matter at a few hundred EVs per day.
DEFAULT_GRID = dict(rows=8, cols=8, block_len=500.0, n_stations=5,
                    min_station_dist=1200.0, seed=5, speed=13.9, capacity=4.0,
                    plugs=1, power_kw=100.0)


def default_network(**overrides) -> RoadNetwork:
    args = {**DEFAULT_GRID, **overrides}
    return gen_grid(**args)


# Training settings that reliably beat the greedy baseline on the default
# map. They differ from TrainConfig's defaults in four ways, all aimed at a
# small observation space and a terminal-only reward: a gentler learning
# rate, a lower discount (the sooner the charge starts, the better — gamma
# sharpens that gradient), prioritized replay (terminal transitions carry
# all the signal and are rare), and a long exploration anneal so a
# half-trained argmax policy never dominates data collection.
TUNED_TRAIN = dict(episodes=300, lr=1e-3, target_sync=150,
                   xi_anneal_steps=4000, gamma=0.9, prioritized=True,
                   hidden=(128, 64))

# The dueling head nearly doubles the parameters next to the output, so it
# needs more data before its argmax ordering settles; everything else as is.
TUNED_TRAIN_DUELING = dict(TUNED_TRAIN, episodes=400)


def tuned_train_config(arch: str = "dqn", seed: int = 0) -> TrainConfig:
    kw = TUNED_TRAIN_DUELING if arch == "dueling_ddqn" else TUNED_TRAIN
    return TrainConfig(arch=arch, seed=seed, **kw)


@dataclass(frozen=True)
class MetricsRow:
    scenario: int          # background EV count
    policy: str
    seed: int
    episode: int
    t_travel_s: float
    reward: float
    horizon_expired: bool


def make_policy(kind: str, n_stations: int, params=None):
    if kind == "random":
        return RandomPolicy(n_stations)
    if kind == "greedy":
        return GreedyPolicy()
    if kind in ("dqn", "dueling_ddqn"):
        if params is None:
            raise ValueError(f"policy {kind!r} needs trained parameters")
        return QPolicy(params)
    raise ValueError(f"unknown policy kind {kind!r}")


def evaluate_policy(env: ChargingEnv, policy, kind: str, scenario: int,
                    episodes: int, seed: int) -> list[MetricsRow]:
    """Run ``episodes`` fresh days under one policy; returns one row each.

    Episode worlds and the random policy's draws derive from ``seed`` via
    separate streams, so different policies face identical days.
    """
    rows = []
    for i in range(episodes):
        obs = env.reset(EpisodeConfig(n_background_ev=scenario,
                                      seed=_episode_seed(seed, 1, i)))
        policy.begin_episode(np.random.default_rng(_episode_seed(seed, 2, i)))
        done = False
        reward = 0.0
        info: dict = {}
        while not done:
            res = env.act_and_step(policy.act(obs))
            obs = res.obs
            reward = res.reward
            done = res.done
            info = res.info
        rows.append(MetricsRow(scenario, kind, seed, i,
                               float(info["t_travel"]), reward,
                               bool(info["horizon_expired"])))
    return rows


def summarize(rows: list[MetricsRow]) -> list[dict]:
    """Mean travel time / reward per (scenario, policy), pooled over seeds."""
    groups: dict[tuple[int, str], list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.scenario, r.policy), []).append(r)
    out = []
    for (scenario, policy), grp in sorted(groups.items()):
        out.append({
            "scenario": scenario,
            "policy": policy,
            "episodes": len(grp),
            "seeds": len({r.seed for r in grp}),
            "mean_t_travel_s": float(np.mean([r.t_travel_s for r in grp])),
            "mean_reward": float(np.mean([r.reward for r in grp])),
            "expired": sum(r.horizon_expired for r in grp),
        })
    return out


def train_agent(net: RoadNetwork, scenario: int, cfg: TrainConfig,
                env_cfg: EnvConfig | None = None,
                capture_first_batch: bool = False) -> TrainResult:
    env = ChargingEnv(net, cfg=env_cfg)
    return train(env, scenario, cfg, capture_first_batch=capture_first_batch)
