"""Episode interface: one EV picking a charging station under traffic.

An episode wraps one simulated day. The world runs on its own from midnight
until the target EV's departure time; from then on the agent picks a station
index each decision slot, the world advances, and the episode ends the moment
the target's charging starts (reward = reward_scale / travel time, where
travel time spans departure to plug attachment, queue wait included) or when
the day runs out. All intermediate rewards are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import sim
from .network import RoadNetwork, _dijkstra, _lex_walk
from .sim import DemandProfile, SimParams, WorldState

_INF = float("inf")


@dataclass
class EnvConfig:
    """Environment-level knobs shared by every episode."""

    n_conventional: int = 400
    decision_interval: float = 60.0          # seconds between agent actions
    depart_window: tuple[float, float] = (21600.0, 75600.0)  # 06:00-21:00
    dist_scale: float = 2000.0               # d / (d + scale) normalization
    enroute_scale: float = 50.0
    load_scale: float = 10.0
    reward_scale: float = 7200.0
    target_capacity_kwh: float = 50.0
    target_battery_kwh: float = 25.0
    sim: SimParams = field(default_factory=SimParams)


@dataclass
class EpisodeConfig:
    """Per-episode randomness and overrides."""

    n_background_ev: int
    seed: int
    depart_window: tuple[float, float] | None = None
    decision_interval: float | None = None


@dataclass(frozen=True)
class Observation:
    """Per-station state at a decision point.

    Raw channels: road distance to each station's anchor (meters, along the
    current best-time path), driving vehicles on that path, and station
    occupancy (queued + in service). ``vector`` is the flat normalized form
    [d..., n..., z...] with every channel mapped through x / (x + scale);
    unreachable stations encode distance 1.0.
    """

    dist_m: np.ndarray
    enroute: np.ndarray
    station_load: np.ndarray
    reachable: np.ndarray
    vector: np.ndarray


@dataclass(frozen=True)
class StepResult:
    obs: Observation
    reward: float
    done: bool
    info: dict[str, Any]


def episode_reward(t_travel: float, scale: float = 7200.0) -> float:
    """Terminal reward: scale / t_travel. Shorter trips score higher."""
    if t_travel <= 0:
        raise ValueError(f"t_travel must be > 0, got {t_travel}")
    return scale / t_travel


class ChargingEnv:
    """Single-EV dispatch environment over a road network."""

    def __init__(self, net: RoadNetwork, profile: DemandProfile | None = None,
                 cfg: EnvConfig | None = None, kernels=None):
        if net.n_stations < 1:
            raise ValueError("environment needs at least one station")
        self.net = net
        self.profile = profile if profile is not None else DemandProfile.default()
        self.cfg = cfg if cfg is not None else EnvConfig()
        self.kernels = kernels
        self.world: WorldState | None = None
        self.target: int = -1
        self._depart_t = 0.0
        self._decision_interval = self.cfg.decision_interval
        self._active = False
        self._cache_step = -1
        self._cache_seqs: list[list[int] | None] = []
        self._log: list[dict] = []

    @property
    def m(self) -> int:
        return self.net.n_stations

    @property
    def episode_log(self) -> list[dict]:
        return self._log

    def reset(self, ep: EpisodeConfig) -> Observation:
        """Start a fresh day and pre-roll it to the target's departure."""
        cfg = self.cfg
        dt = cfg.sim.dt
        window = ep.depart_window if ep.depart_window is not None \
            else cfg.depart_window
        di = ep.decision_interval if ep.decision_interval is not None \
            else cfg.decision_interval
        steps = di / dt
        if abs(steps - round(steps)) > 1e-9 or di <= 0:
            raise ValueError("decision_interval must be a positive multiple of dt")
        self._decision_interval = di
        if not (0 <= window[0] <= window[1] < cfg.sim.horizon):
            raise ValueError(f"depart window {window} outside the day")

        rng = np.random.default_rng(ep.seed)
        world_seed = int(rng.integers(0, 2 ** 63 - 1))
        depart = float(rng.uniform(window[0], window[1]))
        depart = min(int(depart / dt) * dt, cfg.sim.horizon - dt)
        origin = int(rng.integers(0, self.net.n_edges))

        self.world = sim.world_init(self.net, self.profile, ep.n_background_ev,
                                    cfg.n_conventional, world_seed,
                                    params=cfg.sim, kernels=self.kernels)
        while self.world.t < depart:
            sim.step(self.world)
        self.target = self.world.inject_parked(
            sim.TARGET_EV, origin, 0.0, cfg.target_battery_kwh,
            cfg.target_capacity_kwh)
        self._depart_t = depart
        self._active = True
        self._log = []
        obs = self._observe()
        self._log_record(obs, action=None, reward=0.0, done=False)
        return obs

    def act_and_step(self, action: int) -> StepResult:
        """Dispatch to station ``action`` and advance one decision slot.

        The slot ends early if the target joins a station queue. The episode
        ends when charging starts, or at the horizon (then the reward uses
        the remaining-day travel time and info flags the expiry). Actions
        while the target queues are recorded but have no effect.
        """
        if not self._active:
            raise RuntimeError("episode is finished; call reset()")
        if not (0 <= action < self.m):
            raise ValueError(f"action {action} out of range [0, {self.m})")
        world = self.world
        assert world is not None
        if world.status[self.target] == sim.DRIVING:
            seq = self._cache_seqs[action] if self._cache_step == world.step_count \
                else None
            world.set_station_route(self.target, action, seq_idx=seq)

        reward = 0.0
        done = False
        expired = False
        t_travel = None
        dt = self.cfg.sim.dt
        for _ in range(int(round(self._decision_interval / dt))):
            was_driving = world.status[self.target] == sim.DRIVING
            sim.step(world)
            status = world.status[self.target]
            if status in (sim.CHARGING, sim.DEPARTED):
                t_travel = float(world.charge_start_t[self.target] - self._depart_t)
                reward = episode_reward(t_travel, self.cfg.reward_scale)
                done = True
                break
            if world.t >= self.cfg.sim.horizon:
                t_travel = float(self.cfg.sim.horizon - self._depart_t)
                reward = episode_reward(t_travel, self.cfg.reward_scale)
                done = True
                expired = True
                break
            if was_driving and status == sim.QUEUED:
                break  # at the station; wait out the queue from next slot

        if done:
            self._active = False
        obs = self._observe()
        info = {
            "t": world.t,
            "t_depart": self._depart_t,
            "t_travel": t_travel,
            "action": action,
            "target_status": sim.STATUS_NAMES[world.status[self.target]],
            "target_stranded": bool(world.stranded[self.target]),
            "horizon_expired": expired,
        }
        self._log_record(obs, action=action, reward=reward, done=done)
        return StepResult(obs, reward, done, info)

    # -- observation ---------------------------------------------------

    def _observe(self) -> Observation:
        world = self.world
        assert world is not None
        net = self.net
        cfg = self.cfg
        m = self.m
        fi = int(world.cur_edge[self.target])
        off = float(world.offset[self.target])
        w = world.current_weights()

        dist = np.full(m, _INF)
        reach = np.zeros(m, dtype=bool)
        enroute = np.zeros(m, dtype=np.int64)
        seqs: list[list[int] | None] = [None] * m
        labels = None
        for j in range(m):
            aj = int(net.station_edge[j])
            if aj == fi:
                dist[j] = 0.0
                reach[j] = True
                seqs[j] = []
                continue
            if labels is None:
                labels = _dijkstra(net, int(net.edge_dst[fi]), w)
            time, plen = labels
            gate = int(net.edge_src[aj])
            if time[gate] == _INF:
                continue
            seq = _lex_walk(net, time, plen, w, int(net.edge_dst[fi]), gate)
            seq.append(aj)
            seqs[j] = seq
            dist[j] = plen[gate] + net.edge_len[aj]
            reach[j] = True
            enroute[j] = int(world.edge_occ[seq].sum())
        load = sim.station_load(world)

        finite = np.where(reach, dist, 0.0)  # keep inf out of the division
        dn = np.where(reach, finite / (finite + cfg.dist_scale), 1.0)
        nn = enroute / (enroute + cfg.enroute_scale)
        zn = load / (load + cfg.load_scale)
        vec = np.concatenate([dn, nn, zn])
        self._cache_step = world.step_count
        self._cache_seqs = seqs
        return Observation(dist, enroute, load, reach, vec)

    def _log_record(self, obs: Observation, action, reward, done) -> None:
        world = self.world
        assert world is not None
        self._log.append({
            "t": world.t,
            "dist_m": [None if not r else float(d)
                       for d, r in zip(obs.dist_m, obs.reachable)],
            "enroute": obs.enroute.tolist(),
            "station_load": obs.station_load.tolist(),
            "vector": obs.vector.tolist(),
            "action": action,
            "reward": reward,
            "done": done,
        })
