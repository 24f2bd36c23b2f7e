"""Dispatch policies: random (sticky per episode), greedy, and Q-driven.

All policies share one calling convention so the evaluation loop does not
care which is which: ``begin_episode(rng)`` once per episode, then
``act(obs) -> station index`` every decision slot.
"""
from __future__ import annotations

import numpy as np

from .env import Observation

POLICY_KINDS = ("random", "greedy", "dqn", "dueling_ddqn")


class NoReachableStationError(RuntimeError):
    """Every station is unreachable from the current position."""


def epsilon_greedy(q: np.ndarray, xi: float, rng: np.random.Generator) -> int:
    """Explore uniformly with probability ``xi``, else argmax (lowest index wins)."""
    if not (0.0 <= xi <= 1.0):
        raise ValueError(f"xi must be in [0, 1], got {xi}")
    q = np.asarray(q)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("q must be a non-empty 1-D array")
    if xi > 0.0 and rng.random() < xi:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def greedy_action(obs: Observation) -> int:
    """Nearest reachable station by road distance; ties pick the lowest index."""
    if not obs.reachable.any():
        raise NoReachableStationError("no station is reachable")
    dist = np.where(obs.reachable, obs.dist_m, np.inf)
    return int(np.argmin(dist))


class RandomPolicy:
    """Draws one station uniformly at episode start and sticks with it."""

    def __init__(self, n_stations: int):
        self.n = n_stations
        self._choice: int | None = None
        self._rng: np.random.Generator | None = None

    def begin_episode(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._choice = None

    def act(self, obs: Observation) -> int:
        if self._choice is None:
            if self._rng is None:
                raise RuntimeError("call begin_episode() first")
            self._choice = int(self._rng.integers(self.n))
        return self._choice


class GreedyPolicy:
    """Re-evaluates the distance argmin every slot."""

    def begin_episode(self, rng: np.random.Generator) -> None:
        pass

    def act(self, obs: Observation) -> int:
        return greedy_action(obs)


class QPolicy:
    """Greedy with respect to a trained Q-network (no exploration)."""

    def __init__(self, params):
        self.params = params

    def begin_episode(self, rng: np.random.Generator) -> None:
        pass

    def act(self, obs: Observation) -> int:
        from .dqn import q_values

        return int(np.argmax(q_values(self.params, obs.vector)))
