"""Deep Q-learning on plain numpy: networks, replay, Adam, training loop.

Two agents are provided. ``dqn`` is the classic setup: an MLP head trained
against a periodically synced frozen copy of itself with the one-step max
target. ``dueling_ddqn`` splits the network into a state-value head and an
advantage head (recombined as Q = V + A - mean(A) for identifiability) and
uses the double-DQN target: the live network chooses the next action, the
frozen one prices it.

Everything runs in float64 and all randomness flows through one Generator
per trainer, so identical configs and seeds reproduce identical parameters.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

CHECKPOINT_TAG = "evdispatch-checkpoint/1"


# ---------------------------------------------------------------------------
# parameters and forward/backward passes


def _he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


class MlpParams:
    """Fully connected ReLU network, linear output layer."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator) -> "MlpParams":
        """He-normal hidden layers; the output layer starts at zero so the
        untrained net is exactly indifferent (argmax falls to index 0)."""
        ws, bs = [], []
        for i in range(len(sizes) - 1):
            last = i == len(sizes) - 2
            if last:
                ws.append(np.zeros((sizes[i], sizes[i + 1])))
            else:
                ws.append(_he_init(rng, sizes[i], sizes[i + 1]))
            bs.append(np.zeros(sizes[i + 1]))
        return cls(ws, bs)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


class DuelingParams:
    """Shared ReLU trunk with scalar value and per-action advantage heads."""

    def __init__(self, trunk_w, trunk_b, value_w, value_b, adv_w, adv_b):
        self.trunk_w = trunk_w
        self.trunk_b = trunk_b
        self.value_w = value_w
        self.value_b = value_b
        self.adv_w = adv_w
        self.adv_b = adv_b

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator
             ) -> "DuelingParams":
        """``sizes`` = [input, *hidden]; both heads hang off the last hidden."""
        tw, tb = [], []
        for i in range(len(sizes) - 1):
            tw.append(_he_init(rng, sizes[i], sizes[i + 1]))
            tb.append(np.zeros(sizes[i + 1]))
        return cls(tw, tb,
                   np.zeros((sizes[-1], 1)), np.zeros(1),
                   np.zeros((sizes[-1], 0)), np.zeros(0))

    def with_actions(self, n_actions: int) -> "DuelingParams":
        h = self.trunk_w[-1].shape[1]
        self.adv_w = np.zeros((h, n_actions))
        self.adv_b = np.zeros(n_actions)
        return self

    @property
    def layer_sizes(self) -> list[int]:
        return [self.trunk_w[0].shape[0]] + [w.shape[1] for w in self.trunk_w]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out.extend((w, b))
        out.extend((self.value_w, self.value_b, self.adv_w, self.adv_b))
        return out

    def copy(self) -> "DuelingParams":
        return DuelingParams([w.copy() for w in self.trunk_w],
                             [b.copy() for b in self.trunk_b],
                             self.value_w.copy(), self.value_b.copy(),
                             self.adv_w.copy(), self.adv_b.copy())


def _as_batch(s: np.ndarray) -> tuple[np.ndarray, bool]:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim == 1:
        return s[None, :], True
    return s, False


def _mlp_forward(params: MlpParams, x: np.ndarray):
    acts = [x]
    pres = []
    h = x
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pres.append(z)
        h = z if i == n - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return h, (acts, pres)


def forward(params: MlpParams, s: np.ndarray) -> np.ndarray:
    """Q-values for one state (m,) or a batch (B, m)."""
    x, single = _as_batch(s)
    q, _ = _mlp_forward(params, x)
    return q[0] if single else q


def _dueling_forward(params: DuelingParams, x: np.ndarray):
    acts = [x]
    pres = []
    h = x
    for w, b in zip(params.trunk_w, params.trunk_b):
        z = h @ w + b
        pres.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    v = h @ params.value_w + params.value_b        # (B, 1)
    a = h @ params.adv_w + params.adv_b            # (B, m)
    q = v + a - a.mean(axis=1, keepdims=True)
    return q, (acts, pres, v, a)


def dueling_forward(params: DuelingParams, s: np.ndarray) -> np.ndarray:
    """Q = V + A - mean(A), for one state or a batch."""
    x, single = _as_batch(s)
    q, _ = _dueling_forward(params, x)
    return q[0] if single else q


def q_values(params, s: np.ndarray) -> np.ndarray:
    if isinstance(params, MlpParams):
        return forward(params, s)
    if isinstance(params, DuelingParams):
        return dueling_forward(params, s)
    raise TypeError(f"unsupported parameter object {type(params)!r}")


def mse_loss(pred: np.ndarray, y: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.shape != y.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {y.shape}")
    if pred.size == 0:
        raise ValueError("empty batch")
    return float(np.mean((pred - y) ** 2))


def backward(params, states: np.ndarray, actions: np.ndarray, y: np.ndarray
             ) -> tuple[list[np.ndarray], float]:
    """Gradients of the minibatch MSE on Q(s, a) against targets ``y``.

    Returns (grads, loss); grads align with ``params.arrays()``.
    """
    x = np.asarray(states, dtype=np.float64)
    a = np.asarray(actions, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    b = x.shape[0]
    if b == 0:
        raise ValueError("empty batch")
    rows = np.arange(b)
    if isinstance(params, MlpParams):
        q, (acts, pres) = _mlp_forward(params, x)
        pred = q[rows, a]
        loss = float(np.mean((pred - y) ** 2))
        gq = np.zeros_like(q)
        gq[rows, a] = 2.0 * (pred - y) / b
        grads: list[np.ndarray] = []
        gz = gq
        for i in range(len(params.weights) - 1, -1, -1):
            gw = acts[i].T @ gz
            gb = gz.sum(axis=0)
            grads[:0] = [gw, gb]
            if i > 0:
                gz = (gz @ params.weights[i].T) * (pres[i - 1] > 0.0)
        return grads, loss
    if isinstance(params, DuelingParams):
        q, (acts, pres, v, adv) = _dueling_forward(params, x)
        pred = q[rows, a]
        loss = float(np.mean((pred - y) ** 2))
        gq = np.zeros_like(q)
        gq[rows, a] = 2.0 * (pred - y) / b
        m = q.shape[1]
        gv = gq.sum(axis=1, keepdims=True)                 # (B, 1)
        ga = gq - gq.sum(axis=1, keepdims=True) / m        # (B, m)
        h = acts[-1]
        g_value_w = h.T @ gv
        g_value_b = gv.sum(axis=0)
        g_adv_w = h.T @ ga
        g_adv_b = ga.sum(axis=0)
        gz = gv @ params.value_w.T + ga @ params.adv_w.T
        gz = gz * (pres[-1] > 0.0)
        trunk_grads: list[np.ndarray] = []
        for i in range(len(params.trunk_w) - 1, -1, -1):
            gw = acts[i].T @ gz
            gb = gz.sum(axis=0)
            trunk_grads[:0] = [gw, gb]
            if i > 0:
                gz = (gz @ params.trunk_w[i].T) * (pres[i - 1] > 0.0)
        return trunk_grads + [g_value_w, g_value_b, g_adv_w, g_adv_b], loss
    raise TypeError(f"unsupported parameter object {type(params)!r}")


# ---------------------------------------------------------------------------
# targets


def _batch_arrays(batch) -> tuple[np.ndarray, ...]:
    s = np.stack([tr.s for tr in batch])
    a = np.array([tr.a for tr in batch], dtype=np.int64)
    r = np.array([tr.r for tr in batch], dtype=np.float64)
    s2 = np.stack([tr.s_next for tr in batch])
    d = np.array([tr.done for tr in batch], dtype=bool)
    return s, a, r, s2, d


def dqn_target(batch, gamma: float, target_params) -> np.ndarray:
    """y = r (+ gamma * max_a Q_frozen(s', a) on non-terminal transitions)."""
    _, _, r, s2, d = _batch_arrays(batch)
    qn = q_values(target_params, s2)
    return r + gamma * qn.max(axis=1) * (~d)


def ddqn_target(batch, gamma: float, live_params, target_params) -> np.ndarray:
    """Double-DQN: live net picks argmax at s', frozen net prices it."""
    _, _, r, s2, d = _batch_arrays(batch)
    a_star = np.argmax(q_values(live_params, s2), axis=1)
    qn = q_values(target_params, s2)
    return r + gamma * qn[np.arange(len(batch)), a_star] * (~d)


# ---------------------------------------------------------------------------
# replay and optimizer


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class ReplayBuffer:
    """FIFO ring buffer; minibatches sample uniformly without replacement.

    With ``prioritized=True`` sampling weights are |TD error|^0.6 instead
    (new transitions start at the current maximum); call
    ``update_priorities`` after computing the batch error. Off by default.
    """

    def __init__(self, capacity: int, prioritized: bool = False):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.prioritized = prioritized
        self._data: list[Transition] = []
        self._next = 0
        self._prio = np.zeros(capacity)

    def __len__(self) -> int:
        return len(self._data)

    def push(self, tr: Transition) -> None:
        p = self._prio[: len(self._data)].max() if self._data else 1.0
        if len(self._data) < self.capacity:
            self._data.append(tr)
            self._prio[len(self._data) - 1] = p
        else:
            self._data[self._next] = tr
            self._prio[self._next] = p
            self._next = (self._next + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int
               ) -> tuple[list[Transition], np.ndarray]:
        n = len(self._data)
        if batch_size > n:
            raise ValueError(f"cannot sample {batch_size} of {n}")
        if self.prioritized:
            w = self._prio[:n] ** 0.6
            idx = rng.choice(n, size=batch_size, replace=False, p=w / w.sum())
        else:
            idx = rng.choice(n, size=batch_size, replace=False)
        return [self._data[i] for i in idx], idx

    def update_priorities(self, idx: np.ndarray, td_abs: np.ndarray) -> None:
        self._prio[idx] = np.abs(td_abs) + 1e-3

    def __contains__(self, tr: Transition) -> bool:
        return any(t is tr for t in self._data)


@dataclass
class TargetCopy:
    params: MlpParams | DuelingParams
    steps_since_sync: int = 0


def sync_target(live, target: TargetCopy) -> None:
    target.params = live.copy()
    target.steps_since_sync = 0


class AdamState:
    def __init__(self, params):
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0


def adam_step(params, grads: list[np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place Adam update with bias correction."""
    arrays = params.arrays()
    if len(grads) != len(arrays):
        raise ValueError("gradient list does not match parameter list")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        a -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place to a global L2 norm cap; returns the raw norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    arch: str = "dqn"                     # "dqn" or "dueling_ddqn"
    episodes: int = 50
    gamma: float = 0.99
    lr: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 10000
    target_sync: int = 8000               # gradient steps between target syncs
    xi_start: float = 1.0
    xi_final: float = 0.1
    xi_anneal_steps: int = 1000           # env steps to reach xi_final
    grad_clip: float = 10.0
    hidden: tuple[int, ...] = (512, 256)
    prioritized: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.arch not in ("dqn", "dueling_ddqn"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if not (0 <= self.xi_final <= self.xi_start <= 1):
            raise ValueError("need 0 <= xi_final <= xi_start <= 1")


@dataclass
class EpisodeStats:
    episode: int
    steps: int
    t_travel_s: float
    reward: float
    mean_loss: float
    xi_end: float
    horizon_expired: bool


@dataclass
class TrainResult:
    params: MlpParams | DuelingParams
    target: TargetCopy
    stats: list[EpisodeStats]
    cfg: TrainConfig
    debug_batch: dict | None = None


class QTrainer:
    """Owns the networks, buffer, optimizer, and sync/anneal bookkeeping.

    Split out from the episode loop so tests can drive gradient steps
    directly with synthetic transitions.
    """

    def __init__(self, obs_dim: int, n_actions: int, cfg: TrainConfig,
                 capture_first_batch: bool = False):
        self.cfg = cfg
        self.n_actions = n_actions
        self.rng = np.random.default_rng(cfg.seed)
        sizes = [obs_dim, *cfg.hidden]
        if cfg.arch == "dqn":
            self.params: MlpParams | DuelingParams = MlpParams.init(
                [*sizes, n_actions], self.rng)
        else:
            self.params = DuelingParams.init(sizes, self.rng) \
                .with_actions(n_actions)
        self.target = TargetCopy(self.params.copy())
        self.adam = AdamState(self.params)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, cfg.prioritized)
        self.env_steps = 0
        self.grad_steps = 0
        self.sync_events: list[int] = []
        self.losses: list[float] = []
        self.debug_batch: dict | None = None
        self._capture = capture_first_batch

    def xi(self) -> float:
        cfg = self.cfg
        frac = min(1.0, self.env_steps / max(1, cfg.xi_anneal_steps))
        return cfg.xi_start + (cfg.xi_final - cfg.xi_start) * frac

    def select_action(self, vec: np.ndarray) -> int:
        from .policies import epsilon_greedy

        q = q_values(self.params, vec)
        a = epsilon_greedy(q, self.xi(), self.rng)
        self.env_steps += 1
        return a

    def record(self, tr: Transition) -> None:
        self.buffer.push(tr)
        if len(self.buffer) >= self.cfg.batch_size:
            self.gradient_step()

    def gradient_step(self) -> float:
        cfg = self.cfg
        batch, idx = self.buffer.sample(self.rng, cfg.batch_size)
        if cfg.arch == "dqn":
            y = dqn_target(batch, cfg.gamma, self.target.params)
        else:
            y = ddqn_target(batch, cfg.gamma, self.params, self.target.params)
        s, a, r, s2, d = _batch_arrays(batch)
        if self._capture and self.debug_batch is None:
            self.debug_batch = {
                "arch": cfg.arch,
                "gamma": cfg.gamma,
                "r": r.tolist(),
                "done": d.tolist(),
                "q_next_live": q_values(self.params, s2).tolist(),
                "q_next_target": q_values(self.target.params, s2).tolist(),
                "y": y.tolist(),
            }
        if cfg.prioritized:
            pred = q_values(self.params, s)[np.arange(len(batch)), a]
            self.buffer.update_priorities(idx, pred - y)
        grads, loss = backward(self.params, s, a, y)
        clip_gradients(grads, cfg.grad_clip)
        adam_step(self.params, grads, self.adam, cfg.lr)
        self.grad_steps += 1
        self.target.steps_since_sync += 1
        if self.grad_steps % cfg.target_sync == 0:
            sync_target(self.params, self.target)
            self.sync_events.append(self.grad_steps)
        self.losses.append(loss)
        return loss


def _episode_seed(base: int, stream: int, index: int) -> int:
    ss = np.random.SeedSequence((int(base), int(stream), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2 ** 63 - 1))


def train(env, n_background_ev: int, cfg: TrainConfig,
          capture_first_batch: bool = False,
          on_episode: Callable[[EpisodeStats], None] | None = None
          ) -> TrainResult:
    """Run the episodic training loop on a ChargingEnv."""
    from .env import EpisodeConfig

    trainer = QTrainer(3 * env.m, env.m, cfg, capture_first_batch)
    stats: list[EpisodeStats] = []
    for ep in range(cfg.episodes):
        obs = env.reset(EpisodeConfig(
            n_background_ev=n_background_ev,
            seed=_episode_seed(cfg.seed, 0, ep)))
        loss_from = len(trainer.losses)
        steps = 0
        done = False
        reward = 0.0
        info: dict = {}
        while not done:
            a = trainer.select_action(obs.vector)
            res = env.act_and_step(a)
            trainer.record(Transition(obs.vector, a, res.reward,
                                      res.obs.vector, res.done))
            obs = res.obs
            reward = res.reward
            done = res.done
            info = res.info
            steps += 1
        ep_losses = trainer.losses[loss_from:]
        st = EpisodeStats(
            episode=ep,
            steps=steps,
            t_travel_s=float(info["t_travel"]),
            reward=reward,
            mean_loss=float(np.mean(ep_losses)) if ep_losses else float("nan"),
            xi_end=trainer.xi(),
            horizon_expired=bool(info["horizon_expired"]),
        )
        stats.append(st)
        if on_episode is not None:
            on_episode(st)
    return TrainResult(trainer.params, trainer.target, stats, cfg,
                       trainer.debug_batch)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params, cfg: TrainConfig,
                    adam: AdamState | None = None) -> None:
    """Write arrays plus a JSON header to an .npz container."""
    arch = "dqn" if isinstance(params, MlpParams) else "dueling_ddqn"
    meta = {
        "format": CHECKPOINT_TAG,
        "arch": arch,
        "layer_sizes": params.layer_sizes,
        "n_actions": int(params.arrays()[-1].shape[0]),
        "train_config": asdict(cfg),
    }
    payload = {"meta": np.array(json.dumps(meta))}
    for i, a in enumerate(params.arrays()):
        payload[f"arr_{i}"] = a
    if adam is not None:
        for i, m in enumerate(adam.m):
            payload[f"adam_m_{i}"] = m
        for i, v in enumerate(adam.v):
            payload[f"adam_v_{i}"] = v
        payload["adam_t"] = np.array(adam.t)
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[MlpParams | DuelingParams, dict]:
    """Load a checkpoint; returns (params, meta). Shapes are re-validated."""
    with np.load(path, allow_pickle=False) as z:
        if "meta" not in z:
            raise ValueError(f"{path}: not a checkpoint file")
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != CHECKPOINT_TAG:
            raise ValueError(f"{path}: unsupported checkpoint format")
        arrays = []
        i = 0
        while f"arr_{i}" in z:
            arrays.append(z[f"arr_{i}"])
            i += 1
    sizes = meta["layer_sizes"]
    m = meta["n_actions"]
    if meta["arch"] == "dqn":
        n_layers = len(sizes) - 1
        if len(arrays) != 2 * n_layers:
            raise ValueError(f"{path}: expected {2 * n_layers} arrays")
        params: MlpParams | DuelingParams = MlpParams(
            arrays[0::2], arrays[1::2])
        expect = sizes
        got = params.layer_sizes
    else:
        n_trunk = len(sizes) - 1
        if len(arrays) != 2 * n_trunk + 4:
            raise ValueError(f"{path}: expected {2 * n_trunk + 4} arrays")
        params = DuelingParams(arrays[0:2 * n_trunk:2], arrays[1:2 * n_trunk:2],
                               arrays[-4], arrays[-3], arrays[-2], arrays[-1])
        expect = sizes
        got = params.layer_sizes
    if got != expect or params.arrays()[-1].shape[0] != m:
        raise ValueError(
            f"{path}: stored shapes {got}/{params.arrays()[-1].shape[0]} "
            f"actions do not match header {expect}/{m}")
    return params, meta
