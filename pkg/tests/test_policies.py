import numpy as np
import pytest

from evdispatch import (
    GreedyPolicy,
    MlpParams,
    NoReachableStationError,
    Observation,
    QPolicy,
    RandomPolicy,
    epsilon_greedy,
    greedy_action,
)


def _obs(dist, reach=None, load=None):
    dist = np.asarray(dist, dtype=float)
    m = dist.size
    reach = np.ones(m, dtype=bool) if reach is None else np.asarray(reach)
    load = np.zeros(m, dtype=np.int64) if load is None else np.asarray(load)
    finite = np.where(reach, dist, 0.0)
    dn = np.where(reach, finite / (finite + 2000.0), 1.0)
    vec = np.concatenate([dn, np.zeros(m), load / (load + 10.0)])
    return Observation(dist, np.zeros(m, dtype=np.int64), load, reach, vec)


# ---------------------------------------------------------------------------
# epsilon-greedy primitive


def test_epsilon_zero_is_argmax(rng):
    q = np.array([1.0, 5.0, 3.0])
    assert all(epsilon_greedy(q, 0.0, rng) == 1 for _ in range(50))


def test_epsilon_tie_breaks_low(rng):
    q = np.array([2.0, 2.0, 2.0])
    assert epsilon_greedy(q, 0.0, rng) == 0


def test_epsilon_one_explores_uniformly(rng):
    q = np.array([0.0, 100.0, 0.0, 0.0])
    counts = np.bincount([epsilon_greedy(q, 1.0, rng) for _ in range(4000)],
                         minlength=4)
    assert counts.min() > 800  # each arm near 1000; generous slack


def test_epsilon_mixes(rng):
    q = np.array([0.0, 10.0])
    picks = np.array([epsilon_greedy(q, 0.5, rng) for _ in range(4000)])
    frac_greedy = (picks == 1).mean()
    assert 0.65 < frac_greedy < 0.85  # 0.5 + 0.5/2 = 0.75 expected


def test_epsilon_validation(rng):
    with pytest.raises(ValueError):
        epsilon_greedy(np.array([1.0]), 1.5, rng)
    with pytest.raises(ValueError):
        epsilon_greedy(np.array([]), 0.5, rng)
    with pytest.raises(ValueError):
        epsilon_greedy(np.zeros((2, 2)), 0.5, rng)


# ---------------------------------------------------------------------------
# policies


def test_random_policy_sticky(rng):
    pol = RandomPolicy(5)
    pol.begin_episode(rng)
    obs = _obs([100, 200, 300, 400, 500])
    first = pol.act(obs)
    assert all(pol.act(obs) == first for _ in range(20))


def test_random_policy_covers_actions(rng):
    pol = RandomPolicy(5)
    picks = []
    for _ in range(500):
        pol.begin_episode(rng)
        picks.append(pol.act(_obs([1, 2, 3, 4, 5])))
    counts = np.bincount(picks, minlength=5)
    assert counts.min() > 60  # each near 100


def test_random_policy_needs_rng():
    pol = RandomPolicy(3)
    with pytest.raises(RuntimeError):
        pol.act(_obs([1, 2, 3]))


def test_greedy_picks_nearest(rng):
    assert greedy_action(_obs([300, 100, 200])) == 1
    pol = GreedyPolicy()
    pol.begin_episode(rng)
    assert pol.act(_obs([300, 100, 200])) == 1


def test_greedy_tie_low_index():
    assert greedy_action(_obs([100, 100, 300])) == 0


def test_greedy_skips_unreachable():
    obs = _obs([np.inf, 500, 200], reach=[False, True, True])
    assert greedy_action(obs) == 2


def test_greedy_ignores_load():
    a = greedy_action(_obs([300, 100, 200], load=[0, 9, 0]))
    assert a == 1  # load channel must not influence the choice


def test_greedy_no_station():
    obs = _obs([np.inf, np.inf], reach=[False, False])
    with pytest.raises(NoReachableStationError):
        greedy_action(obs)


def test_qpolicy_argmax(rng):
    # hand-built net: Q(s) = W1 @ relu(W0 s + b0) + b1 with fixed weights
    params = MlpParams.init([6, 4, 2], np.random.default_rng(1))
    params.weights[-1][:] = rng.normal(size=params.weights[-1].shape)
    params.biases[-1][:] = np.array([0.0, 1.0])
    pol = QPolicy(params)
    pol.begin_episode(rng)
    obs = _obs([100, 200])
    from evdispatch import q_values

    assert pol.act(obs) == int(np.argmax(q_values(params, obs.vector)))


def test_qpolicy_untrained_picks_first(rng):
    # fresh networks output all-zero Q, so the tie rule sends action 0
    params = MlpParams.init([6, 8, 2], np.random.default_rng(7))
    pol = QPolicy(params)
    pol.begin_episode(rng)
    assert pol.act(_obs([500, 100])) == 0
