"""Tabular baselines over a uniform discrete action grid.

Both baselines act on the same one-parameter family of allocations:
action i (1-indexed among n) puts mu_c = i / (n + 1) on the common
stream, splits the rest evenly across the K private streams, and shares
the common rate uniformly (C_k = R_c / K).  Q-learning additionally
quantizes the 2K-dimensional SINR observation to two levels per
dimension (thresholds = per-dimension medians of a uniform-action
warmup), giving 2^(2K) discrete states; the greedy scheme ignores the
state entirely and keeps replaying whichever action produced the
highest reward seen so far.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .env import RawAction
from .phy import Allocation

QTABLE_MAGIC = b"RSMAQT01"
QTABLE_VERSION = 1


@dataclass
class DiscreteActionSet:
    """n grid allocations: mu values plus the uniform split fraction table."""

    n: int
    k: int
    mu: np.ndarray  # (n, K+1)
    split: np.ndarray  # (n, K), rows all 1/K

    def allocation(self, i: int, common_rate: float) -> Allocation:
        return Allocation(mu=self.mu[i].copy(), c=self.split[i] * common_rate)

    def raw_action(self, i: int) -> RawAction:
        # log(mu) logits reproduce mu exactly through the env Softmax
        return RawAction(
            power_logits=np.log(self.mu[i]), split_logits=np.log(self.split[i])
        )


def build_uniform_actions(n: int, k: int) -> DiscreteActionSet:
    """Uniform power grid: action i has mu_c = i/(n+1), even private shares."""
    if n < 1:
        raise ValueError(f"need at least one action, got n={n}")
    if k < 1:
        raise ValueError(f"need at least one user, got k={k}")
    mu = np.empty((n, k + 1))
    for row, i in enumerate(range(1, n + 1)):
        mu_c = i / (n + 1)
        mu[row, 0] = mu_c
        mu[row, 1:] = (1.0 - mu_c) / k
    split = np.full((n, k), 1.0 / k)
    return DiscreteActionSet(n=n, k=k, mu=mu, split=split)


def discretize_state(obs: np.ndarray, thresholds: np.ndarray) -> int:
    """Two-level quantization: bit d set iff obs[d] >= thresholds[d]."""
    obs = np.asarray(obs, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if obs.shape != thresholds.shape:
        raise ValueError(f"length mismatch: {obs.shape} vs {thresholds.shape}")
    bits = obs >= thresholds
    return int(np.sum(bits * (1 << np.arange(len(bits)))))


def warmup_thresholds(env, actions: DiscreteActionSet, steps: int, rng) -> np.ndarray:
    """Per-dimension medians of observations under uniform-random actions."""
    obs_log = np.empty((steps, env.obs_dim))
    obs = env.reset()
    for t in range(steps):
        obs_log[t] = obs
        outcome = env.step(actions.raw_action(rng.integers(actions.n)))
        obs = env.reset() if outcome.done else outcome.observation
    return np.median(obs_log, axis=0)


@dataclass
class QTable:
    values: np.ndarray  # (n_states, n_actions)
    thresholds: np.ndarray  # (2K,)
    learning_rate: float = 0.1
    exploration: float = 1.0

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]


def make_qtable(k: int, n_actions: int, thresholds: np.ndarray, **kw) -> QTable:
    return QTable(
        values=np.zeros((2 ** (2 * k), n_actions)),
        thresholds=np.asarray(thresholds, dtype=float),
        **kw,
    )


def q_update(qtable: QTable, s: int, a: int, r: float, s_next: int, alpha: float, discount: float):
    """One-step rule: Q(s,a) += alpha * (r + discount * max_a' Q(s',a') - Q(s,a))."""
    best_next = np.max(qtable.values[s_next])
    qtable.values[s, a] += alpha * (r + discount * best_next - qtable.values[s, a])
    return qtable


def epsilon_greedy_select(qtable: QTable, s: int, eps: float, rng) -> int:
    """Argmax action (lowest index on ties) w.p. 1-eps, else uniform random."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must be in [0,1], got {eps}")
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(qtable.n_actions))
    return int(np.argmax(qtable.values[s]))


def save_qtable(path, qtable: QTable):
    """Versioned flat dump: magic, dims, thresholds, then the value array."""
    with open(path, "wb") as f:
        f.write(QTABLE_MAGIC)
        f.write(struct.pack("<I", QTABLE_VERSION))
        f.write(struct.pack("<III", qtable.n_states, qtable.n_actions, len(qtable.thresholds)))
        f.write(np.ascontiguousarray(qtable.thresholds, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(qtable.values, dtype="<f8").tobytes())


def load_qtable(path) -> QTable:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != QTABLE_MAGIC:
        raise ValueError(f"{path}: not a Q-table file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != QTABLE_VERSION:
        raise ValueError(f"{path}: unsupported Q-table version {version}")
    n_states, n_actions, n_thr = struct.unpack_from("<III", blob, 12)
    off = 24
    thresholds = np.frombuffer(blob, dtype="<f8", count=n_thr, offset=off).astype(float)
    off += 8 * n_thr
    values = (
        np.frombuffer(blob, dtype="<f8", count=n_states * n_actions, offset=off)
        .reshape(n_states, n_actions)
        .astype(float)
    )
    return QTable(values=values, thresholds=thresholds)


@dataclass
class GreedyHistory:
    """Best-so-far reward per action; unvisited actions count as -inf."""

    best_reward: np.ndarray
    visits: np.ndarray
    exploration: float = 0.1

    @property
    def n_actions(self) -> int:
        return len(self.best_reward)


def make_greedy_history(n_actions: int, exploration: float = 0.1) -> GreedyHistory:
    return GreedyHistory(
        best_reward=np.full(n_actions, -np.inf),
        visits=np.zeros(n_actions, dtype=int),
        exploration=exploration,
    )


def greedy_select(history: GreedyHistory, rng, eps: float | None = None) -> int:
    """Best historical action w.p. 1-eps, otherwise a uniform random one."""
    eps = history.exploration if eps is None else eps
    if eps > 0.0 and rng.random() < eps:
        return int(rng.integers(history.n_actions))
    return int(np.argmax(history.best_reward))


def greedy_record(history: GreedyHistory, action: int, reward: float):
    history.visits[action] += 1
    if reward > history.best_reward[action]:
        history.best_reward[action] = reward
    return history


def save_greedy_history(path, history: GreedyHistory, actions: DiscreteActionSet):
    """n-row CSV: action index, its mu_c, best reward seen, visit count."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("action,mu_c,best_reward,visits\n")
        for i in range(history.n_actions):
            f.write(
                f"{i},{actions.mu[i, 0]:.12g},{history.best_reward[i]:.12g},"
                f"{history.visits[i]}\n"
            )


def load_greedy_history(path, exploration: float = 0.1) -> GreedyHistory:
    rows = np.genfromtxt(path, delimiter=",", names=True)
    rows = np.atleast_1d(rows)
    return GreedyHistory(
        best_reward=rows["best_reward"].astype(float),
        visits=rows["visits"].astype(int),
        exploration=exploration,
    )
