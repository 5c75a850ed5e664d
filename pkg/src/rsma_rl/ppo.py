"""Proximal policy optimization on the logit-space Gaussian policy.

Rollouts store raw sampled logits together with the behavior-policy
log-density.  Advantages come from generalized advantage estimation,

    delta_t = r_t + discount * V(s_{t+1}) * (1 - done_t) - V(s_t)
    A_t     = sum_{l>=0} (discount * lam)^l delta_{t+l}        (per episode)

normalized buffer-wide before the update.  The update maximizes the
clipped surrogate

    min(ratio * A, u(eps, A)),   ratio = pi_new / pi_old,

where u multiplies A by (1 + eps) when A >= 0 and (1 - eps) otherwise,
so ratios outside [1 - eps, 1 + eps] earn nothing extra.  The optimized
loss adds a value-function MSE and subtracts an entropy bonus, both
with configurable coefficients (zero coefficients recover the bare
surrogate).

Observations are passed through log1p before the network: SINRs span
several orders of magnitude and would otherwise pin the tanh trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, minimum
from .env import RawAction, split_action_vector
from .nn import (
    Adam,
    PolicyValueNet,
    TrainingDivergenceError,
    gaussian_entropy_t,
    gaussian_log_prob,
    gaussian_log_prob_t,
)

#: log-ratio clamp before exponentiation, guards exp overflow
MAX_LOG_RATIO = 20.0


@dataclass
class PpoConfig:
    discount: float = 0.9
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch_size: int = 64
    rollout_steps: int = 2000
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    learning_rate: float = 3e-4
    hidden: tuple = (64, 64)
    log_std_init: float = -0.5
    separate_value: bool = False

    def validate(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0,1), got {self.discount}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0,1], got {self.gae_lambda}")
        if not self.clip_eps > 0:
            raise ValueError(f"clip_eps must be > 0, got {self.clip_eps}")
        if self.epochs < 1 or self.minibatch_size < 1 or self.rollout_steps < 1:
            raise ValueError("epochs, minibatch_size and rollout_steps must be >= 1")


@dataclass
class RolloutBuffer:
    """Complete-episode transitions collected under one policy snapshot."""

    observations: np.ndarray
    actions: np.ndarray  # raw sampled logits
    log_probs_old: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    sum_rates: np.ndarray
    violation_counts: np.ndarray
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None
    episode_starts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __len__(self):
        return len(self.rewards)


def transform_obs(obs: np.ndarray) -> np.ndarray:
    """log1p compression applied to SINR observations before the network."""
    return np.log1p(obs)


def collect_rollout(env, net: PolicyValueNet, steps: int, rng, deterministic=False):
    """Run the policy for ``steps`` env steps, restarting episodes on done.

    Samples logits from the Gaussian (or takes the mean when
    ``deterministic``) and records everything the update needs; the
    buffer always ends on an episode boundary provided ``steps`` is a
    multiple of the episode length.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    k = env.config.k
    obs_buf = np.empty((steps, env.obs_dim))
    act_buf = np.empty((steps, env.action_dim))
    logp_buf = np.empty(steps)
    rew_buf = np.empty(steps)
    val_buf = np.empty(steps)
    done_buf = np.zeros(steps, dtype=bool)
    rate_buf = np.empty(steps)
    viol_buf = np.empty(steps, dtype=int)
    starts = []

    obs = env.reset()
    starts.append(0)
    sigma = net.sigma()
    for t in range(steps):
        x = transform_obs(obs).reshape(1, -1)
        mean, value = net.forward_np(x)
        mean = mean[0]
        if deterministic:
            sample = mean.copy()
        else:
            sample = mean + sigma * rng.standard_normal(env.action_dim)
        logp = gaussian_log_prob(mean, net.log_std.data, sample)
        outcome = env.step(split_action_vector(sample, k, env.config.mode))

        obs_buf[t] = obs
        act_buf[t] = sample
        logp_buf[t] = logp
        rew_buf[t] = outcome.reward
        val_buf[t] = value[0]
        done_buf[t] = outcome.done
        rate_buf[t] = outcome.sum_rate
        viol_buf[t] = outcome.qos_violations

        if outcome.done:
            if t + 1 < steps:
                obs = env.reset()
                starts.append(t + 1)
        else:
            obs = outcome.observation

    return RolloutBuffer(
        observations=obs_buf,
        actions=act_buf,
        log_probs_old=logp_buf,
        rewards=rew_buf,
        values=val_buf,
        dones=done_buf,
        sum_rates=rate_buf,
        violation_counts=viol_buf,
        episode_starts=np.asarray(starts, dtype=int),
    )


def estimate_advantages(buffer: RolloutBuffer, discount: float, gae_lambda: float):
    """Fill buffer.returns / buffer.advantages (normalized) in place."""
    n = len(buffer)
    if n == 0:
        raise ValueError("buffer is empty")
    if not buffer.dones[-1]:
        raise ValueError("buffer must end on an episode boundary")
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        if buffer.dones[t]:
            next_value = 0.0
            running = 0.0
        else:
            next_value = buffer.values[t + 1]
        delta = buffer.rewards[t] + discount * next_value - buffer.values[t]
        running = delta + discount * gae_lambda * running
        adv[t] = running
    buffer.returns = adv + buffer.values
    std = adv.std()
    buffer.advantages = (adv - adv.mean()) / (std + 1e-8)
    return buffer


def clip_function(eps: float, advantage):
    """Pessimistic bound u(eps, A): (1+eps)A for A >= 0, else (1-eps)A."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    advantage = np.asarray(advantage, dtype=float)
    return np.where(advantage >= 0, (1.0 + eps) * advantage, (1.0 - eps) * advantage)


def ppo_objective(log_prob_new, log_prob_old, advantage, eps: float):
    """Per-sample clipped surrogate min(ratio * A, u(eps, A))."""
    log_ratio = np.clip(
        np.asarray(log_prob_new) - np.asarray(log_prob_old),
        -MAX_LOG_RATIO,
        MAX_LOG_RATIO,
    )
    ratio = np.exp(log_ratio)
    return np.minimum(ratio * advantage, clip_function(eps, advantage))


@dataclass
class UpdateMetrics:
    mean_ratio: float
    clip_fraction: float
    policy_loss: float
    value_loss: float
    entropy: float


def update(
    net: PolicyValueNet,
    opt: Adam,
    buffer: RolloutBuffer,
    config: PpoConfig,
    rng,
) -> UpdateMetrics:
    """Multi-epoch minibatch PPO update; returns averaged diagnostics."""
    if buffer.advantages is None or buffer.returns is None:
        raise ValueError("estimate_advantages() must run before update()")
    config.validate()
    n = len(buffer)
    obs = transform_obs(buffer.observations)
    ratios, clipped, p_losses, v_losses, entropies = [], [], [], [], []

    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start : start + config.minibatch_size]
            mean, value = net.forward(Tensor(obs[idx]))
            logp_new = gaussian_log_prob_t(mean, net.log_std, buffer.actions[idx])
            adv = buffer.advantages[idx]

            log_ratio = (logp_new - buffer.log_probs_old[idx]).clip(
                -MAX_LOG_RATIO, MAX_LOG_RATIO
            )
            ratio = log_ratio.exp()
            surrogate = minimum(ratio * adv, clip_function(config.clip_eps, adv))
            value_err = value - buffer.returns[idx]
            entropy = gaussian_entropy_t(net.log_std)
            loss = (
                -surrogate.mean()
                + config.value_coef * value_err.square().mean()
                - config.entropy_coef * entropy
            )
            if not np.isfinite(loss.data):
                raise TrainingDivergenceError("non-finite PPO loss")
            loss.backward()
            opt.step()

            ratios.append(ratio.data.mean())
            clipped.append(
                np.mean(np.abs(ratio.data - 1.0) > config.clip_eps)
            )
            p_losses.append(-surrogate.data.mean())
            v_losses.append((value_err.data**2).mean())
            entropies.append(entropy.data.item())

    return UpdateMetrics(
        mean_ratio=float(np.mean(ratios)),
        clip_fraction=float(np.mean(clipped)),
        policy_loss=float(np.mean(p_losses)),
        value_loss=float(np.mean(v_losses)),
        entropy=float(np.mean(entropies)),
    )


def mean_action(net: PolicyValueNet, observation: np.ndarray, k: int, mode: str) -> RawAction:
    """Exploration-free action: the policy mean pushed through the env split."""
    x = transform_obs(np.asarray(observation, dtype=float)).reshape(1, -1)
    mean, _ = net.forward_np(x)
    return split_action_vector(mean[0], k, mode)
