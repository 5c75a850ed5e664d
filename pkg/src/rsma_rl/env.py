"""MDP wrapper around the rate-splitting downlink.

State: the 2K SINR feedbacks [gamma_1^c, gamma_1^p, ..., gamma_K^c,
gamma_K^p] users measured on the latest transmission.  Action: raw
logits that a Softmax maps onto the power simplex (and, for RSMA, onto
the common-rate split), so the power and common-split constraints hold
by construction and are never penalized.  Reward: sum-rate scaled by the
fraction of users whose QoS held,

    r = R_sum * (1 - p),    p = (1/K) * #{k : C_k + R_k < Q_k}.

Each step draws a fresh fading block (optionally Gauss-Markov
correlated); the next observation is what users would feed back after
the just-applied allocation hits the new channel.

``mode="sdma"`` removes the common stream: the action shrinks to K
power logits, mu_c is pinned to 0 and all common-rate shares to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    ChannelRealization,
    advance_true_channel,
    apply_estimation_error,
    dbm_to_linear,
    make_rng,
    sample_true_channel,
)
from .phy import (
    Allocation,
    Precoders,
    RateReport,
    common_rate,
    compute_precoders,
    compute_sinrs,
    rate_report,
)


class EpisodeFinishedError(RuntimeError):
    """step() was called on an episode that already reached its length."""


class InvalidActionError(ValueError):
    """Raised for non-finite or mis-sized action logits."""


class ConfigError(ValueError):
    """Raised for inconsistent environment configuration."""


RSMA = "rsma"
SDMA = "sdma"


@dataclass
class EnvConfig:
    m: int = 4
    k: int = 4
    p_t_dbm: float = 40.0
    qos: np.ndarray = field(default_factory=lambda: np.full(4, 0.1))
    episode_len: int = 200
    mode: str = RSMA
    perfect_csit: bool = False
    gauss_markov_rho: float = 0.0

    def __post_init__(self):
        self.qos = np.atleast_1d(np.asarray(self.qos, dtype=float))
        # a scalar or constant-vector QoS follows the user count
        if self.qos.size != self.k and np.all(self.qos == self.qos.flat[0]):
            self.qos = np.full(self.k, float(self.qos.flat[0]))
        self.validate()

    def validate(self):
        if not self.m >= self.k >= 1:
            raise ConfigError(f"need m >= k >= 1, got m={self.m}, k={self.k}")
        if self.episode_len < 1:
            raise ConfigError(f"episode_len must be >= 1, got {self.episode_len}")
        if self.qos.shape != (self.k,):
            raise ConfigError(f"qos must have {self.k} entries, got {self.qos.shape}")
        if np.any(self.qos < 0):
            raise ConfigError("qos entries must be nonnegative")
        if self.mode not in (RSMA, SDMA):
            raise ConfigError(f"mode must be '{RSMA}' or '{SDMA}', got {self.mode!r}")
        if not 0.0 <= self.gauss_markov_rho <= 1.0:
            raise ConfigError(
                f"gauss_markov_rho must be in [0, 1], got {self.gauss_markov_rho}"
            )

    @property
    def obs_dim(self) -> int:
        return 2 * self.k

    @property
    def action_dim(self) -> int:
        # rsma: K+1 power logits + K split logits; sdma: K power logits
        return 2 * self.k + 1 if self.mode == RSMA else self.k


def sdma_variant(config: EnvConfig) -> EnvConfig:
    """Same scenario with the common stream removed."""
    return replace(config, mode=SDMA, qos=config.qos.copy())


@dataclass
class RawAction:
    """Pre-Softmax logits: ``power_logits`` (K+1, or K in SDMA mode) and
    ``split_logits`` (K, empty in SDMA mode)."""

    power_logits: np.ndarray
    split_logits: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.power_logits = np.asarray(self.power_logits, dtype=float)
        self.split_logits = np.asarray(self.split_logits, dtype=float)
        if not (
            np.all(np.isfinite(self.power_logits))
            and np.all(np.isfinite(self.split_logits))
        ):
            raise InvalidActionError("action logits must be finite")


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    sum_rate: float
    penalty: float
    qos_violations: int
    allocation: Allocation
    rate_report: RateReport
    done: bool


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically safe Softmax along the last axis (max subtracted)."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def penalty(total_rates: np.ndarray, qos: np.ndarray) -> float:
    """Fraction of users whose total rate fell strictly below their QoS."""
    total_rates = np.asarray(total_rates, dtype=float)
    qos = np.asarray(qos, dtype=float)
    if total_rates.shape != qos.shape:
        raise ValueError(f"length mismatch: {total_rates.shape} vs {qos.shape}")
    return float(np.mean(total_rates < qos))


def split_action_vector(vec: np.ndarray, k: int, mode: str = RSMA) -> RawAction:
    """Slice a flat policy output [power logits | split logits] into a RawAction."""
    vec = np.asarray(vec, dtype=float)
    if mode == SDMA:
        if vec.shape[-1] != k:
            raise InvalidActionError(f"expected {k} logits, got {vec.shape[-1]}")
        return RawAction(power_logits=vec)
    if vec.shape[-1] != 2 * k + 1:
        raise InvalidActionError(f"expected {2 * k + 1} logits, got {vec.shape[-1]}")
    return RawAction(power_logits=vec[: k + 1], split_logits=vec[k + 1 :])


class RsmaEnv:
    """Single-BS downlink power-allocation environment.

    Holds mutable per-episode state (channel, precoders, step counter);
    one instance per concurrent rollout.  ``channel_fn(rng, m, k)`` can
    be swapped out to pin channels in tests or replays.
    """

    def __init__(self, config: EnvConfig, seed=0, channel_fn=None):
        config.validate()
        self.config = config
        self.p_t_linear = dbm_to_linear(config.p_t_dbm)
        self._channel_fn = channel_fn or sample_true_channel
        # separate streams so perfect/imperfect CSIT share true channels
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        true_ss, err_ss = ss.spawn(2)
        self._true_rng = make_rng(true_ss)
        self._err_rng = make_rng(err_ss)
        self._channel: ChannelRealization | None = None
        self._precoders: Precoders | None = None
        self._step_count = 0
        self._done = True

    # -- channel bookkeeping -------------------------------------------------

    def _draw_channel(self, fresh: bool):
        cfg = self.config
        if fresh or self._channel is None or cfg.gauss_markov_rho == 0.0:
            true = self._channel_fn(self._true_rng, cfg.m, cfg.k)
        else:
            true = advance_true_channel(
                self._channel.true_channel, cfg.gauss_markov_rho, self._true_rng
            )
        self._channel = apply_estimation_error(
            true, self.p_t_linear, self._err_rng, perfect_csit=cfg.perfect_csit
        )
        self._precoders = compute_precoders(self._channel.estimated_channel)

    @property
    def channel(self) -> ChannelRealization:
        if self._channel is None:
            raise RuntimeError("environment has not been reset")
        return self._channel

    @property
    def obs_dim(self) -> int:
        return self.config.obs_dim

    @property
    def action_dim(self) -> int:
        return self.config.action_dim

    # -- action / observation mapping ----------------------------------------

    def _uniform_mu(self) -> np.ndarray:
        k = self.config.k
        if self.config.mode == SDMA:
            return np.concatenate([[0.0], np.full(k, 1.0 / k)])
        return np.full(k + 1, 1.0 / (k + 1))

    def action_to_allocation(self, raw: RawAction) -> Allocation:
        """Softmax the logits onto the simplex and split the common rate.

        mu = Softmax(power logits); the common rate R_c(mu) is evaluated
        on the current channel and divided as C = Softmax(split logits)
        * R_c, so the power and common-split constraints hold exactly up
        to rounding.  SDMA pins mu_c = 0 and C = 0.
        """
        cfg = self.config
        if cfg.mode == SDMA:
            if raw.power_logits.shape != (cfg.k,):
                raise InvalidActionError(
                    f"sdma expects {cfg.k} power logits, got {raw.power_logits.shape}"
                )
            mu = np.concatenate([[0.0], softmax(raw.power_logits)])
            return Allocation(mu=mu, c=np.zeros(cfg.k))
        if raw.power_logits.shape != (cfg.k + 1,):
            raise InvalidActionError(
                f"rsma expects {cfg.k + 1} power logits, got {raw.power_logits.shape}"
            )
        if raw.split_logits.shape != (cfg.k,):
            raise InvalidActionError(
                f"rsma expects {cfg.k} split logits, got {raw.split_logits.shape}"
            )
        mu = softmax(raw.power_logits)
        gamma_c, _ = compute_sinrs(
            self.channel.true_channel, self._precoders, mu, self.p_t_linear
        )
        r_c = common_rate(gamma_c)
        shares = softmax(raw.split_logits)
        return Allocation(mu=mu, c=shares * r_c)

    def _observe(self, mu: np.ndarray) -> np.ndarray:
        """SINR feedback pairs under ``mu`` on the current channel."""
        gamma_c, gamma_p = compute_sinrs(
            self.channel.true_channel, self._precoders, mu, self.p_t_linear
        )
        return np.column_stack([gamma_c, gamma_p]).ravel()

    # -- episode protocol ------------------------------------------------------

    def reset(self) -> np.ndarray:
        """Start an episode; the first observation uses a uniform allocation."""
        self._draw_channel(fresh=True)
        self._step_count = 0
        self._done = False
        return self._observe(self._uniform_mu())

    def step(self, raw: RawAction) -> StepOutcome:
        if self._done:
            raise EpisodeFinishedError("call reset() before stepping again")
        alloc = self.action_to_allocation(raw)
        report = rate_report(
            self.channel.true_channel, self._precoders, alloc, self.p_t_linear
        )
        p = penalty(report.total_rates, self.config.qos)
        violations = int(np.sum(report.total_rates < self.config.qos))
        reward = report.sum_rate * (1.0 - p)

        self._step_count += 1
        self._done = self._step_count >= self.config.episode_len

        # next fading block; users feed back SINRs under the allocation
        # they just received
        self._draw_channel(fresh=False)
        obs = self._observe(alloc.mu)

        return StepOutcome(
            observation=obs,
            reward=reward,
            sum_rate=report.sum_rate,
            penalty=p,
            qos_violations=violations,
            allocation=alloc,
            rate_report=report,
            done=self._done,
        )
