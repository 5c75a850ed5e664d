"""RSMA downlink power-allocation lab.

A desk-scale simulator of a K-user rate-splitting downlink with
imperfect transmitter-side channel knowledge, plus a from-scratch PPO
agent and the tabular baselines it is compared against.
"""

from .channel import (
    ChannelRealization,
    apply_estimation_error,
    dbm_to_linear,
    make_rng,
    sample_true_channel,
)
from .config import RunConfig, desk_profile, load_config
from .env import EnvConfig, RawAction, RsmaEnv, StepOutcome, penalty, sdma_variant, softmax
from .nn import Adam, PolicyValueNet
from .phy import (
    Allocation,
    FeasibilityReport,
    Precoders,
    RateReport,
    check_feasibility,
    common_rate,
    compute_precoders,
    compute_sinrs,
    private_rate,
    rate_report,
    sum_rate,
)
from .ppo import (
    PpoConfig,
    RolloutBuffer,
    clip_function,
    collect_rollout,
    estimate_advantages,
    ppo_objective,
    update,
)

__all__ = [
    "Adam",
    "Allocation",
    "ChannelRealization",
    "EnvConfig",
    "FeasibilityReport",
    "PolicyValueNet",
    "Precoders",
    "PpoConfig",
    "RateReport",
    "RawAction",
    "RolloutBuffer",
    "RsmaEnv",
    "RunConfig",
    "StepOutcome",
    "apply_estimation_error",
    "check_feasibility",
    "clip_function",
    "collect_rollout",
    "common_rate",
    "compute_precoders",
    "compute_sinrs",
    "dbm_to_linear",
    "desk_profile",
    "estimate_advantages",
    "load_config",
    "make_rng",
    "penalty",
    "ppo_objective",
    "private_rate",
    "rate_report",
    "sample_true_channel",
    "sdma_variant",
    "softmax",
    "sum_rate",
    "update",
]
