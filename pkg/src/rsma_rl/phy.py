"""Rate-splitting downlink physical layer: precoders, SINRs, rates, feasibility.

One common stream plus K private streams share the transmit power
through the fraction vector mu = [mu_c, mu_1, ..., mu_K].  At user k
(channel column h_k, noise power 1):

    gamma_c_k = mu_c  P |h_k^H w_c|^2 / (sum_j   mu_j P |h_k^H w_j|^2 + 1)
    gamma_p_k = mu_k  P |h_k^H w_k|^2 / (sum_j!=k mu_j P |h_k^H w_j|^2 + 1)

The common stream is decoded first by everyone, so its rate is the
worst-user log2(1 + gamma_c_k); each user then gets a share C_k of that
common rate on top of its private rate log2(1 + gamma_p_k).

Precoders are fixed (not optimized): matched filtering for the private
streams and the dominant left singular vector of the estimated channel
for the common stream.  Precoders are built from the BS *estimate*;
realized SINRs are evaluated on the *true* channel, which is how
estimation error costs performance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateChannelError(ValueError):
    """Raised when a channel matrix has an all-zero user column."""


@dataclass
class Precoders:
    """Unit-norm beamforming vectors: ``common`` (M,) and ``private`` (M, K)."""

    common: np.ndarray
    private: np.ndarray


@dataclass
class Allocation:
    """Power fractions ``mu`` = [common, user 1..K] and common-rate shares ``c``.

    mu lives on the (K+1)-simplex (nonnegative, sums to <= 1); c holds the
    per-user portions of the common rate in bits/s/Hz, all nonnegative.
    """

    mu: np.ndarray
    c: np.ndarray

    @property
    def k(self) -> int:
        return len(self.c)


@dataclass
class RateReport:
    """Everything Eq.-level downstream code needs about one transmission."""

    gamma_c: np.ndarray
    gamma_p: np.ndarray
    private_rates: np.ndarray
    common_rate: float
    total_rates: np.ndarray  # C_k + private rate, per user
    sum_rate: float


@dataclass
class FeasibilityReport:
    power_ok: bool
    common_split_ok: bool
    qos_ok: np.ndarray  # K booleans
    nonneg_ok: bool

    def all_ok(self) -> bool:
        return bool(
            self.power_ok
            and self.common_split_ok
            and self.nonneg_ok
            and np.all(self.qos_ok)
        )


#: absolute slack on inequality constraints; Softmax outputs are exact only
#: up to floating-point rounding.
CONSTRAINT_SLACK = 1e-9


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate v so its first nonzero entry is real and nonnegative."""
    idx = np.flatnonzero(np.abs(v) > 1e-12)
    if len(idx) == 0:
        return v
    pivot = v[idx[0]]
    return v * (np.conj(pivot) / np.abs(pivot))


def compute_precoders(estimated_channel: np.ndarray) -> Precoders:
    """Matched-filter private beams + dominant-direction common beam.

    Private beam k is the estimated column k scaled to unit norm.  The
    common beam is the leading left singular vector of the estimated
    channel (numpy orders singular values descending, so exact ties
    resolve to the lowest index), phase-rotated so its first nonzero
    entry is real nonnegative.  All returned vectors have unit norm.
    """
    est = np.asarray(estimated_channel)
    norms = np.linalg.norm(est, axis=0)
    if np.any(norms < 1e-15):
        raise DegenerateChannelError("estimated channel has an all-zero column")
    private = est / norms
    u, _, _ = np.linalg.svd(est, full_matrices=False)
    common = _phase_normalize(u[:, 0])
    common = common / np.linalg.norm(common)
    return Precoders(common=common, private=private)


def beam_gains(true_channel: np.ndarray, precoders: Precoders):
    """|h_k^H w|^2 for the common beam (K,) and all private beams (K, K)."""
    h_conj = true_channel.conj().T  # (K, M)
    common_gain = np.abs(h_conj @ precoders.common) ** 2
    private_gain = np.abs(h_conj @ precoders.private) ** 2  # [k, j] = |h_k^H w_j|^2
    return common_gain, private_gain


def compute_sinrs(
    true_channel: np.ndarray,
    precoders: Precoders,
    mu: np.ndarray,
    p_t_linear: float,
):
    """Common/private SINRs at each user for power fractions ``mu``.

    ``mu`` may carry leading batch dimensions, shape (..., K+1); the
    returned gamma_c and gamma_p then have shape (..., K).
    """
    mu = np.asarray(mu, dtype=float)
    k = true_channel.shape[1]
    if mu.shape[-1] != k + 1:
        raise ValueError(f"mu must have {k + 1} entries, got {mu.shape[-1]}")
    if not p_t_linear > 0:
        raise ValueError(f"linear power must be positive, got {p_t_linear}")

    common_gain, private_gain = beam_gains(true_channel, precoders)
    mu_c = mu[..., :1]  # (..., 1)
    mu_priv = mu[..., 1:]  # (..., K)

    # private interference received at user k: sum_j mu_j |h_k^H w_j|^2
    priv_seen = mu_priv @ (p_t_linear * private_gain.T)  # (..., K)
    own = mu_priv * (p_t_linear * np.diag(private_gain))  # (..., K)

    gamma_c = mu_c * (p_t_linear * common_gain) / (priv_seen + 1.0)
    gamma_p = own / (priv_seen - own + 1.0)
    return gamma_c, gamma_p


def private_rate(gamma: float) -> float:
    """Shannon rate log2(1 + gamma) in bits/s/Hz."""
    if gamma < 0:
        raise ValueError(f"SINR must be nonnegative, got {gamma}")
    return float(np.log2(1.0 + gamma))


def common_rate(gamma_c: np.ndarray) -> float:
    """Worst-user rate of the common stream: min_k log2(1 + gamma_c_k)."""
    gamma_c = np.asarray(gamma_c, dtype=float)
    if gamma_c.size == 0:
        raise ValueError("gamma_c must be nonempty")
    if np.any(gamma_c < 0):
        raise ValueError("SINRs must be nonnegative")
    return float(np.log2(1.0 + np.min(gamma_c)))


def sum_rate(c: np.ndarray, private_rates: np.ndarray) -> float:
    """Total throughput sum_k (C_k + R_k)."""
    c = np.asarray(c, dtype=float)
    private_rates = np.asarray(private_rates, dtype=float)
    if c.shape != private_rates.shape:
        raise ValueError(f"length mismatch: {c.shape} vs {private_rates.shape}")
    return float(np.sum(c + private_rates))


def rate_report(
    true_channel: np.ndarray,
    precoders: Precoders,
    alloc: Allocation,
    p_t_linear: float,
) -> RateReport:
    """Evaluate the full rate stack for one allocation on one channel."""
    gamma_c, gamma_p = compute_sinrs(true_channel, precoders, alloc.mu, p_t_linear)
    rates = np.log2(1.0 + gamma_p)
    r_c = common_rate(gamma_c)
    totals = alloc.c + rates
    return RateReport(
        gamma_c=gamma_c,
        gamma_p=gamma_p,
        private_rates=rates,
        common_rate=r_c,
        total_rates=totals,
        sum_rate=sum_rate(alloc.c, rates),
    )


def check_feasibility(
    alloc: Allocation, report: RateReport, qos: np.ndarray
) -> FeasibilityReport:
    """Truth value of each constraint at the given operating point.

    Power and common-split inequalities get CONSTRAINT_SLACK of absolute
    slack; the QoS and nonnegativity checks are exact.
    """
    qos = np.asarray(qos, dtype=float)
    if qos.shape != alloc.c.shape:
        raise ValueError(f"qos length {qos.shape} != K {alloc.c.shape}")
    return FeasibilityReport(
        power_ok=bool(np.sum(alloc.mu) <= 1.0 + CONSTRAINT_SLACK),
        common_split_ok=bool(
            np.sum(alloc.c) <= report.common_rate + CONSTRAINT_SLACK
        ),
        qos_ok=report.total_rates >= qos,
        nonneg_ok=bool(np.min(alloc.c) >= 0.0),
    )
