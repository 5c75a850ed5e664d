"""Block-fading channel generation and imperfect BS-side estimates.

True channels are i.i.d. Rayleigh: every entry of the M x K matrix is
CN(0, 1) (real/imag parts N(0, 1/2) each), redrawn each time step.  The
BS never sees the true channel; it works with an estimate

    estimate = true + error,     error entries CN(0, p_t^{-0.6} / M),

so the expected squared error norm per user column is p_t^{-0.6}: the
estimate improves as the transmit power grows.  Noise power is fixed to
one throughout the package, so "linear power" always means power over
noise, referenced to 1 mW.

An optional first-order Gauss-Markov evolution (coefficient rho) keeps
successive channels correlated; rho = 0 recovers the i.i.d. default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ERROR_POWER_EXPONENT = -0.6


def make_rng(seed) -> np.random.Generator:
    """Deterministic generator (PCG64): same seed, same stream, any platform."""
    return np.random.default_rng(seed)


@dataclass
class ChannelRealization:
    """One fading block: the true channel and what the BS thinks it is.

    Both matrices are M x K (antennas x users).  ``p_t_linear`` is the
    noise-normalized linear transmit power the realization was drawn for.
    """

    true_channel: np.ndarray
    estimated_channel: np.ndarray
    p_t_linear: float

    def __post_init__(self):
        if self.true_channel.shape != self.estimated_channel.shape:
            raise ValueError(
                f"channel shapes differ: {self.true_channel.shape} vs "
                f"{self.estimated_channel.shape}"
            )
        m, k = self.true_channel.shape
        if not m >= k >= 1:
            raise ValueError(f"need M >= K >= 1, got M={m}, K={k}")

    @property
    def m(self) -> int:
        return self.true_channel.shape[0]

    @property
    def k(self) -> int:
        return self.true_channel.shape[1]


def dbm_to_linear(p_dbm: float) -> float:
    """Convert dBm to linear milliwatt-referenced power: 10^(p_dbm / 10)."""
    p_dbm = float(p_dbm)
    if not np.isfinite(p_dbm):
        raise ValueError(f"power must be finite, got {p_dbm}")
    return 10.0 ** (p_dbm / 10.0)


def sample_true_channel(rng: np.random.Generator, m: int, k: int) -> np.ndarray:
    """Draw an M x K matrix of i.i.d. CN(0, 1) entries."""
    if not m >= k >= 1:
        raise ValueError(f"need M >= K >= 1, got M={m}, K={k}")
    re = rng.standard_normal((m, k))
    im = rng.standard_normal((m, k))
    return (re + 1j * im) / np.sqrt(2.0)


def advance_true_channel(
    prev: np.ndarray, rho: float, rng: np.random.Generator
) -> np.ndarray:
    """Gauss-Markov step: rho * prev + sqrt(1 - rho^2) * fresh CN(0,1) draw.

    Keeps the per-entry distribution CN(0, 1) for any rho in [0, 1];
    rho = 0 is an independent redraw.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    m, k = prev.shape
    innovation = sample_true_channel(rng, m, k)
    return rho * prev + np.sqrt(1.0 - rho * rho) * innovation


def estimation_error_variance(p_t_linear: float) -> float:
    """Per-user expected squared error norm, E{||e_k||^2} = p_t^{-0.6}."""
    if not (np.isfinite(p_t_linear) and p_t_linear > 0):
        raise ValueError(f"linear power must be positive, got {p_t_linear}")
    return float(p_t_linear) ** ERROR_POWER_EXPONENT


def apply_estimation_error(
    true_channel: np.ndarray,
    p_t_linear: float,
    rng: np.random.Generator,
    perfect_csit: bool = False,
) -> ChannelRealization:
    """Attach a BS-side estimate to a true channel.

    The column error energy p_t^{-0.6} is split evenly over the M antennas
    (isotropic error), i.e. each entry of the error matrix is
    CN(0, p_t^{-0.6} / M).  With ``perfect_csit`` the estimate is the true
    channel itself and no randomness is consumed.
    """
    var_total = estimation_error_variance(p_t_linear)
    if perfect_csit:
        return ChannelRealization(true_channel, true_channel.copy(), float(p_t_linear))
    m = true_channel.shape[0]
    per_entry_std = np.sqrt(var_total / m / 2.0)
    re = rng.standard_normal(true_channel.shape)
    im = rng.standard_normal(true_channel.shape)
    error = per_entry_std * (re + 1j * im)
    return ChannelRealization(true_channel, true_channel + error, float(p_t_linear))
