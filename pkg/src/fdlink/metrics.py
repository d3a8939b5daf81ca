"""SINR, SINR gain, Shannon rate and bit error rate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .canceller import CancellationMode

__all__ = [
    "InfiniteSinrWarning",
    "LinkMetrics",
    "to_db",
    "sinr",
    "sinr_gain",
    "sinr_gain_db",
    "achievable_rate",
    "bit_error_rate",
]


class InfiniteSinrWarning(RuntimeWarning):
    """Residual power was exactly zero; SINR reported as +inf."""


def to_db(ratio: float) -> float:
    if ratio == 0:
        return -math.inf
    return 10.0 * math.log10(ratio)


def sinr(desired_power: float, residual_power: float) -> float:
    if desired_power < 0 or residual_power < 0:
        raise ValueError("powers must be non-negative")
    if residual_power == 0:
        warnings.warn("zero residual power, SINR is infinite", InfiniteSinrWarning, stacklevel=2)
        return math.inf
    return desired_power / residual_power


def sinr_gain(gamma_psb: float, gamma_ps: float) -> float:
    """SINR of PS+B relative to PS, as a linear ratio."""
    if gamma_psb <= 0 or gamma_ps <= 0:
        raise ValueError("SINR values must be positive")
    return gamma_psb / gamma_ps


def sinr_gain_db(gamma_psb: float, gamma_ps: float) -> float:
    return to_db(sinr_gain(gamma_psb, gamma_ps))


def achievable_rate(gamma: float) -> float:
    """Shannon rate in bps/Hz, treating residual interference as noise."""
    if gamma < 0:
        raise ValueError(f"SINR must be non-negative, got {gamma}")
    return math.log2(1.0 + gamma)


def bit_error_rate(tx_bits, rx_bits) -> float:
    a = np.asarray(tx_bits).ravel()
    b = np.asarray(rx_bits).ravel()
    if a.size != b.size:
        raise ValueError(f"bit vectors differ in length ({a.size} vs {b.size})")
    if a.size == 0:
        raise ValueError("empty bit vectors")
    return float(np.count_nonzero(a != b)) / a.size


@dataclass(frozen=True)
class LinkMetrics:
    """One operating point for one cancellation mode.

    ``desired_power``, ``residual_power``, ``n_errors`` and ``bits_crc`` keep
    the raw tallies behind the ratios so trials can be pooled.
    """

    sinr_linear: float
    rate_bps_hz: float
    ber: float
    ebn0_db: float
    mode: CancellationMode
    n_bits: int
    seed: int
    trials: int = 1
    desired_power: float = math.nan
    residual_power: float = math.nan
    n_errors: int = 0
    bits_crc: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", CancellationMode(self.mode))
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"BER {self.ber} outside [0, 1]")
        expected = achievable_rate(self.sinr_linear)
        if not (
            self.rate_bps_hz == expected
            or abs(self.rate_bps_hz - expected) <= 1e-12 * max(1.0, abs(expected))
        ):
            raise ValueError("rate_bps_hz is inconsistent with sinr_linear")

    @classmethod
    def from_tallies(
        cls,
        desired_power: float,
        residual_power: float,
        n_errors: int,
        n_bits: int,
        ebn0_db: float,
        mode: CancellationMode,
        seed: int,
        trials: int = 1,
        bits_crc: int = 0,
    ) -> "LinkMetrics":
        gamma = sinr(desired_power, residual_power)
        return cls(
            sinr_linear=gamma,
            rate_bps_hz=achievable_rate(gamma),
            ber=n_errors / n_bits if n_bits else 0.0,
            ebn0_db=ebn0_db,
            mode=mode,
            n_bits=n_bits,
            seed=seed,
            trials=trials,
            desired_power=desired_power,
            residual_power=residual_power,
            n_errors=n_errors,
            bits_crc=bits_crc,
        )

    @property
    def sinr_db(self) -> float:
        return to_db(self.sinr_linear)

    @property
    def saturated(self) -> bool:
        """True when the SINR hit the infinite sentinel."""
        return math.isinf(self.sinr_linear)
