"""Training, least-squares self-interference estimation and cancellation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import convolution_matrix

from .dspcore import ComplexBasebandSignal, SymbolBlock, modulate_psk

__all__ = [
    "CancellationMode",
    "ChannelEstimate",
    "make_training",
    "ls_estimate",
    "make_cancellation_signal",
    "apply_cancellation",
    "residual_component",
]


class CancellationMode(str, enum.Enum):
    PS = "PS"  # antenna isolation only
    PS_B = "PS+B"  # antenna isolation plus baseband cancellation

    @classmethod
    def parse(cls, text: str) -> "CancellationMode":
        key = text.strip().upper().replace("_", "+")
        if key == "PSB":
            key = "PS+B"
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown cancellation mode {text!r} (use ps or psb)") from None


@dataclass(frozen=True)
class ChannelEstimate:
    taps: np.ndarray
    n_training: int
    residual_norm: float
    """Mean squared fit residual over the rows used, in watts."""

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128).ravel()
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if self.residual_norm < 0:
            raise ValueError("residual_norm must be non-negative")

    @property
    def order(self) -> int:
        return self.taps.size

    @classmethod
    def zero(cls, order: int = 1) -> "ChannelEstimate":
        return cls(np.zeros(order), 0, 0.0)


def make_training(n_tr: int, M: int, rng: np.random.Generator) -> SymbolBlock:
    """``n_tr`` uniformly drawn M-PSK training symbols."""
    if n_tr < 1:
        raise ValueError(f"need at least one training symbol, got {n_tr}")
    k = M.bit_length() - 1
    return modulate_psk(rng.integers(0, 2, n_tr * k), M)


def ls_estimate(
    rx_train: ComplexBasebandSignal,
    tx_train: ComplexBasebandSignal,
    P_Ta: float,
    order: int,
    truncate: bool = True,
) -> ChannelEstimate:
    """Least-squares FIR fit of ``rx = sqrt(P_Ta) * (tx * h) + noise``.

    Rows come from the full convolution (the transmitter is silent before
    and after the training burst), capped at the received length. When
    fewer rows than ``order`` are available the order is cut down to the
    number of rows, or ``ValueError`` is raised if ``truncate`` is false.
    """
    if order < 1:
        raise ValueError("estimation order must be >= 1")
    if P_Ta <= 0:
        raise ValueError("P_Ta must be positive")
    if not math.isclose(rx_train.sample_rate, tx_train.sample_rate, rel_tol=1e-12):
        raise ValueError("training rx/tx sample rates differ")
    if len(tx_train) == 0 or len(rx_train) == 0:
        raise ValueError("empty training signal")
    usable = min(len(rx_train), len(tx_train) + order - 1)
    if usable < order:
        if not truncate:
            raise ValueError(
                f"underdetermined LS: {usable} usable rows for {order} taps"
            )
        order = usable
        usable = min(len(rx_train), len(tx_train) + order - 1)
    A = math.sqrt(P_Ta) * convolution_matrix(tx_train.samples, order, mode="full")[:usable]
    b = rx_train.samples[:usable]
    taps, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < order:
        raise ValueError(f"rank-deficient training matrix (rank {rank} < {order})")
    fit = b - A @ taps
    residual = float(np.mean(fit.real**2 + fit.imag**2))
    return ChannelEstimate(taps, len(tx_train), residual)


def make_cancellation_signal(
    est: ChannelEstimate, tx_samples: ComplexBasebandSignal, P_Ta: float
) -> ComplexBasebandSignal:
    """``-sqrt(P_Ta) * (tx * h_hat)`` from the unit-power pre-PA waveform."""
    return tx_samples.with_samples(-math.sqrt(P_Ta) * np.convolve(tx_samples.samples, est.taps))


def _check_pair(a: ComplexBasebandSignal, b: ComplexBasebandSignal):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)} samples")
    if not math.isclose(a.sample_rate, b.sample_rate, rel_tol=1e-12):
        raise ValueError("sample-rate mismatch")


def apply_cancellation(
    r_a: ComplexBasebandSignal, x_hat: ComplexBasebandSignal
) -> ComplexBasebandSignal:
    """Inject the cancellation waveform ahead of the ADC: ``y = r + x_hat``."""
    _check_pair(r_a, x_hat)
    return r_a.with_samples(r_a.samples + x_hat.samples)


def residual_component(
    y_a: ComplexBasebandSignal, desired: ComplexBasebandSignal
) -> ComplexBasebandSignal:
    """Remaining self-interference plus noise, using the simulator's ground truth."""
    _check_pair(y_a, desired)
    return y_a.with_samples(y_a.samples - desired.samples)
