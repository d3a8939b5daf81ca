"""Baseband DSP primitives.

Gray-mapped M-PSK, square-root raised cosine (SRRC) pulse shaping and
matched filtering, complex AWGN, and power bookkeeping. Every waveform is a
:class:`ComplexBasebandSignal`; every symbol vector is a :class:`SymbolBlock`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ComplexBasebandSignal",
    "SymbolBlock",
    "SrrcFilter",
    "psk_constellation",
    "modulate_psk",
    "demodulate_psk",
    "design_srrc",
    "pulse_shape",
    "matched_filter",
    "add_awgn",
    "dbm_to_watts",
    "watts_to_dbm",
    "set_average_power",
    "measure_power",
]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _bits_per_symbol(M: int) -> int:
    if M < 2 or (M & (M - 1)) != 0:
        raise ValueError(f"modulation order must be a power of 2 >= 2, got {M}")
    return M.bit_length() - 1


@dataclass(frozen=True)
class ComplexBasebandSignal:
    """Uniformly sampled complex envelope."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.complex128).ravel()
        object.__setattr__(self, "samples", _frozen(samples))
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return self.samples.size

    def with_samples(self, samples) -> "ComplexBasebandSignal":
        return ComplexBasebandSignal(samples, self.sample_rate)

    def padded(self, length: int) -> "ComplexBasebandSignal":
        """Zero-pad at the end to ``length`` samples."""
        if length < len(self):
            raise ValueError(f"cannot pad {len(self)} samples down to {length}")
        out = np.zeros(length, dtype=np.complex128)
        out[: len(self)] = self.samples
        return self.with_samples(out)


@dataclass(frozen=True)
class SymbolBlock:
    """Symbol vector tagged with its PSK order.

    Transmit blocks hold exact constellation points; blocks coming out of
    :func:`matched_filter` hold noisy soft values awaiting a decision.
    """

    symbols: np.ndarray
    modulation_order: int

    def __post_init__(self):
        _bits_per_symbol(self.modulation_order)
        symbols = np.array(self.symbols, dtype=np.complex128).ravel()
        object.__setattr__(self, "symbols", _frozen(symbols))

    def __len__(self):
        return self.symbols.size


@dataclass(frozen=True)
class SrrcFilter:
    taps: np.ndarray
    rolloff: float
    span_symbols: int
    samples_per_symbol: int

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64).ravel()
        object.__setattr__(self, "taps", _frozen(taps))
        if taps.size != self.span_symbols * self.samples_per_symbol + 1:
            raise ValueError("tap count must equal span_symbols * samples_per_symbol + 1")

    @property
    def delay(self) -> int:
        """Group delay of one filter, in samples."""
        return (self.taps.size - 1) // 2


def _phase_offset(M: int) -> float:
    return 0.0 if M == 2 else math.pi / M


def _gray(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


def _inverse_gray(g: np.ndarray) -> np.ndarray:
    g = np.array(g, dtype=np.int64)
    i = g.copy()
    shift = g >> 1
    while np.any(shift):
        i ^= shift
        shift >>= 1
    return i


def psk_constellation(M: int) -> np.ndarray:
    """Constellation indexed by the Gray label (as an integer, MSB first).

    Point ``i`` sits at phase ``offset + 2*pi*i/M`` and carries label
    ``i ^ (i >> 1)``, so angular neighbours differ in one bit. QPSK labels
    00, 01, 11, 10 land on pi/4, 3pi/4, 5pi/4, 7pi/4.
    """
    _bits_per_symbol(M)
    labels = np.arange(M)
    positions = _inverse_gray(labels)
    return np.exp(1j * (_phase_offset(M) + 2 * np.pi * positions / M))


def modulate_psk(bits, M: int) -> SymbolBlock:
    k = _bits_per_symbol(M)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of log2(M)={k}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    labels = bits.reshape(-1, k) @ weights
    return SymbolBlock(psk_constellation(M)[labels], M)


def demodulate_psk(block: SymbolBlock) -> np.ndarray:
    """Minimum-distance hard decision followed by Gray demapping.

    For equal-energy PSK the nearest point is the one closest in angle, so
    the decision reduces to rounding the phase onto the M-point grid.
    """
    if len(block) == 0:
        raise ValueError("cannot demodulate an empty symbol block")
    M = block.modulation_order
    k = _bits_per_symbol(M)
    step = 2 * np.pi / M
    phase = np.angle(block.symbols) - _phase_offset(M)
    positions = np.mod(np.rint(phase / step).astype(np.int64), M)
    labels = _gray(positions)
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def _srrc_value(t: float, alpha: float) -> float:
    # t in symbol periods
    if t == 0.0:
        return 1.0 - alpha + 4.0 * alpha / math.pi
    if alpha > 0 and abs(1.0 - (4.0 * alpha * t) ** 2) < 1e-10:
        q = math.pi / (4.0 * alpha)
        return alpha / math.sqrt(2.0) * (
            (1.0 + 2.0 / math.pi) * math.sin(q) + (1.0 - 2.0 / math.pi) * math.cos(q)
        )
    num = math.sin(math.pi * t * (1.0 - alpha)) + 4.0 * alpha * t * math.cos(
        math.pi * t * (1.0 + alpha)
    )
    den = math.pi * t * (1.0 - (4.0 * alpha * t) ** 2)
    return num / den


def design_srrc(rolloff: float, span_symbols: int, samples_per_symbol: int) -> SrrcFilter:
    """Unit-energy SRRC taps spanning ``span_symbols`` symbols.

    The removable singularities at t=0 and |t| = T/(4*rolloff) are filled
    with their closed-form limits, so the taps are reproducible bit for bit.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    if span_symbols < 2:
        raise ValueError(f"span_symbols must be >= 2, got {span_symbols}")
    if samples_per_symbol < 1:
        raise ValueError(f"samples_per_symbol must be >= 1, got {samples_per_symbol}")
    if (span_symbols * samples_per_symbol) % 2:
        raise ValueError("span_symbols * samples_per_symbol must be even for a centred filter")
    half = span_symbols * samples_per_symbol // 2
    taps = np.array(
        [_srrc_value(n / samples_per_symbol, rolloff) for n in range(-half, half + 1)]
    )
    taps /= math.sqrt(float(np.sum(taps**2)))
    return SrrcFilter(taps, rolloff, span_symbols, samples_per_symbol)


def pulse_shape(
    block: SymbolBlock, filt: SrrcFilter, symbol_rate: float = 1.0
) -> ComplexBasebandSignal:
    """Zero-stuff by ``sps`` and run the full convolution with the SRRC taps.

    Output has ``len(block) * sps + len(taps) - 1`` samples.
    """
    if len(block) == 0:
        raise ValueError("cannot pulse-shape an empty symbol block")
    sps = filt.samples_per_symbol
    upsampled = np.zeros(len(block) * sps, dtype=np.complex128)
    upsampled[::sps] = block.symbols
    return ComplexBasebandSignal(np.convolve(upsampled, filt.taps), symbol_rate * sps)


def matched_filter(
    signal: ComplexBasebandSignal,
    filt: SrrcFilter,
    n_symbols: int,
    modulation_order: int = 4,
    delay: int = 0,
) -> SymbolBlock:
    """Filter with the SRRC taps and pick one sample per symbol.

    ``delay`` is any extra delay (samples) on top of the transmit filter's;
    the combined transmit+receive filter delay of ``len(taps) - 1`` is
    removed automatically.
    """
    sps = filt.samples_per_symbol
    start = filt.taps.size - 1 + delay
    # last needed sample of the filtered signal must come from real input
    needed = start + (n_symbols - 1) * sps + 1 - (filt.taps.size - 1)
    if n_symbols < 1 or len(signal) < needed:
        raise ValueError(
            f"signal of {len(signal)} samples is too short for {n_symbols} symbols"
        )
    filtered = np.convolve(signal.samples, filt.taps)
    picks = filtered[start : start + n_symbols * sps : sps]
    return SymbolBlock(picks, modulation_order)


def add_awgn(
    signal: ComplexBasebandSignal, sigma2: float, rng: np.random.Generator
) -> ComplexBasebandSignal:
    """Add CN(0, sigma2) noise; each real dimension gets sigma2 / 2."""
    if sigma2 < 0:
        raise ValueError(f"noise power must be non-negative, got {sigma2}")
    if sigma2 == 0:
        return signal
    draws = rng.standard_normal((2, len(signal)))
    noise = math.sqrt(sigma2 / 2.0) * (draws[0] + 1j * draws[1])
    return signal.with_samples(signal.samples + noise)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def watts_to_dbm(p_watts: float) -> float:
    return 10.0 * math.log10(p_watts / 1e-3)


def measure_power(signal: ComplexBasebandSignal) -> float:
    if len(signal) == 0:
        raise ValueError("cannot measure the power of an empty signal")
    s = signal.samples
    return float(np.mean(s.real**2 + s.imag**2))


def set_average_power(signal: ComplexBasebandSignal, p_watts: float) -> ComplexBasebandSignal:
    if p_watts < 0:
        raise ValueError(f"target power must be non-negative, got {p_watts}")
    if p_watts == 0:
        return signal.with_samples(np.zeros(len(signal), dtype=np.complex128))
    current = measure_power(signal)
    if current == 0:
        raise ValueError("cannot scale an all-zero signal to a positive power")
    return signal.with_samples(signal.samples * math.sqrt(p_watts / current))
