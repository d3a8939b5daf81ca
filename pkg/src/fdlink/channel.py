"""Self-interference and desired-link channels.

A passband antenna response (measured on a network analyser, or synthesised)
is shifted to 0 Hz with the one-sided/2 rule, resampled onto an FFT grid at
the simulation rate, inverted to an impulse response and truncated to a short
FIR channel.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dspcore import ComplexBasebandSignal, dbm_to_watts

__all__ = [
    "FREQ_HEADER",
    "MeasurementFormatError",
    "FrequencyResponse",
    "BasebandResponse",
    "ChannelSource",
    "BasebandChannel",
    "load_frequency_response",
    "save_frequency_response",
    "passband_to_baseband",
    "resample_to_bins",
    "to_impulse_response",
    "synth_antenna_response",
    "apply_channel",
    "desired_channel",
    "zero_channel",
]

FREQ_HEADER = ("freq_hz", "mag_db", "phase_deg")

DEFAULT_CENTER_FREQ = 2.438e9
DEFAULT_BANDWIDTH = 20e6
GRID_RTOL = 1e-6


class MeasurementFormatError(ValueError):
    """Malformed or inconsistent measurement file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else 'line '}{line}"
        super().__init__(f"{where}: {message}" if where else message)


def _check_uniform_grid(freqs: np.ndarray) -> int | None:
    """Index of the first step that breaks ascending uniformity, or None."""
    steps = np.diff(freqs)
    if steps.size == 0:
        return None
    nominal = steps[0]
    for i, step in enumerate(steps):
        if step <= 0:
            return i + 1
        if abs(step - nominal) > GRID_RTOL * abs(nominal):
            return i + 1
    return None


@dataclass(frozen=True)
class FrequencyResponse:
    """Passband response on a uniform ascending grid centred on ``center_freq``."""

    freqs: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray
    center_freq: float
    bandwidth: float

    def __post_init__(self):
        arrays = {}
        for name in ("freqs", "mag_db", "phase_deg"):
            arr = np.array(getattr(self, name), dtype=np.float64).ravel()
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = arrays["freqs"].size
        if n < 2:
            raise ValueError("a frequency response needs at least two points")
        if arrays["mag_db"].size != n or arrays["phase_deg"].size != n:
            raise ValueError("freqs, mag_db and phase_deg must have equal lengths")
        if not all(np.all(np.isfinite(a)) for a in arrays.values()):
            raise ValueError("frequency response contains non-finite values")
        bad = _check_uniform_grid(arrays["freqs"])
        if bad is not None:
            raise ValueError(f"frequency grid is not uniform and ascending at index {bad}")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        lo = self.center_freq - self.bandwidth / 2
        hi = self.center_freq + self.bandwidth / 2
        tol = GRID_RTOL * self.bandwidth
        if abs(arrays["freqs"][0] - lo) > tol or abs(arrays["freqs"][-1] - hi) > tol:
            raise ValueError("frequency grid must span [center - B/2, center + B/2]")

    @classmethod
    def from_grid(cls, freqs, mag_db, phase_deg) -> "FrequencyResponse":
        """Build a response whose centre and bandwidth are read off the grid ends."""
        freqs = np.asarray(freqs, dtype=np.float64)
        return cls(
            freqs,
            mag_db,
            phase_deg,
            center_freq=float((freqs[0] + freqs[-1]) / 2),
            bandwidth=float(freqs[-1] - freqs[0]),
        )

    def __len__(self):
        return self.freqs.size


@dataclass(frozen=True)
class BasebandResponse:
    """Equivalent-baseband frequency samples on ``[-bandwidth/2, +bandwidth/2]``."""

    freqs: np.ndarray
    values: np.ndarray
    bandwidth: float


class ChannelSource(str, enum.Enum):
    MEASURED = "measured"
    SYNTHETIC = "synthetic"
    SCALAR = "scalar"


@dataclass(frozen=True)
class BasebandChannel:
    """FIR channel at ``sample_rate``.

    Channels are passive: total tap energy may not exceed one.
    """

    taps: np.ndarray
    sample_rate: float
    source: ChannelSource
    captured_energy: float = 1.0

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.complex128).ravel()
        if taps.size == 0:
            raise ValueError("a channel needs at least one tap")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "source", ChannelSource(self.source))
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not 0.0 < self.captured_energy <= 1.0:
            raise ValueError(f"captured_energy must lie in (0, 1], got {self.captured_energy}")
        if self.energy > 1.0 + 1e-12:
            raise ValueError(f"passive channel has tap energy {self.energy:.6g} > 1")

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    def __len__(self):
        return self.taps.size


def load_frequency_response(path) -> FrequencyResponse:
    """Read a ``freq_hz,mag_db,phase_deg`` CSV export.

    Raises :class:`MeasurementFormatError` naming the offending line.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"measurement file not found: {path}")
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MeasurementFormatError("empty file", 1, path)
        if tuple(h.strip() for h in header) != FREQ_HEADER:
            raise MeasurementFormatError(
                f"expected header {','.join(FREQ_HEADER)!r}, got {','.join(header)!r}", 1, path
            )
        for record in reader:
            line = reader.line_num
            if not record or all(not field.strip() for field in record):
                continue
            if len(record) != 3:
                raise MeasurementFormatError(
                    f"expected 3 fields, found {len(record)}", line, path
                )
            try:
                values = tuple(float(field) for field in record)
            except ValueError:
                raise MeasurementFormatError(
                    f"non-numeric field in {','.join(record)!r}", line, path
                ) from None
            if not all(math.isfinite(v) for v in values):
                raise MeasurementFormatError("non-finite value", line, path)
            rows.append((line, values))
    if len(rows) < 2:
        raise MeasurementFormatError("need at least two data rows", None, path)
    data = np.array([values for _, values in rows])
    bad = _check_uniform_grid(data[:, 0])
    if bad is not None:
        line = rows[bad][0]
        if data[bad, 0] <= data[bad - 1, 0]:
            raise MeasurementFormatError("frequencies are not strictly ascending", line, path)
        raise MeasurementFormatError("non-uniform frequency grid", line, path)
    return FrequencyResponse.from_grid(data[:, 0], data[:, 1], data[:, 2])


def save_frequency_response(fr: FrequencyResponse, path) -> None:
    lines = [",".join(FREQ_HEADER)]
    for f, m, p in zip(fr.freqs, fr.mag_db, fr.phase_deg):
        lines.append(f"{float(f)!r},{float(m)!r},{float(p)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def passband_to_baseband(fr: FrequencyResponse) -> BasebandResponse:
    """Shift the one-sided passband response to 0 Hz and halve it.

    ``H_bb(f) = 0.5 * |H(f + fc)| * exp(j * angle H(f + fc))`` for
    ``|f| <= B/2``, zero elsewhere.
    """
    f_bb = fr.freqs - fr.center_freq
    values = 0.5 * 10.0 ** (fr.mag_db / 20.0) * np.exp(1j * np.deg2rad(fr.phase_deg))
    in_band = np.abs(f_bb) <= fr.bandwidth / 2 * (1 + GRID_RTOL)
    values = np.where(in_band, values, 0.0)
    return BasebandResponse(f_bb, values, fr.bandwidth)


def _fft_size(n_points: int) -> int:
    return max(64, 1 << max(0, (n_points - 1).bit_length()))


def resample_to_bins(resp: BasebandResponse, target_rate: float, n_fft: int | None = None):
    """Interpolate onto the centred FFT bin grid of ``n_fft`` bins at ``target_rate``.

    Magnitude is interpolated in dB and phase after unwrapping, so the phase
    slope survives coarse grids. Bins outside the response's bandwidth are
    zero. Returns ``(bin_freqs, bin_values)`` in ascending frequency order.
    """
    if resp.freqs.size == 0:
        raise ValueError("empty baseband response")
    if target_rate < resp.bandwidth * (1 - GRID_RTOL):
        raise ValueError(
            f"target rate {target_rate:g} Hz is below the channel bandwidth {resp.bandwidth:g} Hz"
        )
    n_fft = n_fft or _fft_size(resp.freqs.size)
    bin_freqs = (np.arange(n_fft) - n_fft // 2) * (target_rate / n_fft)
    mag = np.abs(resp.values)
    mag_db = 20.0 * np.log10(np.maximum(mag, 1e-300))
    phase = np.unwrap(np.angle(resp.values))
    tol = GRID_RTOL * resp.bandwidth
    inside = (bin_freqs >= resp.freqs[0] - tol) & (bin_freqs <= resp.freqs[-1] + tol)
    inside &= np.abs(bin_freqs) <= resp.bandwidth / 2 + tol
    f_in = bin_freqs[inside]
    values = np.zeros(n_fft, dtype=np.complex128)
    values[inside] = 10.0 ** (np.interp(f_in, resp.freqs, mag_db) / 20.0) * np.exp(
        1j * np.interp(f_in, resp.freqs, phase)
    )
    return bin_freqs, values


def _shortest_window(energy: np.ndarray, threshold: float, max_taps: int):
    """Shortest circular window holding ``threshold`` of the energy.

    Returns ``(start, length, captured)``; ties go to the larger capture.
    """
    n = energy.size
    total = float(energy.sum())
    extended = np.concatenate([[0.0], np.cumsum(np.concatenate([energy, energy]))])
    for length in range(1, min(max_taps, n) + 1):
        sums = extended[length : length + n] - extended[:n]
        best = int(np.argmax(sums))
        if sums[best] >= threshold * total * (1 - 1e-12):
            return best, length, min(1.0, float(sums[best]) / total)
    return None


def to_impulse_response(
    resp: BasebandResponse,
    target_rate: float,
    max_taps: int = 16,
    energy_threshold: float = 0.99,
    source: ChannelSource | str = ChannelSource.MEASURED,
) -> BasebandChannel:
    """Invert the baseband response to a short causal FIR channel.

    The inverse FFT uses the 1/N convention, so a flat response ``c`` gives
    a single tap ``c`` and the untruncated taps satisfy
    ``sum|h|^2 == mean|H_bins|^2``. Output indices past N/2 are read as
    negative time; precursor energy is rotated to start at tap 0 and the
    result is cut to the shortest window reaching ``energy_threshold``.
    """
    if max_taps < 1:
        raise ValueError("max_taps must be >= 1")
    if not 0.0 < energy_threshold <= 1.0:
        raise ValueError("energy_threshold must lie in (0, 1]")
    _, bins = resample_to_bins(resp, target_rate)
    n = bins.size
    h = np.fft.ifft(np.fft.ifftshift(bins))
    energy = np.abs(h) ** 2
    if not np.any(energy > 0):
        return BasebandChannel(np.zeros(1), target_rate, source, 1.0)
    found = _shortest_window(energy, energy_threshold, max_taps)
    if found is None:
        raise ValueError(
            f"energy threshold {energy_threshold} not reachable within {max_taps} taps"
        )
    start, length, _ = found
    signed_start = start if start < n // 2 else start - n
    if signed_start < 0:
        h = np.roll(h, -signed_start)
        signed_start = 0
    n_keep = signed_start + length
    if n_keep > max_taps:
        raise ValueError(
            f"channel delay of {signed_start} samples leaves no room within {max_taps} taps"
        )
    taps = h[:n_keep]
    captured = float(np.sum(np.abs(taps) ** 2) / energy.sum())
    return BasebandChannel(taps, target_rate, source, min(1.0, captured))


def _cosine_ripple(rng: np.random.Generator, u: np.ndarray, n_terms: int) -> np.ndarray:
    """Random smooth series in [-1, 1], periodic over u in [0, 1]."""
    amps = rng.uniform(0.5, 1.0, n_terms)
    phases = rng.uniform(0.0, 2 * np.pi, n_terms)
    k = np.arange(1, n_terms + 1)
    series = np.cos(2 * np.pi * np.outer(u, k) + phases) @ amps
    return series / amps.sum()


def synth_antenna_response(
    isolation_db: float = -50.0,
    ripple_db: float = 3.0,
    group_delay_ns: float = 5.0,
    n_points: int = 201,
    seed: int = 0,
    center_freq: float = DEFAULT_CENTER_FREQ,
    bandwidth: float = DEFAULT_BANDWIDTH,
    n_terms: int = 3,
) -> FrequencyResponse:
    """Stand-in for a measured transmit/receive antenna isolation sweep.

    Magnitude is ``isolation_db`` plus a seeded low-order cosine ripple
    bounded by ``ripple_db``; phase is the linear group-delay term plus an
    independent ripple of matching size (``ripple_db`` nepers-equivalent).
    Phases are wrapped to [-180, 180) as a network analyser reports them.
    """
    if not isolation_db < 0:
        raise ValueError("isolation_db must be negative")
    if ripple_db < 0:
        raise ValueError("ripple_db must be non-negative")
    if group_delay_ns < 0:
        raise ValueError("group_delay_ns must be non-negative")
    if n_points < 3:
        raise ValueError("n_points must be >= 3")
    freqs = np.linspace(center_freq - bandwidth / 2, center_freq + bandwidth / 2, n_points)
    u = (freqs - freqs[0]) / bandwidth
    rng = np.random.default_rng(seed)
    mag_ripple = _cosine_ripple(rng, u, n_terms)
    phase_ripple = _cosine_ripple(rng, u, n_terms)
    mag_db = isolation_db + ripple_db * mag_ripple
    ripple_deg = np.rad2deg(ripple_db * math.log(10) / 20.0)
    phase = -360.0 * freqs * group_delay_ns * 1e-9 + ripple_deg * phase_ripple
    phase = np.mod(phase + 180.0, 360.0) - 180.0
    return FrequencyResponse(freqs, mag_db, phase, center_freq, bandwidth)


def apply_channel(signal: ComplexBasebandSignal, chan: BasebandChannel) -> ComplexBasebandSignal:
    """Full linear convolution; output has ``len(signal) + len(taps) - 1`` samples."""
    if not math.isclose(signal.sample_rate, chan.sample_rate, rel_tol=1e-12):
        raise ValueError(
            f"sample-rate mismatch: signal {signal.sample_rate:g} Hz, "
            f"channel {chan.sample_rate:g} Hz"
        )
    return signal.with_samples(np.convolve(signal.samples, chan.taps))


def desired_channel(P_Rb: float, P_Tb: float, sample_rate: float) -> BasebandChannel:
    """Flat real gain taking a ``P_Tb`` dBm transmission to ``P_Rb`` dBm."""
    if P_Rb > P_Tb:
        raise ValueError(f"P_Rb ({P_Rb} dBm) above P_Tb ({P_Tb} dBm) needs channel gain > 1")
    gain = math.sqrt(dbm_to_watts(P_Rb) / dbm_to_watts(P_Tb))
    return BasebandChannel(np.array([gain]), sample_rate, ChannelSource.SCALAR, 1.0)


def zero_channel(sample_rate: float) -> BasebandChannel:
    """Self-interference switched off (half-duplex reference)."""
    return BasebandChannel(np.zeros(1), sample_rate, ChannelSource.SCALAR, 1.0)
