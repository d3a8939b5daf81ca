"""Full-duplex frame composition and seeded Monte Carlo sweeps.

A trial is one training burst (terminal b silent) followed by one data frame
in which both terminals transmit. PS and PS+B share every random draw of a
trial, so their difference is the cancellation path alone.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import logging
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .canceller import (
    CancellationMode,
    ChannelEstimate,
    apply_cancellation,
    ls_estimate,
    make_cancellation_signal,
    make_training,
    residual_component,
)
from .channel import (
    BasebandChannel,
    ChannelSource,
    apply_channel,
    desired_channel,
    load_frequency_response,
    passband_to_baseband,
    synth_antenna_response,
    to_impulse_response,
)
from .dspcore import (
    ComplexBasebandSignal,
    add_awgn,
    dbm_to_watts,
    demodulate_psk,
    design_srrc,
    matched_filter,
    measure_power,
    modulate_psk,
    pulse_shape,
    set_average_power,
)
from .metrics import LinkMetrics, bit_error_rate, to_db

__all__ = [
    "SimulationConfig",
    "ResultTable",
    "CSV_HEADER",
    "ebn0_to_sigma2",
    "run_training_phase",
    "run_data_phase",
    "run_trial",
    "sweep",
    "trial_seed",
]

log = logging.getLogger(__name__)

CSV_HEADER = (
    "mode",
    "ebn0_db",
    "sinr_db",
    "sinr_linear",
    "rate_bps_hz",
    "ber",
    "trials",
    "n_bits",
    "seed",
)

SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class SimulationConfig:
    """Every knob of a run. Defaults are the reference link parameters.

    ``channel_source`` is either ``"synthetic"`` (use the ``isolation_db``,
    ``ripple_db``, ``group_delay_ns``, ``n_points`` and ``channel_seed``
    knobs) or a path to a ``freq_hz,mag_db,phase_deg`` measurement file.
    """

    M: int = 4
    n_bits: int = 2000
    n_tr: int = 5
    f_c: float = 2.438e9
    F_s: float = 20e6
    B_H: float = 20e6
    BW: float = 10e6
    P_Ta: float = 0.0
    P_Tb: float = 0.0
    P_Rb: float = -60.0
    rolloff: float = 0.25
    span_symbols: int = 8
    sps: int = 2
    est_order: int = 16
    channel_source: str = SYNTHETIC
    isolation_db: float = -50.0
    ripple_db: float = 3.0
    group_delay_ns: float = 5.0
    n_points: int = 201
    channel_seed: int = 0
    max_taps: int = 16
    energy_threshold: float = 0.99
    trials: int = 50
    base_seed: int = 2013

    def __post_init__(self):
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError(f"M must be a power of two >= 2, got {self.M}")
        if self.n_bits % self.bits_per_symbol:
            raise ValueError("n_bits must be a multiple of log2(M)")
        if self.n_symbols <= 2 * self.span_symbols:
            raise ValueError("frame too short: no symbols left after edge trimming")
        if self.n_tr < 1:
            raise ValueError("n_tr must be >= 1")
        if self.sps < 1 or self.est_order < 1 or self.max_taps < 1:
            raise ValueError("sps, est_order and max_taps must be >= 1")
        if self.BW > self.F_s:
            raise ValueError(f"signal bandwidth {self.BW:g} exceeds sampling rate {self.F_s:g}")
        if self.B_H > self.F_s:
            raise ValueError(f"channel bandwidth {self.B_H:g} exceeds sampling rate {self.F_s:g}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.P_Rb > self.P_Tb:
            raise ValueError("P_Rb must not exceed P_Tb")

    @property
    def bits_per_symbol(self) -> int:
        return self.M.bit_length() - 1

    @property
    def n_symbols(self) -> int:
        return self.n_bits // self.bits_per_symbol

    @property
    def symbol_rate(self) -> float:
        return self.F_s / self.sps

    def srrc(self):
        return design_srrc(self.rolloff, self.span_symbols, self.sps)

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: type(f.default) for f in dataclasses.fields(cls)}

    @classmethod
    def from_mapping(cls, values: dict) -> "SimulationConfig":
        """Build from string or typed values; unknown keys raise ``KeyError``."""
        types = cls.field_types()
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise KeyError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, types[key])
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        canon = "\n".join(f"{k}={v!r}" for k, v in sorted(self.to_mapping().items()))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def channel_provenance(self) -> dict:
        if self.channel_source == SYNTHETIC:
            return {
                "channel_source": SYNTHETIC,
                "isolation_db": self.isolation_db,
                "ripple_db": self.ripple_db,
                "group_delay_ns": self.group_delay_ns,
                "n_points": self.n_points,
                "channel_seed": self.channel_seed,
            }
        return {"channel_source": str(Path(self.channel_source))}

    def build_si_channel(self) -> BasebandChannel:
        if self.channel_source == SYNTHETIC:
            fr = synth_antenna_response(
                self.isolation_db,
                self.ripple_db,
                self.group_delay_ns,
                self.n_points,
                self.channel_seed,
                center_freq=self.f_c,
                bandwidth=self.B_H,
            )
            source = ChannelSource.SYNTHETIC
        else:
            fr = load_frequency_response(self.channel_source)
            source = ChannelSource.MEASURED
        return to_impulse_response(
            passband_to_baseband(fr), self.F_s, self.max_taps, self.energy_threshold, source
        )

    def build_desired_channel(self) -> BasebandChannel:
        return desired_channel(self.P_Rb, self.P_Tb, self.F_s)


def _coerce(key, raw, kind):
    if not isinstance(raw, str):
        return kind(raw)
    text = raw.strip()
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            return float(text)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None
    return text


def ebn0_to_sigma2(ebn0_db: float, P_Rb: float, M: int, sps: int) -> float:
    """Per-sample complex noise power giving the requested Eb/N0 on the desired link.

    ``sigma2 = P_Rb[W] * sps / (log2(M) * 10**(ebn0/10))``. With unit-energy
    SRRC taps the matched-filter output then has Es/N0 = log2(M) * Eb/N0.
    """
    k = M.bit_length() - 1
    return dbm_to_watts(P_Rb) * sps / (k * 10.0 ** (ebn0_db / 10.0))


def _shaped_unit_power(bits, cfg: SimulationConfig, filt) -> ComplexBasebandSignal:
    block = modulate_psk(bits, cfg.M)
    return set_average_power(pulse_shape(block, filt, cfg.symbol_rate), 1.0)


def run_training_phase(
    cfg: SimulationConfig,
    channel: BasebandChannel,
    sigma2: float,
    rng: np.random.Generator,
    filt=None,
) -> ChannelEstimate:
    """Terminal a sends ``n_tr`` training symbols while b is silent, then fits the SI channel."""
    filt = filt or cfg.srrc()
    block = make_training(cfg.n_tr, cfg.M, rng)
    x_tr = set_average_power(pulse_shape(block, filt, cfg.symbol_rate), 1.0)
    p_ta = dbm_to_watts(cfg.P_Ta)
    si = apply_channel(x_tr, channel)
    # terminal a only listens for the duration of its own training slot
    si = si.with_samples(math.sqrt(p_ta) * si.samples[: len(x_tr)])
    r_tr = add_awgn(si, sigma2, rng)
    return ls_estimate(r_tr, x_tr, p_ta, cfg.est_order)


def _bits_crc(*arrays) -> int:
    crc = 0
    for a in arrays:
        crc = zlib.crc32(np.ascontiguousarray(a, dtype=np.uint8).tobytes(), crc)
    return crc


def run_data_phase(
    cfg: SimulationConfig,
    channel_si: BasebandChannel,
    channel_des: BasebandChannel,
    estimate: ChannelEstimate | None,
    mode: CancellationMode,
    sigma2: float,
    rng: np.random.Generator,
    ebn0_db: float = math.nan,
    seed: int = 0,
    filt=None,
) -> LinkMetrics:
    """One full-duplex data frame observed at terminal a.

    The SINR uses the simulator's ground-truth split of ``y_a`` into the
    desired component and the residual; filter transients of
    ``span_symbols`` symbols at each end are excluded from power and BER.
    """
    mode = CancellationMode(mode)
    if mode is CancellationMode.PS_B and estimate is None:
        raise ValueError("PS+B mode needs a channel estimate")
    filt = filt or cfg.srrc()
    p_ta = dbm_to_watts(cfg.P_Ta)
    p_tb = dbm_to_watts(cfg.P_Tb)

    bits_a = rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)
    bits_b = rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)
    x_a = _shaped_unit_power(bits_a, cfg, filt)
    x_b = _shaped_unit_power(bits_b, cfg, filt)

    desired = apply_channel(set_average_power(x_b, p_tb), channel_des)
    si = apply_channel(x_a, channel_si)
    si = si.with_samples(math.sqrt(p_ta) * si.samples)
    if mode is CancellationMode.PS:
        # PS is PS+B with the estimate forced to zero
        estimate = ChannelEstimate.zero(estimate.order if estimate is not None else 1)
    x_hat = make_cancellation_signal(estimate, x_a, p_ta)

    n = max(len(desired), len(si), len(x_hat))
    desired, si, x_hat = desired.padded(n), si.padded(n), x_hat.padded(n)
    r_a = add_awgn(si.with_samples(desired.samples + si.samples), sigma2, rng)
    y_a = apply_cancellation(r_a, x_hat)
    residual = residual_component(y_a, desired)

    edge = cfg.span_symbols * cfg.sps
    interior = slice(edge, cfg.n_symbols * cfg.sps)
    p_des = measure_power(desired.with_samples(desired.samples[interior]))
    p_res = measure_power(residual.with_samples(residual.samples[interior]))

    soft = matched_filter(y_a, filt, cfg.n_symbols, cfg.M)
    k = cfg.bits_per_symbol
    keep = slice(cfg.span_symbols * k, (cfg.n_symbols - cfg.span_symbols) * k)
    rx_bits = demodulate_psk(soft)[keep]
    tx_bits = bits_b[keep]
    n_errors = int(round(bit_error_rate(tx_bits, rx_bits) * tx_bits.size))
    return LinkMetrics.from_tallies(
        p_des,
        p_res,
        n_errors,
        tx_bits.size,
        ebn0_db,
        mode,
        seed,
        bits_crc=_bits_crc(bits_a, bits_b),
    )


def trial_seed(base_seed: int, trial: int) -> np.random.SeedSequence:
    """Seed for one trial.

    Shared by every cancellation mode and every Eb/N0 point: the grid sees
    the same training symbols, data bits and unit-variance noise draws, with
    only the noise scaling changing from point to point.
    """
    return np.random.SeedSequence(base_seed, spawn_key=(trial,))


def run_trial(
    cfg: SimulationConfig,
    channel_si: BasebandChannel,
    channel_des: BasebandChannel,
    ebn0_db: float,
    modes: Sequence[CancellationMode],
    seed: np.random.SeedSequence,
    filt=None,
) -> dict:
    """Run every mode on the same training burst, data bits and noise."""
    filt = filt or cfg.srrc()
    sigma2 = ebn0_to_sigma2(ebn0_db, cfg.P_Rb, cfg.M, cfg.sps)
    train_seed, data_seed = seed.spawn(2)
    estimate = None
    if CancellationMode.PS_B in modes:
        estimate = run_training_phase(
            cfg, channel_si, sigma2, np.random.default_rng(train_seed), filt
        )
    out = {}
    for mode in modes:
        out[mode] = run_data_phase(
            cfg,
            channel_si,
            channel_des,
            estimate,
            mode,
            sigma2,
            np.random.default_rng(data_seed),
            ebn0_db=ebn0_db,
            seed=cfg.base_seed,
            filt=filt,
        )
    return out


def _aggregate(records: Sequence[LinkMetrics]) -> LinkMetrics:
    first = records[0]
    n = len(records)
    p_des = math.fsum(r.desired_power for r in records) / n
    p_res = math.fsum(r.residual_power for r in records) / n
    crc = _bits_crc(np.array([r.bits_crc for r in records], dtype=np.uint32).view(np.uint8))
    return LinkMetrics.from_tallies(
        p_des,
        p_res,
        sum(r.n_errors for r in records),
        sum(r.n_bits for r in records),
        first.ebn0_db,
        first.mode,
        first.seed,
        trials=n,
        bits_crc=crc,
    )


_MODE_ORDER = {CancellationMode.PS: 0, CancellationMode.PS_B: 1}


@dataclass(frozen=True)
class ResultTable:
    """Aggregated rows sorted by (mode, Eb/N0)."""

    rows: tuple
    config_fingerprint: str = ""

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: (_MODE_ORDER[r.mode], r.ebn0_db)))
        object.__setattr__(self, "rows", rows)

    def select(self, mode: CancellationMode) -> list:
        mode = CancellationMode(mode)
        return [r for r in self.rows if r.mode is mode]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    r.mode.value,
                    repr(float(r.ebn0_db)),
                    repr(float(r.sinr_db)),
                    repr(float(r.sinr_linear)),
                    repr(float(r.rate_bps_hz)),
                    repr(float(r.ber)),
                    r.trials,
                    r.n_bits,
                    r.seed,
                ]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        """Parse a results CSV; raises ``ValueError`` on empty or malformed input."""
        text = Path(path).read_text(encoding="utf-8")
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: results file is empty")
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {','.join(header)!r}")
        rows = []
        for record in reader:
            if not record:
                continue
            if len(record) != len(CSV_HEADER):
                raise ValueError(f"{path}:{reader.line_num}: expected {len(CSV_HEADER)} fields")
            try:
                row = dict(zip(CSV_HEADER, record))
                gamma = float(row["sinr_linear"])
                rows.append(
                    LinkMetrics(
                        sinr_linear=gamma,
                        rate_bps_hz=float(row["rate_bps_hz"]),
                        ber=float(row["ber"]),
                        ebn0_db=float(row["ebn0_db"]),
                        mode=CancellationMode.parse(row["mode"]),
                        n_bits=int(row["n_bits"]),
                        seed=int(row["seed"]),
                        trials=int(row["trials"]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{reader.line_num}: {exc}") from None
        if not rows:
            raise ValueError(f"{path}: results file has no data rows")
        return cls(tuple(rows))


def sweep(
    cfg: SimulationConfig,
    ebn0_grid: Iterable[float],
    modes: Sequence = (CancellationMode.PS, CancellationMode.PS_B),
    trials: int | None = None,
    channel_si: BasebandChannel | None = None,
) -> ResultTable:
    """Seeded Monte Carlo over an Eb/N0 grid.

    SINR per point is the ratio of trial-averaged desired and residual
    powers; BER pools all counted bits; rate follows from the pooled SINR.
    """
    grid = [float(e) for e in ebn0_grid]
    modes = [CancellationMode(m) for m in modes]
    if not grid or not modes:
        raise ValueError("need a non-empty Eb/N0 grid and at least one mode")
    trials = cfg.trials if trials is None else trials
    if trials < 1:
        raise ValueError("trials must be >= 1")
    channel_si = channel_si or cfg.build_si_channel()
    channel_des = cfg.build_desired_channel()
    filt = cfg.srrc()
    rows = []
    for ebn0 in grid:
        per_mode = {m: [] for m in modes}
        for t in range(trials):
            result = run_trial(
                cfg, channel_si, channel_des, ebn0, modes, trial_seed(cfg.base_seed, t), filt
            )
            for m, metrics in result.items():
                per_mode[m].append(metrics)
        for m in modes:
            row = _aggregate(per_mode[m])
            rows.append(row)
            log.debug("ebn0=%g mode=%s sinr=%.2f dB", ebn0, m.value, to_db(row.sinr_linear))
    return ResultTable(tuple(rows), cfg.fingerprint())
