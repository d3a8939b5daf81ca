"""Acceptance suite. Each test prints one PASS/FAIL line; run with ``-s`` to see them."""

import math
import time

import numpy as np
import pytest
from scipy.special import erfc

from fdlink.canceller import CancellationMode, ChannelEstimate, ls_estimate
from fdlink.channel import (
    BasebandChannel,
    passband_to_baseband,
    synth_antenna_response,
    zero_channel,
)
from fdlink.dspcore import ComplexBasebandSignal
from fdlink.harness import (
    ResultTable,
    SimulationConfig,
    run_data_phase,
    run_training_phase,
    sweep,
)
from fdlink.metrics import LinkMetrics

PS, PSB = CancellationMode.PS, CancellationMode.PS_B
GRID = [float(e) for e in range(0, 31, 2)]


def verdict(number, name, ok, detail):
    print(f"\ncriterion {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


@pytest.fixture(scope="module")
def default_sweep():
    cfg = SimulationConfig()
    start = time.perf_counter()
    table = sweep(cfg, GRID)
    return table, time.perf_counter() - start


def _slope(rows):
    top = rows[-3:]
    return np.polyfit([r.ebn0_db for r in top], [r.sinr_db for r in top], 1)[0]


def test_1_half_duplex_oracle():
    cfg = SimulationConfig()
    start = time.perf_counter()
    counted = cfg.n_bits - 2 * cfg.span_symbols * cfg.bits_per_symbol
    trials = math.ceil(2e5 / counted)
    table = sweep(cfg, [0.0, 4.0, 8.0], modes=[PS], trials=trials, channel_si=zero_channel(cfg.F_s))
    elapsed = time.perf_counter() - start
    details, ok = [], elapsed <= 60
    for row in table.rows:
        theory = 0.5 * erfc(math.sqrt(10 ** (row.ebn0_db / 10)))
        se = math.sqrt(theory * (1 - theory) / row.n_bits)
        z = (row.ber - theory) / se
        ok &= row.n_bits >= 2e5 and abs(z) <= 2
        details.append(f"{row.ebn0_db:g} dB: {row.ber:.4e} vs {theory:.4e}, z={z:+.2f}")
    details.append(f"{table.rows[0].n_bits} bits/point, {elapsed:.1f} s")
    assert verdict(1, "half-duplex BER oracle", ok, "; ".join(details))


def test_2_perfect_cancellation_limit():
    cfg = SimulationConfig()
    start = time.perf_counter()
    si = cfg.build_si_channel()
    des = cfg.build_desired_channel()
    genie = ChannelEstimate(si.taps, 0, 0.0)
    rng = np.random.default_rng
    ps = run_data_phase(cfg, si, des, None, PS, 0.0, rng(1))
    psb = run_data_phase(cfg, si, des, genie, PSB, 0.0, rng(1))
    ratio = psb.residual_power / ps.residual_power
    elapsed = time.perf_counter() - start
    ok = ratio <= 1e-10 and elapsed <= 5
    assert verdict(2, "perfect cancellation", ok, f"residual/SI = {ratio:.3e}, {elapsed:.2f} s")


def test_3_noiseless_ls_exactness():
    rng = np.random.default_rng(3)
    cfg = SimulationConfig()
    worst, passed = 0.0, 0
    for case in range(100):
        L = int(rng.integers(1, 9))
        taps = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) * 10 ** rng.uniform(-4, -2)
        chan = BasebandChannel(taps, cfg.F_s, "synthetic")
        est = run_training_phase(cfg.replace(est_order=L), chan, 0.0, rng)
        err = np.linalg.norm(est.taps - taps) / np.linalg.norm(taps)
        worst = max(worst, err)
        passed += err <= 1e-9
    assert verdict(3, "noiseless LS exactness", passed == 100, f"{passed}/100, worst {worst:.2e}")


def test_3b_direct_ls_longer_training():
    # same property straight through the estimator with a longer burst
    rng = np.random.default_rng(33)
    worst = 0.0
    for case in range(100):
        L = int(rng.integers(1, 9))
        taps = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        x = np.exp(1j * np.pi / 4 * (2 * rng.integers(0, 4, 64) + 1))
        rx = ComplexBasebandSignal(np.convolve(x, taps), 20e6)
        est = ls_estimate(rx, ComplexBasebandSignal(x, 20e6), 1.0, L)
        worst = max(worst, np.linalg.norm(est.taps - taps) / np.linalg.norm(taps))
    assert verdict(3, "noiseless LS exactness, 64-sample burst", worst <= 1e-9, f"worst {worst:.2e}")


def test_4_baseband_conversion():
    fr = synth_antenna_response(-50.0, 3.0, 5.0, 201, seed=0)
    bb = passband_to_baseband(fr)
    delta = 20 * np.log10(np.abs(bb.values)) - fr.mag_db
    err = np.max(np.abs(delta - 20 * math.log10(0.5)))
    support = bb.freqs[0] == -fr.bandwidth / 2 and bb.freqs[-1] == fr.bandwidth / 2
    ok = err <= 1e-9 and support
    detail = f"offset {np.mean(delta):.6f} dB, max dev {err:.1e} dB, support [{bb.freqs[0]:g}, {bb.freqs[-1]:g}] Hz"
    assert verdict(4, "passband to baseband", ok, detail)


def test_5_saturation_trend(default_sweep):
    table, elapsed = default_sweep
    ps, psb = table.select(PS), table.select(PSB)
    s_ps, s_psb = _slope(ps), _slope(psb)
    sign = [b.sinr_db - a.sinr_db for a, b in zip(ps, psb)]
    crossings = [
        GRID[i] + (GRID[i + 1] - GRID[i]) * sign[i] / (sign[i] - sign[i + 1])
        for i in range(len(sign) - 1)
        if (sign[i] < 0) != (sign[i + 1] < 0)
    ]
    ok = (
        s_ps < 0.15
        and abs(s_psb - 1.0) <= 0.15
        and len(crossings) == 1
        and 4 <= crossings[0] <= 16
        and elapsed <= 600
        and ps[0].trials >= 50
    )
    detail = (
        f"PS slope {s_ps:.3f}, PS+B slope {s_psb:.3f}, crossovers "
        f"{[round(c, 2) for c in crossings]} dB, {elapsed:.1f} s"
    )
    assert verdict(5, "PS saturation and crossover", ok, detail)


def test_6a_max_sinr_gain(default_sweep):
    table, _ = default_sweep
    gains = [b.sinr_db - a.sinr_db for a, b in zip(table.select(PS), table.select(PSB))]
    best = max(gains)
    assert verdict(6, "max SINR gain", best >= 8.0, f"{best:.2f} dB at {GRID[int(np.argmax(gains))]:g} dB")


def test_6b_rate_delta(default_sweep):
    table, _ = default_sweep
    delta = table.select(PSB)[-1].rate_bps_hz - table.select(PS)[-1].rate_bps_hz
    assert verdict(6, "rate delta at top of grid", delta >= 2.0, f"{delta:.3f} bps/Hz")


@pytest.mark.slow
def test_6c_ber_ratio():
    cfg = SimulationConfig()
    counted = cfg.n_bits - 2 * cfg.span_symbols * cfg.bits_per_symbol
    trials = math.ceil(1e6 / counted)
    table = sweep(cfg, [20.0], trials=trials)
    (ps,), (psb,) = table.select(PS), table.select(PSB)
    floor = 3.0 / psb.n_bits  # rule-of-three bound if PS+B makes no errors
    ratio = ps.ber / max(psb.ber, floor)
    ok = ratio >= 1e2 and psb.n_bits >= 1e6
    detail = f"BER PS {ps.ber:.3e}, PS+B {psb.ber:.3e}, ratio {ratio:.1f}, {psb.n_bits} bits"
    assert verdict(6, "BER ratio at 20 dB", ok, detail)


def test_7_rate_coupling(default_sweep, tmp_path):
    table, _ = default_sweep
    spot = ResultTable(
        (
            LinkMetrics.from_tallies(1.0, 1.0, 0, 100, 0.0, PS, 0),
            LinkMetrics.from_tallies(3.0, 1.0, 0, 100, 0.0, PSB, 0),
        )
    )
    path = tmp_path / "spot.csv"
    spot.write_csv(path)
    rows = list(table.rows) + list(ResultTable.read_csv(path).rows)
    worst = max(abs(r.rate_bps_hz - math.log2(1 + r.sinr_linear)) for r in rows)
    spot_ok = [(r.sinr_linear, r.rate_bps_hz) for r in rows[-2:]] == [(1.0, 1.0), (3.0, 2.0)]
    ok = worst <= 1e-12 and spot_ok
    assert verdict(7, "rate coupling", ok, f"{len(rows)} rows, worst {worst:.1e}, spot rows {spot_ok}")


def test_8_determinism(tmp_path):
    from fdlink.cli import main

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--grid", "0:6:30", "--trials", "4", "--seed", "11"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    same = a.read_bytes() == b.read_bytes()
    assert verdict(8, "determinism", same, f"{len(a.read_bytes())} bytes, identical={same}")
