import math

import pytest

from fdlink.canceller import CancellationMode
from fdlink.cli import main, parse_grid
from fdlink.harness import ResultTable
from fdlink.metrics import LinkMetrics, achievable_rate


def test_grid():
    assert parse_grid("0:2:30") == [float(x) for x in range(0, 31, 2)]
    assert parse_grid("5:1:5") == [5.0]


def test_simulate(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code = main(["simulate", "--out", str(out), "--trials", "1", "--override", "n_tr=20"])
    assert code == 0
    table = ResultTable.read_csv(out)
    assert len(table.select("PS")) == 16 and len(table.select("PS+B")) == 16
    manifest = (tmp_path / "res.manifest").read_text()
    assert "config.n_tr = 20" in manifest
    assert "channel.isolation_db = -50.0" in manifest
    assert "wrote 32 rows" in capsys.readouterr().out


def test_simulate_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# short run\ntrials = 1\nn_bits = 400  # bits per frame\n")
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--grid", "0:10:10"]) == 0
    assert all(r.trials == 1 for r in ResultTable.read_csv(out).rows)


def test_unknown_key(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path / "x.csv"), "--override", "foo=1"])
    assert code != 0
    assert "unknown config key 'foo'" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_bad_grid(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "x.csv"), "--grid", "0:0:3"]) == 2


def test_synth_import_round_trip(tmp_path, capsys):
    path = tmp_path / "a.csv"
    assert main(["channel", "synth", "--out", str(path), "--ripple", "0", "--delay", "0"]) == 0
    capsys.readouterr()
    assert main(["channel", "import", str(path)]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(None, 1) for line in out.splitlines())
    assert fields["taps"] == "1"
    assert fields["dominant_tap"] == "0"
    assert float(fields["energy_db"]) == pytest.approx(-50 + 20 * math.log10(0.5), abs=1e-3)


def test_synth_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["channel", "synth", "--out", str(a), "--seed", "3"])
    main(["channel", "synth", "--out", str(b), "--seed", "3"])
    assert a.read_bytes() == b.read_bytes()


def test_import_malformed(tmp_path, capsys):
    path = tmp_path / "m.csv"
    path.write_text("freq_hz,mag_db,phase_deg\n1e9,-50,0\n1.01e9,x,0\n1.02e9,-50,0\n")
    assert main(["channel", "import", str(path)]) == 2
    assert ":3" in capsys.readouterr().err


def test_import_missing(tmp_path):
    assert main(["channel", "import", str(tmp_path / "none.csv")]) == 2


def _row(mode, ebn0, gamma):
    return LinkMetrics(gamma, achievable_rate(gamma), 0.01, ebn0, mode, 100, 0)


def test_report_identical_rows(tmp_path, capsys):
    path = tmp_path / "r.csv"
    rows = [_row(m, e, 5.0) for m in CancellationMode for e in (0.0, 10.0)]
    ResultTable(tuple(rows)).write_csv(path)
    assert main(["report", str(path)]) == 0
    assert "max SINR gain   0.000 dB" in capsys.readouterr().out


def test_report_gain(tmp_path, capsys):
    path = tmp_path / "r.csv"
    ResultTable((_row("PS", 10.0, 2.0), _row("PS+B", 10.0, 20.0))).write_csv(path)
    assert main(["report", str(path)]) == 0
    out = capsys.readouterr().out
    assert "max SINR gain   10.000 dB" in out
    assert f"max rate delta  {math.log2(21) - math.log2(3):.3f}" in out


def test_report_empty(tmp_path, capsys):
    path = tmp_path / "r.csv"
    path.write_text("")
    assert main(["report", str(path)]) == 2
    assert "empty" in capsys.readouterr().err


def test_report_missing(tmp_path):
    assert main(["report", str(tmp_path / "none.csv")]) == 2
