import hashlib
import json

import numpy as np
import pytest

from spadsim import io as spio
from spadsim.cli import dispatch
from spadsim.harness import SweepReport
from spadsim.reference import load_reference
from spadsim.stats import rms_error


def kv(text):
    lines = text.strip().splitlines()
    assert lines[0] == "key,value"
    return dict(line.split(",", 1) for line in lines[1:])


@pytest.fixture(scope="module")
def d0_pulses(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "d0.pulses"
    assert dispatch(["simulate", "--preset", "sim1", "--frequency", "2e4", "--n-pulses",
                     "2000000", "--seed", "11", "--pulses0", str(path)]) == 0
    return path


def test_simulate_writes_bits_and_summary(tmp_path, capsys):
    out = tmp_path / "x.bits"
    p0 = tmp_path / "a.pulses"
    code = dispatch(["simulate", "--frequency", "1e6", "--n-pulses", "100000", "--seed", "3",
                     "--out", str(out), "--pulses0", str(p0)])
    assert code == 0
    summary = kv(capsys.readouterr().out)
    bits = spio.read_bits(out)
    assert bits.size == int(summary["n_bits"])
    assert int(summary["n_ones"]) == int(bits.sum())
    assert spio.read_pulses(p0).size == 100000
    assert -1 < float(summary["autocorr"]) < 1


def test_simulate_json(capsys):
    assert dispatch(["simulate", "--frequency", "1e5", "--n-pulses", "10000",
                     "--format", "json-lines"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["mode"] == "direct" and record["n_bits"] > 0


def test_fit_recovers_d0(d0_pulses, capsys):
    assert dispatch(["fit", "--train", str(d0_pulses), "--dead", "20"]) == 0
    summary = kv(capsys.readouterr().out)
    assert abs(float(summary["tau_ns"]) - 33) < 3
    assert abs(float(summary["afterpulse_prob"]) - 0.047) < 0.005


def test_hist_csv(d0_pulses, tmp_path):
    out = tmp_path / "h.csv"
    assert dispatch(["hist", "--train", str(d0_pulses), "--bin-width", "2", "--t-max", "600",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bin_start_ns,count,background,residual"
    assert len(lines) == 301
    assert all(line.split(",")[1] == "0" for line in lines[1:11])


def test_hist_json(d0_pulses, capsys):
    assert dispatch(["--format", "json-lines", "hist", "--train", str(d0_pulses)]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(rows) == 1000 and set(rows[0]) == {"bin_start_ns", "count", "background", "residual"}


def test_sweep_then_compare(tmp_path, capsys):
    sweep = tmp_path / "sweep.csv"
    assert dispatch(["sweep", "--preset", "sim3", "--seed", "7", "--n-bits", "20000",
                     "--out", str(sweep)]) == 0
    text = sweep.read_text()
    data = [line for line in text.splitlines() if not line.startswith("#")]
    assert len(data) == 15
    assert "# R_meas=" in text
    report = SweepReport.from_csv(text)
    assert dispatch(["compare", "--run", str(sweep), "--column", "sim3"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    name, value = last.split(",")
    assert name == "R_sim3"
    want = rms_error(report.autocorr, load_reference().a_sim3)
    assert float(value) == pytest.approx(want, rel=1e-5)


def test_sweep_identical_files(tmp_path):
    digests = []
    for threads in ("1", "3"):
        out = tmp_path / f"s{threads}.csv"
        assert dispatch(["sweep", "--preset", "sim2", "--seed", "0x10", "--threads", threads,
                         "--n-bits", "10000", "--frequencies", "1e3", "1e5", "1e7",
                         "--out", str(out)]) == 0
        digests.append(hashlib.sha256(out.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_sweep_json_lines(capsys):
    assert dispatch(["sweep", "--n-bits", "10000", "--frequencies", "1e4", "--window", "0",
                     "--format", "json-lines"]) == 0
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert lines[0]["frequency_hz"] == 1e4 and lines[-1]["summary"] is True
    assert lines[-1]["coincidence_window_ns"] == 0.0


def test_sweep_from_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[run]\nfrequencies_hz = [2e6]\nn_bits_per_point = 10000\nmaster_seed = 5\n')
    assert dispatch(["--config", str(cfg), "sweep"]) == 0
    rows = [x for x in capsys.readouterr().out.splitlines() if not x.startswith("#")]
    assert len(rows) == 2 and rows[1].endswith(",direct,5")


@pytest.mark.parametrize("argv", [[], ["bogus"], ["sweep", "--nope"], ["compare"],
                                  ["fit", "--train", "x"], ["sweep", "--seed", "-4"],
                                  ["sweep", "--preset", "sim9"]])
def test_usage_errors_exit_1(argv, capsys):
    assert dispatch(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[run]\nwhatever = 1\n")
    assert dispatch(["sweep", "--config", str(cfg)]) == 1


def test_runtime_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.pulses"
    bad.write_bytes(b"junk")
    assert dispatch(["fit", "--train", str(bad), "--dead", "20"]) == 2
    assert dispatch(["fit", "--train", str(tmp_path / "missing"), "--dead", "20"]) == 2
    flat = tmp_path / "flat.pulses"
    spio.write_pulses(flat, np.arange(10000) * 50.0)
    assert dispatch(["fit", "--train", str(flat), "--dead", "20"]) == 2
    sweep = tmp_path / "s.csv"
    sweep.write_text("frequency_hz,autocorr\n")
    assert dispatch(["compare", "--run", str(sweep)]) == 2


def test_help_exit_0(capsys):
    assert dispatch(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out
