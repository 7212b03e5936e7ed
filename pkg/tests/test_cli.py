import filecmp
import json
import subprocess
import sys

import pytest

from oracles import ERASED_BITS, LANDAUER_1P5_BITS_300K
from qerasure.cli import EXIT_CONSISTENCY, EXIT_IO, EXIT_OK, EXIT_SAMPLE_SIZE, EXIT_VALIDATION, main
from qerasure.erasure import ErasureReport
from qerasure.simulation import SimulationConfig, simulate, write_trace
from qerasure.transducer import loads_transducer


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_exact_n1(capsys):
    code, out, err = run(capsys, "exact", "--n", "1", "--temperature", "300")
    assert code == EXIT_OK
    rep = ErasureReport.from_json(out)
    assert abs(rep.erased_bits - 1.5) < 1e-12 and abs(rep.erased_bits_decomposed - 1.5) < 1e-12
    assert abs(rep.heat_bound_J / LANDAUER_1P5_BITS_300K - 1) < 1e-12


def test_exact_default_temperature_is_reported(capsys):
    code, out, err = run(capsys, "exact", "--n", "2")
    assert code == EXIT_OK
    assert "300 K" in err
    assert ErasureReport.from_json(out).temperature_K == 300.0


def test_exact_zero_temperature(capsys):
    code, out, _ = run(capsys, "exact", "--n", "2", "--temperature", "0")
    rep = ErasureReport.from_json(out)
    assert code == EXIT_OK and rep.heat_bound_J == 0.0 and rep.third_law_caveat


@pytest.mark.parametrize(
    "argv",
    [
        ("exact", "--n", "30"),
        ("exact", "--n", "0"),
        ("exact", "--temperature", "-4"),
        ("sweep", "--n-max", "25"),
        ("simulate", "--steps", "0", "--out", "x.csv"),
        ("landauer",),
        ("exact", "--bogus"),
        ("frobnicate",),
    ],
)
def test_validation_exit_code(capsys, tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    code, _, _ = run(capsys, *argv)
    assert code == EXIT_VALIDATION


def test_consistency_exit_code(capsys, monkeypatch):
    import qerasure.cli as cli

    monkeypatch.setattr(cli, "erased_information_decomposed", lambda t: 1.5 + 1e-9)
    code, _, err = run(capsys, "exact", "--n", "1")
    assert code == EXIT_CONSISTENCY
    assert "disagree" in err


def test_sweep(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--n-max", "10", "--temperature", "300", "--format", "csv", "--out", str(out))
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "n,erased_bits,excess_over_n,heat_bound_J"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 10
    bits = [float(r[1]) for r in rows]
    assert bits == sorted(bits) and len(set(bits)) == 10
    assert all(float(r[1]) > int(r[0]) and float(r[2]) > 0 for r in rows)
    assert abs(bits[0] - 1.5) < 1e-12
    assert abs(bits[1] - ERASED_BITS[2]) < 1e-12


def test_landauer(capsys):
    code, out, _ = run(capsys, "landauer", "--bits", "1.5", "--temperature", "300")
    assert code == EXIT_OK
    assert abs(json.loads(out)["heat_bound_J"] / 4.306e-21 - 1) < 1e-3


def test_simulate_and_infer(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, out, _ = run(capsys, "simulate", "--n", "1", "--steps", "100000", "--seed", "42", "--out", str(trace))
    assert code == EXIT_OK
    summary = json.loads(out)
    assert abs(summary["flip_fraction"] - 0.5) < 0.01
    assert len(summary["state_occupancy"]) == 4
    assert sum(1 for line in trace.read_text().splitlines() if line[:1].isdigit()) == 100000

    machine, report = tmp_path / "m.json", tmp_path / "r.json"
    code, out, _ = run(capsys, "infer", str(trace), "--out", str(machine), "--report", str(report))
    assert code == EXIT_OK
    result = json.loads(out)
    assert result["states"] == 4
    assert loads_transducer(machine.read_text()).n_states == 4
    rep = json.loads(report.read_text())
    assert rep["state_count_match"] and rep["max_row_tv"] < 0.05


def test_simulate_is_byte_reproducible(capsys, tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run(capsys, "simulate", "--steps", "20000", "--seed", "42", "--out", str(tmp_path / name))[0] == 0
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


def test_simulate_redacted(capsys, tmp_path):
    trace = tmp_path / "r.csv"
    assert run(capsys, "simulate", "--steps", "5000", "--redact", "--out", str(trace))[0] == EXIT_OK
    assert "t,x,y\n" in trace.read_text()


def test_simulate_unwritable(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--steps", "100", "--out", str(tmp_path / "missing" / "t.csv"))
    assert code == EXIT_IO


def test_infer_missing_file(capsys, tmp_path):
    assert run(capsys, "infer", str(tmp_path / "nope.csv"))[0] == EXIT_IO


def test_infer_malformed_file(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("hello\n")
    assert run(capsys, "infer", str(bad))[0] == EXIT_VALIDATION


def test_infer_tiny_trace_lists_histories(capsys, tmp_path):
    trace = tmp_path / "tiny.csv"
    write_trace(trace, simulate(SimulationConfig(n=1, steps=1100, seed=0)), redact=True)
    code, _, err = run(capsys, "infer", str(trace))
    assert code == EXIT_SAMPLE_SIZE
    assert err.count("deficient:") == 4
    assert "((0, 1),)" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qerasure", "exact", "--n", "1", "--format", "csv"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert ErasureReport.from_csv(proc.stdout).erased_bits == pytest.approx(1.5, abs=1e-12)
