import subprocess
import sys

import numpy as np
import pytest

from gluedanneal.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return header, rows


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--grid", "401")
    assert code == 0
    assert out.splitlines()[0].startswith("# config:")
    assert "alpha=0.35355339" in out.splitlines()[0]
    assert "s_cross=0.25" in out
    header, rows = table(out)
    assert header == ["s", "lambda0", "lambda1", "lambda2", "delta10", "delta21", "F", "G"]
    s = rows[:, 0]
    assert abs(s[np.argmin(np.where(s <= 0.5, rows[:, 4], np.inf))] - 0.25) <= 0.01
    assert np.isnan(rows[0, 5]) and np.isnan(rows[-1, 5])


def test_byte_identical_output(tmp_path):
    path = tmp_path / "gaps.csv"
    runs = []
    for _ in range(2):
        assert main(["gap-scaling", "--n", "8", "--grid", "101", "--out", str(path)]) == 0
        runs.append(path.read_bytes())
    assert runs[0] == runs[1]
    assert b"\r" not in runs[0]
    assert b"slope_ln_min_delta10=" in runs[0]


def test_evolve_columns(capsys):
    code, out, _ = run(capsys, "evolve", "--n", "8", "--T", "500", "--grid", "11")
    assert code == 0
    header, rows = table(out)
    assert header == ["t", "s", "norm", "p_phi0", "p_phi1", "p_u", "p_entrance", "p_exit", "stage"]
    assert rows.shape == (11, 9)
    assert np.all(np.abs(rows[:, 2] - 1) <= 1e-9)


def test_evolve_gap_adapted(capsys):
    code, out, _ = run(capsys, "evolve", "--n", "8", "--schedule", "gap-adapted", "--epsilon", "1", "--grid", "5")
    assert code == 0
    assert "schedule=gap-adapted" in out


def test_classical(capsys):
    code, out, _ = run(capsys, "classical", "--n", "4", "--trials", "20")
    assert code == 0
    header, rows = table(out)
    assert header == ["n", "trials", "median_queries", "p90_queries", "hit_rate"]
    assert rows[0, 4] == 1.0
    assert list(rows[:, 0]) == [2, 3, 4]
    code2, out2, _ = run(capsys, "classical", "--n", "4", "--trials", "20")
    assert out == out2


def test_crosscheck(capsys):
    code, out, _ = run(capsys, "crosscheck", "--n", "2", "--T", "200")
    assert code == 0
    assert "PASS" in out


def test_crosscheck_refuses_large(capsys):
    code, _, err = run(capsys, "crosscheck", "--n", "20")
    assert code == 1
    assert "too large" in err


def test_randomized(capsys):
    code, out, _ = run(capsys, "randomized", "--n", "6", "--trials", "30")
    assert code == 0
    header, rows = table(out)
    assert header == ["seeds", "success_rate", "entrance_fraction"]
    assert rows[0, 1] == pytest.approx(rows[0, 2])


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", "--bogus"],
        ["nosuchcommand"],
        [],
        ["spectrum", "--alpha", "0.7"],
        ["evolve", "--n", "abc"],
        ["evolve", "--schedule", "cubic"],
        ["spectrum", "--grid", "1"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err


def test_numerical_failure_exit_code(capsys, monkeypatch):
    from gluedanneal import cli
    from gluedanneal.spectral import SpectralError

    def boom(*a, **k):
        raise SpectralError("no convergence")

    monkeypatch.setattr(cli, "eigen_low", boom)
    code, _, err = run(capsys, "spectrum", "--grid", "3")
    assert code == 2
    assert "numerical failure" in err


def test_help_lists_flags_with_defaults():
    text = build_parser()._subparsers._group_actions[0].choices["evolve"].format_help()
    for flag in ("--n", "--alpha", "--seed", "--epsilon", "--kappa", "--T", "--grid", "--trials",
                 "--max-queries", "--out", "--schedule"):
        assert flag in text
    assert "default: 40" in text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gluedanneal", "spectrum", "--grid", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("# config:")
