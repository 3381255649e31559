import subprocess
import sys

import pytest

from d2dclust import cli, snapshot


def _small(tmp_path, users=2):
    p = tmp_path / "s.snap"
    rc = cli.main(["snapshot", "--set", "num_macro=1", "--set", "small_cells_per_macro=1",
                   "--users", str(users), "--out", str(p)])
    assert rc == 0
    return p


def test_run_happy_path(tmp_path, capsys):
    out = tmp_path / "o"
    rc = cli.main(["run", "--config", "default", "--algo", "ecore", "--out", str(out), "--replications", "1",
                   "--users", "10", "--duration", "3", "--seed", "7"])
    assert rc == 0
    for name in ("metrics.csv", "summary.csv", "cdf_overconsumption.csv", "cdf_energy_efficiency.csv"):
        assert (out / name).stat().st_size > 0
    manifest = (out / "manifest").read_text()
    assert "seed = 7" in manifest and "algorithm = ecore" in manifest and "users_per_macro_area = 10" in manifest


def test_missing_config_exit_1(tmp_path, capsys):
    rc = cli.main(["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)])
    assert rc == 1
    assert "nope.cfg" in capsys.readouterr().err


def test_bad_set_exit_1(capsys):
    assert cli.main(["dump-links", "--set", "wibble"]) == 1
    assert cli.main(["dump-links", "--set", "wibble=3"]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_solve_exhaustive_limit_exit_2(tmp_path, capsys):
    p = _small(tmp_path, users=40)
    assert len(snapshot.read(p).users) == 40
    assert cli.main(["solve", str(p), "--method", "exhaustive"]) == 2
    assert cli.main(["solve", str(p), "--method", "exhaustive", "--max-users", "50"]) == 2
    assert "error:" in capsys.readouterr().err


def test_solve_prints_report(tmp_path, capsys):
    p = _small(tmp_path, users=6)
    capsys.readouterr()
    assert cli.main(["solve", str(p)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("objective ") and out[1] == "method exhaustive"
    assert out[3] == "proven_optimal true"
    assert cli.main(["solve", str(p), "--energy-w", "0.5", "--method", "bnb"]) == 0


def test_bad_snapshot_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.snap"
    p.write_text("d2dclust-snapshot 2\n")
    assert cli.main(["solve", str(p)]) == 1
    assert "version" in capsys.readouterr().err


def test_cluster_and_dumps(tmp_path, capsys):
    p = _small(tmp_path, users=12)
    for algo in ("ecore", "core", "calb"):
        assert cli.main(["cluster", "--snapshot", str(p), "--algo", algo, "--out", str(tmp_path)]) == 0
        assert (tmp_path / f"clusters_{algo}.csv").read_text().startswith("user,serving_bs,role")
    assert cli.main(["dump-links", "--snapshot", str(p), "--out", str(tmp_path / "l.csv")]) == 0
    assert (tmp_path / "l.csv").read_text().startswith("src,dst,band")
    assert cli.main(["dump-association", "--snapshot", str(p), "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "association.csv").read_text().splitlines()) == 13


def test_energy_report(tmp_path):
    rc = cli.main(["energy-report", "--users", "5", "--duration", "6", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "energy_ecore+ceea.csv").read_text().splitlines()
    assert lines[0].startswith("replication,user,time_head")
    assert len(lines) == 1 + 35
    assert cli.main(["energy-report", "--algo", "none,ecore", "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "d2dclust.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "energy-report" in r.stdout
