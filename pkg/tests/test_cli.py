import argparse
import io
import subprocess
import sys

import numpy as np
import pytest

from foslsbem.cli import TABLE_ALPHAS, RunConfig, build_parser, main, parse_alpha, parse_levels, run


def test_parse_levels():
    assert parse_levels("2:4") == (2, 3, 4)
    assert parse_levels("3") == (3,)
    for bad in ("4:2", "a:b", "1:2:3"):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_levels(bad)


def test_parse_alpha():
    assert parse_alpha("1e4,0.1") == (1e4, 0.1)
    with pytest.raises(argparse.ArgumentTypeError):
        parse_alpha("1,x")


@pytest.mark.parametrize("kwargs, match", [
    (dict(experiment="ex9", levels=(2,)), "experiment"),
    (dict(experiment="ex1", levels=(0, 1)), "levels"),
    (dict(experiment="ex1", levels=(7,)), "levels"),
    (dict(experiment="ex1", levels=()), "levels"),
    (dict(experiment="eig", levels=(2,), alpha=(1.0, -1.0)), "positive"),
    (dict(experiment="eig", levels=(2,), alpha=(float("nan"),)), "positive"),
    (dict(experiment="ex1", levels=(2,), alpha=(1.0, 2.0)), "single alpha"),
    (dict(experiment="ex1", levels=(2,), quad_space=1), "quadrature"),
    (dict(experiment="ex1", levels=(2,), threads=0), "threads"),
])
def test_config_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        RunConfig(**kwargs)


def test_alpha_defaults():
    assert RunConfig("eig", (2,)).alpha == TABLE_ALPHAS
    assert RunConfig("ex1", (2,)).alpha == (1.0,)


def test_eig_table(tmp_path):
    out = tmp_path / "eig.dat"
    assert main(["run", "--experiment", "eig", "--levels", "2:3", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "Nh alpha lambda_min"
    rows = [line.split() for line in lines[1:]]
    assert len(rows) == 18
    assert [r[0] for r in rows] == ["64"] * 9 + ["512"] * 9
    assert rows[0][1] == "1.000000e+04"
    assert float(rows[4][2]) == pytest.approx(0.05930, abs=1e-4)


def test_ex4_single_row(tmp_path):
    out = tmp_path / "ex4.dat"
    assert main(["run", "--experiment", "ex4", "--levels", "2:2", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "dofsh e_eq"
    assert len(lines) == 2
    n, e = lines[1].split()
    assert n == "64" and float(e) > 0
    assert e == f"{float(e):.6e}"


def test_convergence_header_and_rates(capsys):
    stream = io.StringIO()
    assert run(RunConfig("ex1", (1, 2)), stream) == 0
    lines = stream.getvalue().splitlines()
    assert lines[0] == "dofsh e_usigmah_Hdiv e_uh_L2L2 e_uh_L2H1 e_sigmah_L2"
    assert [line.split()[0] for line in lines[1:]] == ["8", "64"]
    assert np.all(np.array([line.split()[1:] for line in lines[1:]], dtype=float) > 0)
    err = capsys.readouterr().err
    assert err.count("rate ") == 4


def test_deterministic_output(tmp_path):
    paths = [tmp_path / f"run{i}.dat" for i in range(2)]
    for p in paths:
        assert main(["run", "--experiment", "ex3", "--levels", "1:2", "--threads", "1",
                     "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_bad_output_path(tmp_path, capsys):
    bad = tmp_path / "missing" / "x.dat"
    assert main(["run", "--experiment", "ex4", "--levels", "1:1", "--out", str(bad)]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_bad_levels_exit_status(capsys):
    assert main(["run", "--experiment", "ex1", "--levels", "0:2"]) == 2
    assert "levels" in capsys.readouterr().err


def test_solver_failure_is_reported_and_other_levels_run(monkeypatch, caplog):
    from foslsbem import cli
    from foslsbem.coupling import SolverError

    real = cli.solve

    def flaky(system):
        if system.mesh.level == 1:
            raise SolverError("factorization failed at level 1")
        return real(system)

    monkeypatch.setattr(cli, "solve", flaky)
    stream = io.StringIO()
    assert run(RunConfig("ex4", (1, 2)), stream) == 1
    assert stream.getvalue().splitlines()[1].startswith("64 ")
    assert "level 1 failed" in caplog.text


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "foslsbem", "run", "--experiment", "ex4",
                           "--levels", "1:1"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "dofsh e_eq"
