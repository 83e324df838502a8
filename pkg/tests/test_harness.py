"""Study driver and command-line interface."""

import numpy as np
import pytest

from shishkin_hdg import cli
from shishkin_hdg.harness import (DiagnosticReport, StudyConfig, run_diagnostics,
                                  run_single, run_sweep)


def _cfg(**kw):
    base = dict(problem="paper-sec5", k_list=[1], eps_list=[1e-2],
                n_list=[4, 8], mode="true-error")
    base.update(kw)
    return StudyConfig(**base)


def test_study_config_validation():
    with pytest.raises(ValueError):
        _cfg(n_list=[6])
    with pytest.raises(ValueError):
        _cfg(mode="l2")
    with pytest.warns(UserWarning):
        _cfg(sigma=1.5)
    assert _cfg().sigma_for(2) == 3.0
    assert _cfg(sigma=4.0).sigma_for(1) == 4.0
    assert _cfg(n_list=[16, 4, 8, 8], max_n=8).effective_n_list() == [4, 8]


def test_run_single_requires_one_cell():
    with pytest.raises(ValueError):
        run_single(_cfg(n_list=[4, 8]))
    rep = run_single(_cfg(n_list=[8], mode="both"))
    assert rep.N == 8 and rep.supercloseness_error is not None
    assert 0 < rep.supercloseness_error < rep.energy_error


def test_sweep_rates_and_modes():
    res = run_sweep(_cfg(n_list=[4, 8, 16], mode="both"))
    assert res.ok
    assert [t.mode for t in res.tables] == ["energy", "supercloseness"]
    t = res.tables[0]
    # errors decrease and rates exist except on the last row
    errs = [t.cells[1e-2][n].energy_error for n in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]
    assert set(t.rates[1e-2]) == {4, 8}
    fitted, dyadic = t.rates[1e-2][8]
    assert 0.5 < dyadic < 2.5 and 0.5 < fitted < 3.5


def test_sweep_csv_markdown_deterministic(tmp_path):
    out = tmp_path / "tables"
    cfg = _cfg(n_list=[4, 8], out_dir=str(out))
    run_sweep(cfg)
    first = (out / "table_k1_energy.csv").read_text()
    md = (out / "table_k1_energy.md").read_text()
    run_sweep(cfg)
    assert (out / "table_k1_energy.csv").read_text() == first
    assert first.splitlines()[0] == "mode,k,eps,N,error,rate,rate_dyadic"
    assert len(first.splitlines()) == 3
    lines = md.splitlines()
    assert lines[0].startswith("| N")
    assert lines[-1].split("|")[-2].strip() == "---"  # last row has no rate


def test_sweep_records_failed_cells():
    # tau far below max |beta.n|/2 = 1.5 trips the stabilization gate
    res = run_sweep(_cfg(n_list=[4, 8], tau=0.2))
    assert not res.ok
    assert len(res.failures) == 2
    t = res.tables[0]
    assert isinstance(t.cells[1e-2][4], str)
    assert t.rates[1e-2] == {}
    assert "error" in t.to_csv()


def test_skips_rates_for_non_doubling_pairs():
    res = run_sweep(_cfg(n_list=[4, 12]))
    assert res.tables[0].rates[1e-2] == {}


def test_diagnostics_pass_at_moderate_epsilon():
    cfg = _cfg(n_list=[8])
    rep = run_diagnostics(cfg, n_triples=50)
    assert isinstance(rep, DiagnosticReport)
    assert rep.passed, rep.render()
    text = rep.render()
    assert "coercivity" in text and "diagnostics passed" in text
    with pytest.raises(ValueError):
        run_diagnostics(_cfg(n_list=[4, 8]))


def test_cli_solve_and_flag_override(capsys, tmp_path):
    conf = tmp_path / "study.conf"
    conf.write_text(
        "# single solve\n"
        "problem = paper-sec5\n"
        "k = 1\n"
        "eps = 1e-2\n"
        "n = 4\n"
        "mode = both\n"
        "tau = 3.0\n")
    rc = cli.main(["solve", "--config", str(conf), "--n", "8"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "N = 8" in out  # flag wins over the config file
    assert "energy_error = " in out and "supercloseness_error = " in out
    assert "region_smooth_cell_sq = " in out


def test_cli_config_file_errors(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("nope = 1\n")
    assert cli.main(["solve", "--config", str(bad)]) == cli.EXIT_SOLVER
    bad.write_text("just a line\n")
    assert cli.main(["solve", "--config", str(bad)]) == cli.EXIT_SOLVER
    assert cli.main(["solve", "--config", str(tmp_path / "missing.conf")]) \
        == cli.EXIT_SOLVER


def test_cli_sweep_writes_tables(capsys, tmp_path):
    out = tmp_path / "tab"
    rc = cli.main(["sweep", "--k", "1", "--eps", "1e-2", "--n", "4",
                   "--n", "8", "--out", str(out)])
    assert rc == cli.EXIT_OK
    assert "# k = 1, energy error" in capsys.readouterr().out
    assert (out / "table_k1_energy.csv").exists()


def test_cli_sweep_solver_failure_exit_code(capsys):
    rc = cli.main(["sweep", "--k", "1", "--eps", "1e-2", "--n", "4",
                   "--tau", "0.2"])
    assert rc == cli.EXIT_SOLVER
    assert "failed cell" in capsys.readouterr().err


def test_cli_invalid_value_exit_code(capsys):
    rc = cli.main(["solve", "--k", "1", "--eps", "1e-2", "--n", "6"])
    assert rc == cli.EXIT_SOLVER
    assert "error:" in capsys.readouterr().err


def test_cli_diagnose(capsys):
    rc = cli.main(["diagnose", "--k", "1", "--eps", "1e-2", "--n", "8"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "diagnostics passed" in out


def test_cli_mesh_dump(capsys, tmp_path):
    rc = cli.main(["mesh-dump", "--eps", "1e-3", "--n", "8"])
    out = capsys.readouterr().out
    assert rc == cli.EXIT_OK
    assert "N = 8" in out or "8" in out.splitlines()[0]
    target = tmp_path / "mesh.txt"
    rc = cli.main(["mesh-dump", "--eps", "1e-3", "--n", "8",
                   "--out", str(target)])
    assert rc == cli.EXIT_OK
    assert target.read_text() == out


def test_cli_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
