import csv
import json

import pytest

from taubnut.cli import main, parse_config_text
from taubnut.suites import SUITES, ConfigError, ExperimentConfig, run_suite


def _rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# generated ")
    return list(csv.DictReader(lines[1:]))


def test_verify_structure_exits_zero(tmp_path, capsys):
    out = tmp_path / "verify"
    code = main(["verify-structure", "--n", "1", "--weights", "1", "--a", "1", "--samples", "1000",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert summary["suite"] == "verify-structure" and summary["failed"] == 0
    assert summary["passed"] == len(summary["records"])
    rows = _rows(tmp_path / "verify.csv")
    assert rows and all(r["passed"] == "true" for r in rows)
    assert all(r["schema_version"] == "1" and r["source"] for r in rows)
    assert "passed" in capsys.readouterr().out


def test_volume_growth_slope_row(tmp_path):
    out = tmp_path / "vol"
    code = main(["volume-growth", "--n", "1", "--a", "1", "--radii", "10,20,40,80",
                 "--samples", "2000000", "--seed", "7", "--out", str(out)])
    assert code == 0
    rows = [r for r in _rows(tmp_path / "vol.csv") if r["quantity"] == "slope"]
    assert len(rows) == 1
    assert abs(float(rows[0]["value"]) - 3.0) <= 0.15


def test_locally_free_su_verdict(tmp_path):
    out = tmp_path / "lf"
    assert main(["locally-free", "--case", "su", "--weights", "1,2,3", "--out", str(out)]) == 0
    rows = _rows(tmp_path / "lf.csv")
    verdict = [r for r in rows if r["quantity"] == "verdict"]
    assert verdict and verdict[0]["value"] == "locally_free"


def test_csv_is_reproducible(tmp_path):
    args = ["flow-oracle", "--n", "2", "--samples", "20", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a.csv").read_text().splitlines()[1:]
    b = (tmp_path / "b.csv").read_text().splitlines()[1:]
    assert a == b


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 2\nweights = 1,2\nseed = 11\n", encoding="utf-8")
    assert main(["gamma-check", "--config", str(cfg), "--seed", "5", "--print-config"]) == 0
    printed = capsys.readouterr().out
    assert "n = 2" in printed and "seed = 5" in printed and "weights = 1,2" in printed
    # printed configurations load back unchanged
    again = tmp_path / "again.cfg"
    again.write_text(printed, encoding="utf-8")
    assert main(["gamma-check", "--config", str(again), "--print-config"]) == 0
    assert capsys.readouterr().out == printed


def test_print_config_lists_defaults(capsys):
    assert main(["curvature-scan", "--print-config"]) == 0
    lines = capsys.readouterr().out.splitlines()
    keys = {line.split(" = ")[0] for line in lines if not line.startswith("#")}
    assert {"n", "weights", "a", "samples", "radii", "seed", "tol_scale"} <= keys


@pytest.mark.parametrize("argv", [
    ["verify-structure", "--n", "x"],
    ["verify-structure", "--weights", "1,0"],
    ["twist-compare", "--n", "1"],
    ["gh-probe", "--n", "2"],
    ["no-such-suite"],
    ["verify-structure", "--config", "/nonexistent/file"],
])
def test_config_errors_exit_two(argv, capsys):
    assert main(argv) == 2


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("n 2\n")


def test_failing_assertion_exits_one(capsys):
    # a tolerance scale of zero turns every residual bound into a strict equality
    assert main(["verify-structure", "--n", "1", "--samples", "20", "--tol-scale", "1e-30"]) == 1


def test_run_suite_api():
    res = run_suite(ExperimentConfig(suite="gamma-check").resolved())
    assert res.ok and res.failed == 0


@pytest.mark.parametrize("suite", list(SUITES))
def test_every_suite_runs_with_defaults(suite, capsys):
    assert main([suite]) == 0
    assert f"{suite}:" in capsys.readouterr().out
