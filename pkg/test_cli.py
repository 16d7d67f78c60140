"""
Command-line surface: exit codes and written tables
"""
import csv
import json
from pathlib import Path

import pytest

import cli

CONFIG_DIR = Path(__file__).parent / "configs"

BASE = """
seed = 3

[state]
n = 1.0
theta = 1.0

[coefficients]
eta = 1.0
zeta = 0.0
mu = 0.1
{chi_line}
"""


def _run_file(tmp_path: Path, chi_line: str = "chi_star_multiple = 1.0", extra: str = "") -> str:
    path = tmp_path / "run.toml"
    path.write_text(BASE.format(chi_line=chi_line) + extra, encoding="utf-8")
    return str(path)


def _rows(path: Path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_sharp_check_passes(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["check", "--config", str(CONFIG_DIR / "sharp_check.toml"), "--out", str(out)])
    assert code == 0
    row = _rows(out / "check.csv")[0]
    assert row["algebraic_status"] == "SHARPLY_CAUSAL"
    assert row["spectral_status"] == "SHARPLY_CAUSAL"
    assert float(row["chi_star"]) == pytest.approx(55.0 / 26.0)


def test_acausal_check_fails(tmp_path):
    config = _run_file(tmp_path, "chi_star_multiple = 1.5")
    assert cli.main(["check", "--config", config, "--out", str(tmp_path / "out")]) == 1


def test_zero_diffusion_is_a_validation_error(tmp_path):
    config = Path(_run_file(tmp_path, "chi = 1.0"))
    config.write_text(config.read_text(encoding="utf-8").replace("mu = 0.1", "mu = 0.0"), encoding="utf-8")
    config = str(config)
    assert cli.main(["check", "--config", config, "--out", str(tmp_path / "out")]) == 2


def test_unknown_key_is_a_validation_error(tmp_path):
    config = _run_file(tmp_path, "chi = 1.0\nkappa = 2.0")
    assert cli.main(["check", "--config", config, "--out", str(tmp_path / "out")]) == 2


def test_missing_config_is_a_validation_error(tmp_path):
    code = cli.main(["check", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "out")])
    assert code == 2


def test_unknown_command_exits_through_argparse():
    with pytest.raises(SystemExit):
        cli.main(["fly"])


def test_check_output_is_byte_stable(tmp_path):
    config = str(CONFIG_DIR / "sharp_check.toml")
    cli.main(["check", "--config", config, "--out", str(tmp_path / "a")])
    cli.main(["check", "--config", config, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "check.csv").read_bytes() == (tmp_path / "b" / "check.csv").read_bytes()


def test_json_lines_format(tmp_path):
    out = tmp_path / "out"
    cli.main(["check", "--config", str(CONFIG_DIR / "sharp_check.toml"), "--out", str(out),
              "--format", "json-lines"])
    lines = (out / "check.jsonl").read_text(encoding="utf-8").splitlines()
    record = json.loads(lines[0])
    assert record["agrees"] is True
    assert record["chi"] == pytest.approx(55.0 / 26.0)


def test_equivalence_passes(tmp_path):
    config = _run_file(tmp_path, "chi = 1.0", "\n[equivalence]\nsamples = 50\n")
    out = tmp_path / "out"
    assert cli.main(["equivalence", "--config", config, "--out", str(out)]) == 0
    slopes = {row["pair"]: row for row in _rows(out / "equivalence_slopes.csv")}
    assert slopes["eckart-new"]["passed"] == "True"
    assert slopes["zeta3-displayed"]["passed"] == "False"
    assert len(_rows(out / "equivalence_residuals.csv")) == 3 * 4


def test_equivalence_fails_with_doubled_zeta3(tmp_path):
    config = _run_file(tmp_path, "chi = 1.0", "\n[equivalence]\nsamples = 50\nzeta3_factor = 2.0\n")
    assert cli.main(["equivalence", "--config", config, "--out", str(tmp_path / "out")]) == 1


def test_entropy_passes(tmp_path):
    config = _run_file(tmp_path, "chi = 1.0", "\n[entropy]\nsamples = 500\nensemble_samples = 50\n")
    out = tmp_path / "out"
    assert cli.main(["entropy", "--config", config, "--out", str(out)]) == 0
    shifts = _rows(out / "entropy_shifts.csv")
    assert shifts[-1]["shift"] == "incompatible control"
    assert all(row["passed"] == "True" for row in shifts)
    assert _rows(out / "entropy_sign.csv")[0]["passed"] == "True"


def test_quiet_simulation(tmp_path):
    extra = ("\n[simulation]\nnx = 32\nt_end = 0.5\noutput_stride = 2\n"
             "\n[simulation.perturbation]\namplitude = 0.0\n")
    config = _run_file(tmp_path, "chi = 1.0", extra)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", config, "--out", str(out)]) == 0
    series = _rows(out / "simulate_series.csv")
    assert float(series[0]["t"]) == 0.0
    assert float(series[-1]["t"]) == pytest.approx(0.5)


def test_sweep_marks_one_crossing(tmp_path):
    extra = "\n[sweep]\nchi_min = 0.5\nchi_max = 3.0\npoints = 5\ndirections = 1\n"
    config = _run_file(tmp_path, "chi = 1.0", extra)
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", config, "--out", str(out)]) == 0
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 5
    assert sum(row["chi_star_crossing"] == "True" for row in rows) == 1
    assert rows[-1]["algebraic_status"] == "ACAUSAL"
