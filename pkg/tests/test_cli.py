import csv
import json

import numpy as np
import pytest

from twospecies.cli import EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO, SUMMARY_HEADER, main
from twospecies.config import parse_config
from twospecies.errors import ConfigError

MINIMAL = """
name = "two-deltas"
n = 200
scheme = "prox"
step = 1e-3
t_end = 0.4

[initial]
kind = "oracle"
oracle = "two_deltas_gf"
t = 0.0
"""


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, text, name="scenario.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_minimal_document_fills_defaults():
    sc = parse_config(MINIMAL)
    assert sc.n == 200 and sc.scheme == "prox" and sc.t_end == 0.4
    assert sc.prox.inner_tol == 1e-8 and sc.prox.tau == 1e-3 and sc.prox.solver == "exact"
    assert sc.record_every == 1 and sc.outputs.summary_path == "two-deltas.summary.csv"


def test_negative_n_names_the_field():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("n = 200", "n = -3"))
    assert info.value.key == "n" and info.value.line == 3


def test_unknown_keys_rejected_in_strict_mode():
    text = MINIMAL.replace("step = 1e-3", "step = 1e-3\nsetp = 2")
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == "setp"
    assert parse_config(text, strict=False).step == 1e-3
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "\n[prox]\ninner_tl = 1e-9\n")
    assert info.value.key == "prox.inner_tl"


def test_malformed_document_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("name = \nn = 3")
    assert info.value.line == 1


def test_oracle_command_example(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["oracle", "--kind", "two_deltas_gf", "--t", "0.25", "--n", "4", "--out", str(out)]) == 0
    rows = read(out)
    assert [float(r["X"]) for r in rows] == [-0.9375, -0.8125, -0.6875, -0.5625]
    assert out.read_bytes().count(b"\r") == 0


def test_simulate_compare_against_oracle(tmp_path):
    cfg = write_config(tmp_path, MINIMAL + "\n[outputs]\nsnapshot_stride = 100\n")
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    summary = read(tmp_path / "two-deltas.summary.csv")
    assert list(summary[0]) == SUMMARY_HEADER and len(summary) == 401
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--run", str(tmp_path / "two-deltas.snapshots.csv"),
                 "--oracle", "two_deltas_gf", "--out", str(out)]) == 0
    metrics = {r["metric"]: float(r["value"]) for r in read(out)}
    assert metrics["t"] == 0.4 and metrics["max_abs_X"] <= 5e-6


def test_runs_are_byte_identical_and_row_count(tmp_path):
    text = MINIMAL.replace("t_end = 0.4", "t_end = 0.05").replace("n = 200", "n = 50")
    text = text.replace("step = 1e-3", "step = 1e-3\nrecord_every = 7")
    cfg = write_config(tmp_path, text)
    outputs = []
    for d in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path / d)]) == 0
        outputs.append((tmp_path / d / "two-deltas.summary.csv").read_bytes()
                       + (tmp_path / d / "two-deltas.snapshots.csv").read_bytes())
    assert outputs[0] == outputs[1]
    assert len(read(tmp_path / "a" / "two-deltas.summary.csv")) == 1 + 50 // 7


def test_steady_scenario_has_zero_energy(tmp_path):
    text = MINIMAL.replace('oracle = "two_deltas_gf"', 'oracle = "steady"').replace("t_end = 0.4", "t_end = 0.02")
    cfg = write_config(tmp_path, text)
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    assert all(abs(float(r["energy_total"])) <= 1e-12 for r in read(tmp_path / "two-deltas.summary.csv"))


def test_random_blocks_seed_override(tmp_path):
    text = MINIMAL.replace('kind = "oracle"\noracle = "two_deltas_gf"\nt = 0.0', 'kind = "random_blocks"\nseed = 1')
    cfg = write_config(tmp_path, text.replace("t_end = 0.4", "t_end = 0.01"))
    reports = []
    for seed in ("3", "3", "4"):
        out = tmp_path / f"e{len(reports)}.csv"
        assert main(["energy-report", "--config", cfg, "--seed", seed, "--out", str(out)]) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1] != reports[2]


def test_hyperbolic_command(tmp_path):
    text = MINIMAL + "\n[hyperbolic]\nnx = 200\nrecord_stride = 10\n"
    cfg = write_config(tmp_path, text.replace("t_end = 0.4", "t_end = 0.1"))
    assert main(["hyperbolic", "--config", cfg, "--out-dir", str(tmp_path)]) == 0
    rec = read(tmp_path / "two-deltas.cdf_records.csv")
    assert float(rec[0]["l2_FG"]) == pytest.approx(2.0, abs=0.05)
    cdf = read(tmp_path / "two-deltas.cdf.csv")
    assert len(cdf) == 2 * 201 and list(cdf[0]) == ["t", "x", "F", "G"]


def test_energy_report_from_state(tmp_path):
    state = tmp_path / "s.csv"
    main(["oracle", "--kind", "two_deltas_gf", "--t", "0.3", "--n", "400", "--out", str(state)])
    out = tmp_path / "e.csv"
    assert main(["energy-report", "--state", str(state), "--out", str(out)]) == 0
    metrics = {r["metric"]: float(r["value"]) for r in read(out)}
    assert metrics["energy_total"] == pytest.approx(1.2, abs=1e-5)
    assert metrics["energy_cdf"] == pytest.approx(metrics["energy_total"], abs=1e-12)
    assert metrics["dissipation_min_norm"] == pytest.approx(8 / 3, abs=1e-3)


def test_error_exit_codes(tmp_path, capsys):
    bad = write_config(tmp_path, MINIMAL.replace("n = 200", "n = -3"))
    assert main(["simulate", "--config", bad, "--out-dir", str(tmp_path)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == EXIT_CONFIG and "n" in err["message"]
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == EXIT_IO
    assert main(["oracle", "--kind", "two_deltas_gf", "--t", "0.7"]) == 5
    hard = MINIMAL.replace("t_end = 0.4", "t_end = 0.01") + \
        '\n[prox]\nsolver = "subgradient"\ninner_max_iter = 1\ninner_tol = 1e-15\n'
    hard = hard.replace('oracle = "two_deltas_gf"\nt = 0.0', 'oracle = "overlap_gf"\nm = 0.3')
    cfg = write_config(tmp_path, hard, "hard.toml")
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == EXIT_CONVERGENCE
    assert len(read(tmp_path / "two-deltas.summary.csv")) >= 1


def test_argument_errors_exit_with_config_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["oracle", "--kind", "nope"])
    assert info.value.code == EXIT_CONFIG
