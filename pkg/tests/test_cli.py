import json

import numpy as np

from aqec.cli import main


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_and_version(capsys):
    assert run(capsys, "--help")[0] == 0
    code, out, _ = run(capsys, "--version")
    assert code == 0 and "0.1.0" in out


def test_usage_errors_exit_1(capsys):
    assert run(capsys, "search")[0] == 1  # ad channel without gamma
    assert run(capsys, "nonsense")[0] == 1
    assert run(capsys, "fidelity-curve", "--code", "nope", "--gamma", "0.1")[0] == 1
    assert run(capsys, "ft", "verify", "ec_unit", "P5")[0] == 1
    assert run(capsys, "spin", "ideal", "--N", "4", "--s", "9")[0] == 1


def test_fidelity_curve_csv(capsys):
    code, out, _ = run(capsys, "fidelity-curve", "--code", "leung", "--pmin", "0", "--pmax", "0.1", "--steps", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "# aqec 0.1.0"
    assert lines[1] == "p,F2_min,F2_unencoded"
    p, f, u = map(float, lines[-1].split(","))
    assert p == 0.1 and abs(f - 0.98331913) < 1e-7 and abs(u - 0.9) < 1e-12


def test_search_json(capsys, tmp_path):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "search", "--channel", "ad", "--gamma", "0.1", "--n", "2", "--restarts", "2",
                     "--max-iters", "200", "--out", str(out))
    assert code == 0
    d = json.loads((tmp_path / "run.json").read_text())
    assert d["n"] == 2 and d["channel_params"]["gamma"] == 0.1
    assert (tmp_path / "run.csv").read_text().startswith("iteration,best_value")


def test_search_with_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("gamma = 0.05\nn = 2\nrestarts = 1\nmax-iters = 50\n")
    code, out, _ = run(capsys, "--config", str(cfg), "search")
    assert code == 0
    assert json.loads(out)["channel_params"]["gamma"] == 0.05


def test_spin_ideal(capsys):
    code, out, _ = run(capsys, "spin", "ideal", "--N", "4", "--tmax", "50")
    assert code == 0
    row = out.strip().splitlines()[-1].split(",")
    assert row[0] == "4" and 0 < float(row[2]) <= 1


def test_spin_disorder_and_density(capsys):
    code, out, _ = run(capsys, "spin", "disorder", "--samples", "200", "--delta", "0.001")
    assert code == 0
    head, row = out.strip().splitlines()[1:]
    vals = dict(zip(head.split(","), row.split(",")))
    assert abs(float(vals["mean_re"]) - float(vals["ideal_re"])) < 1e-3
    code, out, _ = run(capsys, "spin", "density", "--samples", "2000", "--bins", "8")
    assert code == 0
    rows = [list(map(float, r.split(","))) for r in out.strip().splitlines()[2:]]
    assert len(rows) == 8
    assert abs(sum(r[2] for r in rows) - 1) < 1e-12
    assert np.abs([r[2] - r[3] for r in rows]).max() < 0.05


def test_ft_ledger_and_verify(capsys):
    code, out, _ = run(capsys, "ft", "ledger", "memory")
    assert code == 0 and json.loads(out)["reference_A"] == 356
    code, out, _ = run(capsys, "ft", "ledger", "exrec", "--format", "csv")
    assert code == 0 and out.startswith("# aqec 0.1.0\nblock_pair")
    code, out, _ = run(capsys, "ft", "verify", "bell_prep", "P3")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "ft", "verify", "transversal_cnot", "P5")
    assert code == 2 and json.loads(out)["passed"] is False
