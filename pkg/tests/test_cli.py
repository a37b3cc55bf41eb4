import csv
import io
import json

import pytest

from relendo import __version__
from relendo.cli import EXIT_BUDGET, EXIT_CONFIG, main


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *args):
    code, out = run(capsys, *args)
    assert code == 0, out
    return json.loads(out)


def test_endo_examples(capsys):
    doc = run_json(capsys, "--prime", "2", "--ext-deg", "2", "endo", "--n", "2", "--r", "1", "--point", "1;2")
    assert doc["result"]["dim"] == 2
    assert doc["config"]["prime"] == 2 and doc["version"] == __version__
    doc = run_json(capsys, "--prime", "2", "--ext-deg", "2", "endo", "--n", "2", "--r", "1", "--point", "1;1")
    assert doc["result"]["dim"] == 3
    doc = run_json(capsys, "endo", "--n", "2", "--r", "1", "--prime", "2")
    assert doc["result"]["dim"] == 1 and doc["result"]["flag_ok"]


def test_strat_examples(capsys):
    doc = run_json(capsys, "--prime", "2", "strat", "--n", "2", "--r", "1")
    assert [s["count"] for s in doc["result"]["strata"]] == [3, 2, 12]
    doc = run_json(capsys, "--prime", "2", "--ext-deg", "2", "strat", "--mode", "Sp", "--r", "2")
    assert sum(s["count"] for s in doc["result"]["strata"]) == 85
    code, _ = run(capsys, "--budget", "0", "strat")
    assert code == EXIT_BUDGET


def test_strat_csv_columns(capsys):
    code, out = run(capsys, "strat", "--prime", "3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0])[:1] == ["signature"]
    assert {"signature", "count", "representative", "field"} <= set(rows[0])
    assert [int(r["count"]) for r in rows] == [4, 6, 72]


def test_mass_torsion_g4_eo(capsys):
    doc = run_json(capsys, "--prime", "5", "mass", "--g", "1", "--c", "0")
    assert doc["result"]["value"] == "1/6"
    doc = run_json(capsys, "--prime", "2", "torsion", "--n", "1", "--s", "2")
    assert doc["result"]["summary"] == "torsion: -1"
    doc = run_json(capsys, "--prime", "2", "g4")
    assert doc["result"]["aut_order"] == 2
    doc = run_json(capsys, "eo", "--g", "4")
    assert doc["result"]["count"] == 16 and doc["result"]["phi_max"] == [0, 0, 0, 1, 2]


def test_determinism(capsys):
    args = ["--prime", "3", "--seed", "4", "endo", "--n", "3", "--r", "1"]
    _, a = run(capsys, *args)
    _, b = run(capsys, *args)
    assert a == b


def test_invalid_config(capsys):
    assert run(capsys, "--prime", "4", "mass", "--g", "1")[0] == EXIT_CONFIG
    assert run(capsys, "endo", "--n", "2", "--r", "2")[0] == EXIT_CONFIG
    assert run(capsys, "nosuchcommand")[0] == EXIT_CONFIG
    assert run(capsys, "--workers", "0", "eo", "--g", "2")[0] == EXIT_CONFIG
    assert run(capsys, "--prime", "2", "--ext-deg", "2", "endo", "--n", "2", "--r", "1", "--point", "1")[0] == EXIT_CONFIG


def test_config_file_and_out(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"prime": 5}))
    out = tmp_path / "report.json"
    code, _ = run(capsys, "--config", str(cfg), "--out", str(out), "mass", "--g", "1")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["result"]["value"] == "1/6" and doc["config"]["prime"] == 5
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "--config", str(cfg), "eo", "--g", "1")[0] == EXIT_CONFIG


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_eo_formats(capsys, fmt):
    code, out = run(capsys, "eo", "--g", "3", "--format", fmt)
    assert code == 0 and out
