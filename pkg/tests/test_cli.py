import csv
import io
import json

import pytest

from magwells.cli import main, parse_k, parse_range


def run(argv):
    buf = io.StringIO()
    assert main(argv, stdout=buf) == 0
    return json.loads(buf.getvalue())


def test_parse_helpers():
    assert parse_k("1:3") == [1, 2, 3] and parse_k("4") == [4]
    r = parse_range("1e-1:1e-3:3:log")
    assert r.log and len(r.values()) == 3
    with pytest.raises(ValueError):
        parse_range("1:2")
    with pytest.raises(ValueError):
        parse_range("0:1:3:log")
    with pytest.raises(ValueError):
        parse_k("3:1")


def test_table1_writes_json_and_csv(tmp_path):
    stem = tmp_path / "table"
    assert main(["table1", "--k", "1", "--out", str(stem)]) == 0
    doc = json.loads((tmp_path / "table.json").read_text())
    assert doc["command"]["params"]["k"] == [1]
    assert doc["records"][0]["verdict"] == "pass"
    rows = list(csv.DictReader((tmp_path / "table.csv").open()))
    assert rows[0]["k"] == "1" and rows[0]["verdict"] == "pass"


def test_table1_rejects_k_out_of_range():
    with pytest.raises(SystemExit):
        main(["table1", "--k", "13"], stdout=io.StringIO())


def test_curve_to_stdout():
    doc = run(["curve", "--k", "1", "--range=-1:1:5"])
    assert doc["records"][0]["points"] == 5
    assert set(doc) == {"command", "version", "records", "notes", "timing"}


def test_config_file_and_unknown_key(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("# curve settings\nk = 2\nrange = 0:1:3\n")
    doc = run(["curve", "--config", str(cfg)])
    assert doc["command"]["params"]["k"] == [2]
    bad = tmp_path / "bad.ini"
    bad.write_text("colour = red\n")
    with pytest.raises(SystemExit, match="unknown key"):
        main(["curve", "--config", str(bad)], stdout=io.StringIO())


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("k = 2\nrange = 0:1:3\n")
    doc = run(["curve", "--config", str(cfg), "--k", "1"])
    assert doc["command"]["params"]["k"] == [1]


def test_toy_without_actions_echoes_config():
    doc = run(["toy", "--k", "1", "--alpha1", "0.5"])
    assert doc["records"] == [] and doc["command"]["params"]["alpha1"] == 0.5


def test_toy_gaps_and_bands(tmp_path):
    stem = tmp_path / "toy"
    main(["toy", "--actions", "spectrum,gaps", "--h-sweep", "0.1:0.01:2:log", "--out", str(stem)])
    doc = json.loads((tmp_path / "toy.json").read_text())
    counts = [r["gaps"]["count"] for r in doc["records"]]
    assert counts[1] > counts[0]
    rows = list(csv.DictReader((tmp_path / "toy.csv").open()))
    assert set(rows[0]) == {"h", "p", "j", "value"}


def test_toy_rejects_unknown_action():
    with pytest.raises(SystemExit):
        main(["toy", "--actions", "dance"], stdout=io.StringIO())


def test_well2d_bad_gauge_names_the_monomial(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("b = x^2 + 3*z^2\n")
    with pytest.raises(SystemExit, match="z\\^2"):
        main(["well2d", "--gauge", str(g)], stdout=io.StringIO())


def test_well2d_model_operator(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("b = x^2 + y^2\n")
    doc = run(["well2d", "--gauge", str(g), "--mode", "model-operator"])
    rec = doc["records"][0]
    assert rec["k"] == 2 and rec["converged"]
    assert abs(rec["mu"][0] - 1.3047) < 1e-3


def test_negative_tolerance_is_rejected():
    with pytest.raises(SystemExit):
        main(["curve", "--tol", "-1"], stdout=io.StringIO())
