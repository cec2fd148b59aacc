import csv
import json

import pytest

from large_poa import cli
from large_poa.scenarios import REGISTRY


def run(tmp_path, *args):
    return cli.main(["run", *args, "--out", str(tmp_path)])


def test_list_shows_all_scenarios(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert len(REGISTRY) == 9
    for sid in REGISTRY:
        assert f"{sid}:" in out


def test_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(out, "example1", "--seed", "7", "--trials", "500", "--param", "tolerance=0.1") == 0
    for name in ("example1.csv", "example1_summary.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_changes_output(tmp_path):
    run(tmp_path / "a", "example1", "--seed", "1", "--trials", "300", "--param", "tolerance=1")
    run(tmp_path / "b", "example1", "--seed", "2", "--trials", "300", "--param", "tolerance=1")
    assert (tmp_path / "a/example1.csv").read_bytes() != (tmp_path / "b/example1.csv").read_bytes()


def test_unknown_param_rejected(tmp_path, capsys):
    assert run(tmp_path, "example1", "--param", "kk=3") == 2
    assert "unknown parameter 'kk'" in capsys.readouterr().err


def test_bad_param_value(tmp_path, capsys):
    assert run(tmp_path, "example1", "--param", "k=three") == 2
    assert "bad value" in capsys.readouterr().err


def test_unknown_scenario(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "nope")
    assert exc.value.code == 2


def test_config_unknown_key_cites_line(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nscenario = example1\n\n[params]\nk = 5\nbogus = 1\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "c.ini:6" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    params = dict(REGISTRY["example1"].params, k=6)
    cfg = tmp_path / "c.ini"
    cfg.write_text(cli.serialize_config("example1", params, 3, 400, "csv"))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "x")]) in (0, 1)
    assert run(tmp_path / "y", "example1", "--seed", "3", "--trials", "400", "--param", "k=6") in (0, 1)
    assert (tmp_path / "x/example1.csv").read_bytes() == (tmp_path / "y/example1.csv").read_bytes()
    summary = (tmp_path / "x/example1_summary.txt").read_text()
    assert "seed: 3" in summary and "trials: 400" in summary and '"k": 6' in summary


def test_jsonl_matches_csv(tmp_path):
    run(tmp_path, "congestion-convergence", "--param", "n=2,4")
    run(tmp_path, "congestion-convergence", "--param", "n=2,4", "--format", "jsonl")
    with open(tmp_path / "congestion-convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    lines = [json.loads(s) for s in (tmp_path / "congestion-convergence.jsonl").read_text().splitlines()]
    assert rows == lines
    assert list(lines[0]) == list(cli.Row.FIELDS)


def test_failed_rows_set_exit_code(tmp_path):
    # an impossible tolerance must be reported as a failure
    assert run(tmp_path, "example1", "--trials", "200", "--param", "tolerance=1e-9") == 1
    assert "FAIL" in (tmp_path / "example1_summary.txt").read_text()
