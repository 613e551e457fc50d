import json
import subprocess
import sys

import pytest

from fibermeasure.cli import COMMANDS, main
from fibermeasure.report import COLUMNS, SCHEMA

SMALL = {
    "construct": [],
    "fiber-sample": ["--n", "5"],
    "disintegration-check": ["--fibers", "20", "--points", "20000", "--cells", "4"],
    "window": ["--omega", "0;1"],
    "ball-mass": ["--x", "1/3", "--r", "1/10"],
    "slab-decay": ["--eps", "1/4,1/8", "--trials", "3"],
    "doubling": ["--trials", "3"],
    "counterexample": ["--n", "4..6"],
    "pv-condition": ["--alpha", "1/2"],
    "psi-hits": ["--x", "0.618", "--Q", "50"],
    "dirichlet": ["--x", "3/7", "--t", "5,10"],
    "wpsi-scan": ["--Q", "100", "--points", "5", "--thresholds", "10,50"],
}


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_every_command_is_covered():
    assert set(SMALL) == set(COMMANDS)


@pytest.mark.parametrize("command", COMMANDS)
def test_command_json_schema(command, capsys):
    code, out, _ = _run([command, *SMALL[command]], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["schema"] == SCHEMA and rec["command"] == command
    for name, table in rec["tables"].items():
        assert tuple(table["columns"]) == COLUMNS[name]


@pytest.mark.parametrize("command", ["construct", "counterexample", "fiber-sample", "psi-hits"])
def test_repeated_runs_byte_identical(command, capsys):
    a = _run([command, *SMALL[command], "--seed", "5"], capsys)[1]
    b = _run([command, *SMALL[command], "--seed", "5"], capsys)[1]
    assert a == b


def test_timing_is_opt_in(capsys):
    assert json.loads(_run(["counterexample", "--n", "4..5"], capsys)[1])["wall_clock"] is None
    assert json.loads(_run(["counterexample", "--n", "4..5", "--timing"], capsys)[1])["wall_clock"] >= 0


def test_counterexample_golden_csv(capsys):
    code, out, _ = _run(["counterexample", "--n", "4..10", "--format", "csv"], capsys)
    assert code == 0
    lines = out.split("\r\n")
    assert lines[0] == "n,k_n,eps_n,ratio_n"
    assert lines[1] == "4,7,1/9,243/743"
    assert lines[7] == "10,17,1/129,14348907/34348907"


def test_construct_csv_tables(capsys):
    out = _run(["construct", "--format", "csv"], capsys)[1]
    blocks = out.split("\r\n\r\n")
    headers = [b.split("\r\n")[0] for b in blocks]
    assert headers == [",".join(COLUMNS["consistency"]), ",".join(COLUMNS["family"])]


def test_out_file_matches_stdout(tmp_path, capsys):
    target = tmp_path / "r.json"
    assert _run(["construct", "--out", str(target)], capsys) == (0, "", "")
    assert target.read_text() == _run(["construct"], capsys)[1]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"system": "dyadic", "p0": "1/3"}')
    rec = json.loads(_run(["construct", "--config", str(cfg)], capsys)[1])
    assert rec["certificates"]["N"] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["construct", "--format", "xml"],
        ["construct", "--system", "nope"],
        ["construct", "--seed", "-1"],
        ["window", "--x", "1/3", "--r", "1/100"],
        ["ball-mass", "--x", "1/3", "--r", "0"],
    ],
)
def test_input_errors_exit_one(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert capsys.readouterr().err


def test_bad_config_exits_one(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"dimension": 1,\n "maps": [}')
    code, _, err = _run(["construct", "--config", str(cfg)], capsys)
    assert code == 1 and "line 2" in err


def test_certification_failure_exits_two(capsys):
    code, _, err = _run(["construct", "--system", "dyadic", "--depth", "1"], capsys)
    assert code == 2 and "separated" in err


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "fibermeasure.cli", "counterexample", "--n", "4..4", "--format", "csv"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert proc.stdout.splitlines()[1] == "4,7,1/9,243/743"
