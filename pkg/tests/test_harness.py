import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slicedheat.exceptions import ConfigError
from slicedheat.harness import config as cfgmod
from slicedheat.harness.cli import main
from slicedheat.harness.convergence import ConvergenceReport, run_convergence
from slicedheat.harness.properties import run_property_suite
from slicedheat.harness.report import emit_report, fmt_number, table_text

SMALL = """
[run]
t = 0.25
partitions = [1, 2]
samples = 2000
seed = 3
grid = [0.5, 1.5]

[geometry]
kind = "interval"
a = 0.0
b = 3.141592653589793

[boundary]
preset = "dirichlet"

[section]
name = "sin-mode"
k = 1

[output]
dir = "{out}"
stem = "small"
"""


def small(tmp_path, **edits):
    text = SMALL.replace("{out}", str(tmp_path / "out"))
    for k, v in edits.items():
        text = text.replace(k, v)
    p = tmp_path / "run.toml"
    p.write_text(text)
    return p


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_number_roundtrips(v):
    assert float(fmt_number(v)) == v


def test_fmt_number_special():
    assert fmt_number(True) == "1"
    assert fmt_number(7) == "7"
    assert fmt_number(float("nan")) == "nan"
    assert complex(fmt_number(1 + 2j)) == 1 + 2j


def test_config_roundtrip(tmp_path):
    cfg = cfgmod.load(small(tmp_path))
    again = cfgmod.loads(cfgmod.dumps(cfg))
    assert again.to_dict() == cfg.to_dict()
    assert again.hash() == cfg.hash()


@pytest.mark.parametrize(
    "old,new",
    [
        ("seed = 3", "seed = -3"),
        ("partitions = [1, 2]", "partitions = [2, 1]"),
        ("samples = 2000", "samples = 0"),
        ("grid = [0.5, 1.5]", "grid = [0.5, 4.0]"),
        ("seed = 3", "seed = 3\nspeed = 1"),
        ('preset = "dirichlet"', 'preset = "robin"'),
        ('stem = "small"', 'stem = "small"\ncolour = 1'),
        ('name = "sin-mode"', 'name = "bump"'),
    ],
)
def test_config_rejections(tmp_path, old, new):
    with pytest.raises(ConfigError):
        cfgmod.load(small(tmp_path, **{old: new}))


def test_config_errors_on_bad_toml(tmp_path):
    with pytest.raises(ConfigError):
        cfgmod.loads("[run\n")
    with pytest.raises(ConfigError):
        cfgmod.load(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        cfgmod.loads("[run]\nt = 1.0\n")


def test_empty_grid_gives_header_only(tmp_path):
    rep = ConvergenceReport([], [], {"seed": 0})
    paths = emit_report(rep, tmp_path, "csv", "empty")
    assert paths["data"].read_text() == "N,mesh,x,component,estimate,stderr,oracle,abs_error,rejected\n"


def test_one_point_one_row(tmp_path):
    cfg = cfgmod.load(small(tmp_path, **{"partitions = [1, 2]": "partitions = [1]", "grid = [0.5, 1.5]": "grid = [0.5]"}))
    paths = emit_report(run_convergence(cfg), tmp_path, "csv", "one")
    rows = list(csv.reader(paths["data"].open()))
    assert len(rows) == 2
    r = dict(zip(rows[0], rows[1]))
    assert float(r["oracle"]) == pytest.approx(math.exp(-0.25) * math.sin(0.5))
    assert abs(float(r["abs_error"])) <= 4 * float(r["stderr"])
    meta = json.loads(paths["meta"].read_text())
    assert meta["seed"] == 3 and meta["oracle"].startswith("spectral")
    assert "energy" in meta["conventions"]


def test_jsonl_output(tmp_path):
    cfg = cfgmod.load(small(tmp_path))
    paths = emit_report(run_convergence(cfg), tmp_path, "jsonl", "j")
    lines = paths["data"].read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0])["N"] == 1


def test_rerun_byte_identical(tmp_path):
    cfg = cfgmod.load(small(tmp_path))
    a = emit_report(run_convergence(cfg), tmp_path / "a", "csv", "r")
    cfg.workers = 4
    b = emit_report(run_convergence(cfg), tmp_path / "b", "csv", "r")
    assert a["data"].read_bytes() == b["data"].read_bytes()


def test_no_oracle_needs_descriptive(tmp_path):
    text = small(tmp_path).read_text().replace('kind = "interval"\na = 0.0\nb = 3.141592653589793', 'kind = "disk"')
    text = text.replace('name = "sin-mode"\nk = 1', 'name = "constant"').replace("grid = [0.5, 1.5]", "grid = [[0.1, 0.2]]")
    with pytest.raises(ConfigError):
        run_convergence(cfgmod.loads(text))
    rep = run_convergence(cfgmod.loads(text.replace("seed = 3", "seed = 3\ndescriptive = true")))
    assert rep.descriptive and math.isnan(rep.rows[0]["abs_error"])


def test_table_text():
    assert table_text(["a", "b"], [[1, 0.1]]) == "a,b\n1,0.1\n"


def test_property_suite_harness_module():
    res = run_property_suite(["harness", "oracle"])
    assert res and all(r.passed for r in res)


def test_cli_converge_and_exit_codes(tmp_path, capsys):
    cfg = small(tmp_path)
    assert main(["heat", "converge", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "small.csv").exists()
    assert main(["heat", "step", "--config", str(cfg), "--format", "jsonl"]) == 0
    assert (tmp_path / "out" / "small_step.jsonl").exists()
    assert main(["heat", "slices", "--config", str(cfg), "--slices", "3"]) == 0
    assert main(["oracle", "eval", "--config", str(cfg)]) == 0
    assert main(["heat", "converge", "--config", str(tmp_path / "nope.toml")]) == 2
    assert main(["heat", "converge", "--config", str(cfg), "--seed", "-1"]) == 2
    assert main(["heat", "converge", "--config", str(cfg), "--workers", "0"]) == 2
    assert main(["heat", "converge"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_billiard_trace(tmp_path):
    cfg = tmp_path / "disk.toml"
    cfg.write_text('[geometry]\nkind = "disk"\nradius = 1.0\n')
    out = tmp_path / "tr"
    rc = main(["billiard", "trace", "--config", str(cfg), "--position", "0,0", "--velocity", "1,0", "--time", "3",
               "--out", str(out), "--samples-per-segment", "2"])
    assert rc == 0
    rows = list(csv.DictReader((out / "trace.csv").open()))
    events = [r for r in rows if r["event_flag"] == "1"]
    assert [float(r["s"]) for r in events] == [1.0, 3.0]
    assert float(rows[-1]["s"]) == 3.0 and float(rows[-1]["x0"]) == -1.0
    assert main(["billiard", "trace", "--config", str(cfg), "--position", "2,0", "--velocity", "1,0", "--time", "1",
                 "--out", str(out)]) == 2
    assert main(["billiard", "trace", "--config", str(cfg), "--position", "a,b", "--velocity", "1,0", "--time", "1",
                 "--out", str(out)]) == 2


def test_cli_props(tmp_path):
    assert main(["props", "run", "--modules", "harness", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "properties.csv").read_text()
    assert text.startswith("name,passed,measured,threshold,detail\n")
