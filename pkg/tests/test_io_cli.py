import csv
import json

import numpy as np
import pytest

from espf.cli import EXIT_CONFIG, EXIT_OK, main
from espf.config import NOMINAL
from espf.harness import RunOutput, run_scenario
from espf.io import CLAIMS_COLUMNS, OutputError, emit_outputs, fmt, read_ewm_csv, write_ewm_csv
from espf.monitor import EwmRecord


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(np.pi)) == np.pi
    assert fmt(True) == "true" and fmt(7) == "7"


def test_empty_run_writes_headers(tmp_path):
    paths = emit_outputs(RunOutput(NOMINAL), tmp_path)
    assert paths.ewm.read_text().strip() == ",".join(EwmRecord.columns())
    assert paths.claims.read_text().strip() == ",".join(CLAIMS_COLUMNS)
    doc = json.loads(paths.summary.read_text())
    assert doc["steps"] == 0
    assert doc["columns"]["necessity"]["surrogate"] is True
    assert doc["columns"]["h_pi"]["surrogate"] is False


def test_output_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError):
        emit_outputs(RunOutput(NOMINAL), blocker / "sub")


@pytest.fixture(scope="module")
def short_run():
    return run_scenario(NOMINAL.replace(max_steps=8, claims_every=4))


def test_csv_roundtrip(short_run, tmp_path):
    p = tmp_path / "e.csv"
    write_ewm_csv(short_run.records, p)
    cols = read_ewm_csv(p)
    assert cols["h_pi"] == [r.h_pi for r in short_run.records]
    assert cols["station"] == [r.station for r in short_run.records]
    assert len(short_run.claims) >= 1
    paths = emit_outputs(short_run, tmp_path / "o")
    rows = list(csv.reader(paths.claims.open()))
    assert rows[0] == list(CLAIMS_COLUMNS) and len(rows) == len(short_run.claims) + 1
    for cell in rows[1][5:]:
        assert cell in ("P", "-") or cell.startswith("F(")


def test_cli_run_and_plot(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--steps", "5", "--out", str(out), "--seed", "11"]) == EXIT_OK
    assert (out / "nominal_ewm.csv").is_file()
    assert (out / "nominal.cfg").read_text().count("seed.truth = 11") == 1
    assert main(["plot", str(out / "nominal_ewm.csv"), "--out", str(tmp_path / "img")]) == EXIT_OK
    assert any(p.suffix == ".png" for p in (tmp_path / "img").iterdir())


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.level = 9\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["plot", str(tmp_path / "nothing.csv")]) == EXIT_CONFIG


def test_cli_unknown_verb():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
