"""CLI tests: scenario parsing, exports, exit codes, figures."""

import csv
import json
from pathlib import Path

import pytest

from dcm_mpc.cli import TRAJECTORY_COLUMNS, main
from dcm_mpc.scenario_io import (
    ScenarioFormatError,
    bundled_scenario_path,
    load_scenario,
    parse_scenario,
    scenario_to_dict,
)

QUIET_SCENARIO = {
    "name": "quiet",
    "gait": {
        "step_count": 2,
        "step_length": 0.25,
        "step_width": 0.2,
        "durations": {"initial_dsp": 0.8, "dsp": 0.2, "ssp": 0.6, "final_dsp": 1.6},
        "control_period": 0.05,
    },
    "vertical": {"com_height": 0.85},
    "mpc": {"mode": "cop+step"},
}


@pytest.fixture
def quiet_path(tmp_path):
    path = tmp_path / "quiet.json"
    path.write_text(json.dumps(QUIET_SCENARIO))
    return path


def test_bundled_scenarios_parse():
    for name in ("fig2", "fig4_baseline", "fig5_baseline", "fig6_full"):
        sc = load_scenario(bundled_scenario_path(name))
        assert sc.name == name


def test_unknown_keys_rejected():
    with pytest.raises(ScenarioFormatError, match="unknown keys"):
        parse_scenario({"gait": {"stride": 1.0}})
    with pytest.raises(ScenarioFormatError, match="unknown keys"):
        parse_scenario({"extra_section": {}})


def test_schema_type_errors():
    with pytest.raises(ScenarioFormatError):
        parse_scenario({"gait": {"step_count": "three"}})
    with pytest.raises(ScenarioFormatError):
        parse_scenario({"mpc": {"mode": "hop"}})
    with pytest.raises(ScenarioFormatError):
        parse_scenario({"pushes": [{"force": [1.0, 0.0]}]})
    with pytest.raises(ScenarioFormatError):
        parse_scenario({"vertical": {"com_height": 0.8, "waypoints": [[0, 0.8]]}})


def test_echo_round_trip():
    sc = load_scenario(bundled_scenario_path("fig6_full"))
    echo = scenario_to_dict(sc)
    sc2 = parse_scenario(echo)
    assert scenario_to_dict(sc2) == echo
    assert echo["mpc"]["mode"] == "cop+step+cmp"


def test_run_writes_artifacts_and_exits_zero(quiet_path, tmp_path):
    out = tmp_path / "out"
    code = main(["run", str(quiet_path), "--out", str(out)])
    assert code == 0
    rows = list(csv.reader((out / "trajectory.csv").open()))
    assert rows[0] == TRAJECTORY_COLUMNS
    assert len(rows) > 100
    assert all(r[15] == "0" for r in rows[1:])  # no pushes -> no active rows
    steps = list(csv.reader((out / "footsteps.csv").open()))
    assert len(steps) == 1 + 4  # header + 2 stance feet + 2 steps
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcome"] == "completed"
    assert summary["scenario"]["mpc"]["horizon"] == 30  # defaults echoed
    assert (out / "top_view.png").exists()
    assert (out / "time_series.png").exists()


def test_run_fall_exit_code():
    code = main(["run", str(bundled_scenario_path("fig5_baseline")), "--out", "/tmp/dcm_cli_fall", "--no-plots"])
    assert code == 2


def test_run_bad_file_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 1
    missing = tmp_path / "nope.json"
    assert main(["run", str(missing), "--out", str(tmp_path)]) == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"gait": {"stride": 1}}))
    assert main(["run", str(unknown), "--out", str(tmp_path)]) == 1


def test_out_dir_env_var(quiet_path, tmp_path, monkeypatch):
    out = tmp_path / "envout"
    monkeypatch.setenv("DCM_MPC_OUT", str(out))
    assert main(["run", str(quiet_path), "--no-plots"]) == 0
    assert (out / "summary.json").exists()


def test_compare_requires_two_modes(quiet_path, tmp_path):
    assert main(["compare", str(quiet_path), "--modes", "cop+step", "--out", str(tmp_path)]) == 1
    assert main(["compare", str(quiet_path), "--modes", "cop+step,teleport", "--out", str(tmp_path)]) == 1


def test_envelope_export(quiet_path, tmp_path):
    out = tmp_path / "env"
    code = main(
        ["envelope", str(quiet_path), "--dir", "x", "--duration", "0.1", "--tol", "50", "--out", str(out)]
    )
    assert code == 0
    doc = json.loads((out / "envelope.json").read_text())
    assert doc["magnitude"] > 0
    assert doc["tolerance"] == 50.0
    assert all(isinstance(ok, bool) for _, ok in doc["trace"])
    # Monotonicity inside the bisection trace: every recovered magnitude is
    # below every non-recovered one.
    good = [m for m, ok in doc["trace"] if ok]
    badm = [m for m, ok in doc["trace"] if not ok]
    assert not good or not badm or max(good) < min(badm)
    assert (out / "envelope.png").exists()


def test_determinism_byte_identical_trajectories(quiet_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(quiet_path), "--out", str(out1), "--no-plots"]) == 0
    assert main(["run", str(quiet_path), "--out", str(out2), "--no-plots"]) == 0
    assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
