import json
from pathlib import Path

import pytest

from repsim.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def ran(tmp_path):
    out, log, auth = tmp_path / "report.json", tmp_path / "events.jsonl", tmp_path / "auth.json"
    code = main(["run", "--scenario", str(SCENARIOS / "minimal.json"), "--seed", "4",
                 "--out", str(out), "--log", str(log), "--authority-out", str(auth)])
    return code, out, log, auth


def test_run_writes_report_and_log(ran):
    code, out, log, auth = ran
    assert code == 0
    report = json.loads(out.read_text())
    assert report["seed"] == 4 and report["backend"] == "simulation"
    assert log.read_text().splitlines()[-1].startswith('{"count"')
    assert "secret" in json.loads(auth.read_text())


def test_audit_clean_log(ran, tmp_path):
    _, _, log, auth = ran
    assert main(["audit", "--log", str(log), "--reveal-authority", str(auth),
                 "--out", str(tmp_path / "a.json")]) == 0


def test_audit_finding_exits_2(ran, tmp_path):
    _, _, log, auth = ran
    lines = [json.loads(l) for l in log.read_text().splitlines()]
    biz = json.loads(auth.read_text())["businesses"][0]["id"]
    for l in lines:
        if l.get("variant") == "RatingSubmission":
            l["payload"]["memo"] = biz
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
    assert main(["audit", "--log", str(bad), "--out", str(tmp_path / "a.json")]) == 2


def test_replay_matches_saved_report(ran, tmp_path):
    _, out, log, _ = ran
    assert main(["replay", "--log", str(log), "--scenario", str(SCENARIOS / "minimal.json"),
                 "--expect", str(out), "--out", str(tmp_path / "r.json")]) == 0


def test_replay_against_wrong_scenario_is_an_error(ran, tmp_path):
    _, _, log, _ = ran
    assert main(["replay", "--log", str(log), "--scenario", str(SCENARIOS / "monotone.json"),
                 "--out", str(tmp_path / "r.json")]) == 1


def test_truncated_log_is_an_error(ran, tmp_path):
    _, _, log, _ = ran
    cut = tmp_path / "cut.jsonl"
    cut.write_text("\n".join(log.read_text().splitlines()[:-1]) + "\n")
    assert main(["replay", "--log", str(cut)]) == 1


def test_fault_scenario_exits_2(tmp_path):
    d = json.loads((SCENARIOS / "minimal.json").read_text())
    d["events"][1]["misbehavior"] = "ciphertext_tamper"
    p = tmp_path / "fault.json"
    p.write_text(json.dumps(d))
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "r.json")]) == 2


def test_bad_scenario_exits_1(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"seed": 1, "businesses": []')
    assert main(["run", "--scenario", str(p)]) == 1
    assert "ScenarioError" in capsys.readouterr().err


def test_bench_then_extrapolate(tmp_path, capsys):
    t = tmp_path / "t.json"
    assert main(["bench", "--iters", "30", "--out", str(t)]) == 0
    assert len(json.loads(t.read_text())["rows"]) == 8
    assert main(["extrapolate", "--timings", str(t), "--businesses", "0", "--rate", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["trivial"] and rep["feasible"]


def test_bench_params_from_scenario(tmp_path):
    t = tmp_path / "t.json"
    assert main(["bench", "--params", str(SCENARIOS / "minimal.json"), "--iters", "30", "--out", str(t)]) == 0
    assert json.loads(t.read_text())["params"]["depth_budget"] == 3
