import csv
import io
import json

import pytest

from ciot_battery.cli import main

SMALL_SWEEP = ["--devices", "n211,r410m-ltem", "--scenarios", "good,extreme", "--payloads", "10,200",
               "--cycles-hours", "2,24"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_estimate_text(capsys):
    code, out, _ = run(capsys, "estimate", "--device", "n211", "--t3412-hours", "4")
    assert code == 0
    assert "12.87 years" in out
    assert "TAU per cycle   5" in out


def test_estimate_json(capsys):
    code, out, _ = run(capsys, "estimate", "--format", "json", "--scenario", "bad")
    doc = json.loads(out)
    assert code == 0
    assert doc["total_mj"] == pytest.approx(sum(doc["breakdown_mj"].values()))
    assert doc["technology"] == "NBIOT"


def test_estimate_csv(capsys):
    code, out, _ = run(capsys, "estimate", "--format", "csv", "--device", "r410m-ltem")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and rows[0]["technology"] == "LTEM"


def test_unreachable_exit_3(capsys):
    code, _, err = run(capsys, "estimate", "--device", "r410m-ltem", "--scenario", "extreme")
    assert code == 3
    assert "160 dB" in err


def test_negative_payload_exit_2(capsys):
    code, _, err = run(capsys, "estimate", "--payload", "-5")
    assert code == 2 and "payload" in err


def test_missing_profile_exit_2(capsys):
    code, _, err = run(capsys, "estimate", "--profile", "/nonexistent/dev.json")
    assert code == 2 and "profile" in err


def test_bad_profile_content_exit_2(tmp_path, capsys):
    p = tmp_path / "dev.json"
    p.write_text('{"name": "x"}')
    code, _, err = run(capsys, "estimate", "--profile", str(p))
    assert code == 2 and "MissingField" in err


def test_cycle_too_short_exit_2(capsys):
    code, _, err = run(capsys, "estimate", "--cycle-hours", "0.001")
    assert code == 2 and "CycleTooShort" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"device": "r410m-nbiot", "payload": 50, "format": "json"}))
    _, out, _ = run(capsys, "estimate", "--config", str(cfg), "--payload", "10")
    doc = json.loads(out)
    assert doc["device"] == "r410m-nbiot" and doc["payload_bytes"] == "10"


@pytest.mark.parametrize("content, needle", [
    ('{"colour": 1}', "colour"),
    ('{"payload": "ten"}', "payload"),
    ("not json", "invalid JSON"),
])
def test_config_errors(tmp_path, capsys, content, needle):
    cfg = tmp_path / "run.json"
    cfg.write_text(content)
    code, _, err = run(capsys, "estimate", "--config", str(cfg))
    assert code == 2 and needle in err


def test_sweep_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "sweep", *SMALL_SWEEP, "--out", str(a))[0] == 0
    assert run(capsys, "sweep", *SMALL_SWEEP, "--out", str(b), "--jobs", "2")[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.meta").read_text().startswith("# generated")
    rows = list(csv.DictReader(io.StringIO(a.read_text())))
    assert len(rows) == 16
    assert all(r["error"].startswith("Unreachable") for r in rows if r["device"] == "r410m-ltem"
               and r["scenario"] == "extreme")


def test_sweep_plots_deterministic(tmp_path, capsys):
    for d in ("p1", "p2"):
        assert run(capsys, "sweep", *SMALL_SWEEP, "--out", str(tmp_path / f"{d}.csv"),
                   "--plot", str(tmp_path / d))[0] == 0
    names = sorted(p.name for p in (tmp_path / "p1").iterdir())
    assert names == ["device_comparison.svg", "energy_breakdown.svg", "lifetime_vs_cycle.svg",
                     "lifetime_vs_payload.svg"]
    for n in names:
        assert (tmp_path / "p1" / n).read_bytes() == (tmp_path / "p2" / n).read_bytes()


def test_trace_burst(capsys):
    code, out, _ = run(capsys, "trace", "--burst-ms", "512")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert [r["label"] for r in rows].count("TX_GAP") == 2


def test_trace_idle_only(capsys):
    code, out, _ = run(capsys, "trace", "--idle-only", "--t3324-s", "0")
    assert code == 0
    assert [r["label"] for r in csv.DictReader(io.StringIO(out))] == ["PSM_SLEEP"]


def test_trace_full_deterministic(capsys):
    first = run(capsys, "trace", "--cycle-hours", "2")[1]
    second = run(capsys, "trace", "--cycle-hours", "2")[1]
    assert first == second and first.count("\n") > 10


def test_validate_bundled(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0
    assert "16/16 within 1.00%" in out


def test_validate_fault_injection(tmp_path, capsys):
    doc = {"tolerance": 0.01, "specs": [
        {"device": "n211", "scenario": "good", "cycle_hours": 24},
        {"device": "n211", "scenario": "extreme", "cycle_hours": 24, "tx_gap_ms": 400},
        {"device": "r410m-nbiot", "scenario": "extreme", "cycle_hours": 24, "tx_max_continuous_ms": 16},
    ]}
    m = tmp_path / "m.json"
    m.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", "--matrix", str(m))
    assert code == 1
    assert out.count("FAIL") == 2 and "1/3 within" in out


def test_validate_empty_matrix(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text('{"specs": []}')
    code, _, err = run(capsys, "validate", "--matrix", str(m))
    assert code == 2 and "empty" in err


def test_scenarios(capsys):
    code, out, _ = run(capsys, "scenarios")
    assert code == 0
    assert "unreachable" in out and "10.24" in out
