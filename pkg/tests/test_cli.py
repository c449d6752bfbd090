import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from uconvex.cli import COMMANDS, RANDOMIZED, main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
ALL = sorted(COMMANDS)


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, (out.read_bytes() if out.exists() else b"")


def test_every_command_has_a_fixture():
    assert sorted(p.stem for p in FIXTURES.glob("*.json")) == ALL
    assert len(ALL) == 16


@pytest.mark.parametrize("command", ALL)
def test_fixture_runs_deterministically(command, tmp_path):
    argv = [command, "--config", str(FIXTURES / f"{command}.json")]
    code1, first = run(argv, tmp_path, "a.json")
    code2, second = run(argv, tmp_path, "b.json")
    code3, threaded = run([*argv, "--threads", "3"], tmp_path, "c.json")
    assert code1 == code2 == code3 == 0
    assert first == second == threaded
    payload = json.loads(first)
    assert payload["schema"] == "uconvex/1"
    assert payload["command"] == command


@pytest.mark.parametrize("command", sorted(RANDOMIZED))
def test_randomized_commands_need_a_seed(command, tmp_path, monkeypatch):
    monkeypatch.delenv("UCONVEX_SEED", raising=False)
    cfg = json.loads((FIXTURES / f"{command}.json").read_text())
    cfg.pop("seed")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _ = run([command, "--config", str(path)], tmp_path)
    assert code == 2
    monkeypatch.setenv("UCONVEX_SEED", str(cfg.get("seed", 0)))
    code, _ = run([command, "--config", str(path)], tmp_path)
    assert code == 0


def test_env_seed_matches_flag(tmp_path, monkeypatch):
    cfg = FIXTURES / "check-convexity.json"
    monkeypatch.setenv("UCONVEX_SEED", "17")
    _, from_env = run(["check-convexity", "--config", str(cfg), "--seed", "17"], tmp_path, "a.json")
    monkeypatch.delenv("UCONVEX_SEED")
    _, from_flag = run(["check-convexity", "--config", str(cfg), "--seed", "17"], tmp_path, "b.json")
    assert from_env == from_flag
    monkeypatch.setenv("UCONVEX_SEED", "abc")
    code, _ = run(["clarkson", "--p", "2"], tmp_path)
    assert code == 2


def test_flags_override_config(tmp_path):
    cfg = FIXTURES / "clarkson.json"
    _, data = run(["clarkson", "--config", str(cfg), "--samples", "100"], tmp_path)
    assert json.loads(data)["report"]["samples"] == 104


def test_violation_exit_code(tmp_path):
    code, data = run(["clarkson", "--p", "2", "--c", "0.5", "--seed", "1", "--samples", "200"], tmp_path)
    assert code == 1
    assert json.loads(data)["report"]["passed"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["check-convexity", "--space", "torus:3", "--seed", "0"],
        ["check-convexity", "--seed", "0"],
        ["barycenter", "--space", "euclidean:2"],
        ["barycenter", "--space", "euclidean:2", "--mu", '{"points": [[0, 0]], "weights": [0.5]}'],
        ["wasserstein", "--space", "euclidean:1", "--mu", "[1]", "--nu", "[2]"],
        ["clarkson", "--p", "0.5", "--seed", "0"],
        ["check-convexity", "--space", "euclidean:2", "--seed", "0", "--threads", "0"],
        ["coconvex-probe", "--sequence", '{"generator": "orthonormal", "length": 4, "params": {"dim": 4}}',
         "--candidates", "[[0, 0, 0, 0]]", "--shadow", "ray", "--seed", "0"],
        ["cone-demo", "--n", "2"],
        ["no-such-command"],
    ],
)
def test_config_errors(argv, tmp_path):
    code, _ = run(argv, tmp_path) if argv[0] != "no-such-command" else (main(argv), b"")
    assert code == 2


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["hull", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"space": "euclidean:2", "unknown_key": 1}))
    assert main(["hull", "--config", str(bad)]) == 2
    assert main(["hull", "--config", str(tmp_path / "missing.json")]) == 2


def test_cone_demo_csv(tmp_path):
    csv_path = tmp_path / "rays.csv"
    code, data = run(["cone-demo", "--config", str(FIXTURES / "cone-demo.json"), "--csv", str(csv_path)], tmp_path)
    assert code == 0
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["n", "m", "projection_radius"]
    assert len(rows) == 1 + 8 * 9 // 2
    assert float(rows[1][2]) == pytest.approx(0.5403023058681398, abs=1e-15)
    again = tmp_path / "again.csv"
    main(["cone-demo", "--config", str(FIXTURES / "cone-demo.json"), "--csv", str(again), "--out", str(tmp_path / "x")])
    assert csv_path.read_bytes() == again.read_bytes()
    code, text = run(["cone-demo", "--config", str(FIXTURES / "cone-demo.json"), "--format", "csv"], tmp_path, "d.csv")
    assert text == csv_path.read_bytes()


def test_modulus_csv(tmp_path):
    code, text = run(["modulus", "--space", "euclidean:2", "--seed", "0", "--samples", "500", "--eps", "0.5,1.0",
                      "--format", "csv"], tmp_path, "m.csv")
    rows = list(csv.reader(text.decode().splitlines()))
    assert code == 0
    assert rows[0] == ["eps", "rho_hat", "rho_raw", "rho_tilde", "samples", "attempts"]
    assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0]


def test_wasserstein_bottleneck_flag(tmp_path):
    code, data = run(["wasserstein", "--config", str(FIXTURES / "wasserstein.json"), "--p", "inf"], tmp_path)
    payload = json.loads(data)
    assert code == 0 and payload["p"] == "inf" and payload["value"] == 1.0


def test_stdout_and_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "uconvex.cli", "circumcenter", "--config", str(FIXTURES / "circumcenter.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["schema"] == "uconvex/1"
    assert main(["--version"]) == 0


def test_documented_examples(tmp_path, monkeypatch):
    monkeypatch.delenv("UCONVEX_SEED", raising=False)
    code, data = run(["cone-demo", "--n", "8"], tmp_path, "cone.json")
    payload = json.loads(data)
    assert code == 0
    assert abs(payload["cos1"] - 0.5403023) <= 1e-7 and abs(payload["cossq"] - 0.5779719) <= 1e-7
    assert payload["supported"] == [True, True]

    code, data = run(["modulus", "--space", "euclidean:3", "--p", "2", "--eps", "0.5", "--samples", "100000",
                      "--seed", "7"], tmp_path, "mod.json")
    assert code == 0
    assert json.loads(data)["table"]["rho_tilde"][0] == pytest.approx(0.0625, rel=0.05)

    code, data = run(["wasserstein", "--config", str(FIXTURES / "wasserstein.json"), "--p", "1"], tmp_path, "w.json")
    assert code == 0 and json.loads(data)["value"] == 1.0
