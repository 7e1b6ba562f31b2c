import json
import subprocess
import sys

import pytest

from qscf.cli import main
from qscf.config import ConfigError, bundled_config, default_grids, load_config, parse_config

CLI = [sys.executable, "-m", "qscf.cli"]


def run_json(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_analyze_baseline(capsys):
    code, out = run_json(capsys, "analyze")
    r = out["report"]
    assert code == 0
    assert r["p_alice"] == pytest.approx(0.900, abs=1e-3)
    assert r["p_bob"] == pytest.approx(0.900, abs=1e-3)
    assert r["p_honest_abort"] == pytest.approx(0.014, abs=5e-4)
    assert r["p_classical"] == pytest.approx(0.916, abs=1e-3)
    assert r["gain_pp"] == pytest.approx(1.6, abs=0.2)
    assert out["display"]["p_bob"] == "90.0%"


def test_analyze_wcp(capsys):
    _, out = run_json(capsys, "analyze", "--kind", "wcp")
    assert out["report"]["p_bob"] == pytest.approx(0.903, abs=2e-3)
    assert out["report"]["gain_pp"] == pytest.approx(1.3, abs=0.2)


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("state_a = 1.2\n")
    assert main(["analyze", "--config", str(bad)]) == 2
    bad.write_text("pulses_per_flip = 100\nwarp_factor = 9\n")
    assert main(["analyze", "--config", str(bad)]) == 2
    assert main(["analyze", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["simulate", "--n-flips", "0"]) == 2


def test_unknown_keys_named():
    with pytest.raises(ConfigError, match="warp_factor"):
        parse_config("mu = 0.001\nwarp_factor = 9\n")
    with pytest.raises(ConfigError):
        parse_config("[other]\nmu = 0.001\n")
    with pytest.raises(ConfigError):
        parse_config("pulses_per_flip = 10.5\n")


def test_bundled_configs_load():
    base = load_config(bundled_config("baseline.cfg"))
    assert base.scenario.K == 50_000 and base.scenario.link.qber == 0.028 and base.n_flips == 50_000
    l6 = load_config(bundled_config("loss6db.cfg"))
    assert l6.scenario.K == 100_000 and l6.scenario.link.loss_db == 6
    K, mu = default_grids()
    assert 50_000 in K and 0.0013 in mu


def test_simulate_is_reproducible(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        p = tmp_path / name
        assert main(["simulate", "--seed", "7", "--n-flips", "2000", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    p = tmp_path / "c.json"
    main(["simulate", "--seed", "8", "--n-flips", "2000", "--out", str(p)])
    assert p.read_bytes() != outs[0]


def test_simulate_loss3db(capsys):
    cfg = str(bundled_config("loss3db.cfg"))
    _, out = run_json(capsys, "simulate", "--config", cfg, "--n-flips", "20000")
    assert out["analytic"]["p_honest_abort"] == pytest.approx(0.0155, abs=1e-4)
    assert out["analytic"]["within_4sigma"] is True


def test_simulate_cheat(capsys):
    _, out = run_json(capsys, "simulate", "--cheat-target", "0", "--n-flips", "5000")
    assert out["mode"] == "cheating_bob"
    assert abs(out["cheat"]["success_prob"] - out["analytic"]["p_bob"]) < 4 * out["cheat"]["sigma"]


def test_sweep_single_cell(capsys):
    code = main(["sweep", "--k-grid", "50000", "--mu-grid", "0.0013"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    assert lines[0] == "K,mu,a_star,p_alice,p_bob,H,p_classical,gain,reason"
    row = lines[1].split(",")
    assert row[0] == "50000" and float(row[7]) == pytest.approx(1.6, abs=0.2)


def test_sweep_bad_grid_exits_2():
    assert main(["sweep", "--k-grid", "500,100", "--mu-grid", "0.001"]) == 2


def test_iotable(capsys):
    _, out = run_json(capsys, "iotable", "--format", "json")
    assert out["labels"] == ["00", "01", "10", "11"]
    assert out["expected"][0] == pytest.approx([0.486, 0.014, 0.32, 0.18])


def test_iotable_csv_simulated(capsys, caplog):
    assert main(["iotable", "--simulate", "--n-flips", "400"]) == 0
    out = capsys.readouterr().out
    assert "expected" in out and "simulated" in out
    assert "fewer than 1000" in caplog.text


def test_fairness(capsys):
    _, out = run_json(capsys, "fairness")
    assert out["feasible"] is True
    assert out["a_star"] == pytest.approx(0.8997, abs=5e-4)
    assert out["residual"] < 1e-9


def test_entropy_file_exhaustion(tmp_path, capsys):
    f = tmp_path / "tiny.bin"
    f.write_bytes(b"\x5a" * 8)
    assert main(["simulate", "--random-file", str(f), "--n-flips", "5"]) == 4


def _spawn(role, endpoint, *extra):
    return subprocess.Popen(
        CLI + [role, "--endpoint", endpoint, "--n-flips", "1000", "--seed", "5", *extra],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE,
    )


def test_three_processes(tmp_path):
    ep = str(tmp_path / "phys.sock")
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("pulses_per_flip = 2000\nmu = 0.01\n")
    phys = _spawn("physics", ep, "--config", str(cfg))
    alice = _spawn("alice", ep, "--config", str(cfg), "--log-outcomes")
    bob = _spawn("bob", ep, "--config", str(cfg), "--log-outcomes")
    outs = [p.communicate(timeout=120) for p in (phys, alice, bob)]
    assert [p.returncode for p in (phys, alice, bob)] == [0, 0, 0], [o[1] for o in outs]
    ps, a, b = (json.loads(o[0]) for o in outs)
    assert ps["complete"] and ps["rounds"] == 1000
    assert a["outcomes"] == b["outcomes"]
    assert a["n_success"] == ps["n_success"]
    # same seed in-process
    from dataclasses import replace
    from qscf.protocol_engine import run_session
    sc = load_config(cfg).scenario
    st = run_session(replace(sc, rng=replace(sc.rng, seed=5)), 1000)
    assert (st.n_success, st.n_one, st.n_abort_mismatch) == (ps["n_success"], ps["n_one"], ps["n_abort_mismatch"])


def test_physics_rejects_mismatched_hello(tmp_path):
    ep = str(tmp_path / "phys.sock")
    other = tmp_path / "other.cfg"
    other.write_text("qber = 0.03\n")
    phys = _spawn("physics", ep)
    alice = _spawn("alice", ep, "--config", str(other))
    bob = _spawn("bob", ep)
    res = [p.communicate(timeout=60) for p in (phys, alice, bob)]
    assert phys.returncode == 3
    assert alice.returncode == 3
    assert b"hash" in res[0][1]
    assert bob.returncode == 3
