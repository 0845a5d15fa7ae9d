import json

import pytest

from gopa.cli import EXIT_CHEATERS, EXIT_CONFIG, EXIT_OK, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_reference_grid_golden(capsys):
    code, out, _ = run_cli(capsys, "calibrate", "--table1")
    assert code == EXIT_OK
    rows = [line.split() for line in out.splitlines()[2:8]]
    got = {(r[0], float(r[1])): (r[2], r[5]) for r in rows}
    assert got == {
        ("complete", 1.0): ("1.627", "-"),
        ("complete", 0.5): ("2.117", "-"),
        ("k_out", 1.0): ("44.72", "105"),
        ("k_out", 0.5): ("45.99", "192"),
        ("worst_case", 1.0): ("9392", "-"),
        ("worst_case", 0.5): ("6112", "-"),
    }
    assert "note [k_out, rho=0.5]" in out


def test_reference_grid_json(capsys):
    code, out, _ = run_cli(capsys, "calibrate", "--table1", "--json")
    rep = json.loads(out)
    cells = {(r["topology"], r["rho"]): r["sigma_delta"] for r in rep["closed_form"]}
    assert cells[("k_out", 1.0)] == pytest.approx(44.72, abs=0.005)
    assert cells[("complete", 0.5)] == pytest.approx(2.117, abs=0.0005)
    assert all(s["sigma_delta"] is None for s in rep["simulation"])


def test_small_simulation_preset(capsys):
    code, out, _ = run_cli(capsys, "calibrate", "--simulate", "--n", "100", "--k", "3",
                           "--runs", "1000", "--seed", "0", "--json")
    assert code == EXIT_OK
    sim = json.loads(out)["simulation"]
    assert sim["connected_runs"] == 1000
    assert sim["sigma_delta"] == pytest.approx(64.5537, abs=5e-4)


def test_defaults_echoed(capsys):
    code, out, _ = run_cli(capsys, "calibrate", "--n", "400", "--topology", "complete")
    assert code == EXIT_OK
    assert "defaults: delta_prime = 1/n_H^2 = 6.25e-06" in out
    assert "defaults: delta = 10 delta_prime = 6.25e-05" in out


def test_invalid_config_exit_2(capsys):
    code, _, err = run_cli(capsys, "calibrate", "--n", "100", "--rho", "0")
    assert code == EXIT_CONFIG
    assert "rho" in err


def test_infeasible_exit_2(capsys):
    code, _, err = run_cli(capsys, "calibrate", "--n", "100", "--delta", "1e-12", "--topology", "complete")
    assert code == EXIT_CONFIG
    assert err.startswith("error:")


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"n": 200, "topology": {"kind": "complete"}, "epsilon": 0.5}))
    code, out, _ = run_cli(capsys, "calibrate", "--config", str(cfg), "--n", "300", "--json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["n"] == 300 and rep["epsilon"] == 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nn": 3}))
    assert run_cli(capsys, "calibrate", "--config", str(bad))[0] == EXIT_CONFIG


def test_strict_dropout_exit_2(capsys):
    args = ["run", "--n", "30", "--sigma-eta", "0.5", "--sigma-delta", "2", "--dropout", "after-publish:user4"]
    code, _, _ = run_cli(capsys, *args, "--margin", "0", "--strict")
    assert code == EXIT_CONFIG
    assert run_cli(capsys, *args)[0] == EXIT_OK


def test_run_report_round_trip(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for seed, path in ((1, a), (2, b)):
        code, _, _ = run_cli(capsys, "run", "--n", "50", "--sigma-eta", "0.5", "--sigma-delta", "2",
                             "--repeat", "200", "--seed", str(seed), "--out", str(path))
        assert code == EXIT_OK
    code, out, _ = run_cli(capsys, "report", str(a), str(b), "--json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["runs"] == 400
    errs = json.loads(a.read_text())["errors"] + json.loads(b.read_text())["errors"]
    g = rep["groups"][0]
    assert g["mean_error"] == pytest.approx(sum(errs) / len(errs), rel=1e-12)
    assert 0.7 < g["variance_ratio"] < 1.3


def test_empty_report_warns(capsys):
    code, out, _ = run_cli(capsys, "report")
    assert code == EXIT_OK
    assert "empty report" in out


def test_verified_run_then_verify_and_audit(tmp_path, capsys):
    board = tmp_path / "board.bin"
    common = ["run", "--verified", "--n", "8", "--k", "2", "--sigma-eta", "0.5", "--sigma-delta", "2",
              "--backend", "schnorr61"]
    assert run_cli(capsys, *common, "--board", str(board))[0] == EXIT_OK
    code, out, _ = run_cli(capsys, "verify", str(board))
    assert code == EXIT_OK and "PASS" in out
    code, out, _ = run_cli(capsys, "audit", str(board), "--counts", "--json")
    rep = json.loads(out)
    assert rep["chain"] == "ok" and len(rep["ops"]) == 8

    bad = tmp_path / "bad.bin"
    code, out, _ = run_cli(capsys, *common, "--board", str(bad), "--adversary", "bad-sum:user3")
    assert code == EXIT_CHEATERS
    code, out, _ = run_cli(capsys, "verify", str(bad), "--json")
    assert code == EXIT_CHEATERS
    assert list(json.loads(out)["cheaters"]) == ["3"]


def test_corrupted_board_exit_2(tmp_path, capsys):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"\x00\x00\x00\x05hello")
    assert run_cli(capsys, "verify", str(p))[0] == EXIT_CONFIG
    assert run_cli(capsys, "audit", str(tmp_path / "missing.bin"))[0] == EXIT_CONFIG
