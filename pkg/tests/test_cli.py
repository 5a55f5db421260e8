import json

from drsmpc.cli import main


def test_tightening_table(capsys):
    assert main(["tightening", "0.02", "0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].split()[:2] == ["0.02", "7.00000000"]
    assert out[2].split() == ["0.5", "1.00000000", "0.00000000"]


def test_simulate_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T": 20, "quantile_samples": 20000}))
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "trajectories.csv").read_text().splitlines()) == 22
    data = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert data["seed"] == 3 and data["x0"] == [10.0, 0.0]


def test_monte_carlo_and_conservatism(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"T": 20, "quantile_samples": 20000}))
    assert main(["monte-carlo", "--config", str(cfg), "--runs", "3", "--mode", "dr",
                 "--out", str(tmp_path)]) == 0
    mc = json.loads((tmp_path / "monte_carlo.json").read_text())
    assert mc["runs"] == 3 and mc["mode"] == "dr"
    capsys.readouterr()
    assert main(["conservatism", "--config", str(cfg), "--mode", "gaussian", "--stage", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["stage"] == 2 and rep["value"] >= 0
    assert main(["conservatism", "--stage", "9"]) == 2
