import json
from pathlib import Path

import pytest

from hotmrac.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    summary = json.loads(out.out.strip().splitlines()[-1])
    return code, summary, out.err


def test_simulate_matched(capsys, tmp_path):
    code, summary, err = _run(capsys, "simulate", "--config", CONFIGS / "scalar_matched.json", "--out", tmp_path / "t.csv")
    assert code == 0 and summary["e_final"] <= 1e-12
    assert "terminal |e|" in err


def test_simulate_scalar_acceptance(capsys, tmp_path):
    code, summary, _ = _run(capsys, "simulate", "--config", CONFIGS / "scalar_gd.json", "--out", tmp_path / "t.csv")
    assert code == 0 and summary["e_final"] < 1e-6
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 1001


def test_simulate_rejects_gd_gamma_three(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, summary, _ = _run(capsys, "simulate", "--config", CONFIGS / "scalar_gd.json", "--set", "law.gamma=3",
                            "--out", out)
    assert code == 3 and summary["error"] == "gains"
    assert not out.exists()


def test_simulate_unknown_override(capsys, tmp_path):
    code, summary, _ = _run(capsys, "simulate", "--config", CONFIGS / "scalar_gd.json", "--set", "law.eta=1",
                            "--out", tmp_path / "t.csv")
    assert code == 2 and summary["error"] == "config"


def test_simulate_bad_json(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, summary, _ = _run(capsys, "simulate", "--config", bad, "--out", tmp_path / "t.csv")
    assert code == 2


def test_simulate_fail_fast_ok(capsys, tmp_path):
    code, summary, _ = _run(capsys, "simulate", "--config", CONFIGS / "sine3_hot.json", "--fail-fast",
                            "--set", "horizon=500", "--out", tmp_path / "t.csv")
    assert code == 0 and summary["violations"] == 0


def test_simulate_divergence_exit(capsys, tmp_path, monkeypatch):
    import hotmrac.cli as cli
    from hotmrac.exceptions import DivergenceError

    def boom(cfg, **kw):
        raise DivergenceError(12)

    monkeypatch.setattr(cli, "simulate_config", boom)
    code, summary, _ = _run(capsys, "simulate", "--config", CONFIGS / "scalar_gd.json", "--out", tmp_path / "t.csv")
    assert code == 4 and summary["step"] == 12


def test_montecarlo_degenerate(capsys, tmp_path):
    code, summary, err = _run(capsys, "montecarlo", "--config", CONFIGS / "shortperiod_gd.json", "--trials", 1,
                              "--set", "montecarlo.low=1", "--set", "montecarlo.high=1", "--set", "horizon=200",
                              "--out", tmp_path / "s.csv")
    assert code == 0 and summary["diverged"] == 0 and summary["e_mean_final"] <= 1e-12
    assert "0 diverged" in err


def test_montecarlo_seed_repeat_is_byte_identical(capsys, tmp_path):
    args = ["montecarlo", "--config", CONFIGS / "shortperiod_hot.json", "--trials", 6, "--seed", 11,
            "--set", "horizon=300"]
    _run(capsys, *args, "--out", tmp_path / "a.csv")
    _run(capsys, *args, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    _run(capsys, *args[:-3], 12, *args[-2:], "--out", tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_region_smoke(capsys, tmp_path):
    code, summary, _ = _run(capsys, "region", "--grid", "3x3x3", "--out", tmp_path / "g.csv")
    assert code == 0 and summary["points"] == 9
    assert len((tmp_path / "g.csv").read_text().splitlines()) == 10


def test_region_resolution_flag(capsys, tmp_path):
    code, summary, _ = _run(capsys, "region", "--config", CONFIGS / "region_default.json", "--grid", "11x6x21",
                            "--out", tmp_path / "g.csv")
    assert code == 0 and len((tmp_path / "g.csv").read_text().splitlines()) == 67
    assert summary["proposition"] <= summary["allowable"]


@pytest.mark.parametrize("grid", ["3x3", "1x3x3", "axbxc"])
def test_region_bad_grid(capsys, tmp_path, grid):
    code, _, _ = _run(capsys, "region", "--grid", grid, "--out", tmp_path / "g.csv")
    assert code == 2


@pytest.mark.parametrize(
    "argv, code, violation",
    [
        (["--law", "gd", "--gamma", "1", "--mu", "1"], 0, None),
        (["--law", "hot", "--gamma", "0.5", "--beta", "0.5"], 0, None),
        (["--law", "hot", "--gamma", "2", "--beta", "1", "--mode", "proposition"], 3,
         "gamma < sqrt((2 - beta) / beta)"),
        (["--law", "hot", "--gamma", "2", "--beta", "1", "--mode", "extended-region"], 3, "gamma * beta < 1"),
        (["--law", "hot", "--gamma", "1.5", "--beta", "0.6", "--mode", "extended-region"], 0, None),
    ],
)
def test_check_gains(capsys, argv, code, violation):
    got, summary, _ = _run(capsys, "check-gains", *argv)
    assert got == code and summary["violation"] == violation


def test_check_gains_prints_alpha(capsys):
    _, summary, err = _run(capsys, "check-gains", "--law", "hot", "--gamma", "0.5", "--beta", "0.5")
    assert summary["alpha"] == pytest.approx(0.8182, abs=5e-5)
    assert "alpha = 0.818182" in err


def test_check_gains_from_config(capsys):
    code, summary, _ = _run(capsys, "check-gains", "--config", CONFIGS / "shortperiod_hot_extended.json")
    assert code == 0 and summary["d_min"] > 0
