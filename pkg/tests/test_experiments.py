"""Experiment drivers and the command line wrapper around them."""

import json

import numpy as np
import pytest

from slowfast.errors import ConfigError
from slowfast.experiments import (
    _parse_pairs,
    _parse_x_grid,
    _validate_epsilons,
    block_scale_diagnostic,
    cli_main,
    rerun_from_manifest,
    run_averaging_convergence,
    run_l2_failure,
)
from slowfast.simulate import SimConfig


# ---------------------------------------------------------------------------
# argument parsing helpers

def test_epsilon_ladder_validation():
    assert _validate_epsilons([np.inf, 0.1, 0.03]) == [np.inf, 0.1, 0.03]
    with pytest.raises(ConfigError):
        _validate_epsilons([])
    with pytest.raises(ConfigError):
        _validate_epsilons([-0.1])
    with pytest.raises(ConfigError, match="precede"):
        _validate_epsilons([0.1, np.inf])
    with pytest.raises(ConfigError, match="decreasing"):
        _validate_epsilons([0.03, 0.1])


def test_x_grid_parsing():
    grid = _parse_x_grid("0:1:0.25")
    assert np.allclose(grid, [0.0, 0.25, 0.5, 0.75, 1.0])
    for bad in ("0:1", "1:0:0.1", "0:1:0.3", "0:1:-0.5"):
        with pytest.raises(ConfigError):
            _parse_x_grid(bad)


def test_pair_parsing():
    assert _parse_pairs("0.5,0.3;0.1,0.0") == [(0.5, 0.3), (0.1, 0.0)]
    for bad in ("0.5", ";;", "0.5,0.3,0.1"):
        with pytest.raises(ConfigError):
            _parse_pairs(bad)


# ---------------------------------------------------------------------------
# drivers

def _tiny_config(**overrides):
    base = dict(
        epsilon=0.5, dt=0.01, horizon=0.25, n_paths=128, seed=7, x0=0.5, y0=1.0
    )
    base.update(overrides)
    return SimConfig(**base)


def test_run_averaging_convergence_small(ou):
    report = run_averaging_convergence(
        ou, [np.inf, 0.5], _tiny_config(x0=0.0, y0=0.0), functionals=True
    )
    assert report.model == "ou-coupled"
    assert report.epsilons == (np.inf, 0.5)
    assert len(report.w1_terminal) == 2
    assert all(v >= 0.0 for v in report.w1_terminal)
    assert report.noise_floor > 0.0
    assert set(report.functional_gaps) == {"sin", "cos", "clip-linear", "clip-square"}
    assert all(len(v) == 2 for v in report.functional_gaps.values())
    json.dumps(report.as_dict())  # inf must serialize as the string "inf"
    assert report.as_dict()["epsilons"][0] == "inf"


def test_convergence_rejects_degenerate_model(ou):
    from dataclasses import replace

    flat = replace(
        ou,
        name="flat-sigma",
        coefficients=replace(
            ou.coefficients,
            sigma=lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape),
        ),
        analytic=None,
    )
    with pytest.raises(ConfigError, match="slow-elliptic"):
        run_averaging_convergence(flat, [0.5], _tiny_config())


def test_run_l2_failure_small():
    report = run_l2_failure(_tiny_config(x0=0.0, y0=0.0, horizon=0.5, n_paths=256), [0.1])
    # sigma = y, sigmabar = 1 under N(0,1): E (y - 1)^2 = 2, scaled by the horizon
    assert report.predicted_limit == pytest.approx(1.0, abs=1e-6)
    assert len(report.mean_square_gap) == 1
    assert report.relative_error[0] < 0.5
    assert report.w1_terminal[0] >= 0.0
    assert report.noise_floor > 0.0


def test_l2_failure_rejects_inf():
    with pytest.raises(ConfigError, match="finite"):
        run_l2_failure(_tiny_config(), [np.inf, 0.1])


def test_block_scale_diagnostic(example21):
    out = block_scale_diagnostic(example21, 0.05, _tiny_config(n_paths=32))
    assert out["epsilon"] == 0.05
    assert out["delta"] == pytest.approx(0.05 * np.log(np.log(20.0)))
    assert out["n_steps"] >= 1
    assert np.isfinite(out["mean_terminal_gap"]) and out["mean_terminal_gap"] >= 0.0
    with pytest.raises(ConfigError, match="epsilon"):
        block_scale_diagnostic(example21, 0.5, _tiny_config())


# ---------------------------------------------------------------------------
# command line

def test_cli_list_models_json(capsys):
    assert cli_main(["list-models"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in rows] == ["example21", "ou-coupled", "pure-fast-l2"]
    assert all({"name", "dim_slow", "dim_fast", "description"} <= set(r) for r in rows)


def test_cli_list_models_csv(capsys):
    assert cli_main(["list-models", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "name,dim_slow,dim_fast,description"
    assert len(lines) == 4


def test_cli_usage_error_exits_2(capsys):
    assert cli_main(["stationary", "--model", "ou-coupled"]) == 2  # missing --x
    assert cli_main(["no-such-command"]) == 2
    capsys.readouterr()


def test_cli_numerical_error_exits_3_with_diagnostic(capsys):
    assert cli_main(["classify", "--model", "nope", "--x", "0.5"]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UnknownModelError"
    assert "nope" in err["message"]


def test_cli_bad_grid_exits_3(capsys):
    assert cli_main(["averaged", "--model", "ou-coupled", "--x-grid", "0:1"]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_cli_config_file_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code = cli_main(
        ["converge", "--model", "ou-coupled", "--epsilons", "0.5", "--config", str(cfg)]
    )
    assert code == 3
    assert "bogus" in json.loads(capsys.readouterr().err)["message"]


def test_cli_artifact_and_manifest(tmp_path):
    out = tmp_path / "rho.csv"
    code = cli_main(
        ["stationary", "--model", "ou-coupled", "--x", "0.0",
         "--out", str(out), "--format", "csv", "--seed", "3"]
    )
    assert code == 0
    assert out.read_text().startswith("y,density")
    manifest = json.loads((tmp_path / "rho.csv.manifest.json").read_text())
    assert manifest["command"] == "stationary"
    assert manifest["seed"] == 3
    assert manifest["artifact_version"] == "1"
    assert manifest["params"]["model"] == "ou-coupled"
    assert manifest["params"]["x"] == 0.0
    assert "--out" in manifest["params"]["argv"]


def test_cli_l2fail_rejects_other_model(capsys):
    code = cli_main(["l2fail", "--model", "ou-coupled", "--epsilons", "0.1"])
    assert code == 3
    assert "pure-fast-l2" in json.loads(capsys.readouterr().err)["message"]


def test_cli_converge_needs_finite_anchor(capsys):
    code = cli_main(["converge", "--model", "ou-coupled", "--epsilons", "inf"])
    assert code == 3
    capsys.readouterr()


def test_rerun_from_manifest_is_bit_identical(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_paths": 64, "horizon": 0.2, "dt": 0.01, "x0": 0.0, "y0": 0.0}))
    first = tmp_path / "conv.json"
    argv = [
        "converge", "--model", "ou-coupled", "--epsilons", "0.5,0.25",
        "--config", str(cfg), "--seed", "11", "--out", str(first), "--workers", "1",
    ]
    assert cli_main(argv) == 0

    second = tmp_path / "conv-rerun.json"
    code = rerun_from_manifest(str(first) + ".manifest.json", out=str(second), workers=3)
    assert code == 0
    assert second.read_bytes() == first.read_bytes()
    # the rerun's own manifest records the overridden argv
    manifest = json.loads((tmp_path / "conv-rerun.json.manifest.json").read_text())
    assert str(second) in manifest["params"]["argv"]
    assert manifest["params"]["workers"] == 3
