import json
import math

import pytest

from chatterlab.cli import main, parse_grid
from chatterlab.errors import ConfigError


def test_parse_decade_grid():
    grid = parse_grid("1e-1:1e-4:decade")
    assert grid == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4])


def test_parse_integer_range():
    assert parse_grid("2:6") == [2, 3, 4, 5, 6]


def test_parse_comma_list():
    assert parse_grid("0.5,0.25,0.125") == [0.5, 0.25, 0.125]


def test_parse_rejects_garbage():
    for bad in ("", "a,b", "1e-1:3e-4:decade", "1:2:3:4"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_missing_subcommand_exits_with_config_code(capsys):
    assert main([]) == 2


def test_empty_epsilon_grid_is_config_error(tmp_path):
    code = main(["tv-path", "--eps", ",", "--out", str(tmp_path)])
    assert code == 2


def test_fuller_synthesize_outputs(tmp_path):
    code = main(["fuller-synthesize", "--x0", "1,0", "--tol", "1e-10",
                 "--out", str(tmp_path)])
    assert code == 0
    csv_path = tmp_path / "fuller-synthesize.csv"
    manifest_path = tmp_path / "fuller-synthesize-manifest.json"
    assert csv_path.exists() and manifest_path.exists()
    manifest = json.loads(manifest_path.read_text())
    results = manifest["results"]
    assert 0.40 < results["zeta"] < 0.50
    assert 0.0 < results["rho"] < 1.0
    assert results["t_star"] > 0.0
    assert results["j_star"] > 0.0
    # the cascade-replacement error is bounded by the recorded tail cost,
    # which scales like the 5/2 power of the truncation radius
    assert 0.0 <= results["tail_cost"] <= results["truncation_radius"] ** 2
    header = csv_path.read_text().splitlines()[0]
    assert header == "param,cost_gap,sup_dev,l1_dev,tv,wall_ms"


def test_tv_path_monotone_columns(tmp_path):
    code = main(["tv-path", "--eps", "1e-1:1e-4:decade", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "tv-path.csv").read_text().splitlines()[1:]
    data = [[float(v) for v in row.split(",")] for row in rows]
    eps = [d[0] for d in data]
    tv_col = [d[4] for d in data]
    gap_col = [d[1] for d in data]
    assert eps == sorted(eps)
    # epsilon ascending: total variation falls, running-cost gap rises
    assert all(b <= a for a, b in zip(tv_col, tv_col[1:]))
    assert all(b >= a for a, b in zip(gap_col, gap_col[1:]))
    manifest = json.loads((tmp_path / "tv-path-manifest.json").read_text())
    assert all(manifest["results"]["laws"].values())


def test_config_file_with_flag_override(tmp_path):
    cfg = {"experiment": "tv-path", "x0": [1.0, 0.0],
           "eps": [1e-1, 1e-2], "out": str(tmp_path / "ignored")}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "actual"
    code = main(["tv-path", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    assert (out / "tv-path.csv").exists()
    manifest = json.loads((out / "tv-path-manifest.json").read_text())
    assert manifest["config"]["eps"] == [1e-1, 1e-2]


def test_config_file_must_be_valid_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["tv-path", "--config", str(bad)]) == 2


def test_zeno_rate_needs_model_grid(tmp_path):
    code = main(["zeno-rate", "--model", "water-tank", "--n", "2:3",
                 "--out", str(tmp_path)])
    assert code == 2  # fewer than 5 usable depths


def test_zeno_rate_bouncing_ball_runs(tmp_path):
    code = main(["zeno-rate", "--model", "bouncing-ball", "--n", "2:8",
                 "--out", str(tmp_path)])
    assert code == 0
    manifest = json.loads((tmp_path / "zeno-rate-manifest.json").read_text())
    assert not manifest["results"]["linear_rate_asserted"]
    assert manifest["results"]["tau_inf"] == pytest.approx(4.242640687119285,
                                                           rel=1e-9)


def test_corollary_check_bound_holds(tmp_path):
    code = main(["corollary-check", "--eps", "1e-1:1e-5:decade",
                 "--out", str(tmp_path)])
    assert code == 0
    manifest = json.loads((tmp_path / "corollary-check-manifest.json").read_text())
    assert manifest["results"]["bound_holds_everywhere"]
    rows = (tmp_path / "corollary-check.csv").read_text().splitlines()[1:]
    for row in rows:
        vals = [float(v) for v in row.split(",")]
        assert vals[1] <= vals[3] * (1.0 + 1e-9)  # gap <= bound column


def test_truncation_rate_defaults(tmp_path):
    code = main(["truncation-rate", "--out", str(tmp_path)])
    assert code == 0
    manifest = json.loads((tmp_path / "truncation-rate-manifest.json").read_text())
    res = manifest["results"]
    assert res["fitted_exponent"] >= 0.4
    assert res["tail_tv_budget_ok"]
    assert all(res["monotone"].values())


def test_model_params_reach_the_builder(tmp_path):
    cfg = {"experiment": "zeno-rate", "model": "bouncing-ball",
           "n": [2, 3, 4, 5, 6, 7, 8],
           "model_params": {"restitution": 0.4, "max_events": 20}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code = main(["zeno-rate", "--config", str(cfg_path), "--out", str(tmp_path)])
    assert code == 0
    manifest = json.loads((tmp_path / "zeno-rate-manifest.json").read_text())
    # drop from rest at height 1 with restitution c: tau_inf = sqrt(2)(1+c)/(1-c)
    expected = math.sqrt(2.0) * (1.0 + 0.4) / (1.0 - 0.4)
    assert manifest["results"]["tau_inf"] == pytest.approx(expected, rel=1e-9)


def test_unknown_model_param_is_config_error(tmp_path):
    cfg = {"experiment": "zeno-rate", "model": "bouncing-ball",
           "n": [2, 3, 4, 5, 6, 7, 8], "model_params": {"bounciness": 2}}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["zeno-rate", "--config", str(cfg_path),
                 "--out", str(tmp_path)]) == 2
