import json
import math
import os
import subprocess
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

import muplab

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def test_layer_plan_mup():
    std, lr = muplab.layer_plan("mup", 3, 3072, 4096, 0.1)
    assert len(std) == 4 and len(lr) == 4
    assert math.isclose(std[0], math.sqrt(2 / 3072))
    assert math.isclose(std[3], math.sqrt(2) / 4096)
    assert math.isclose(lr[0], 0.1 * 4096 / 3072)
    assert math.isclose(lr[3], 0.1 / 4096)


def test_bad_scheme_raises_value_error():
    with pytest.raises(ValueError):
        muplab.layer_plan("mupp", 3, 4, 4, 0.1)


def test_activation_and_suite():
    v, d1, _ = muplab.activation("silu", 0.0)
    assert v == 0.0 and d1 == 0.5
    assert "gelu" in muplab.activation_names()
    assert muplab.good_suite("tanh", trials=20)["all_passed"]


def test_diagnostics_on_arrays():
    import numpy as np

    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 40))
    assert muplab.feature_change(2 * a, a) == pytest.approx(1.0)
    assert muplab.min_eig(a) > 0
    assert abs(muplab.spacetime_min_eig(a, a)) < 1e-9
    ok, msgs = muplab.check_dataset([[1.0, 0.0], [1.0, 1.0], [1.0, -1.0]], 1e-12)
    assert not ok and msgs


def test_train_small_run():
    config = {
        "depth": 2,
        "steps": 20,
        "snapshot_steps": [0, 20],
        "metrics": ["feature_change"],
        "dataset": {"kind": "synthetic", "d": 8, "m": 4, "seed": 1},
    }
    out = muplab.train(config, scheme="mup", width=32, seed=42)
    assert len(out["loss"]) == 20
    assert out["final_loss"] < out["loss"][0]
    assert any(r["metric"] == "feature_change" for r in out["metrics"])


def test_sweep_csv_deterministic():
    config = {"depth": 2, "widths": [8], "seeds": [42], "steps": 3, "snapshot_steps": [0, 3],
              "dataset": {"kind": "synthetic", "d": 6, "m": 3}}
    a = muplab.sweep_csv(config)
    assert a == muplab.sweep_csv(json.dumps(config), workers=2)
    assert a.startswith("run_id,scheme,width,seed,layer,kind,metric,step,value\n")


def test_infwidth_fixture():
    config = json.loads((FIXTURES / "small_infwidth.json").read_text())
    config["particles"] = 5000
    out = muplab.infwidth(config)
    assert len(out["f"]) == config["steps"] + 1
    assert out["f"][0] == [0.0] * 4
    assert out["chi"][0] == [-2.0 * y for y in (1.0, -1.0, 1.0, -1.0)]


def test_cli_exit_codes():
    code, out, _ = muplab.cli(["check-dataset", "--config", str(FIXTURES / "colliding_triple.json")])
    assert code == 1 and "xi_" in out
    code, _, _ = muplab.cli(["sweep", "--config", "missing.json"])
    assert code == 1


def test_plot_is_well_formed_xml(tmp_path):
    config = {"schemes": ["sp", "mup"], "widths": [8, 16, 32], "seeds": [42], "depth": 2,
              "steps": 3, "snapshot_steps": [0, 3], "metrics": ["feature_change"],
              "dataset": {"kind": "synthetic", "d": 6, "m": 3}}
    csv = tmp_path / "metrics.csv"
    csv.write_text(muplab.sweep_csv(config))
    code, _, err = muplab.cli(["plot", "--csv", str(csv), "--out", str(tmp_path)])
    assert code == 0, err
    svg = tmp_path / "plot_feature_change_l2_pre.svg"
    root = ET.parse(svg).getroot()
    ns = "{http://www.w3.org/2000/svg}"
    lines = root.findall(f".//{ns}polyline")
    assert len(lines) == 2
    for line in lines:
        assert len(line.get("points").split()) == 3


@pytest.mark.skipif("MUPLAB_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_infwidth(tmp_path):
    res = subprocess.run([os.environ["MUPLAB_CLI"], "infwidth", "--config",
                          str(FIXTURES / "small_infwidth.json"), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "trajectory.csv").read_text().startswith("step,sample_id,f_ring,chi_ring")
