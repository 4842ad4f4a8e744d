import json

import numpy as np
import pytest

from holocollapse.cli import main
from holocollapse.metricspace import FiniteMetricSpace


def run(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_catalog(capsys, tmp_path):
    code, out, _ = run(["catalog", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert all(name in out for name in ["FlatSphere", "HopfLike", "HalfTorus", "AbelianInSU2"])
    doc = json.loads((tmp_path / "catalog.json").read_text())
    assert doc["schemaVersion"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "catalog" and manifest["exitStatus"] == 0


@pytest.mark.parametrize("name,tag", [("FlatSphere", "Trivial"), ("HopfLike", "Full")])
def test_holonomy(name, tag, capsys, tmp_path):
    code, out, _ = run(["holonomy", "--scenario", name, "--sample-count", "40", "--loop-count", "8",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and tag in out
    doc = json.loads((tmp_path / "holonomy.json").read_text())
    assert doc["identifiedSubgroup"] == tag


def test_usage_errors(capsys, tmp_path):
    assert run(["holonomy"], capsys)[0] == 2
    assert run(["holonomy", "--scenario", "Klein"], capsys)[0] == 2
    assert run(["cc-diam", "--scenario", "FlatSphere", "--net-count", "0"], capsys)[0] == 2
    assert run(["collapse-verify", "--scenario", "FlatSphere", "--schedule", "1,2"], capsys)[0] == 2
    assert run(["holonomy", "--scenario", "FlatSphere", "--config", str(tmp_path / "missing.ini")], capsys)[0] == 2


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nscenario = FlatSphere\n[holonomy]\nsample_count = 30\nloop_count = 4\n")
    code, out, _ = run(["holonomy", "--config", str(cfg)], capsys)
    assert code == 0 and "Trivial" in out
    bad = tmp_path / "bad.ini"
    bad.write_text("[holonomy]\nsamples = 3\n")
    code, _, err = run(["holonomy", "--scenario", "FlatSphere", "--config", str(bad)], capsys)
    assert code == 2 and "samples" in err
    bad.write_text("[holonomy]\nsample_count = many\n")
    assert run(["holonomy", "--scenario", "FlatSphere", "--config", str(bad)], capsys)[0] == 2
    bad.write_text("[colour]\nx = 1\n")
    assert run(["holonomy", "--scenario", "FlatSphere", "--config", str(bad)], capsys)[0] == 2


def test_config_scenario_parameters(capsys, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\nscenario = HopfLike\n[scenario]\nhopf_charge = 0\n[holonomy]\nsample_count = 20\n"
                   "loop_count = 4\n")
    code, out, _ = run(["holonomy", "--config", str(cfg)], capsys)
    assert "Trivial" in out


def test_cc_diam_single_point(capsys, tmp_path):
    code, out, _ = run(["cc-diam", "--scenario", "FlatSphere", "--net-count", "1", "--fiber-count", "8",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "cc_diam.json").read_text())
    assert doc["kappa0"] == 0
    assert (tmp_path / "cc_diam.csv").read_text().splitlines()[0].startswith("netCount,kappa0")


def test_cc_diam_flat_sphere(capsys, tmp_path):
    code, out, _ = run(["cc-diam", "--scenario", "FlatSphere", "--net-count", "200", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "cc_diam.json").read_text())
    assert doc["kappa0"] == pytest.approx(np.pi, rel=0.05)
    assert doc["relativeGap"] < 0.05


def test_collapse_verify_deterministic(capsys, tmp_path):
    argv = ["collapse-verify", "--scenario", "FlatSphere", "--net-count", "40", "--fiber-count", "16"]
    code, out, _ = run(argv + ["--out", str(tmp_path / "a")], capsys)
    assert code == 0
    rows = (tmp_path / "a" / "collapse.csv").read_text().strip().splitlines()
    assert rows[0] == "f,distortion,bound,slack,netTolerance" and len(rows) == 5
    run(argv + ["--out", str(tmp_path / "b")], capsys)
    assert (tmp_path / "a" / "collapse.csv").read_bytes() == (tmp_path / "b" / "collapse.csv").read_bytes()
    ma, mb = (json.loads((tmp_path / d / "manifest.json").read_text()) for d in "ab")
    # only the output directory differs
    ma["config"].pop("out"), mb["config"].pop("out")
    assert ma == mb and ma["exitStatus"] == 0 and "timestamp" not in ma
    doc = json.loads((tmp_path / "a" / "collapse.json").read_text())
    assert doc["scenario"] == "FlatSphere" and len(doc["steps"]) == 4


def test_collapse_verify_single_step_linear(capsys):
    code, out, _ = run(["collapse-verify", "--scenario", "FlatSphere", "--net-count", "30", "--fiber-count", "16",
                        "--schedule", "1", "--scaling", "linear"], capsys)
    assert code == 0


def test_gh_oracle(capsys, tmp_path):
    FiniteMetricSpace([[0, 2], [2, 0]]).to_csv(tmp_path / "x.csv")
    FiniteMetricSpace([[0, 1], [1, 0]]).to_csv(tmp_path / "y.csv")
    FiniteMetricSpace([[0.0]]).to_csv(tmp_path / "p.csv")
    code, out, _ = run(["gh-oracle", str(tmp_path / "x.csv"), str(tmp_path / "y.csv")], capsys)
    assert code == 0 and float(out.strip()) == 0.5
    code, out, _ = run(["gh-oracle", str(tmp_path / "y.csv"), str(tmp_path / "p.csv")], capsys)
    assert float(out.strip()) == 0.5
    assert run(["gh-oracle", str(tmp_path / "x.csv")], capsys)[0] == 2
    FiniteMetricSpace(np.ones((5, 5)) - np.eye(5)).to_csv(tmp_path / "big.csv")
    assert run(["gh-oracle", str(tmp_path / "big.csv"), str(tmp_path / "p.csv")], capsys)[0] == 2
    cfg = tmp_path / "gh.ini"
    cfg.write_text(f"[gh-oracle]\nx = {tmp_path / 'x.csv'}\ny = {tmp_path / 'p.csv'}\n")
    code, out, _ = run(["gh-oracle", "--config", str(cfg)], capsys)
    assert code == 0 and float(out.strip()) == 1.0


def test_help_lists_config_keys(capsys):
    code, out, _ = run(["collapse-verify", "--help"], capsys)
    assert code == 0 and "[collapse-verify]" in out and "net_count" in out
