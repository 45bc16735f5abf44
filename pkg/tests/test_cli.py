import json
import math
from pathlib import Path

import pytest
import yaml

from nevlab.catalog import FUNCTIONS, SURFACE_SPECS, list_catalog
from nevlab.cli import main
from nevlab.config import bundled_example, from_mapping, load_config
from nevlab.errors import ConfigError
from nevlab.report import dumps, rows_csv, run_experiment, write_outputs


def write_cfg(tmp_path, **kw):
    p = tmp_path / "exp.cfg"
    p.write_text(yaml.safe_dump(kw))
    return p


def test_catalog_listing(capsys):
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert sum(l.startswith("surface") for l in out) >= 3
    assert sum(l.startswith("function") for l in out) >= 6


def test_catalog_filter(capsys):
    assert main(["catalog", "disc"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all("disc" in l.split()[1] for l in out)
    assert main(["catalog", "no-such-thing"]) == 0
    assert capsys.readouterr().out == ""


def test_catalog_deterministic():
    assert list_catalog() == list_catalog()
    assert len(FUNCTIONS) >= 6 and len(SURFACE_SPECS) >= 3


def test_config_defaults_from_catalog():
    cfg = from_mapping({"function": "exp"})
    assert cfg.surface == "euclidean-plane" and cfg.r0 == 1.0
    assert cfg.gamma == "constant-one"
    cfg = from_mapping({"function": "spiral"})
    assert cfg.gamma == "inverse-gap"


@pytest.mark.parametrize("raw,field,msg", [
    ({"function": "exp", "r0": 6.0, "r_min": 5.0}, "r0", "r0 must precede grid"),
    ({"function": "exp", "bogus": 1}, "bogus", "unknown key"),
    ({"function": "exp", "targets": [0, 0.0]}, "targets", "not distinct"),
    ({"function": "exp", "delta": 0}, "delta", "positive"),
    ({"function": "exp", "checks": ["fmt", "magic"]}, "checks", "unknown check"),
    ({"function": "spiral", "r_max": 1.2}, "r_max", "usable radius"),
    ({"function": "rational{num:[1,0]"}, "function", ""),
    ({"function": "exp", "grid_points": "many"}, "grid_points", "expected int"),
    ({"surface": "euclidean-plane"}, "function", "required"),
])
def test_config_errors_name_field(raw, field, msg):
    with pytest.raises(ConfigError) as exc:
        from_mapping(raw)
    assert exc.value.field == field
    assert msg in str(exc.value)


def test_grid_ratio():
    cfg = from_mapping({"function": "exp", "grid_points": None, "grid_ratio": 1.1,
                        "r_min": 5.0, "r_max": 60.0})
    g = cfg.grid()
    assert g[0] == 5.0 and g[-1] == pytest.approx(60.0) and g[1] / g[0] <= 1.1


def test_bundled_examples_present():
    assert bundled_example("exp-on-plane") is not None
    assert bundled_example("examples/moebius-exhausted-disc.cfg") is not None
    assert load_config("examples/exp-on-plane.cfg").checks == ["fmt", "smt", "defects"]


def test_run_bad_config_exits_one(tmp_path, capsys):
    p = write_cfg(tmp_path, function="exp", r0=6.0, r_min=5.0)
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "r0 must precede grid" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_run_exp_example(tmp_path):
    out = tmp_path / "exp"
    assert main(["run", "--config", "examples/exp-on-plane.cfg", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["verdicts"]["defects"]["sum"] - 2.0) <= 0.05
    assert set(rep["verdicts"]) == {"fmt", "smt", "defects"}
    # byte-identical round trip
    text = (out / "report.json").read_text()
    assert dumps(json.loads(text)) == text
    head = (out / "rows.csv").read_text().splitlines()[0].split(",")
    assert head[:4] == ["r", "T_ahlfors", "T_green", "T_ricci"]
    assert head[4:7] == ["m_0", "N_0", "Nbar_0"]
    for svg in ("characteristics.svg", "defect_ratios.svg", "smt_slack.svg"):
        assert (out / svg).read_text().startswith("<svg")


def test_run_moebius_exhausted_disc(tmp_path):
    out = tmp_path / "moeb"
    assert main(["run", "--config", "examples/moebius-exhausted-disc.cfg", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["surface"]["classification"] == "parabolic"
    assert rep["verdicts"]["fmt"]["passed"] and rep["verdicts"]["chart"]["passed"]


def test_rows_reproducible(tmp_path):
    cfg = from_mapping({"function": "identity", "checks": ["fmt"], "grid_points": 6})
    a = rows_csv(run_experiment(cfg).rows, cfg.targets)
    b = rows_csv(run_experiment(cfg).rows, cfg.targets)
    assert a == b


def test_verify_single_check(tmp_path, capsys):
    p = write_cfg(tmp_path, function="identity", checks=["fmt", "smt"], grid_points=6,
                  out=str(tmp_path / "v"))
    assert main(["verify", "--check", "fmt", "--config", str(p)]) == 0
    rep = json.loads((tmp_path / "v" / "report.json").read_text())
    assert list(rep["verdicts"]) == ["fmt"]


def test_failing_verdict_exits_two(tmp_path):
    # an absurd FMT bound cannot be met
    p = write_cfg(tmp_path, function="exp", checks=["fmt"], grid_points=6, fmt_bound=0.0,
                  out=str(tmp_path / "f"))
    assert main(["run", "--config", str(p)]) == 2


def test_all_checks_run_in_order(tmp_path):
    cfg = from_mapping({"function": "moebius", "grid_points": 6,
                        "checks": ["oracle", "borel", "calculus", "defects", "smt-curvature",
                                   "smt", "fmt"],
                        "oracle_paths": 300, "oracle_radius": 0.5})
    rep = run_experiment(cfg)
    assert list(rep.verdicts) == ["fmt", "smt", "smt-curvature", "defects", "calculus", "borel",
                                  "oracle"]
    assert rep.oracle["n_paths"] == 300
    files = write_outputs(rep, cfg, tmp_path / "all")
    assert "smt-curvature_slack.svg" in files
