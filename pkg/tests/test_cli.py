import json
from pathlib import Path

import numpy as np
import pytest

from spdc_nearfield.cli import main, parse_config, run
from spdc_nearfield.errors import ConfigError

SMALL = {
    "scenario_name": "test-small",
    "detector": {"extent_um": 1.2, "pixels": 9},
    "quadrature": "coarse",
    "ldos_map": {"extent_um": 0.1, "pixels": 15},
    "ldos_sweep": {"axis": "z_alpha", "values": [10, 40, 100]},
    "fwhm_sweep": {"vary": "lambda_s", "pump_nm": [600.0, 500.0],
                   "lambda_i_nm": [3370.0]},
    "two_particle": {"axis": "x", "separation_nm": 900.0},
    "filtered_image": {"theta_filt_deg": 12.0},
    "absolute": {"radii_nm": [5.0], "surface_gap_nm": 5.0,
                 "slab_thickness_nm": 10.0, "chi2_pm_per_v": 141.2,
                 "band_nm": [577.0, 591.0], "band_points": 3},
}


def write_cfg(tmp_path, extra=None):
    cfg = dict(SMALL)
    cfg.update(extra or {})
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_paper_default_config():
    rc = parse_config(None)
    r = rc.resolved
    assert r["pump"]["lambda_nm"] == 500.0
    assert abs(r["lambda_s_nm"] - 587.108) < 0.01
    assert r["lambda_i_nm"] == 3370.0
    assert r["pump"]["waist_um"] == 5.0
    p = r["particles"][0]
    assert p["center_um"][2] == 0.01 and p["radius_nm"] == 5.0
    assert p["epsilon_re"] == 1.9763 and p["epsilon_im"] == 0.39124
    s = rc.scenario()
    assert len(s.detector_polarizations) == 3


def test_missing_lambda_derived(tmp_path):
    path = write_cfg(tmp_path, {"lambda_s_nm": None})
    rc = parse_config(path)
    assert abs(rc.resolved["lambda_s_nm"] - 587.108) < 0.01


def test_inconsistent_triple_rejected(tmp_path):
    path = write_cfg(tmp_path, {"lambda_s_nm": 587.0})
    with pytest.raises(ConfigError, match="inconsistent wavelength triple"):
        parse_config(path)


def test_unknown_config_file():
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/none.json")


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="parse error"):
        parse_config(str(p))


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["ldos-map", "--config", "/nonexistent.json",
                 "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"filter": {"theta_min_deg": 95.0, "theta_max_deg": 90.0}}')
    assert main(["ldos-map", "--config", str(bad), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("sub,artifact", [
    ("ldos-map", "ldos_map.csv"),
    ("ldos-sweep", "ldos_sweep.csv"),
    ("psf", "psf.csv"),
    ("two-particle", "two_particle.csv"),
    ("filtered-image", "filtered_image.csv"),
    ("total-rate", "total_rate.json"),
])
def test_subcommands_produce_artifacts(tmp_path, sub, artifact):
    cfg = write_cfg(tmp_path)
    rc = parse_config(cfg)
    paths = run(sub, rc, tmp_path / "out")
    produced = {p.name for p in paths}
    assert artifact in produced
    for p in paths:
        assert p.exists()
        side = Path(str(p) + ".meta.json")
        assert side.exists()
        meta = json.loads(side.read_text())
        assert meta["config_hash"] == rc.hash
        assert "wall_time_s" in meta
        if p.suffix == ".csv":
            head = p.read_text().splitlines()
            assert head[0].startswith("#")
            assert any(rc.hash in line for line in head[:6])


def test_csv_bitwise_determinism(tmp_path):
    cfg = write_cfg(tmp_path)
    rc = parse_config(cfg)
    run("psf", rc, tmp_path / "a")
    run("psf", rc, tmp_path / "b")
    for name in ("psf.csv", "psf_cut_x.csv", "psf_cut_y.csv"):
        assert (tmp_path / "a" / name).read_bytes() \
            == (tmp_path / "b" / name).read_bytes()


def test_thread_count_invariance(tmp_path):
    cfg = write_cfg(tmp_path)
    rc = parse_config(cfg)
    run("fwhm-sweep", rc, tmp_path / "t1", threads=1)
    run("fwhm-sweep", rc, tmp_path / "t3", threads=3)
    a = (tmp_path / "t1" / "fwhm_sweep.csv").read_text().splitlines()
    b = (tmp_path / "t3" / "fwhm_sweep.csv").read_text().splitlines()
    assert a == b  # ordered reduction: identical values regardless of pool size


def test_json_format_output(tmp_path):
    cfg = write_cfg(tmp_path)
    rc = parse_config(cfg)
    paths = run("ldos-sweep", rc, tmp_path / "j", fmt="json")
    payload = json.loads(paths[0].read_text())
    assert payload["columns"][0] == "z_alpha_nm"
    assert len(payload["rows"]) == 3


def test_fast_preset_flag(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "flag"
    assert main(["ldos-sweep", "--config", cfg, "--out", str(out),
                 "--fast"]) == 0
    meta = json.loads((out / "ldos_sweep.csv.meta.json").read_text())
    assert meta["config"]["quadrature"] == "fast"