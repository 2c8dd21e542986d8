import numpy as np
import pytest

from spdc_nearfield.engine import PumpField
from spdc_nearfield.errors import ConfigError
from spdc_nearfield.rates import AbsoluteScenario, dipa_epsilon, total_rate


def small_scn(**kw):
    kw.setdefault("particle_radius_nm", 5.0)
    kw.setdefault("band_points", 5)
    kw.setdefault("n_polar", 12)
    kw.setdefault("n_azimuth", 24)
    kw.setdefault("mesh_scale", 0.5)
    kw.setdefault("mesh_radial", 8)
    kw.setdefault("mesh_phi_cap", 96)
    return AbsoluteScenario(**kw)


def test_dipa_table_pinned_at_line_center():
    eps = dipa_epsilon(3.37)
    assert abs(eps - (1.9763 + 0.39124j)) < 1e-6


def test_dipa_table_rejects_out_of_range():
    with pytest.raises(ConfigError):
        dipa_epsilon(5.0)


def test_zero_pump_power_gives_zero_rate():
    scn = small_scn(pump=PumpField(wavelength_nm=500.0, waist_um=5.0,
                                   power_mw=0.0))
    assert total_rate(scn)["total_rate_per_s"] == 0.0


def test_rate_exactly_linear_in_pump_power():
    r100 = total_rate(small_scn())["total_rate_per_s"]
    scn2 = small_scn(pump=PumpField(wavelength_nm=500.0, waist_um=5.0,
                                    power_mw=200.0))
    r200 = total_rate(scn2)["total_rate_per_s"]
    assert abs(r200 - 2.0 * r100) < 1e-12 * r200


def test_band_additivity_exact_on_aligned_grids():
    lo = total_rate(small_scn(band_nm=(577.0, 584.0), band_points=5))
    hi = total_rate(small_scn(band_nm=(584.0, 591.0), band_points=5))
    full = total_rate(small_scn(band_nm=(577.0, 591.0), band_points=9))
    s = lo["total_rate_per_s"] + hi["total_rate_per_s"]
    assert abs(full["total_rate_per_s"] - s) < 1e-12 * s


def test_spectral_increments_nonnegative():
    rep = total_rate(small_scn(band_points=9))
    assert all(d >= 0 for d in rep["spectral_density_per_s_per_radps"])


def test_cubic_radius_scaling_at_equal_center_distance():
    # equal center height: gap + a = 15 nm for both radii
    r5 = total_rate(small_scn(particle_radius_nm=5.0, surface_gap_nm=10.0))
    r8 = total_rate(small_scn(particle_radius_nm=8.0, surface_gap_nm=7.0))
    ratio = r8["total_rate_per_s"] / r5["total_rate_per_s"]
    assert abs(ratio - (8.0 / 5.0) ** 3) < 0.2 * (8.0 / 5.0) ** 3


def test_geometry_convention_center_height():
    scn = AbsoluteScenario(particle_radius_nm=50.0, surface_gap_nm=5.0)
    assert abs(scn.center_height_um - 0.055) < 1e-15


def test_report_carries_constants():
    rep = total_rate(small_scn())
    c = rep["constants"]
    assert c["chi2_pm_per_v"] == pytest.approx(141.2)
    assert c["collection"] == "both-half-spaces"
    assert "scattering_strength_convention" in c
    assert len(rep["spectral_density_per_s_per_radps"]) == 5
