import numpy as np
import pytest

from spdc_nearfield.errors import ConfigError
from spdc_nearfield.greens import (AngularFilter, PropagatingKernel,
                                   g0_closed_form, g0_imag, g_signal_imaging,
                                   weyl_g0)

K = 2 * np.pi / 0.587


def test_coincidence_imag_diagonal_exact():
    r = np.array([1.0, -2.0, 3.0])
    gi = g0_imag(r, r, K)
    assert np.max(np.abs(np.diag(gi) - K / (6 * np.pi))) == 0.0
    assert np.max(np.abs(gi - np.diag(np.diag(gi)))) == 0.0
    assert abs(np.trace(gi) - K / (2 * np.pi)) < 1e-15


def test_closed_form_rejects_coincidence():
    with pytest.raises(ConfigError):
        g0_closed_form([0, 0, 0], [0, 0, 0], K)


def test_axial_offdiagonal_vanishes():
    # separation purely along z: xz entry zero by symmetry
    g = g0_closed_form([0, 0, 10.0], [0, 0, 0.0], K)
    assert abs(g[0, 2]) < 1e-16
    assert abs(g[0, 1]) < 1e-16


def test_reciprocity_closed_form(rng):
    for _ in range(20):
        r, rp = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
        g1 = g0_closed_form(r, rp, K)
        g2 = g0_closed_form(rp, r, K)
        assert np.max(np.abs(g1 - g2.T)) <= 1e-10 * np.max(np.abs(g1))


def test_far_field_transverse_inverse_distance():
    # transverse entries halve when the distance doubles, kR > 100
    R = 12.0  # kR ~ 128
    g1 = g0_closed_form([0, 0, R], [0, 0, 0], K)
    g2 = g0_closed_form([0, 0, 2 * R], [0, 0, 0], K)
    ratio = abs(g2[0, 0]) / abs(g1[0, 0])
    assert abs(ratio - 0.5) < 0.02 * 0.5


def test_imag_part_matches_closed_form(rng):
    for _ in range(20):
        r, rp = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        gi = g0_imag(r, rp, K)
        gc = g0_closed_form(r, rp, K)
        assert np.max(np.abs(gi - gc.imag)) < 1e-12


def test_imag_decays_far_away():
    gi = g0_imag([400.0, 0, 0], [0, 0, 0], K)
    assert np.max(np.abs(gi)) < 1e-3 * K / (6 * np.pi)


def test_weyl_completeness(rng):
    # propagating + evanescent reconstruct the closed form off-plane
    worst = 0.0
    for _ in range(20):
        delta = np.array([rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                          rng.choice([-1, 1]) * rng.uniform(0.12, 0.9)])
        gw = weyl_g0(delta, np.zeros(3), K, include_evanescent=True)
        gc = g0_closed_form(delta, np.zeros(3), K)
        worst = max(worst, np.max(np.abs(gw - gc)) / np.max(np.abs(gc)))
    assert worst < 1e-4


def test_weyl_reciprocity():
    r = np.array([0.4, -0.3, 0.35])
    rp = np.array([-0.2, 0.5, -0.25])
    g1 = weyl_g0(r, rp, K, include_evanescent=True)
    g2 = weyl_g0(rp, r, K, include_evanescent=True)
    assert np.max(np.abs(g1 - g2.T)) <= 1e-10 * np.max(np.abs(g1))


def test_propagating_only_matches_closed_form_off_plane():
    # the evanescent remainder (lateral wave) decays only algebraically and
    # oscillates with the in-plane offset; at this large oblique separation
    # it sits below 1% of the tensor scale
    r = np.array([10.0, 6.0, 14.0])  # k|r| ~ 195
    gp = weyl_g0(r, np.zeros(3), K)
    gc = g0_closed_form(r, np.zeros(3), K)
    assert np.max(np.abs(gp - gc)) < 0.01 * np.max(np.abs(gc))


def test_propagating_only_carries_imag_part_in_plane():
    # at dz = 0 the propagating band carries the full imaginary part
    r = np.array([5.0, 2.0, 0.0])
    gp = g_signal_imaging(r, np.zeros(3), K)
    gc = g0_closed_form(r, np.zeros(3), K)
    assert np.max(np.abs(gp.imag - gc.imag)) < 1e-8


def test_empty_band_is_zero():
    g = g_signal_imaging([1.0, 0, 0], [0, 0, 0], K,
                         AngularFilter(30.0, 30.0))
    assert np.all(g == 0)


def test_band_additivity():
    # disjoint theta bands add to the full band
    args = ([0.7, -0.4, 0.0], [0, 0, 0], K)
    g_full = g_signal_imaging(*args, AngularFilter(0.0, 90.0))
    g_lo = g_signal_imaging(*args, AngularFilter(0.0, 25.0))
    g_hi = g_signal_imaging(*args, AngularFilter(25.0, 90.0))
    assert np.max(np.abs(g_full - g_lo - g_hi)) < 1e-10 * np.max(np.abs(g_full))


def test_filter_continuity():
    args = ([0.9, 0.2, 0.0], [0, 0, 0], K)
    base = g_signal_imaging(*args, AngularFilter(12.0, 90.0))
    for eps_deg in (0.5, 0.1):
        moved = g_signal_imaging(*args, AngularFilter(12.0 + eps_deg, 90.0))
        # difference shrinks roughly linearly with the band change
        assert np.max(np.abs(moved - base)) < 0.1 * eps_deg * np.max(np.abs(base))


def test_filter_validation():
    with pytest.raises(ConfigError):
        AngularFilter(-1.0, 90.0)
    with pytest.raises(ConfigError):
        AngularFilter(50.0, 40.0)
    with pytest.raises(ConfigError):
        AngularFilter(0.0, 90.5)


def test_imaging_kernel_requires_source_plane():
    with pytest.raises(ConfigError):
        g_signal_imaging([1.0, 0, 0], [0, 0, 0.5], K)


def test_kernel_table_matches_direct_quadrature(rng):
    scale = K / (6 * np.pi)
    for filt in (AngularFilter(), AngularFilter(14.3, 90.0)):
        tab = PropagatingKernel(K, filt, rho_max=6.0)
        for _ in range(8):
            dx, dy = rng.uniform(-4, 4, 2)
            gt = tab.tensor(np.array(dx), np.array(dy))
            gd = g_signal_imaging([dx, dy, 0.0], [0, 0, 0.0], K, filt)
            assert np.max(np.abs(gt - gd)) < 1e-6 * scale


def test_kernel_table_coincidence_value():
    tab = PropagatingKernel(K, rho_max=1.0)
    g0 = tab.tensor(np.array(0.0), np.array(0.0))
    assert abs(g0[0, 0] - 1j * K / (6 * np.pi)) < 1e-10
    assert abs(g0[0, 2]) == 0.0


def test_kernel_table_rejects_outside_radius():
    tab = PropagatingKernel(K, rho_max=2.0)
    with pytest.raises(ConfigError):
        tab.tensor(np.array(3.0), np.array(0.0))
