"""Self-contained analytic-identity and oracle-equivalence check suite.

Runs the fast cross-checks that pin the numerical core to independent
ground truths: closed-form GF identities, Weyl completeness, the imaging
kernel's two evaluation paths, the plane-wave decomposition of Im G0, the
brute-force/factorized rate equivalence, the exact plane-wave-pump
background cutoff, and the two background evaluation paths.  Intended to
finish in about a minute on a laptop-class machine.
"""

import numpy as np

from .engine import (ChiTensor, DetectorGrid, EngineContext, PumpField,
                     QuadratureSettings, SpdcScenario, derive_lambda_s,
                     rate_background, rate_ic_brute, rate_ic_fast)
from .greens import (AngularFilter, PropagatingKernel, g0_closed_form,
                     g0_imag, g_signal_imaging, weyl_g0)
from .quadrature import sphere_directions
from .scatterer import NanoParticle

DIPA_EPS = 1.9763 + 0.39124j


def _coarse_scenario(theta_min=0.0, particles=None, pixels=6, profile="gaussian"):
    lam_i = 3370.0
    lam_s = derive_lambda_s(500.0, lam_i)
    if particles is None:
        particles = (NanoParticle(center_um=(0.0, 0.0, 0.01), radius_nm=5.0,
                                  epsilon=DIPA_EPS),)
    return SpdcScenario(
        pump=PumpField(wavelength_nm=500.0, waist_um=5.0, profile=profile),
        chi=ChiTensor({"xxx": 1.0}),
        lambda_s_nm=lam_s, lambda_i_nm=lam_i, particles=particles,
        grid=DetectorGrid(extent_um=1.5, pixels=pixels),
        filter=AngularFilter(theta_min_deg=theta_min),
        quadrature=QuadratureSettings.coarse())


def check_coincidence():
    k = 2 * np.pi / 0.587
    gi = g0_imag([0.3, -1.2, 4.0], [0.3, -1.2, 4.0], k)
    err = max(np.max(np.abs(np.diag(gi) - k / (6 * np.pi))),
              np.max(np.abs(gi - np.diag(np.diag(gi)))))
    return err < 1e-12, f"max deviation {err:.2e} (tol 1e-12)"


def check_reciprocity():
    k = 2 * np.pi / 0.587
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        r, rp = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        g1 = g0_closed_form(r, rp, k)
        g2 = g0_closed_form(rp, r, k)
        worst = max(worst, np.max(np.abs(g1 - g2.T)) / np.max(np.abs(g1)))
    r = np.array([0.4, -0.3, 0.35])
    rp = np.array([-0.2, 0.5, -0.25])
    gw1 = weyl_g0(r, rp, k, include_evanescent=True)
    gw2 = weyl_g0(rp, r, k, include_evanescent=True)
    worst = max(worst, np.max(np.abs(gw1 - gw2.T)) / np.max(np.abs(gw1)))
    return worst < 1e-10, f"max relative asymmetry {worst:.2e} (tol 1e-10)"


def check_weyl_completeness(n_pairs=8):
    k = 2 * np.pi / 0.587
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(n_pairs):
        delta = np.concatenate([rng.uniform(-0.8, 0.8, 2),
                                rng.uniform(0.12, 0.9, 1) * rng.choice([-1, 1])])
        r, rp = delta, np.zeros(3)
        gw = weyl_g0(r, rp, k, include_evanescent=True)
        gc = g0_closed_form(r, rp, k)
        worst = max(worst, np.max(np.abs(gw - gc)) / np.max(np.abs(gc)))
    return worst < 1e-4, f"max relative error {worst:.2e} over {n_pairs} pairs (tol 1e-4)"


def check_imag_consistency():
    k = 2 * np.pi / 0.587
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10):
        r, rp = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
        worst = max(worst, np.max(np.abs(g0_imag(r, rp, k)
                                         - g0_closed_form(r, rp, k).imag)))
    return worst < 1e-12, f"max abs deviation {worst:.2e} (tol 1e-12)"


def check_kernel_table():
    k = 2 * np.pi / 0.587
    tab = PropagatingKernel(k, rho_max=6.0)
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(6):
        dx, dy = rng.uniform(-4, 4, 2)
        gt = tab.tensor(np.array(dx), np.array(dy))
        gd = g_signal_imaging([dx, dy, 0.0], [0.0, 0.0, 0.0], k)
        worst = max(worst, np.max(np.abs(gt - gd)))
    scale = k / (6 * np.pi)
    return worst / scale < 1e-6, f"max deviation {worst:.2e} ({worst/scale:.2e} of k/6pi)"


def check_mode_decomposition():
    k = 2 * np.pi / 3.37
    khat, w = sphere_directions(48, 48)
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(5):
        d = rng.uniform(-1.5, 1.5, 3)
        M = np.eye(3)[None, :, :] - khat[:, :, None] * khat[:, None, :]
        ph = np.exp(1j * k * (khat @ d))
        rec = (k / (16 * np.pi**2)) * np.einsum("n,nij,n->ij", w, M, ph)
        worst = max(worst, np.max(np.abs(rec.real - g0_imag(d, np.zeros(3), k))))
    return worst < 1e-10, f"max abs deviation {worst:.2e} (tol 1e-10)"


def check_oracle_equivalence():
    s = _coarse_scenario()
    ctx = EngineContext(s)
    fast = rate_ic_fast(s, context=ctx)
    brute = rate_ic_brute(s, context=ctx)
    rel = np.max(np.abs(fast.values - brute.values)) / fast.values.max()
    resid = brute.meta["imag_residual"]
    ok = rel < 1e-6 and resid < 1e-10
    return ok, f"fast/brute rel {rel:.2e} (tol 1e-6), imag residual {resid:.2e}"


def check_planewave_cutoff():
    s0 = _coarse_scenario(theta_min=0.0, particles=(), pixels=3, profile="plane-wave")
    v0 = rate_background(s0).values[0, 0]
    s1 = _coarse_scenario(theta_min=10.5, particles=(), pixels=3, profile="plane-wave")
    v1 = rate_background(s1).values[0, 0]
    ok = v0 > 0 and v1 <= 1e-6 * v0
    return ok, f"R0(10.5 deg)/R0(0) = {v1/v0:.2e} (tol 1e-6)"


def check_background_paths():
    lam_i = 3370.0
    lam_s = derive_lambda_s(500.0, lam_i)
    s = SpdcScenario(
        pump=PumpField(wavelength_nm=500.0, waist_um=1.5),
        chi=ChiTensor({"xxx": 1.0}), lambda_s_nm=lam_s, lambda_i_nm=lam_i,
        grid=DetectorGrid(extent_um=1.0, pixels=4),
        filter=AngularFilter(theta_min_deg=6.0),
        quadrature=QuadratureSettings(background_n=96, idler_n_polar=48,
                                      idler_n_azimuth=48))
    ctx = EngineContext(s)
    d = rate_background(s, method="direct", context=ctx).values
    kk = rate_background(s, method="kspace", context=ctx).values
    rel = np.max(np.abs(d - kk)) / d.max()
    return rel < 1e-3, f"direct vs k-space rel {rel:.2e} (tol 1e-3)"


CHECKS = [
    ("coincidence-ldos", check_coincidence),
    ("reciprocity", check_reciprocity),
    ("weyl-completeness", check_weyl_completeness),
    ("imag-part-consistency", check_imag_consistency),
    ("imaging-kernel-paths", check_kernel_table),
    ("imG0-mode-decomposition", check_mode_decomposition),
    ("oracle-equivalence", check_oracle_equivalence),
    ("planewave-cutoff", check_planewave_cutoff),
    ("background-paths", check_background_paths),
]


def run_verification(print_lines=False):
    """Run every check; returns [(name, passed, detail)]."""
    results = []
    for name, fn in CHECKS:
        ok, detail = fn()
        results.append((name, bool(ok), detail))
        if print_lines:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return results
