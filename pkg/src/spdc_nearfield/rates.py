"""Absolute signal-photon generation rates for a thin nonlinear slab.

Dimensionful version of the rate integral, assembled from the canonical
nonlinear-optics interaction H = -(eps0/3) int chi^(2) E.E.E (Kleinman-
symmetric chi) with Green-function/mode identities for the idler trace.
Every hbar and eps0 cancels, leaving for the total signal rate

    R = t^2 / ((2 pi)^3 c^5) * int dw_S  w_S^3 w_I^2
        int_{forward} dOmega_S  sum_pol  K(k_S, pol),

    K = sum_m Im[ g * C_m(k_S, pol) conj(Ct_m(k_S, pol)) ],
    C_m = int d2rho E_P(rho) e^{-i k_perp,S . rho}
          sum_ab e_a chi_ab u_bm(rho),

where u are the free-space GF legs from the source plane to the particle at
the idler frequency, g = k_I^2 a^3 (eps-1)/(eps+2) (radiative-corrected) is
the point-scatterer strength, and Ct uses conjugated legs.  The spectral
integral maps the detected signal band onto the idler absorption band
through energy conservation; particle permittivity follows the bundled
dispersion table.

Conventions that bound the absolute scale (all reported in the JSON output):
pump amplitude |E0|^2 = 4 P / (eps0 c pi w^2) for the e^{-rho^2/w^2} envelope;
zincblende chi^(2) = 2 d_36 with d_36 = 70.6 pm/V for GaP; signal collection
over the forward half-space only; the 10 nm slab collapsed to a 2D sheet of
strength chi * thickness.
"""

import csv
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .engine import PumpField
from .errors import ConfigError
from .quadrature import polar_mesh, sphere_directions
from .scatterer import NanoParticle, polarizability

C_LIGHT = 2.99792458e8        # m/s
EPS0 = 8.8541878128e-12       # F/m
GAP_CHI2_PM_PER_V = 2.0 * 70.6   # chi^(2) = 2 d36, GaP near 1 um pump drive

_AXIS = {"x": 0, "y": 1, "z": 2}


def _load_dipa_table():
    text = resources.files("spdc_nearfield").joinpath(
        "data/dipa_permittivity.csv").read_text()
    lam, er, ei = [], [], []
    for row in csv.reader(l for l in text.splitlines() if not l.startswith("#")):
        lam.append(float(row[0]))
        er.append(float(row[1]))
        ei.append(float(row[2]))
    return np.asarray(lam), np.asarray(er), np.asarray(ei)


_DIPA = None


def dipa_epsilon(lambda_um):
    """DIPA relative permittivity from the bundled dispersion table."""
    global _DIPA
    if _DIPA is None:
        _DIPA = _load_dipa_table()
    lam, er, ei = _DIPA
    lambda_um = float(lambda_um)
    if not lam[0] <= lambda_um <= lam[-1]:
        raise ConfigError(
            f"no dispersion data at {lambda_um:.4f} um (table covers "
            f"{lam[0]:.2f}-{lam[-1]:.2f} um)")
    return complex(np.interp(lambda_um, lam, er), np.interp(lambda_um, lam, ei))


@dataclass(frozen=True)
class AbsoluteScenario:
    """GaP-slab photon-rate scenario with detection over a signal band."""

    particle_radius_nm: float
    surface_gap_nm: float = 5.0
    slab_thickness_nm: float = 10.0
    chi2_pm_per_v: float = GAP_CHI2_PM_PER_V
    pump: PumpField = field(default_factory=lambda: PumpField(
        wavelength_nm=500.0, waist_um=5.0, power_mw=100.0))
    band_nm: tuple = (577.0, 591.0)
    band_points: int = 9
    material: str = "DIPA"
    chi_pattern: tuple = ("yzx", "zyx")   # zincblende cross-polarized channels
    n_polar: int = 24
    n_azimuth: int = 48
    both_half_spaces: bool = True
    mesh_scale: float = 0.7
    mesh_radial: int = 10
    mesh_phi_cap: int = 160

    def __post_init__(self):
        if self.slab_thickness_nm <= 0:
            raise ConfigError("slab thickness must be positive")
        if self.particle_radius_nm <= 0 or self.surface_gap_nm < 0:
            raise ConfigError("particle radius must be positive, gap nonnegative")
        if not (self.band_nm[0] < self.band_nm[1]):
            raise ConfigError("detection band must be a nonempty wavelength range")
        if self.band_points < 2:
            raise ConfigError("need at least two spectral points")

    @property
    def center_height_um(self):
        # gap measured from the surface to the bottom of the sphere
        return (self.surface_gap_nm + self.particle_radius_nm) * 1e-3


def _chi_coeff(pattern):
    """Index-pattern matrix chi_ab for an x-polarized pump, relative units."""
    coeff = np.zeros((3, 3))
    for key in pattern:
        if len(key) != 3 or any(c not in _AXIS for c in key):
            raise ConfigError(f"bad chi component {key!r}")
        if key[2] != "x":
            continue
        coeff[_AXIS[key[0]], _AXIS[key[1]]] = 1.0
    if not np.any(coeff):
        raise ConfigError("chi pattern has no component driven by the x-polarized pump")
    return coeff


def _spectral_rate(scn, lambda_s_nm, khat, wdir, pol_vecs, mesh, chi_coeff):
    """dR/domega_S at one signal wavelength (SI, photons/s per rad/s)."""
    lam_p = scn.pump.wavelength_nm
    inv_i = 1.0 / lam_p - 1.0 / lambda_s_nm
    if inv_i <= 0:
        raise ConfigError("signal frequency exceeds the pump frequency")
    lambda_i_nm = 1.0 / inv_i
    lam_i_um = lambda_i_nm * 1e-3
    eps = dipa_epsilon(lam_i_um)
    k_i = 2.0 * math.pi / lam_i_um                      # rad/um
    k_s = 2.0 * math.pi / (lambda_s_nm * 1e-3)          # rad/um

    particle = NanoParticle(center_um=(0.0, 0.0, scn.center_height_um),
                            radius_nm=scn.particle_radius_nm, epsilon=eps)
    alpha = polarizability(particle, k_i).value_um3     # um^3 (4 pi CM convention)
    g_um = k_i**2 * alpha                               # SI point-dipole coupling, um

    x, y, w = mesh
    from .scatterer import source_plane_legs
    u = source_plane_legs(x, y, particle, k_i)          # (N, 3, 3), 1/um

    # pump amplitude from power (SI), envelope dimensionless
    P = scn.pump.power_mw * 1e-3
    w_m = scn.pump.waist_um * 1e-6
    E0 = math.sqrt(4.0 * P / (EPS0 * C_LIGHT * math.pi * w_m**2))   # V/m
    chi_m = scn.chi2_pm_per_v * 1e-12                               # m/V
    env = scn.pump.envelope(x, y)

    # detector-side projection e_a chi_ab per direction/pol: (D, 2, 3b)
    he = np.einsum("dpa,ab->dpb", pol_vecs, chi_coeff)
    # phases e^{-i k_perp . rho} per node and direction
    phase = np.exp(-1j * k_s * (np.outer(x, khat[:, 0]) + np.outer(y, khat[:, 1])))
    wsrc = (w * env)[:, None] * phase                   # (N, D)
    # T(d, b, m) = sum_j wsrc(j, d) u(j, b, m) as one GEMM per leg set
    T = (wsrc.T @ u.reshape(x.size, 9)).reshape(-1, 3, 3)
    Tc = (wsrc.T @ np.conj(u).reshape(x.size, 9)).reshape(-1, 3, 3)
    C = np.einsum("dpb,dbm->dmp", he, T)
    Ct = np.einsum("dpb,dbm->dmp", he, Tc)
    K = np.einsum("n,nmp->", wdir, np.imag(g_um * C * np.conj(Ct)))

    # unit conversions: C carries um^2 * (1/um) = um -> 1e-6 m; g um -> 1e-6 m
    K_si = K * (chi_m * E0) ** 2 * 1e-18                # m^3
    t_m = scn.slab_thickness_nm * 1e-9
    w_s = 2.0 * math.pi * C_LIGHT / (lambda_s_nm * 1e-9)
    w_i = 2.0 * math.pi * C_LIGHT / (lambda_i_nm * 1e-9)
    pref = t_m**2 / ((2.0 * math.pi) ** 3 * C_LIGHT**5)
    return pref * w_s**3 * w_i**2 * K_si, lambda_i_nm


def total_rate(scn):
    """Band-integrated object-associated signal rate, photons per second.

    Returns a report dict with the total, per-spectral-point densities, and
    every physical constant entering the absolute scale.
    """
    khat, wdir = sphere_directions(scn.n_polar, scn.n_azimuth,
                                   hemisphere=not scn.both_half_spaces)
    st = np.sqrt(np.clip(1.0 - khat[:, 2] ** 2, 0.0, None))
    safe = np.where(st > 1e-12, st, 1.0)
    cphi = np.where(st > 1e-12, khat[:, 0] / safe, 1.0)
    sphi = np.where(st > 1e-12, khat[:, 1] / safe, 0.0)
    es = np.stack([-sphi, cphi, np.zeros_like(cphi)], axis=-1)
    ep = np.stack([khat[:, 2] * cphi, khat[:, 2] * sphi, -st], axis=-1)
    pol_vecs = np.stack([es, ep], axis=1)               # (D, 2, 3)

    k_mid = 2.0 * math.pi / (0.5 * (scn.band_nm[0] + scn.band_nm[1]) * 1e-3)
    mesh = polar_mesh((0.0, 0.0), scn.center_height_um,
                      3.0 * scn.pump.waist_um, k_mid + 2.0,
                      scale=scn.mesh_scale, n_radial_panel=scn.mesh_radial,
                      phi_cap=scn.mesh_phi_cap)
    chi_coeff = _chi_coeff(scn.chi_pattern)

    lam_grid = np.linspace(scn.band_nm[0], scn.band_nm[1], scn.band_points)
    omega = 2.0 * math.pi * C_LIGHT / (lam_grid * 1e-9)
    dens, lam_i_list = [], []
    for lam_s in lam_grid:
        d, lam_i = _spectral_rate(scn, float(lam_s), khat, wdir, pol_vecs,
                                  mesh, chi_coeff)
        dens.append(d)
        lam_i_list.append(lam_i)
    dens = np.asarray(dens)
    if np.any(dens < 0):
        raise ConfigError("negative spectral rate density; quadrature failure")
    # omega decreases with lambda; integrate in increasing omega
    order = np.argsort(omega)
    total = float(np.trapezoid(dens[order], omega[order]))
    return {
        "total_rate_per_s": total,
        "lambda_s_nm": lam_grid.tolist(),
        "lambda_i_nm": lam_i_list,
        "spectral_density_per_s_per_radps": dens.tolist(),
        "constants": {
            "chi2_pm_per_v": scn.chi2_pm_per_v,
            "slab_thickness_nm": scn.slab_thickness_nm,
            "pump_power_mw": scn.pump.power_mw,
            "pump_waist_um": scn.pump.waist_um,
            "pump_wavelength_nm": scn.pump.wavelength_nm,
            "particle_radius_nm": scn.particle_radius_nm,
            "surface_gap_nm": scn.surface_gap_nm,
            "center_height_um": scn.center_height_um,
            "collection": ("both-half-spaces" if scn.both_half_spaces
                           else "forward-half-space"),
            "scattering_strength_convention": "k_I^2 alpha (SI point dipole)",
            "chi_pattern": list(scn.chi_pattern),
            "pump_amplitude_convention": "E0^2 = 4P/(eps0 c pi w^2)",
            "material": scn.material,
        },
    }
