"""Point-dipole model of an absorptive nanoparticle near the source plane.

A deep-subwavelength sphere (radius a << lambda) is reduced to a point
scatterer: quasi-static Clausius-Mossotti polarizability with the radiative
reaction correction,

    alpha_0 = 4 pi a^3 (eps - 1)/(eps + 2),
    alpha   = alpha_0 / (1 - i k^3 alpha_0 / (6 pi)),

and a scattered Green's function assembled from free-space propagators
through the particle,

    G_sca(r, r') = sum_p  G0(r, c_p) . g_p . G0(c_p, r'),
    g_p = k^2 alpha_p / (4 pi),

where g is the scalar scattering strength consistent with the k/(6 pi)
coincidence normalization of G0 (equivalently k^2 times the Gaussian-
convention polarizability a^3 (eps-1)/(eps+2)).  Particle-particle coupling
is neglected: scatterers superpose linearly.

Large spheres (a = 50 nm in the absolute-rate scenario) are still treated as
point dipoles; deviations from exact a^3 scaling are expected there.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .greens import g0_batch

RESONANCE_GUARD = 1e-6  # reject |eps + 2| below this (quasi-static pole)


@dataclass(frozen=True)
class NanoParticle:
    """Absorptive sphere: center (um), radius (nm), complex relative permittivity."""

    center_um: tuple
    radius_nm: float
    epsilon: complex

    def __post_init__(self):
        c = np.asarray(self.center_um, dtype=float)
        if c.shape != (3,) or not np.all(np.isfinite(c)):
            raise ConfigError(f"particle center must be a finite 3-vector, got {self.center_um}")
        object.__setattr__(self, "center_um", tuple(c))
        if self.radius_nm <= 0:
            raise ConfigError(f"particle radius must be positive, got {self.radius_nm} nm")
        eps = complex(self.epsilon)
        if eps.imag < 0:
            raise ConfigError(f"passive material requires Im(eps) >= 0, got {eps}")
        if abs(eps + 2.0) < RESONANCE_GUARD:
            raise ConfigError(
                f"permittivity too close to the quasi-static resonance pole eps = -2: {eps}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def radius_um(self):
        return self.radius_nm * 1e-3

    @property
    def center(self):
        return np.asarray(self.center_um)


@dataclass(frozen=True)
class Polarizability:
    """Complex polarizability volume (um^3) at a stated wavenumber (rad/um)."""

    value_um3: complex
    k: float


def polarizability(particle, k):
    """Clausius-Mossotti polarizability with radiative correction."""
    eps = particle.epsilon
    if abs(eps + 2.0) < RESONANCE_GUARD:
        raise ConfigError(
            f"polarizability undefined near the resonance pole: |eps + 2| = {abs(eps + 2.0):.2e}")
    a = particle.radius_um
    alpha0 = 4.0 * np.pi * a**3 * (eps - 1.0) / (eps + 2.0)
    alpha = alpha0 / (1.0 - 1j * k**3 * alpha0 / (6.0 * np.pi))
    return Polarizability(value_um3=alpha, k=float(k))


def scattering_strength(particle, k):
    """Scalar coupling g = k^2 alpha / (4 pi) of the point-scatterer GF (1/um)."""
    return k**2 * polarizability(particle, k).value_um3 / (4.0 * np.pi)


def source_plane_legs(x, y, particle, k):
    """Propagator legs u_{beta m}(rho) = G0_{beta m}((x, y, 0), c) for flat arrays.

    These are the per-particle factors of G_sca between source-plane points:
    G_sca[b, b'](rho, rho') = g * sum_m u[b, m](rho) u[b', m](rho').
    """
    pts = np.stack([np.asarray(x, dtype=float),
                    np.asarray(y, dtype=float),
                    np.zeros_like(np.asarray(x, dtype=float))], axis=-1)
    dvec = pts - particle.center
    return g0_batch(dvec, k)


def g_scattered(r, rp, k, particles):
    """Scattered GF through a set of non-interacting point particles, (3, 3)."""
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    total = np.zeros((3, 3), dtype=complex)
    for p in particles:
        c = p.center
        if np.array_equal(r, c) or np.array_equal(rp, c):
            raise ConfigError("evaluation point coincides with a particle center")
        g = scattering_strength(p, k)
        left = g0_batch((r - c)[None, :], k)[0]
        right = g0_batch((c - rp)[None, :], k)[0]
        total += g * (left @ right)
    return total


def ldos_change(x, y, particle, k):
    """Particle-induced change of the normalized x-partial LDOS at z = 0.

    Im[G_sca,xx(rho, rho)] / (k / 6 pi) for flat coordinate arrays.
    """
    u = source_plane_legs(x, y, particle, k)  # (N, 3, 3)
    g = scattering_strength(particle, k)
    usq = np.sum(u[:, 0, :] ** 2, axis=-1)
    return np.imag(g * usq) / (k / (6.0 * np.pi))


def ldos_map(x, y, particle, k):
    """Normalized x-partial LDOS Im[G_xx(rho, rho)]/(k/6pi) on a source-plane grid.

    ``x`` and ``y`` are 1D axes; returns values with shape (len(y), len(x)).
    Without a particle the map is identically 1 (free-space normalization).
    """
    X, Y = np.meshgrid(np.asarray(x, float), np.asarray(y, float), indexing="xy")
    if particle is None:
        return np.ones_like(X)
    delta = ldos_change(X.ravel(), Y.ravel(), particle, k).reshape(X.shape)
    return 1.0 + delta


def ldos_peak(particle, k):
    """Normalized LDOS at the in-plane particle position (the map maximum)."""
    cx, cy = particle.center[0], particle.center[1]
    return 1.0 + ldos_change(np.array([cx]), np.array([cy]), particle, k)[0]


def ldos_peak_sweep(axis, values, particle, k):
    """Peak normalized LDOS swept over particle distance or absorption.

    ``axis`` is 'z_alpha' (center height, um) or 'eps_imag' (Im eps at the
    template's Re eps).  Returns an array of peak values, one per sweep value.
    """
    peaks = []
    for v in np.asarray(values, dtype=float):
        if axis == "z_alpha":
            if v <= 0:
                raise ConfigError("particle distance must be positive")
            p = replace(particle, center_um=(particle.center_um[0],
                                             particle.center_um[1], v))
        elif axis == "eps_imag":
            if v < 0:
                raise ConfigError("absorption sweep requires Im(eps) >= 0")
            p = replace(particle, epsilon=complex(particle.epsilon.real, v))
        else:
            raise ConfigError(f"unknown sweep axis {axis!r}")
        peaks.append(ldos_peak(p, k))
    return np.array(peaks)
