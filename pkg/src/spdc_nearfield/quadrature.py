"""Quadrature grids used by the rate integrals.

Two source-plane rules are provided:

* a plain tensor-product Gauss-Legendre grid over the pump support square,
  adequate for integrands that vary on the pump/wavelength scale (background
  rate), and
* a particle-centered polar mesh with radially graded panels, which resolves
  the deep-subwavelength idler near field (scale z_alpha ~ 10 nm) and the
  pump envelope on a single composite rule (induced-coherence rate).

All rules return flat node coordinate arrays and positive weights; summation
order is fixed by construction so results are deterministic.
"""

import numpy as np


def gauss_legendre(n, a, b):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def tensor_square_grid(half_extent, n, center=(0.0, 0.0)):
    """Tensor GL grid on the square [-half_extent, half_extent]^2 + center.

    Returns (x, y, w) flat arrays of length n*n.
    """
    xs, wx = gauss_legendre(n, center[0] - half_extent, center[0] + half_extent)
    ys, wy = gauss_legendre(n, center[1] - half_extent, center[1] + half_extent)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    return X.ravel(), Y.ravel(), W.ravel()


def _radial_panels(inner_scale, outer_radius):
    """Panel boundaries graded from the near-field scale out to the pump disc."""
    bounds = [0.0, 4.0 * inner_scale, 20.0 * inner_scale]
    r = max(60.0 * inner_scale, 0.05)
    while r < outer_radius:
        bounds.append(r)
        r *= 3.0
    bounds.append(outer_radius)
    bounds = np.array(sorted(set(b for b in bounds if b <= outer_radius)))
    return bounds


def polar_mesh(center, inner_scale, outer_radius, k_max, scale=1.0,
               n_radial_panel=16, phi_cap=256):
    """Particle-centered polar quadrature mesh.

    Parameters
    ----------
    center : (2,) array-like
        In-plane mesh center (particle transverse position), um.
    inner_scale : float
        Near-field grading scale (particle height z_alpha), um.
    outer_radius : float
        Mesh radius; must cover the pump support, um.
    k_max : float
        Largest spatial frequency of the integrand (signal + idler), rad/um;
        sets the azimuthal node count per panel.
    scale : float
        Global node-budget multiplier (quadrature preset knob).

    Returns
    -------
    x, y, w : flat arrays (nodes and area weights).
    """
    cx, cy = center
    bounds = _radial_panels(max(inner_scale, 1e-4), outer_radius)
    xs, ys, ws = [], [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        n_r = max(6, int(round(n_radial_panel * scale)))
        r, wr = gauss_legendre(n_r, lo, hi)
        n_phi = int(max(16, 1.25 * k_max * hi + 12) * scale)
        n_phi = min(phi_cap, 4 * (n_phi // 4 + 1))
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        wphi = 2.0 * np.pi / n_phi
        R, P = np.meshgrid(r, phi, indexing="ij")
        WR = np.broadcast_to((wr * r)[:, None], R.shape)
        xs.append((cx + R * np.cos(P)).ravel())
        ys.append((cy + R * np.sin(P)).ravel())
        ws.append((WR * wphi).ravel())
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def sphere_directions(n_polar, n_azimuth, hemisphere=False):
    """Direction vectors and solid-angle weights, GL in cos(theta) x trapezoid in phi.

    Returns (khat (N,3), w (N,)) with sum(w) = 4*pi (2*pi if hemisphere).
    """
    lo = 0.0 if hemisphere else -1.0
    mu, wmu = gauss_legendre(n_polar, lo, 1.0)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    wphi = 2.0 * np.pi / n_azimuth
    MU, PHI = np.meshgrid(mu, phi, indexing="ij")
    st = np.sqrt(np.clip(1.0 - MU**2, 0.0, None))
    khat = np.stack([st * np.cos(PHI), st * np.sin(PHI), MU], axis=-1)
    w = np.broadcast_to(wmu[:, None] * wphi, MU.shape)
    return khat.reshape(-1, 3), w.ravel()
