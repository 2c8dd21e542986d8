"""Free-space electromagnetic dyadic Green's function (GF) evaluations.

Conventions
-----------
The GF solves (curl curl - k^2) G = I delta(r - r') and is normalized such
that the coincidence limit of the imaginary part is Im G(r, r) = k/(6 pi) I;
the trace of Im G at coincidence is k/(2 pi).  Lengths are micrometers,
wavenumbers rad/um, so G carries units of 1/um.

Closed form, with R = r - r', u = kR:

    G = e^{iu}/(4 pi R) [ (1 + (iu - 1)/u^2) I + ((3 - 3iu - u^2)/u^2) RR^ ]

The angular-spectrum (Weyl) representation used for the imaging kernel is

    G = (i/8 pi^2) int d^2k_perp / k_z  (I - khat khat) e^{i k.(r-r')}

with k_z = sqrt(k^2 - k_perp^2) taken with nonnegative imaginary part
(outgoing/decaying waves).  The propagating band is integrated in polar
k-space with the substitution k_perp = k sin(theta), which removes the
1/k_z singularity at theta = 90 deg; Gauss-Legendre nodes in theta and a
trapezoid rule in azimuth (spectrally accurate for the periodic integrand).

A perfect-lens 4f imaging system with M = 1 maps the source plane onto the
image plane (image inversion absorbed by relabeling image coordinates), so
the signal-side imaging propagator is the propagating-only GF evaluated at
zero plane separation, optionally band-limited by a high-pass angular filter.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import j0, j1, jv

from .errors import ConfigError, ConvergenceError
from .quadrature import gauss_legendre

_EYE3 = np.eye(3)


@dataclass(frozen=True)
class AngularFilter:
    """High-pass/aperture angular band for the signal kernel, degrees."""

    theta_min_deg: float = 0.0
    theta_max_deg: float = 90.0

    def __post_init__(self):
        if not (0.0 <= self.theta_min_deg <= self.theta_max_deg <= 90.0):
            raise ConfigError(
                f"angular filter requires 0 <= theta_min <= theta_max <= 90, "
                f"got [{self.theta_min_deg}, {self.theta_max_deg}]"
            )

    @property
    def band_rad(self):
        return np.deg2rad(self.theta_min_deg), np.deg2rad(self.theta_max_deg)


def _as_point(r):
    p = np.asarray(r, dtype=float)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ConfigError(f"expected a finite 3-vector, got {r!r}")
    return p


def g0_closed_form(r, rp, k):
    """Closed-form free-space dyadic GF between two points, (3, 3) complex.

    Rejects coincident points; the regular imaginary part at coincidence is
    available through :func:`g0_imag`.
    """
    r = _as_point(r)
    rp = _as_point(rp)
    if k <= 0:
        raise ConfigError(f"wavenumber must be positive, got {k}")
    dvec = r - rp
    R = np.linalg.norm(dvec)
    if R == 0.0:
        raise ConfigError("g0_closed_form is singular at r == r'; use g0_imag")
    return g0_batch(dvec[None, :], k)[0]


def g0_batch(dvec, k):
    """Vectorized closed-form GF for separation vectors dvec (N, 3) -> (N, 3, 3)."""
    dvec = np.asarray(dvec, dtype=float)
    R = np.linalg.norm(dvec, axis=-1)
    if np.any(R == 0.0):
        raise ConfigError("coincident points in closed-form GF evaluation")
    u = k * R
    nhat = dvec / R[..., None]
    iu = 1j * u
    c_iso = 1.0 + (iu - 1.0) / u**2
    c_rad = (3.0 - 3.0 * iu - u**2) / u**2
    pref = np.exp(iu) / (4.0 * np.pi * R)
    outer = nhat[..., :, None] * nhat[..., None, :]
    return pref[..., None, None] * (
        c_iso[..., None, None] * _EYE3 + c_rad[..., None, None] * outer
    )


def _imag_coeffs(u):
    """Stable isotropic/radial coefficients of Im G: Im G = (k/4pi)(A I + B RR^)."""
    u = np.asarray(u, dtype=float)
    A = np.empty_like(u)
    B = np.empty_like(u)
    small = u < 0.1
    us = u[small]
    u2 = us * us
    # Taylor: A = 2/3 - 2u^2/15 + u^4/140, B = u^2/15 - u^4/210
    A[small] = 2.0 / 3.0 - 2.0 * u2 / 15.0 + u2 * u2 / 140.0
    B[small] = u2 / 15.0 - u2 * u2 / 210.0
    ub = u[~small]
    s, c = np.sin(ub), np.cos(ub)
    A[~small] = s * (1.0 / ub - 1.0 / ub**3) + c / ub**2
    B[~small] = s * (3.0 / ub**3 - 1.0 / ub) - 3.0 * c / ub**2
    return A, B


def g0_imag(r, rp, k):
    """Entrywise imaginary part of the free-space GF, regular everywhere.

    At r == rp returns exactly diag(k/6pi) (the coincidence LDOS of the
    chosen normalization).
    """
    r = _as_point(r)
    rp = _as_point(rp)
    dvec = r - rp
    R = np.linalg.norm(dvec)
    if R == 0.0:
        return (k / (6.0 * np.pi)) * np.eye(3)
    A, B = _imag_coeffs(np.array([k * R]))
    nhat = dvec / R
    return (k / (4.0 * np.pi)) * (A[0] * _EYE3 + B[0] * np.outer(nhat, nhat))


def imag_g0_batch(dvec, k):
    """Vectorized Im G for separation vectors (N, 3) -> (N, 3, 3) real."""
    dvec = np.asarray(dvec, dtype=float)
    R = np.linalg.norm(dvec, axis=-1)
    out = np.empty(dvec.shape[:-1] + (3, 3))
    A, B = _imag_coeffs(k * R)
    safe = np.where(R > 0.0, R, 1.0)
    nhat = dvec / safe[..., None]
    nhat = np.where((R > 0.0)[..., None], nhat, 0.0)
    outer = nhat[..., :, None] * nhat[..., None, :]
    out[:] = (k / (4.0 * np.pi)) * (A[..., None, None] * _EYE3 + B[..., None, None] * outer)
    return out


def _weyl_propagating(delta, k, theta_lo, theta_hi, n_theta, n_phi):
    """Polar-substitution quadrature of the propagating Weyl band."""
    dx, dy, dz = delta
    sz = 1.0 if dz >= 0.0 else -1.0
    theta, wt = gauss_legendre(n_theta, theta_lo, theta_hi)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    st, ct = np.sin(theta), np.cos(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    khat = np.empty((n_theta, n_phi, 3))
    khat[..., 0] = st[:, None] * cp[None, :]
    khat[..., 1] = st[:, None] * sp[None, :]
    khat[..., 2] = sz * ct[:, None]
    M = _EYE3 - khat[..., :, None] * khat[..., None, :]
    phase = np.exp(
        1j * k * (st[:, None] * (dx * cp + dy * sp)[None, :] + (ct * abs(dz))[:, None])
    )
    w2d = (wt * st)[:, None] * wphi
    return (1j * k / (8.0 * np.pi**2)) * np.einsum("tp,tp,tpij->ij", w2d, phase, M)


def _weyl_evanescent(delta, k, n_kappa, kappa_max, n_phi):
    """Evanescent extension (k_perp > k), absolutely convergent for dz != 0."""
    dx, dy, dz = delta
    sz = 1.0 if dz >= 0.0 else -1.0
    kappa, wk = gauss_legendre(n_kappa, 0.0, kappa_max)
    kperp = np.sqrt(k**2 + kappa**2)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    cp, sp = np.cos(phi), np.sin(phi)
    khat = np.empty((n_kappa, n_phi, 3), dtype=complex)
    khat[..., 0] = (kperp / k)[:, None] * cp[None, :]
    khat[..., 1] = (kperp / k)[:, None] * sp[None, :]
    khat[..., 2] = 1j * sz * (kappa / k)[:, None]
    M = _EYE3 - khat[..., :, None] * khat[..., None, :]
    phase = np.exp(
        1j * kperp[:, None] * (dx * cp + dy * sp)[None, :] - (kappa * abs(dz))[:, None]
    )
    w2d = wk[:, None] * wphi
    return (1.0 / (8.0 * np.pi**2)) * np.einsum("tp,tp,tpij->ij", w2d, phase, M)


def weyl_g0(r, rp, k, theta_min_deg=0.0, theta_max_deg=90.0,
            include_evanescent=False, n_theta=256, n_phi=256,
            n_kappa=512, kappa_max=None):
    """Angular-spectrum evaluation of the free-space GF over a theta band.

    With the full band and ``include_evanescent=True`` this reconstructs the
    closed form; the propagating band alone is the perfect-lens imaging
    propagator (for points in a common plane).
    """
    delta = _as_point(r) - _as_point(rp)
    lo, hi = np.deg2rad(theta_min_deg), np.deg2rad(theta_max_deg)
    if hi <= lo:
        return np.zeros((3, 3), dtype=complex)
    G = _weyl_propagating(delta, k, lo, hi, n_theta, n_phi)
    if include_evanescent:
        dz = abs(delta[2])
        if dz <= 0.0:
            raise ConfigError(
                "evanescent Weyl extension needs out-of-plane separation (dz != 0)"
            )
        if kappa_max is None:
            kappa_max = 40.0 / dz
        G = G + _weyl_evanescent(delta, k, n_kappa, kappa_max, n_phi)
    return G


def g_signal_imaging(r_img, rho_src, k, filt=None, n_theta=256, n_phi=256,
                     check_convergence=False, tol=1e-6):
    """Band-limited propagating GF: the M = 1, NA = 1 imaging map.

    ``rho_src`` must lie in the source plane z = 0.  The band
    [k sin(theta_min), k sin(theta_max)] in transverse wavenumber is set by
    ``filt``; the default filter passes every propagating wave (ideal lens,
    unit transmission, no apodization).
    """
    filt = filt or AngularFilter()
    rho_src = _as_point(rho_src)
    if abs(rho_src[2]) > 1e-12:
        raise ConfigError("source point of the imaging kernel must be at z = 0")
    lo, hi = filt.band_rad
    if hi <= lo:
        return np.zeros((3, 3), dtype=complex)
    delta = _as_point(r_img) - rho_src
    G = _weyl_propagating(delta, k, lo, hi, n_theta, n_phi)
    if check_convergence:
        G_half = _weyl_propagating(delta, k, lo, hi, max(8, n_theta // 2),
                                   max(8, n_phi // 2))
        scale = max(np.max(np.abs(G)), 1e-300)
        err = np.max(np.abs(G - G_half)) / scale
        if err > tol:
            raise ConvergenceError("imaging-kernel quadrature did not converge",
                                   achieved=err, target=tol)
    return G


class PropagatingKernel:
    """Tabulated in-plane (dz = 0) propagating-band GF for fast batch lookup.

    The azimuthal integral of the Weyl integrand is carried out analytically
    (J0/J1/J2 Bessel kernels), leaving four radial profile integrals over the
    theta band which are tabulated on a uniform radius grid and interpolated
    with cubic splines:

        I0a = int s (2 - s^2) J0(k rho s) dtheta      (s = sin theta)
        I0b = int s^3         J0(k rho s) dtheta
        I1  = int s^2 cos(t)  J1(k rho s) dtheta
        I2  = int s^3         J2(k rho s) dtheta

    Tensor entries, with psi the azimuth of the in-plane offset and
    p = i k / (8 pi):

        G_xx = p (I0a + cos 2psi I2)     G_yy = p (I0a - cos 2psi I2)
        G_xy = p sin 2psi I2             G_zz = 2 p I0b
        G_xz = G_zx = (k/4pi) cos(psi) I1
        G_yz = G_zy = (k/4pi) sin(psi) I1

    Agrees with :func:`g_signal_imaging` (same integral, different node
    layout) to the interpolation tolerance; checked in the test suite.
    """

    def __init__(self, k, filt=None, rho_max=25.0, points_per_wavelength=64,
                 n_theta=256, check_convergence=False, tol=1e-6):
        filt = filt or AngularFilter()
        self.k = float(k)
        self.filter = filt
        lo, hi = filt.band_rad
        self.rho_max = float(rho_max)
        wavelength = 2.0 * np.pi / self.k
        self.dr = wavelength / points_per_wavelength
        n_rho = int(np.ceil(self.rho_max / self.dr)) + 4
        self.rho_grid = self.dr * np.arange(n_rho)
        if hi <= lo:
            zeros = np.zeros(n_rho)
            profiles = (zeros, zeros, zeros, zeros)
        else:
            profiles = self._build_profiles(lo, hi, n_theta)
            if check_convergence:
                coarse = self._build_profiles(lo, hi, max(16, n_theta // 2))
                scale = max(max(np.max(np.abs(p)) for p in profiles), 1e-300)
                err = max(np.max(np.abs(a - b)) for a, b in zip(profiles, coarse))
                if err / scale > tol:
                    raise ConvergenceError(
                        "kernel radial-profile quadrature did not converge",
                        achieved=err / scale, target=tol)
        self._splines = [CubicSpline(self.rho_grid, p) for p in profiles]
        self.convergence_estimate = None

    def _build_profiles(self, lo, hi, n_theta):
        theta, wt = gauss_legendre(n_theta, lo, hi)
        s, c = np.sin(theta), np.cos(theta)
        arg = self.k * self.rho_grid[:, None] * s[None, :]
        J0, J1, J2 = j0(arg), j1(arg), jv(2, arg)
        I0a = J0 @ (wt * s * (2.0 - s**2))
        I0b = J0 @ (wt * s**3)
        I1 = J1 @ (wt * s**2 * c)
        I2 = J2 @ (wt * s**3)
        return I0a, I0b, I1, I2

    def _prep(self, dx, dy):
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        rho = np.hypot(dx, dy)
        if np.any(rho > self.rho_max):
            raise ConfigError(
                f"offset {np.max(rho):.3f} um beyond tabulated radius "
                f"{self.rho_max:.3f} um")
        safe = np.where(rho > 0.0, rho, 1.0)
        cpsi = np.where(rho > 0.0, dx / safe, 0.0)
        spsi = np.where(rho > 0.0, dy / safe, 0.0)
        c2 = cpsi * cpsi - spsi * spsi
        s2 = 2.0 * cpsi * spsi
        return rho, cpsi, spsi, c2, s2

    def columns(self, dx, dy, cols=(0, 1, 2)):
        """Kernel columns G[:, alpha] at in-plane offsets; returns (..., 3, len(cols))."""
        rho, cpsi, spsi, c2, s2 = self._prep(dx, dy)
        I0a = self._splines[0](rho)
        I0b = self._splines[1](rho)
        I1 = self._splines[2](rho)
        I2 = self._splines[3](rho)
        p = 1j * self.k / (8.0 * np.pi)
        q = self.k / (4.0 * np.pi)
        out = np.zeros(rho.shape + (3, len(cols)), dtype=complex)
        for j, alpha in enumerate(cols):
            if alpha == 0:
                out[..., 0, j] = p * (I0a + c2 * I2)
                out[..., 1, j] = p * (s2 * I2)
                out[..., 2, j] = q * cpsi * I1
            elif alpha == 1:
                out[..., 0, j] = p * (s2 * I2)
                out[..., 1, j] = p * (I0a - c2 * I2)
                out[..., 2, j] = q * spsi * I1
            else:
                out[..., 0, j] = q * cpsi * I1
                out[..., 1, j] = q * spsi * I1
                out[..., 2, j] = 2.0 * p * I0b
        return out

    def tensor(self, dx, dy):
        """Full (..., 3, 3) kernel tensor at in-plane offsets."""
        return self.columns(dx, dy, cols=(0, 1, 2))
