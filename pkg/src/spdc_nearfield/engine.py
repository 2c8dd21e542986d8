"""Signal count-rate fields over the image plane.

The detection rate at image position r_S, for detector polarization d and a
2D source at z = 0, is the double source-plane integral

    R(r_S) = sum_{ss'} d_s d*_s' sum_{aa'bb'} int drho int drho'
             Gamma_ab(rho) Gamma*_a'b'(rho')
             Im[G_bb'(rho, rho', k_I)]
             F_sa(r_S, rho) F*_s'a'(r_S, rho'),

with Gamma_ab(rho) = sum_g chi_abg E_P,g(rho) the pump-dressed nonlinearity
and F the propagating-band (perfect lens, M = 1) signal kernel.  Splitting
the idler GF as G = G0 + G_sca splits the rate into the background R0 and
the induced-coherence part R_IC.

R_IC evaluation paths
---------------------
* brute: direct double quadrature of the entrywise-Im scattered kernel
  (the oracle), cost O(N_pix N_quad^2).
* fast: the entrywise split Im[G_sca] = (G_sca - conj(G_sca))/(2i) makes the
  kernel separable per particle; two auxiliary fields per (s, m) channel,

      A_sm(r_S)  = int drho  F_sa(r_S, rho) Gamma_ab(rho) u_bm(rho),
      At_sm(r_S) = same with conj(u),

  are single 2D quadratures (u = GF legs to the particle), and the rate is
  combined pixelwise as sum_m Im[g (d.A_m) conj(d.At_m)].  Cost
  O(N_pix N_quad); exactly linear in the scattering strength g, and additive
  over particles (non-interacting scatterers).

R0 evaluation
-------------
Im G0 is expanded over propagating idler plane waves,

    Im G0(r, r', k) = (k/16 pi^2) int dOmega (I - khat khat) e^{i k khat.(r-r')},

so R0 is a positive sum over idler directions and polarizations of squared
single quadratures; evanescent components never enter by construction.  For
a plane-wave pump the source integral collapses to an exact transverse
phase-matching mask in k-space; a Gaussian pump has the analytic transform
pi w^2 exp(-w^2 q^2 / 4), used by the k-space path that renders full R0
grids.

All rates are returned in common arbitrary units (the overall dimensionful
prefactor of the rate formula lives in the absolute-rate estimator); fields
carry an explicit normalization tag.  Pure functions of immutable scenario
values; deterministic summation order.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .greens import AngularFilter, PropagatingKernel
from .quadrature import polar_mesh, sphere_directions, tensor_square_grid
from .scatterer import NanoParticle, scattering_strength, source_plane_legs

_AXIS = {"x": 0, "y": 1, "z": 2}


# ---------------------------------------------------------------------------
# scenario types


@dataclass(frozen=True)
class PumpField:
    """Monochromatic pump: vacuum wavelength, Gaussian waist, power, polarization."""

    wavelength_nm: float
    waist_um: float = 5.0
    power_mw: float = 100.0
    polarization: tuple = (1.0, 0.0, 0.0)
    profile: str = "gaussian"
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.wavelength_nm <= 0 or self.waist_um <= 0:
            raise ConfigError("pump wavelength and waist must be positive")
        if self.profile not in ("gaussian", "plane-wave"):
            raise ConfigError(f"unknown pump profile {self.profile!r}")
        pol = np.asarray(self.polarization, dtype=complex)
        if pol.shape != (3,) or abs(np.linalg.norm(pol) - 1.0) > 1e-9:
            raise ConfigError("pump polarization must be a unit 3-vector")
        object.__setattr__(self, "polarization", tuple(pol))

    def envelope(self, x, y):
        """Transverse profile E(x, y)/amplitude at z = 0."""
        if self.profile == "plane-wave":
            return np.ones_like(np.asarray(x, dtype=float))
        w = self.waist_um
        return np.exp(-(np.asarray(x) ** 2 + np.asarray(y) ** 2) / w**2)


@dataclass(frozen=True)
class ChiTensor:
    """Sparse chi^(2) components, e.g. {'xxx': 1.0}; source plane fixed at z = 0.

    Index order is (signal, idler, pump).  Values are relative units; the
    absolute magnitude matters only in the rate estimator.
    """

    components: tuple

    def __init__(self, components):
        if isinstance(components, dict):
            components = tuple(sorted(components.items()))
        object.__setattr__(self, "components", tuple(components))
        if not any(abs(v) > 0 for _, v in self.components):
            raise ConfigError("chi tensor needs at least one nonzero component")
        for key, _ in self.components:
            if len(key) != 3 or any(c not in _AXIS for c in key):
                raise ConfigError(f"bad chi component index {key!r}")

    def as_array(self):
        chi = np.zeros((3, 3, 3))
        for key, v in self.components:
            chi[_AXIS[key[0]], _AXIS[key[1]], _AXIS[key[2]]] = v
        return chi

    def pump_contracted(self, polarization, amplitude=1.0):
        """gamma_ab = amplitude * sum_g chi_abg pol_g, a (3, 3) complex matrix."""
        chi = self.as_array()
        pol = np.asarray(polarization, dtype=complex)
        return amplitude * np.einsum("abg,g->ab", chi, pol)


@dataclass(frozen=True)
class DetectorGrid:
    """Square image-plane grid, centered on the optical axis."""

    extent_um: float = 2.5
    pixels: int = 101

    def __post_init__(self):
        if self.extent_um <= 0 or self.pixels < 3:
            raise ConfigError("detector grid needs positive extent and >= 3 pixels")

    def axes(self):
        ax = np.linspace(-self.extent_um, self.extent_um, self.pixels)
        return ax, ax.copy()


@dataclass(frozen=True)
class QuadratureSettings:
    """Node budgets for every quadrature in the engine."""

    source_mesh_scale: float = 1.0
    source_radial_per_panel: int = 16
    source_phi_cap: int = 256
    background_n: int = 96
    kernel_n_theta: int = 256
    kernel_points_per_wavelength: int = 64
    idler_n_polar: int = 64
    idler_n_azimuth: int = 64
    signal_n_polar: int = 32
    signal_n_azimuth: int = 64
    kspace_n_radial: int = 24
    kspace_n_azimuth: int = 24

    @classmethod
    def paper(cls):
        return cls()

    @classmethod
    def fast(cls):
        return cls(source_mesh_scale=0.65, source_radial_per_panel=10,
                   source_phi_cap=160, background_n=48, kernel_n_theta=128,
                   kernel_points_per_wavelength=48, idler_n_polar=32,
                   idler_n_azimuth=32, signal_n_polar=24, signal_n_azimuth=48,
                   kspace_n_radial=20, kspace_n_azimuth=20)

    @classmethod
    def coarse(cls):
        """Oracle-test budget (~32^2 source nodes, small grids)."""
        return cls(source_mesh_scale=0.5, source_radial_per_panel=6,
                   source_phi_cap=48, background_n=32, kernel_n_theta=96,
                   kernel_points_per_wavelength=32, idler_n_polar=24,
                   idler_n_azimuth=24, signal_n_polar=16, signal_n_azimuth=32,
                   kspace_n_radial=16, kspace_n_azimuth=16)


@dataclass(frozen=True)
class SpdcScenario:
    """Full problem statement for one rate computation."""

    pump: PumpField
    chi: ChiTensor
    lambda_s_nm: float
    lambda_i_nm: float
    particles: tuple = ()
    grid: DetectorGrid = field(default_factory=DetectorGrid)
    detector_polarizations: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    filter: AngularFilter = field(default_factory=AngularFilter)
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        if self.lambda_s_nm <= 0 or self.lambda_i_nm <= 0:
            raise ConfigError("wavelengths must be positive")
        lhs = 1.0 / self.pump.wavelength_nm
        rhs = 1.0 / self.lambda_s_nm + 1.0 / self.lambda_i_nm
        if abs(lhs - rhs) > 1e-9 * lhs:
            raise ConfigError(
                "energy conservation violated: 1/lambda_P - 1/lambda_S - 1/lambda_I = "
                f"{lhs - rhs:.3e} nm^-1")
        object.__setattr__(self, "particles", tuple(self.particles))
        for p in self.particles:
            if not isinstance(p, NanoParticle):
                raise ConfigError("particles must be NanoParticle instances")
        pols = tuple(tuple(np.asarray(d, dtype=complex)) for d in self.detector_polarizations)
        for d in pols:
            if abs(np.linalg.norm(np.asarray(d)) - 1.0) > 1e-9:
                raise ConfigError("detector polarizations must be unit vectors")
        object.__setattr__(self, "detector_polarizations", pols)

    @property
    def k_s(self):
        return 2.0 * np.pi / (self.lambda_s_nm * 1e-3)

    @property
    def k_i(self):
        return 2.0 * np.pi / (self.lambda_i_nm * 1e-3)

    @property
    def degeneracy_ratio(self):
        return self.lambda_s_nm / self.lambda_i_nm


def derive_lambda_s(lambda_p_nm, lambda_i_nm):
    """Signal wavelength from energy conservation 1/lP = 1/lS + 1/lI."""
    inv = 1.0 / lambda_p_nm - 1.0 / lambda_i_nm
    if inv <= 0:
        raise ConfigError("pump frequency must exceed the idler frequency")
    return 1.0 / inv


@dataclass
class RateField:
    """Nonnegative rate values on image-plane coordinates, tagged normalization."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    normalization: str
    clamped_min: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, x, y, values, normalization, meta=None):
        values = np.asarray(values, dtype=float)
        pre_min = float(values.min()) if values.size else 0.0
        clamped = np.clip(values, 0.0, None)
        return cls(x=np.asarray(x), y=np.asarray(y), values=clamped,
                   normalization=normalization,
                   clamped_min=min(pre_min, 0.0), meta=dict(meta or {}))

    def peak_normalized(self):
        peak = float(self.values.max())
        if peak <= 0:
            raise ConfigError("cannot peak-normalize an identically zero field")
        return replace(self, values=self.values / peak, normalization="peak",
                       meta=dict(self.meta, peak_raw=peak))


def emission_angle_relation(r):
    """Maximum background signal emission angle arcsin(r) in degrees."""
    if not 0.0 < r <= 1.0:
        raise ConfigError(
            f"degeneracy ratio must be in (0, 1]; got {r} (signal must not "
            "be longer-wavelength than the idler)")
    return math.degrees(math.asin(r))


def gamma_field(pump, chi, rho):
    """Pump-dressed nonlinearity Gamma_ab(rho) at a source-plane point, (3, 3)."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape == (3,) and abs(rho[2]) > 1e-12:
        raise ConfigError("gamma_field is defined on the source plane z = 0")
    coeff = chi.pump_contracted(pump.polarization, pump.amplitude)
    return coeff * pump.envelope(rho[0], rho[1])


# ---------------------------------------------------------------------------
# evaluation context


class EngineContext:
    """Per-scenario precomputation shared by the rate paths.

    Holds the tabulated signal kernel, per-particle source meshes and GF
    legs, and the pump-contracted chi coefficients.  Building it is pure;
    evaluations over pixels may run concurrently.
    """

    def __init__(self, scenario):
        s = scenario
        self.scenario = s
        self.k_s = s.k_s
        self.k_i = s.k_i
        self.gamma_coeff = s.chi.pump_contracted(s.pump.polarization, s.pump.amplitude)
        self.active_alphas = tuple(
            int(a) for a in range(3) if np.any(np.abs(self.gamma_coeff[a, :]) > 0))
        if not self.active_alphas:
            self.active_alphas = (0,)
        q = s.quadrature
        extent = s.grid.extent_um * math.sqrt(2.0)
        support = 3.0 * s.pump.waist_um
        max_off = max((math.hypot(p.center[0], p.center[1]) for p in s.particles),
                      default=0.0)
        # cover both source rules: particle meshes and the background square grid
        rho_max = extent + max(support + 2.0 * max_off,
                               support * math.sqrt(2.0)) + 1.0
        self.kernel = PropagatingKernel(
            self.k_s, s.filter, rho_max=rho_max,
            points_per_wavelength=q.kernel_points_per_wavelength,
            n_theta=q.kernel_n_theta)
        self.particle_data = [self._prep_particle(p) for p in s.particles]

    def _prep_particle(self, particle):
        s = self.scenario
        q = s.quadrature
        cx, cy, cz = particle.center
        outer = 3.0 * s.pump.waist_um + math.hypot(cx, cy)
        x, y, w = polar_mesh((cx, cy), abs(cz), outer, self.k_s + self.k_i,
                             scale=q.source_mesh_scale,
                             n_radial_panel=q.source_radial_per_panel,
                             phi_cap=q.source_phi_cap)
        prof = s.pump.envelope(x, y)
        u = source_plane_legs(x, y, particle, self.k_i)  # (N, 3, 3)
        g = scattering_strength(particle, self.k_i)
        return {"particle": particle, "x": x, "y": y, "w": w,
                "prof": prof, "u": u, "g": g}

    def grid_pixels(self):
        ax, ay = self.scenario.grid.axes()
        X, Y = np.meshgrid(ax, ay, indexing="xy")
        return ax, ay, X.ravel(), Y.ravel()

    # -- fast (factorized) induced-coherence path -------------------------

    def _aux_fields(self, pdata, px, py, chunk=96):
        """A and At fields for one particle at flat pixel positions.

        Returns two (N_pix, 3, 3) arrays indexed (pixel, sigma, m).
        """
        gam = self.gamma_coeff
        u = pdata["u"]
        wsrc = pdata["w"] * pdata["prof"]
        # S[a, m](j) = sum_b gamma_ab u_bm(j), weighted by the quadrature
        S = np.einsum("ab,jbm->jam", gam, u) * wsrc[:, None, None]
        St = np.einsum("ab,jbm->jam", gam, np.conj(u)) * wsrc[:, None, None]
        acts = list(self.active_alphas)
        Sa = S[:, acts, :]
        Sta = St[:, acts, :]
        n_pix = px.size
        A = np.empty((n_pix, 3, 3), dtype=complex)
        At = np.empty((n_pix, 3, 3), dtype=complex)
        for lo in range(0, n_pix, chunk):
            hi = min(lo + chunk, n_pix)
            dx = px[lo:hi, None] - pdata["x"][None, :]
            dy = py[lo:hi, None] - pdata["y"][None, :]
            F = self.kernel.columns(dx, dy, cols=acts)  # (P, N, 3, |acts|)
            A[lo:hi] = np.einsum("pnsa,nam->psm", F, Sa)
            At[lo:hi] = np.einsum("pnsa,nam->psm", F, Sta)
        return A, At

    def rate_ic(self, px, py):
        """Factorized R_IC at flat pixel positions (raw units, real)."""
        total = np.zeros(px.size)
        dets = [np.asarray(d) for d in self.scenario.detector_polarizations]
        for pdata in self.particle_data:
            A, At = self._aux_fields(pdata, px, py)
            g = pdata["g"]
            for d in dets:
                P = np.einsum("s,psm->pm", d, A)
                Pt = np.einsum("s,psm->pm", d, At)
                total += np.sum(np.imag(g * P * np.conj(Pt)), axis=1)
        return total

    # -- brute-force (oracle) induced-coherence path ----------------------

    def rate_ic_brute(self, px, py, max_nodes=4000):
        """Direct double quadrature of the entrywise-Im scattered kernel.

        Returns (values, max_imag_residual): the rate at flat pixels and the
        largest relative imaginary residue discarded when taking the real
        part (Hermiticity of the integrand makes the exact result real).
        """
        from .greens import g0_batch

        total = np.zeros(px.size)
        residual = 0.0
        dets = [np.asarray(d) for d in self.scenario.detector_polarizations]
        for pdata in self.particle_data:
            x, y, w, prof = pdata["x"], pdata["y"], pdata["w"], pdata["prof"]
            n = x.size
            if n > max_nodes:
                raise ConfigError(
                    f"brute-force path limited to {max_nodes} source nodes, got {n}; "
                    "use QuadratureSettings.coarse()")
            c = pdata["particle"].center
            pts = np.stack([x, y, np.zeros_like(x)], axis=-1)
            left = g0_batch(pts - c, self.k_i)    # G0_bm(rho_j, c)
            right = g0_batch(c - pts, self.k_i)   # G0_mb'(c, rho_k)
            g = pdata["g"]
            # Im G_sca[b, b'](j, k) entrywise, laid out as ((b, j), (b', k))
            Kmat = np.empty((3 * n, 3 * n))
            for jlo in range(0, n, 256):
                jhi = min(jlo + 256, n)
                block = np.einsum("jbm,kmc->jbkc", left[jlo:jhi], right)
                blk = np.imag(g * block).transpose(1, 0, 3, 2)
                for b in range(3):
                    Kmat[b * n + jlo:b * n + jhi] = blk[b].reshape(jhi - jlo, 3 * n)
            gam_w = self.gamma_coeff[None, :, :] * (w * prof)[:, None, None]
            for d in dets:
                vals, res = self._brute_contract(d, px, py, pdata, gam_w, Kmat, n)
                total += vals
                residual = max(residual, res)
        return total, residual

    def _brute_contract(self, d, px, py, pdata, gam_w, Kmat, n, chunk=64):
        acts = list(self.active_alphas)
        out = np.empty(px.size)
        residual = 0.0
        for lo in range(0, px.size, chunk):
            hi = min(lo + chunk, px.size)
            dx = px[lo:hi, None] - pdata["x"][None, :]
            dy = py[lo:hi, None] - pdata["y"][None, :]
            F = self.kernel.columns(dx, dy, cols=acts)      # (P, N, 3, |acts|)
            V = np.einsum("s,pnsa->pna", d, F)              # d-projected kernel
            W = np.einsum("pna,nab->pnb", V, gam_w[:, acts, :])  # (P, N, 3)
            Wf = W.transpose(0, 2, 1).reshape(hi - lo, 3 * n)
            T = Wf @ Kmat
            r = np.sum(T * np.conj(Wf), axis=1)
            scale = np.max(np.abs(r.real)) or 1.0
            residual = max(residual, float(np.max(np.abs(r.imag)) / scale))
            out[lo:hi] = r.real
        return out, residual

    # -- background -------------------------------------------------------

    def _signal_band(self):
        lo, hi = self.scenario.filter.band_rad
        return self.k_s * math.sin(lo), self.k_s * math.sin(hi)

    def _signal_phi(self, qx, qy):
        """Plane-wave amplitude Phi_sa(q) of the signal kernel inside the band."""
        q2 = qx**2 + qy**2
        kz = np.sqrt(np.clip(self.k_s**2 - q2, 0.0, None))
        khat = np.stack([qx, qy, kz], axis=-1) / self.k_s
        M = np.eye(3) - khat[..., :, None] * khat[..., None, :]
        return (1j / (8.0 * np.pi**2)) * M / kz[..., None, None]

    def _idler_modes(self):
        q = self.scenario.quadrature
        khat, w = sphere_directions(q.idler_n_polar, q.idler_n_azimuth)
        st = np.sqrt(np.clip(1.0 - khat[:, 2] ** 2, 0.0, None))
        safe = np.where(st > 1e-12, st, 1.0)
        cphi = np.where(st > 1e-12, khat[:, 0] / safe, 1.0)
        sphi = np.where(st > 1e-12, khat[:, 1] / safe, 0.0)
        es = np.stack([-sphi, cphi, np.zeros_like(cphi)], axis=-1)
        ep = np.stack([khat[:, 2] * cphi, khat[:, 2] * sphi, -st], axis=-1)
        return khat, w, np.stack([es, ep], axis=1)  # (N, 2, 3)

    def rate_background_direct(self, px, py):
        """R0 by idler-direction decomposition with explicit source quadrature."""
        s = self.scenario
        if s.pump.profile == "plane-wave":
            return self.rate_background_planewave(px, py)
        q = s.quadrature
        x, y, w = tensor_square_grid(3.0 * s.pump.waist_um, q.background_n)
        prof = s.pump.envelope(x, y)
        khat, wmode, pols = self._idler_modes()
        h = np.einsum("ab,npb->npa", self.gamma_coeff, pols)  # (N_modes, 2, 3)
        acts = list(self.active_alphas)
        dets = np.asarray([np.asarray(d) for d in s.detector_polarizations])
        wsrc = w * prof
        total = np.zeros(px.size)
        pix_chunk = max(1, int(2e6 // max(x.size, 1)))
        mode_chunk = 512
        for lo in range(0, px.size, pix_chunk):
            hi = min(lo + pix_chunk, px.size)
            dx = px[lo:hi, None] - x[None, :]
            dy = py[lo:hi, None] - y[None, :]
            F = self.kernel.columns(dx, dy, cols=acts)   # (P, N_src, 3, |acts|)
            for mlo in range(0, khat.shape[0], mode_chunk):
                mhi = min(mlo + mode_chunk, khat.shape[0])
                phase = np.exp(1j * self.k_i * (
                    x[:, None] * khat[None, mlo:mhi, 0]
                    + y[:, None] * khat[None, mlo:mhi, 1]))
                src = wsrc[:, None] * phase              # (N_src, Mc)
                T = np.einsum("pjsa,jn->pnsa", F, src)   # (P, Mc, 3, |acts|)
                B = np.einsum("pnsa,nqa->pnsq", T, h[mlo:mhi][:, :, acts])
                D = np.einsum("ds,pnsq->pndq", dets, B)
                total[lo:hi] += (self.k_i / (16.0 * np.pi**2)) * np.einsum(
                    "n,pndq->p", wmode[mlo:mhi], np.abs(D) ** 2)
        return total

    def rate_background_planewave(self, px, py):
        """Plane-wave pump: exact transverse phase-matching mask in k-space.

        The pump Fourier transform is a delta at q = 0, so each idler
        direction maps to the single signal transverse wavevector
        q = k_I khat_perp; the angular filter acts as an exact mask.  Values
        are per unit (2 pi)^2 pump area ('raw-plane-wave' units).
        """
        s = self.scenario
        khat, wmode, pols = self._idler_modes()
        h = np.einsum("ab,npb->npa", self.gamma_coeff, pols)
        qx = self.k_i * khat[:, 0]
        qy = self.k_i * khat[:, 1]
        q_lo, q_hi = self._signal_band()
        qn = np.hypot(qx, qy)
        mask = (qn >= q_lo) & (qn <= q_hi) & (qn < self.k_s * (1.0 - 1e-9))
        total_const = 0.0
        if np.any(mask):
            Phi = self._signal_phi(qx[mask], qy[mask])   # (M, 3, 3)
            dets = np.asarray([np.asarray(d) for d in s.detector_polarizations])
            B = np.einsum("msa,mqa->msq", Phi, h[mask][:, :, :])
            D = np.einsum("ds,msq->mdq", dets, B)
            total_const = (self.k_i / (16.0 * np.pi**2)) * (2.0 * np.pi) ** 4 * float(
                np.einsum("m,mdq->", wmode[mask], np.abs(D) ** 2))
        return np.full(px.size, total_const)

    def _kspace_patches(self):
        """Per-idler-direction q-space patches for the Gaussian-pump background.

        Yields (qx, qy, D, wgt) per contributing direction: band-clipped polar
        GL nodes around q_c = k_I khat_perp, where D (nodes, dets, pols) holds
        the fully weighted plane-wave amplitudes and wgt the direction weight.
        """
        s = self.scenario
        q = s.quadrature
        w_um = s.pump.waist_um
        khat, wmode, pols = self._idler_modes()
        h = np.einsum("ab,npb->npa", self.gamma_coeff, pols)
        q_lo, q_hi = self._signal_band()
        reach = 8.0 / w_um
        dets = np.asarray([np.asarray(d) for d in s.detector_polarizations])
        acts = list(self.active_alphas)
        from .quadrature import gauss_legendre

        for idx in range(khat.shape[0]):
            qcx = self.k_i * khat[idx, 0]
            qcy = self.k_i * khat[idx, 1]
            qc = math.hypot(qcx, qcy)
            r_lo = max(q_lo, qc - reach)
            r_hi = min(q_hi, qc + reach, self.k_s * (1.0 - 1e-9))
            if r_hi <= r_lo:
                continue
            qr, wr = gauss_legendre(q.kspace_n_radial, r_lo, r_hi)
            chic = math.atan2(qcy, qcx)
            if qc > reach:
                half = math.asin(min(1.0, reach / qc))
            else:
                half = math.pi
            chi_nodes, wchi = gauss_legendre(q.kspace_n_azimuth,
                                             chic - half, chic + half)
            QR, CH = np.meshgrid(qr, chi_nodes, indexing="ij")
            qx = (QR * np.cos(CH)).ravel()
            qy = (QR * np.sin(CH)).ravel()
            wq = (np.outer(wr * qr, wchi)).ravel()
            gauss = np.pi * w_um**2 * np.exp(
                -(w_um**2 / 4.0) * ((qx - qcx) ** 2 + (qy - qcy) ** 2))
            keep = gauss > 1e-12 * np.pi * w_um**2
            if not np.any(keep):
                continue
            qx, qy, wq, gauss = qx[keep], qy[keep], wq[keep], gauss[keep]
            Phi = self._signal_phi(qx, qy)                       # (M, 3, 3)
            C = np.einsum("msa,qa->msq", Phi[:, :, acts], h[idx][:, acts])
            D = np.einsum("ds,msq->mdq", dets, C) * (wq * gauss)[:, None, None]
            yield qx, qy, D, (self.k_i / (16.0 * np.pi**2)) * wmode[idx]

    def rate_background_kspace(self, px_axis, py_axis):
        """R0 on a tensor pixel grid via separable q-space accumulation."""
        s = self.scenario
        if s.pump.profile == "plane-wave":
            X, Y = np.meshgrid(px_axis, py_axis, indexing="xy")
            return self.rate_background_planewave(X.ravel(), Y.ravel()).reshape(X.shape)
        acc = np.zeros((py_axis.size, px_axis.size))
        for qx, qy, D, wgt in self._kspace_patches():
            U = np.exp(1j * np.outer(px_axis, qx))               # (nx, M)
            V = np.exp(1j * np.outer(qy, py_axis))               # (M, ny)
            for di in range(D.shape[1]):
                for qi in range(D.shape[2]):
                    B = (U * D[:, di, qi][None, :]) @ V          # (nx, ny)
                    acc += wgt * (np.abs(B.T) ** 2)
        return acc

    def rate_background_kspace_points(self, px, py):
        """R0 at arbitrary pixel positions via the same q-space patches."""
        s = self.scenario
        if s.pump.profile == "plane-wave":
            return self.rate_background_planewave(px, py)
        acc = np.zeros(px.size)
        for qx, qy, D, wgt in self._kspace_patches():
            phase = np.exp(1j * (np.outer(px, qx) + np.outer(py, qy)))  # (P, M)
            B = phase @ D.reshape(qx.size, -1)                   # (P, dets*pols)
            acc += wgt * np.sum(np.abs(B) ** 2, axis=1)
        return acc


# ---------------------------------------------------------------------------
# public rate operations


def _pixels_or_grid(scenario, pixels):
    if pixels is None:
        ax, ay = scenario.grid.axes()
        X, Y = np.meshgrid(ax, ay, indexing="xy")
        return ax, ay, X.ravel(), Y.ravel(), (ay.size, ax.size)
    px, py = (np.asarray(pixels[0], dtype=float).ravel(),
              np.asarray(pixels[1], dtype=float).ravel())
    return None, None, px, py, px.shape


def rate_ic_fast(scenario, pixels=None, context=None):
    """Factorized induced-coherence rate field (raw Eq-units)."""
    if not scenario.particles:
        raise ConfigError("induced-coherence rate needs at least one particle")
    ctx = context or EngineContext(scenario)
    ax, ay, px, py, shape = _pixels_or_grid(scenario, pixels)
    vals = ctx.rate_ic(px, py).reshape(shape)
    if ax is None:
        return vals
    return RateField.from_raw(ax, ay, vals, "raw", meta={"component": "ic"})


def rate_ic_brute(scenario, pixels=None, context=None):
    """Oracle path: direct double source-plane quadrature of Eq-kernel."""
    if not scenario.particles:
        raise ConfigError("induced-coherence rate needs at least one particle")
    ctx = context or EngineContext(scenario)
    ax, ay, px, py, shape = _pixels_or_grid(scenario, pixels)
    vals, residual = ctx.rate_ic_brute(px, py)
    vals = vals.reshape(shape)
    if ax is None:
        return vals, residual
    return RateField.from_raw(ax, ay, vals, "raw",
                              meta={"component": "ic-brute",
                                    "imag_residual": residual})


def rate_background(scenario, pixels=None, method="auto", context=None):
    """Background rate field R0 (raw Eq-units; 'raw-plane-wave' for that pump).

    method 'auto' uses the exact k-space mask for plane-wave pumps and the
    analytic-transform k-space path for Gaussian pumps; 'direct' forces the
    explicit source-plane quadrature (validation path; its tensor grid must
    resolve the signal-kernel oscillation, roughly background_n greater than
    k_S * 6 w / pi).
    """
    ctx = context or EngineContext(scenario)
    norm = ("raw-plane-wave" if scenario.pump.profile == "plane-wave" else "raw")
    if method not in ("auto", "kspace", "direct"):
        raise ConfigError(f"unknown background method {method!r}")
    use_kspace = method in ("auto", "kspace")
    if pixels is None and use_kspace:
        ax, ay = scenario.grid.axes()
        vals = ctx.rate_background_kspace(ax, ay)
        return RateField.from_raw(ax, ay, vals, norm,
                                  meta={"component": "background",
                                        "path": "kspace"})
    ax, ay, px, py, shape = _pixels_or_grid(scenario, pixels)
    if use_kspace:
        vals = ctx.rate_background_kspace_points(px, py).reshape(shape)
        path = "kspace-points"
    else:
        vals = ctx.rate_background_direct(px, py).reshape(shape)
        path = "direct"
    if ax is None:
        return vals
    return RateField.from_raw(ax, ay, vals, norm,
                              meta={"component": "background", "path": path})
