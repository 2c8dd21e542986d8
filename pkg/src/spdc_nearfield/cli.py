"""Command-line front end: scenario configuration, dispatch, data export.

Config files are JSON with explicit units in key names (lambda_i_um,
radius_nm, ...).  Signal/idler/pump wavelengths may be given as any
consistent pair; the third is derived from 1/lP = 1/lS + 1/lI, and an
over-determined inconsistent triple is rejected with the residual printed.

Every subcommand writes CSV (or JSON) artifacts with a '#'-prefixed
metadata header carrying the resolved-config hash, plus a .meta.json
sidecar with the fully resolved configuration, normalization tags,
quadrature summary, and wall time.  CSV content is a pure function of the
config, so repeated runs are bitwise identical; --threads parallelizes
independent sweep points with an ordered, thread-count-independent
reduction.

Exit codes: 0 ok, 2 config error, 3 convergence/verification failure,
4 internal error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .engine import (ChiTensor, DetectorGrid, EngineContext, PumpField,
                     QuadratureSettings, SpdcScenario, derive_lambda_s,
                     emission_angle_relation, rate_background, rate_ic_brute,
                     rate_ic_fast)
from .errors import ConfigError, ConvergenceError
from .greens import AngularFilter
from .imaging import (PsfCut, filter_sweep, filtered_total_image, fwhm,
                      psf, psf_cuts, resolution_limit, two_particle_image,
                      fwhm_sweep)
from .rates import AbsoluteScenario, total_rate
from .scatterer import NanoParticle, ldos_map, ldos_peak_sweep

THREADS_ENV = "SPDC_NEARFIELD_THREADS"

_POL = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


@dataclass
class RunConfig:
    """Validated, fully resolved run configuration."""

    resolved: dict

    @property
    def hash(self):
        blob = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def pump(self):
        p = self.resolved["pump"]
        pol = p["polarization"]
        pol = _POL[pol] if isinstance(pol, str) else tuple(pol)
        return PumpField(wavelength_nm=p["lambda_nm"], waist_um=p["waist_um"],
                         power_mw=p["power_mw"], polarization=pol,
                         profile=p["profile"])

    def quadrature(self):
        q = self.resolved["quadrature"]
        if isinstance(q, str):
            return getattr(QuadratureSettings, q)()
        base = asdict(QuadratureSettings.paper())
        base.update(q)
        return QuadratureSettings(**base)

    def particles(self):
        out = []
        for p in self.resolved["particles"]:
            out.append(NanoParticle(center_um=tuple(p["center_um"]),
                                    radius_nm=p["radius_nm"],
                                    epsilon=complex(p["epsilon_re"], p["epsilon_im"])))
        return tuple(out)

    def scenario(self):
        r = self.resolved
        dets = r["detector_polarizations"]
        if dets == "unpolarized":
            dets = (_POL["x"], _POL["y"], _POL["z"])
        else:
            dets = tuple(tuple(d) for d in dets)
        return SpdcScenario(
            pump=self.pump(),
            chi=ChiTensor(r["chi"]),
            lambda_s_nm=r["lambda_s_nm"],
            lambda_i_nm=r["lambda_i_nm"],
            particles=self.particles(),
            grid=DetectorGrid(extent_um=r["detector"]["extent_um"],
                              pixels=r["detector"]["pixels"]),
            detector_polarizations=dets,
            filter=AngularFilter(r["filter"]["theta_min_deg"],
                                 r["filter"]["theta_max_deg"]),
            quadrature=self.quadrature(),
        )

    def absolute_scenario(self, radius_nm):
        a = self.resolved["absolute"]
        return AbsoluteScenario(
            particle_radius_nm=radius_nm,
            surface_gap_nm=a["surface_gap_nm"],
            slab_thickness_nm=a["slab_thickness_nm"],
            chi2_pm_per_v=a["chi2_pm_per_v"],
            pump=self.pump(),
            band_nm=tuple(a["band_nm"]),
            band_points=a["band_points"],
        )


def _default_config():
    text = resources.files("spdc_nearfield").joinpath(
        "data/paper_default.json").read_text()
    return json.loads(text)


def _resolve_wavelengths(cfg):
    lam_p = cfg["pump"].get("lambda_nm")
    lam_s = cfg.get("lambda_s_nm")
    lam_i = cfg.get("lambda_i_nm")
    if lam_i is None and "lambda_i_um" in cfg:
        lam_i = 1e3 * cfg.pop("lambda_i_um")
    if lam_p is None:
        if lam_s is None or lam_i is None:
            raise ConfigError("need pump.lambda_nm or both lambda_s_nm and lambda_i_um")
        lam_p = 1.0 / (1.0 / lam_s + 1.0 / lam_i)
        cfg["pump"]["lambda_nm"] = lam_p
    elif lam_s is None and lam_i is not None:
        lam_s = derive_lambda_s(lam_p, lam_i)
    elif lam_i is None and lam_s is not None:
        inv = 1.0 / lam_p - 1.0 / lam_s
        if inv <= 0:
            raise ConfigError("signal frequency exceeds the pump frequency")
        lam_i = 1.0 / inv
    elif lam_s is None and lam_i is None:
        raise ConfigError("need lambda_i_um or lambda_s_nm alongside pump.lambda_nm")
    residual = 1.0 / lam_p - 1.0 / lam_s - 1.0 / lam_i
    if abs(residual) > 1e-9 / lam_p:
        raise ConfigError(
            f"inconsistent wavelength triple: 1/lP - 1/lS - 1/lI = "
            f"{residual:.6e} nm^-1 (lP={lam_p}, lS={lam_s}, lI={lam_i})")
    cfg["lambda_s_nm"] = lam_s
    cfg["lambda_i_nm"] = lam_i
    return cfg


def parse_config(path=None, overrides=None):
    """Load, merge, derive, and validate a run configuration."""
    cfg = _default_config()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config parse error in {path}: line {e.lineno}: {e.msg}")
        for key, val in user.items():
            if isinstance(val, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(val)
            else:
                cfg[key] = val
    for key, val in (overrides or {}).items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    cfg = _resolve_wavelengths(cfg)
    rc = RunConfig(resolved=cfg)
    rc.scenario()  # trip every invariant before any computation starts
    return rc


def _parallel_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(v):
    return f"{float(v):.17g}"


def _write_table(path, header_meta, columns, rows, fmt):
    if fmt == "json":
        payload = {"meta": header_meta, "columns": list(columns),
                   "rows": [[float(v) for v in r] for r in rows]}
        path = path.with_suffix(".json")
        path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        return path
    lines = [f"# {k}: {v}" for k, v in header_meta.items()]
    lines.append("# columns: " + ",".join(columns))
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    path = path.with_suffix(".csv")
    path.write_text("\n".join(lines) + "\n")
    return path


def _grid_rows(field):
    rows = []
    for iy, yv in enumerate(field.y):
        for ix, xv in enumerate(field.x):
            rows.append((xv, yv, field.values[iy, ix]))
    return rows


def _sidecar(path, rc, extra, wall_s):
    meta = {
        "config": rc.resolved,
        "config_hash": rc.hash,
        "package_version": __version__,
        "wall_time_s": wall_s,
    }
    meta.update(extra)
    side = path.with_suffix(path.suffix + ".meta.json")
    side.write_text(json.dumps(meta, indent=1, sort_keys=True, default=str))
    return side


def _base_meta(rc, sub, normalization):
    return {"subcommand": sub, "config_hash": rc.hash,
            "package_version": __version__,
            "scenario": rc.resolved.get("scenario_name", "unnamed"),
            "normalization": normalization}


# ---------------------------------------------------------------------------
# subcommands


def _cmd_ldos_map(rc, out, fmt, threads):
    r = rc.resolved["ldos_map"]
    s = rc.scenario()
    if not s.particles:
        raise ConfigError("ldos-map needs a particle")
    k_i = s.k_i
    ax = np.linspace(-r["extent_um"], r["extent_um"], r["pixels"])
    vals = ldos_map(ax, ax, s.particles[0], k_i)
    rows = [(x, y, vals[iy, ix]) for iy, y in enumerate(ax) for ix, x in enumerate(ax)]
    meta = _base_meta(rc, "ldos-map", "free-space-normalized")
    path = _write_table(out / "ldos_map", meta, ("x_um", "y_um", "ldos_norm"),
                        rows, fmt)
    return [path], {"peak": float(vals.max()), "normalization": "free-space-normalized"}


def _cmd_ldos_sweep(rc, out, fmt, threads):
    r = rc.resolved["ldos_sweep"]
    s = rc.scenario()
    if not s.particles:
        raise ConfigError("ldos-sweep needs a particle template")
    axis = r["axis"]
    values = np.asarray(r["values"], dtype=float)
    if axis == "z_alpha":
        sweep_vals = values * 1e-3  # nm -> um center heights
    elif axis == "eps_imag":
        sweep_vals = values
    else:
        raise ConfigError(f"unknown ldos sweep axis {axis!r}")
    peaks = ldos_peak_sweep(axis, sweep_vals, s.particles[0], s.k_i)
    meta = _base_meta(rc, "ldos-sweep", "free-space-normalized")
    meta["axis"] = axis
    path = _write_table(out / "ldos_sweep", meta,
                        (f"{axis}" + ("_nm" if axis == "z_alpha" else ""),
                         "peak_ldos_norm"),
                        list(zip(values, peaks)), fmt)
    return [path], {"axis": axis, "normalization": "free-space-normalized"}


def _cmd_psf(rc, out, fmt, threads):
    s = rc.scenario()
    ctx = EngineContext(s)
    field = psf(s, context=ctx)
    cut_x, cut_y = psf_cuts(s, context=ctx)
    fx, fy = fwhm(cut_x), fwhm(cut_y)
    meta = _base_meta(rc, "psf", field.normalization)
    paths = [_write_table(out / "psf", meta, ("x_um", "y_um", "rate_norm"),
                          _grid_rows(field), fmt)]
    for cut, name in ((cut_x, "x"), (cut_y, "y")):
        paths.append(_write_table(
            out / f"psf_cut_{name}", dict(meta, axis=name),
            (f"{name}_um", "rate_norm"),
            list(zip(cut.coords_um, cut.values)), fmt))
    extra = {"fwhm_x_nm": fx, "fwhm_y_nm": fy,
             "normalization": field.normalization,
             "clamped_min_raw": field.clamped_min,
             "peak_raw": field.meta.get("peak_raw")}
    return paths, extra


def _cmd_fwhm_sweep(rc, out, fmt, threads):
    r = rc.resolved["fwhm_sweep"]
    base = rc.scenario()
    vary = r["vary"]
    values = r["pump_nm"] if vary == "lambda_s" else r["lambda_i_nm"]

    def one(v):
        res = fwhm_sweep(vary, [v], base)
        return (res["lambda_nm"][0], res["fwhm_x_nm"][0], res["fwhm_y_nm"][0])

    rows = _parallel_map(one, list(values), threads)
    rows.sort(key=lambda t: t[0])
    meta = _base_meta(rc, "fwhm-sweep", "peak")
    meta["vary"] = vary
    path = _write_table(out / "fwhm_sweep", meta,
                        ("lambda_nm", "fwhm_x_nm", "fwhm_y_nm"), rows, fmt)
    return [path], {"vary": vary, "rows": len(rows)}


def _cmd_two_particle(rc, out, fmt, threads):
    r = rc.resolved["two_particle"]
    base = rc.scenario()
    field = two_particle_image(base, r["separation_nm"], r["axis"])
    field = field.peak_normalized()
    meta = _base_meta(rc, "two-particle", field.normalization)
    meta["axis"] = r["axis"]
    meta["separation_nm"] = r["separation_nm"]
    path = _write_table(out / "two_particle", meta,
                        ("x_um", "y_um", "rate_norm"), _grid_rows(field), fmt)
    from .imaging import dip_ratio
    dip = dip_ratio(base, r["separation_nm"], r["axis"])
    return [path], {"dip_ratio": dip, "axis": r["axis"],
                    "separation_nm": r["separation_nm"]}


def _cmd_resolution(rc, out, fmt, threads):
    r = rc.resolved["resolution"]
    base = rc.scenario()

    def one(axis):
        res = resolution_limit(axis, base, bracket_nm=tuple(r["bracket_nm"]))
        return res

    results = _parallel_map(one, list(r["axes"]), threads)
    rows = [(i, res.separation_nm, res.dip_ratio, res.reference_limit_nm)
            for i, res in enumerate(results)]
    meta = _base_meta(rc, "resolution", "dip-ratio-0.70")
    meta["axes"] = ",".join(r["axes"])
    path = _write_table(out / "resolution", meta,
                        ("axis_index", "separation_nm", "dip_ratio",
                         "reference_limit_nm"), rows, fmt)
    extra = {res.axis: {"separation_nm": res.separation_nm,
                        "dip_ratio": res.dip_ratio,
                        "reference_limit_nm": res.reference_limit_nm}
             for res in results}
    return [path], extra


def _cmd_filter_sweep(rc, out, fmt, threads):
    r = rc.resolved["filter_sweep"]
    base = rc.scenario()
    thetas = np.asarray(r["theta_deg"], dtype=float) if r.get("theta_deg") else None
    res = filter_sweep(base, thetas)
    rows = list(zip(res.theta_deg, res.background, res.induced))
    meta = _base_meta(rc, "filter-sweep", "ric-unfiltered-origin")
    path = _write_table(out / "filter_sweep", meta,
                        ("theta_filt_deg", "r0_norm", "ric_norm"), rows, fmt)
    return [path], {"crossing_deg": res.crossing_deg,
                    "normalization": "ric-unfiltered-origin"}


def _cmd_filtered_image(rc, out, fmt, threads):
    r = rc.resolved["filtered_image"]
    base = rc.scenario()
    field = filtered_total_image(base, r["theta_filt_deg"])
    meta = _base_meta(rc, "filtered-image", field.normalization)
    meta["theta_filt_deg"] = r["theta_filt_deg"]
    path = _write_table(out / "filtered_image", meta,
                        ("x_um", "y_um", "rate_norm"), _grid_rows(field), fmt)
    return [path], {"theta_filt_deg": r["theta_filt_deg"],
                    "origin_norm_raw": field.meta.get("origin_norm_raw"),
                    "normalization": field.normalization}


def _cmd_total_rate(rc, out, fmt, threads):
    radii = rc.resolved["absolute"]["radii_nm"]

    def one(a):
        return total_rate(rc.absolute_scenario(a))

    reports = _parallel_map(one, list(radii), threads)
    payload = {"config_hash": rc.hash, "package_version": __version__,
               "per_radius": {f"{a:g}nm": rep for a, rep in zip(radii, reports)}}
    path = out / "total_rate.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    extra = {f"{a:g}nm_rate_per_s": rep["total_rate_per_s"]
             for a, rep in zip(radii, reports)}
    return [path], extra


def _cmd_verify(rc, out, fmt, threads):
    from .verify import run_verification
    results = run_verification(print_lines=True)
    failed = [name for name, ok, _ in results if not ok]
    payload = {name: {"pass": ok, "detail": detail} for name, ok, detail in results}
    path = out / "verify.json"
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    if failed:
        raise ConvergenceError(f"verification failed: {', '.join(failed)}")
    return [path], {"checks": len(results), "failed": 0}


_COMMANDS = {
    "ldos-map": _cmd_ldos_map,
    "ldos-sweep": _cmd_ldos_sweep,
    "psf": _cmd_psf,
    "fwhm-sweep": _cmd_fwhm_sweep,
    "two-particle": _cmd_two_particle,
    "resolution": _cmd_resolution,
    "filter-sweep": _cmd_filter_sweep,
    "filtered-image": _cmd_filtered_image,
    "total-rate": _cmd_total_rate,
    "verify": _cmd_verify,
}


def run(subcommand, config, out_dir, fmt="csv", threads=1):
    """Execute one subcommand; returns the list of artifact paths."""
    if subcommand not in _COMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    paths, extra = _COMMANDS[subcommand](config, out, fmt, threads)
    wall = time.perf_counter() - t0
    extra = dict(extra)
    extra.setdefault("quadrature",
                     config.resolved.get("quadrature", "paper"))
    for p in paths:
        _sidecar(p, config, extra, wall)
    return paths


def build_parser():
    ap = argparse.ArgumentParser(
        prog="spdc-nearfield",
        description="Near-field SPDC imaging simulator")
    ap.add_argument("subcommand", choices=sorted(_COMMANDS))
    ap.add_argument("--config", default=None, help="JSON config path "
                    "(defaults overlay the bundled paper_default)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--threads", type=int,
                    default=int(os.environ.get(THREADS_ENV, "1")))
    preset = ap.add_mutually_exclusive_group()
    preset.add_argument("--fast", action="store_true",
                        help="coarse quadrature, trend-level accuracy")
    preset.add_argument("--paper", action="store_true",
                        help="production quadrature (default)")
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    overrides = {}
    if args.fast:
        overrides["quadrature"] = "fast"
    if args.paper:
        overrides["quadrature"] = "paper"
    try:
        rc = parse_config(args.config, overrides=overrides)
        paths = run(args.subcommand, rc, args.out, fmt=args.format,
                    threads=max(1, args.threads))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ConvergenceError as e:
        print(f"convergence error: {e}", file=sys.stderr)
        return 3
    except Exception as e:  # the spec's "internal" failure class
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
