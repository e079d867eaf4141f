"""Batch front door: ``maxcap <command> --config run.json --out dir``.

Commands: validate, sectors, levelset, equilibrium, maxmin, spectral,
trace, construct, verify.  Exit codes: 0 success, 1 verification failures,
2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .construct import build_gamma0, lambda_region, verify_gamma0
from .equilibrium import (
    equilibrium_measure,
    euler_lagrange_residual,
    refine_measure,
    weighted_energy,
)
from .errors import ConfigError, MaxcapError, StalledBelowTolerance
from .field import level_set
from .quaddiff import critical_graph, export_graph
from .spectral import (
    curve_structure,
    fit_spectral_curve,
    sample_R,
    sample_points,
    spectral_residual,
)
from .topology import validate_triple
from .variation import (
    AscentParams,
    criticality_residual,
    maxmin_ascent,
    s_property_residual,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                               default=_json_default) + "\n")


def _write_measure_csv(path: Path, mu) -> None:
    np.savetxt(path, np.column_stack([mu.nodes.real, mu.nodes.imag,
                                      mu.weights, mu.gaps]),
               delimiter=",", header="x,y,weight,gap", comments="")


def _write_contour_csv(path: Path, contour) -> None:
    rows = []
    for k, comp in enumerate(contour.components):
        for z in comp.vertices:
            rows.append((k, z.real, z.imag))
    np.savetxt(path, np.array(rows), delimiter=",",
               header="component,x,y", comments="", fmt="%d,%.17g,%.17g")


def _polyline_svg(path: Path, polylines, size: int = 640) -> None:
    pts = np.concatenate([np.asarray(p, dtype=complex) for p in polylines])
    xmin, xmax = pts.real.min(), pts.real.max()
    ymin, ymax = pts.imag.min(), pts.imag.max()
    span = max(xmax - xmin, ymax - ymin, 1e-9)
    pad = 0.05 * span

    def m(z):
        x = (z.real - xmin + pad) / (span + 2 * pad) * size
        y = size - (z.imag - ymin + pad) / (span + 2 * pad) * size
        return x, y

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
           f'height="{size}" viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for p in polylines:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in
                          (m(z) for z in np.asarray(p, dtype=complex)))
        out.append(f'<polyline points="{coords}" fill="none" '
                   'stroke="steelblue" stroke-width="1.5"/>')
    out.append("</svg>")
    path.write_text("\n".join(out))


def _ascent_params(cfg: RunConfig) -> AscentParams:
    return AscentParams(
        n_nodes=cfg.solver.n,
        tol_crit=cfg.solver.tol_crit,
        max_outer=cfg.solver.max_iter,
        basis_size=cfg.solver.basis_size,
    )


def _solve_measure(cfg: RunConfig):
    """Shared solve used by the spectral / trace / construct / verify
    commands: either the full max-min ascent or an inner solve on the
    initial contour, refined either way.

    Returns (mu_refined, ell, mu_coarse, extra-dict).
    """
    sectors = cfg.sectors
    extra: dict = {}
    if cfg.solver.run_maxmin:
        if cfg.triple is None:
            raise ConfigError("run_maxmin requires a triple")
        try:
            res = maxmin_ascent(cfg.triple, cfg.field, cfg.init_contour(),
                                _ascent_params(cfg), sectors,
                                fixed=cfg.fixed)
        except StalledBelowTolerance as exc:
            res = exc.result
            extra["stalled"] = True
        mu0, ell0 = res.measure, res.ell
        extra.update(residual=res.residual, iterations=res.iterations,
                     converged=res.converged, contour=res.contour)
    else:
        mu0, ell0, _ = equilibrium_measure(cfg.init_contour(),
                                           field=cfg.field,
                                           n=cfg.solver.n, sectors=sectors)
    mu, ell, _ = refine_measure(mu0, cfg.field)
    return mu, ell, mu0, extra


# -- commands ----------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out: Path, args) -> int:
    if cfg.triple is None:
        raise ConfigError("validate needs a 'triple' section")
    n_sectors = cfg.sectors.n if cfg.sectors is not None else 0
    report = validate_triple(cfg.triple, n_sectors, len(cfg.fixed.points))
    _write_json(out / "result.json", {"violations": report,
                                      "valid": not report})
    if report:
        print("invalid triple:", "; ".join(report))
        return EXIT_CONFIG
    print("triple is admissible")
    return EXIT_OK


def cmd_sectors(cfg: RunConfig, out: Path, args) -> int:
    ss = cfg.sectors
    if ss is None:
        raise ConfigError("sectors needs a 'field' section")
    _write_json(out / "result.json", {
        "angles": list(ss.angles),
        "half_width": ss.half_width,
        "epsilon": ss.epsilon,
        "n": ss.n,
    })
    return EXIT_OK


def cmd_levelset(cfg: RunConfig, out: Path, args) -> int:
    if cfg.field is None:
        raise ConfigError("levelset needs a 'field' section")
    m = args.M if args.M is not None else cfg.forbidden_m
    curves = level_set(cfg.field, m, cfg.window, cfg.resolution,
                       sectors=cfg.sectors)
    rows = []
    for k, c in enumerate(curves):
        for z in c.points:
            rows.append((k, z.real, z.imag))
    np.savetxt(out / "levelset.csv", np.array(rows), delimiter=",",
               header="curve,x,y", comments="", fmt="%d,%.17g,%.17g")
    _polyline_svg(out / "levelset.svg", [c.points for c in curves])
    _write_json(out / "result.json", {
        "M": m,
        "curves": [{"kind": c.kind, "points": len(c.points),
                    "closed": c.closed} for c in curves],
    })
    return EXIT_OK


def cmd_equilibrium(cfg: RunConfig, out: Path, args) -> int:
    mu0, ell0, _ = equilibrium_measure(cfg.init_contour(), field=cfg.field,
                                       n=cfg.solver.n, sectors=cfg.sectors)
    mu, ell, _ = refine_measure(mu0, cfg.field)
    el = euler_lagrange_residual(mu, ell, field=cfg.field)
    _write_measure_csv(out / "measure.csv", mu)
    _write_json(out / "result.json", {
        "ell": ell,
        "energy": weighted_energy(mu, cfg.field),
        "el_residual": el,
    })
    return EXIT_OK


def cmd_maxmin(cfg: RunConfig, out: Path, args) -> int:
    if cfg.triple is None:
        raise ConfigError("maxmin needs a 'triple' section")
    try:
        res = maxmin_ascent(cfg.triple, cfg.field, cfg.init_contour(),
                            _ascent_params(cfg), cfg.sectors,
                            fixed=cfg.fixed)
        stalled = False
    except StalledBelowTolerance as exc:
        res = exc.result
        stalled = True
    _write_contour_csv(out / "contour.csv", res.contour)
    _write_measure_csv(out / "measure.csv", res.measure)
    (out / "trace.jsonl").write_text(res.trace_jsonl())
    _polyline_svg(out / "contour.svg",
                  [c.vertices for c in res.contour.components])
    _write_json(out / "result.json", {
        "ell": res.ell,
        "energy": res.energy,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "stalled": stalled,
    })
    return EXIT_OK


def cmd_spectral(cfg: RunConfig, out: Path, args) -> int:
    mu, ell, _, extra = _solve_measure(cfg)
    pts = sample_points(mu, cfg.field)
    vals = sample_R(mu, cfg.field, pts)
    structure = curve_structure(cfg.field, cfg.fixed.points)
    curve = fit_spectral_curve((pts, vals), structure)
    resid = spectral_residual(curve, mu, cfg.field, pts[::3])
    _write_measure_csv(out / "measure.csv", mu)
    _write_json(out / "result.json", {
        "curve": curve.export_dict(),
        "spectral_residual": resid,
        "ell": ell,
    })
    return EXIT_OK


def cmd_trace(cfg: RunConfig, out: Path, args) -> int:
    mu, ell, _, extra = _solve_measure(cfg)
    pts = sample_points(mu, cfg.field)
    vals = sample_R(mu, cfg.field, pts)
    curve = fit_spectral_curve((pts, vals),
                               curve_structure(cfg.field, cfg.fixed.points))
    graph = critical_graph(curve)
    info = export_graph(graph, out / "graph")
    _write_json(out / "result.json", {
        "curve": curve.export_dict(),
        "trajectories": info["index"],
    })
    return EXIT_OK


def cmd_construct(cfg: RunConfig, out: Path, args) -> int:
    if cfg.triple is None:
        raise ConfigError("construct needs a 'triple' section")
    mu, ell, _, extra = _solve_measure(cfg)
    region = lambda_region(mu, ell, cfg.field, cfg.window, cfg.resolution,
                           sectors=cfg.sectors)
    gamma0 = build_gamma0(region, mu, cfg.triple, cfg.sectors,
                          fixed=cfg.fixed)
    checks = verify_gamma0(gamma0, mu, cfg.field, sectors=cfg.sectors,
                           n=cfg.solver.n)
    _write_contour_csv(out / "gamma0.csv", gamma0)
    _polyline_svg(out / "gamma0.svg",
                  [c.vertices for c in gamma0.components])
    _write_json(out / "result.json", {
        "r_eps": region.r_eps,
        "tv": checks["tv"],
        "support_in_gamma0": checks["support_in_gamma0"],
        "energy_gap": checks["energy_gap"],
        "ell": ell,
    })
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, args) -> int:
    """Run every residual check and emit a single verdict JSON."""
    thresholds = {
        "el_residual": 5e-3,
        "criticality": max(cfg.solver.tol_crit, 1e-3),
        "s_property": 5e-3,
        "spectral": 5e-2,
    }
    thresholds.update(cfg.raw.get("verify", {}))

    checks: dict = {}
    mu, ell, mu0, extra = _solve_measure(cfg)
    el = euler_lagrange_residual(mu, ell, field=cfg.field)
    checks["el_residual"] = {
        "value": el["sup_on_support"],
        "threshold": thresholds["el_residual"],
        "pass": el["sup_on_support"] <= thresholds["el_residual"],
    }
    crit = criticality_residual(mu, cfg.field, cfg.fixed,
                                basis_size=cfg.solver.basis_size)
    checks["criticality"] = {
        "value": crit,
        "threshold": thresholds["criticality"],
        "pass": crit <= thresholds["criticality"],
    }
    # the symmetry residual is evaluated on the pre-refinement grid, whose
    # uniform cells keep the two-sided finite differences clear of the
    # clustered edge cells
    s_res = s_property_residual(mu0, cfg.field)
    checks["s_property"] = {
        "value": s_res,
        "threshold": thresholds["s_property"],
        "pass": s_res <= thresholds["s_property"],
    }
    pts = sample_points(mu, cfg.field)
    curve = fit_spectral_curve(
        (pts, sample_R(mu, cfg.field, pts)),
        curve_structure(cfg.field, cfg.fixed.points),
    )
    sp = spectral_residual(curve, mu, cfg.field, pts[::3])
    checks["spectral"] = {
        "value": sp,
        "threshold": thresholds["spectral"],
        "pass": sp <= thresholds["spectral"],
    }
    ok = all(c["pass"] for c in checks.values())
    _write_json(out / "verdict.json", {"checks": checks, "pass": ok,
                                       "ell": ell})
    for name, c in checks.items():
        tag = "PASS" if c["pass"] else "FAIL"
        print(f"{tag} {name}: {c['value']:.3e} (<= {c['threshold']:.3e})")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


COMMANDS = {
    "validate": cmd_validate,
    "sectors": cmd_sectors,
    "levelset": cmd_levelset,
    "equilibrium": cmd_equilibrium,
    "maxmin": cmd_maxmin,
    "spectral": cmd_spectral,
    "trace": cmd_trace,
    "construct": cmd_construct,
    "verify": cmd_verify,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="maxcap",
        description="weighted max-min equilibrium contours: batch pipeline",
    )
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="maxcap-out", help="output directory")
    p.add_argument("--M", type=float, default=None,
                   help="level for the levelset command")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap (modules are sequential at desk scale)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        cfg = load_config(args.config)
        np.random.seed(cfg.seed)
        status = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _write_json(out / "error.json", {"kind": "config", "error": str(exc)})
        return EXIT_CONFIG
    except MaxcapError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        _write_json(out / "error.json", {"kind": "numeric",
                                         "type": type(exc).__name__,
                                         "error": str(exc)})
        return EXIT_NUMERIC

    manifest = {
        "command": args.command,
        "config_sha256": _sha256(Path(args.config)),
        "parameters": cfg.raw,
        "versions": {
            "maxcap": __version__,
            "numpy": np.__version__,
        },
        "wall_time_s": time.time() - t0,
        "outputs": {
            f.name: _sha256(f)
            for f in sorted(out.iterdir())
            if f.is_file() and f.name != "manifest.json"
        },
    }
    _write_json(out / "manifest.json", manifest)
    return status


if __name__ == "__main__":
    sys.exit(main())
