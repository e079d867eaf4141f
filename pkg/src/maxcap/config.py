"""Run configuration: a single JSON file describing the field, the fixed
points, the admissible triple, solver parameters, and plot windows."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MaxcapError
from .field import ExternalField, SectorSet, Window, admissible_sectors
from .geometry import Component, Contour, Ray
from .topology import AdmissibleTriple, FixedPointSet


def _cplx(v) -> complex:
    """Accept a number, a [re, im] pair, or a 're+imj' string."""
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"cannot parse complex number from {v!r}")


@dataclass
class SolverParams:
    n: int = 400
    tol_crit: float = 1e-3
    max_iter: int = 200
    basis_size: int = 12
    run_maxmin: bool = False


@dataclass
class RunConfig:
    """Validated run configuration with constructed model objects."""

    raw: dict
    field: ExternalField | None
    epsilon: float
    fixed: FixedPointSet
    triple: AdmissibleTriple | None
    solver: SolverParams
    window: Window
    resolution: int
    forbidden_m: float
    forbidden_margin: float
    seed: int
    init_spec: dict | None

    @property
    def sectors(self) -> SectorSet | None:
        if self.field is None:
            return None
        return admissible_sectors(self.field, self.epsilon)

    def init_contour(self) -> Contour:
        if self.init_spec is None:
            raise ConfigError("config has no 'init' contour specification")
        return build_init_contour(self.init_spec)


def build_init_contour(spec: dict) -> Contour:
    """Initial contour from its JSON description.

    kinds: 'segment' {a, b, n}; 'bent-line' {x0, x1, n, amplitude} (a line
    with a localized sine bend); 'vertices' {points}.  All kinds accept
    'rays': [[sector, 'head'|'tail'], ...].
    """
    kind = spec.get("kind", "vertices")
    rays = tuple(Ray(int(s), str(e)) for s, e in spec.get("rays", []))
    if kind == "segment":
        a, b = _cplx(spec["a"]), _cplx(spec["b"])
        n = int(spec.get("n", 201))
        verts = a + (b - a) * np.linspace(0.0, 1.0, n)
    elif kind == "bent-line":
        x0 = float(spec.get("x0", -3.0))
        x1 = float(spec.get("x1", 3.0))
        n = int(spec.get("n", 241))
        amp = float(spec.get("amplitude", 0.25))
        x = np.linspace(x0, x1, n)
        verts = x + 1j * amp * np.sin(np.pi * x) * np.exp(-(x ** 2))
    elif kind == "vertices":
        verts = np.array([_cplx(p) for p in spec["points"]])
    else:
        raise ConfigError(f"unknown init contour kind {kind!r}")
    anchors = tuple(
        (int(i), _cplx(c)) for i, c in spec.get("anchors", [])
    )
    return Contour((Component(verts, rays=rays, anchors=anchors),))


def load_config(path) -> RunConfig:
    """Parse and cross-validate a JSON config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")

    fld = None
    epsilon = float(raw.get("epsilon", 0.2))
    if "field" in raw and raw["field"] is not None:
        fspec = raw["field"]
        try:
            fld = ExternalField(
                tuple(_cplx(c) for c in fspec["p_coeffs"]),
                tuple((_cplx(z), int(m))
                      for z, m in fspec.get("q_factors", [])),
                tuple((_cplx(w), _cplx(r))
                      for w, r in fspec.get("log_terms", [])),
                allow_real_rho=bool(fspec.get("allow_real_rho", False)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed field spec: {exc}") from exc
        except MaxcapError as exc:
            raise ConfigError(f"invalid field: {exc}") from exc
        epsilon = float(fspec.get("epsilon", epsilon))

    fixed = FixedPointSet(tuple(_cplx(p)
                                for p in raw.get("fixed_points", [])))

    triple = None
    if "triple" in raw and raw["triple"] is not None:
        try:
            triple = AdmissibleTriple.from_config(raw["triple"])
        except (KeyError, TypeError, MaxcapError) as exc:
            raise ConfigError(f"malformed triple spec: {exc}") from exc

    s = raw.get("solver", {})
    solver = SolverParams(
        n=int(s.get("n", 400)),
        tol_crit=float(s.get("tol_crit", 1e-3)),
        max_iter=int(s.get("max_iter", 200)),
        basis_size=int(s.get("basis_size", 12)),
        run_maxmin=bool(s.get("run_maxmin", False)),
    )
    if solver.n < 10:
        raise ConfigError("solver.n must be at least 10")

    w = raw.get("window", {})
    window = Window(
        float(w.get("xmin", -6.0)), float(w.get("xmax", 6.0)),
        float(w.get("ymin", -6.0)), float(w.get("ymax", 6.0)),
    )
    if window.xmin >= window.xmax or window.ymin >= window.ymax:
        raise ConfigError("window must have positive extent")
    resolution = int(w.get("resolution", 201))
    if resolution < 16:
        raise ConfigError("window.resolution must be at least 16")

    fb = raw.get("forbidden", {})
    forbidden_m = float(fb.get("M", 10.0))
    forbidden_margin = float(fb.get("margin", 8.0))

    return RunConfig(
        raw=raw,
        field=fld,
        epsilon=epsilon,
        fixed=fixed,
        triple=triple,
        solver=solver,
        window=window,
        resolution=resolution,
        forbidden_m=forbidden_m,
        forbidden_margin=forbidden_margin,
        seed=int(raw.get("seed", 0)),
        init_spec=raw.get("init"),
    )
