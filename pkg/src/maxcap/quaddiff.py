"""Local structure of the quadratic differential -R(z)dz^2: critical-point
classification, horizontal-trajectory tracing, and the critical graph."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import numpy.polynomial.polynomial as npp

from .errors import RootfindingFailure, StepUnderflow
from .spectral import SpectralCurve

MAX_NUM_DEGREE = 32
WINDING_CAP = 3


@dataclass
class CriticalPoint:
    """A finite critical point of -R dz^2, or the point at infinity."""

    point: complex | None          # None encodes infinity
    order: int                     # net order of R (zeros > 0, poles < 0)
    kind: str                      # zero / simple pole / double pole / ...
    directions: tuple[float, ...]  # emanating / distinguished angles
    structure: str                 # human-readable local description
    residue: complex | None = None  # residue of sqrt(R) at a double pole

    @property
    def is_finite(self) -> bool:
        return self.point is not None


def _local_coefficient(curve: SpectralCurve, p: complex, order: int,
                       scale: float) -> complex:
    """Leading coefficient c of R(z) ~ c (z-p)^order, by averaging over a
    small circle (robust to nearby roots of the same polynomial)."""
    eps = 1e-4 * max(scale, 1e-6)
    ang = np.exp(2j * np.pi * (np.arange(8) + 0.125) / 8)
    z = p + eps * ang
    vals = curve(z) / (eps * ang) ** order
    return complex(vals.mean())


def _emanating_angles(c: complex, order: int) -> tuple[float, ...]:
    """Angles theta with -c e^{i(order+2)theta} > 0; there are |order + 2|
    solutions (order+2 for a zero of order n, 2k for a pole of order 2k+2)."""
    m = order + 2
    if m == 0:
        return ()
    count = abs(m)
    base = (np.pi - np.angle(c)) / m
    step = 2 * np.pi / m
    angles = np.mod(base + step * np.arange(count), 2 * np.pi)
    return tuple(sorted(float(a) for a in angles))


def classify_critical_points(curve: SpectralCurve) -> list[CriticalPoint]:
    """Zeros and poles of R with their emanating-trajectory structure, plus
    the point at infinity with order -4 - sum(orders)."""
    num = np.trim_zeros(np.asarray(curve.numerator_coeffs, dtype=complex),
                        "b")
    if len(num) == 0:
        raise RootfindingFailure("identically zero numerator")
    if len(num) - 1 > MAX_NUM_DEGREE:
        raise RootfindingFailure(
            f"numerator degree {len(num) - 1} exceeds {MAX_NUM_DEGREE}"
        )
    try:
        roots = npp.polyroots(num) if len(num) > 1 else np.array([])
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise RootfindingFailure(str(exc)) from exc

    pole_locs = [complex(p) for p, _ in curve.finite_poles]
    pole_orders = {k: int(o) for k, (_, o) in enumerate(curve.finite_poles)}
    all_pts = list(roots) + pole_locs
    scale = max([1.0] + [abs(z) for z in all_pts])
    # a root of multiplicity m is computed as a cluster of radius
    # ~eps^(1/m); widen the merge tolerance accordingly
    deg = max(len(num) - 1, 1)
    match_tol = scale * max(1e-7, 10.0 * np.finfo(float).eps ** (1.0 / deg))

    # net order at each distinct location: zero multiplicity minus pole order
    locs: list[complex] = []
    orders: list[int] = []

    def _register(p, delta):
        for i, q in enumerate(locs):
            if abs(p - q) < match_tol:
                orders[i] += delta
                return
        locs.append(complex(p))
        orders.append(delta)

    for r in roots:
        _register(r, 1)
    for k, p in enumerate(pole_locs):
        _register(p, -pole_orders[k])

    points: list[CriticalPoint] = []
    for p, n in zip(locs, orders):
        if n == 0:
            continue  # zero exactly cancels the pole: regular point
        c = _local_coefficient(curve, p, n, scale)
        if n > 0:
            points.append(CriticalPoint(
                point=p, order=n, kind="zero",
                directions=_emanating_angles(c, n),
                structure=f"zero of order {n}: {n + 2} trajectories at "
                          f"consecutive angles 2pi/{n + 2}",
            ))
        elif n == -1:
            points.append(CriticalPoint(
                point=p, order=n, kind="simple pole",
                directions=_emanating_angles(c, n),
                structure="simple pole: exactly one emanating trajectory",
            ))
        elif n == -2:
            residue = complex(np.sqrt(c))
            closed = abs(residue.real) <= 1e-9 * abs(residue)
            points.append(CriticalPoint(
                point=p, order=n, kind="double pole", directions=(),
                structure=("closed curves winding around the pole" if closed
                           else "arcs approaching in every direction"),
                residue=residue,
            ))
        else:
            if n % 2 == 0:
                k = (-n - 2) // 2
                desc = (f"pole of order {-n} = 2({k}+1): {2 * k} "
                        "distinguished directions")
            else:
                desc = f"odd pole of order {-n}"
            points.append(CriticalPoint(
                point=p, order=n, kind="higher pole",
                directions=_emanating_angles(c, n),
                structure=desc,
            ))

    inf_order = -4 - sum(orders)
    if inf_order % 2 == 0 and inf_order <= -4:
        k = (-inf_order - 2) // 2
        inf_desc = (f"infinity: pole of order {-inf_order} = 2({k}+1), "
                    f"{2 * k} escape sectors")
    else:
        inf_desc = f"infinity: order {inf_order}"
    # local coefficient of R in the chart u = 1/z: R dz^2 = (R/u^4) du^2
    c_inf = complex(curve.numerator_coeffs[-1])
    points.append(CriticalPoint(
        point=None, order=inf_order, kind="infinity",
        directions=_emanating_angles(c_inf, -inf_order - 4),
        structure=inf_desc,
    ))
    return points


@dataclass
class Trajectory:
    """A traced horizontal trajectory of -R dz^2."""

    points: np.ndarray
    reason: str                       # critical-point / escape / winding-cap
    length: float
    drift_per_unit: float             # |Delta Re int sqrt(R) dz| per length
    endpoint_labels: tuple[str, str] = ("start", "end")

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)


def _feature_scale(crits: list[CriticalPoint]) -> float:
    pts = [c.point for c in crits if c.is_finite]
    if len(pts) < 2:
        return 1.0
    arr = np.array(pts)
    d = np.abs(arr[:, None] - arr[None, :])
    d[d == 0] = np.inf
    return float(max(min(1.0, d.min()), 1e-6))


def trace_trajectory(
    curve: SpectralCurve,
    z0: complex,
    direction: complex,
    critical_points: list[CriticalPoint] | None = None,
    max_length: float | None = None,
) -> Trajectory:
    """Arclength integration of the unit field v with -R(z) v^2 > 0,
    i.e. v = +- i/sqrt(R), branch continued along the path.

    Adaptive embedded RK (Bogacki-Shampine 3(2) pairs refined by step
    halving) with step control on the variation of R; stops within
    eps_stop of a finite critical point, at the escape radius, or at the
    winding cap near a double pole in the spiral regime.
    """
    crits = (classify_critical_points(curve)
             if critical_points is None else critical_points)
    finite = np.array([c.point for c in crits if c.is_finite], dtype=complex)
    orders = np.array([c.order for c in crits if c.is_finite])
    fs = _feature_scale(crits)
    eps_stop = 1e-4 * fs
    escape = 10.0 * (1.0 + (np.max(np.abs(finite)) if len(finite) else 0.0))
    if max_length is None:
        max_length = 20.0 * escape

    double_poles = finite[orders == -2] if len(finite) else finite[:0]

    ref = [complex(direction) / abs(direction)]

    def unit_field(z: complex) -> complex:
        r = curve(z)
        if r == 0:
            raise StepUnderflow(f"field evaluated at a zero of R: {z}")
        v = 1j / np.sqrt(r)
        v /= abs(v)
        if (v * np.conj(ref[0])).real < 0:
            v = -v
        return v

    def rhs_aligned(z: complex, v_prev: complex) -> complex:
        r = curve(z)
        if r == 0:
            raise StepUnderflow(f"field evaluated at a zero of R: {z}")
        v = 1j / np.sqrt(r)
        v /= abs(v)
        if (v * np.conj(v_prev)).real < 0:
            v = -v
        return v

    z = complex(z0)
    pts = [z]
    length = 0.0
    drift = 0.0
    max_drift = 0.0
    winding = 0.0
    reason = "max-length"
    root_prev = None

    # initial step from local geometry
    if len(finite):
        h = 0.05 * max(np.min(np.abs(finite - z)), 10 * eps_stop)
    else:
        h = 0.05
    h = min(h, 0.05 * fs + 0.01)
    h_min = 1e-12 * max(1.0, abs(z0))
    tol = 1e-10

    while length < max_length:
        v0 = unit_field(z)
        ref[0] = v0
        try:
            # Bogacki-Shampine 3(2) embedded step on dz/ds = v(z)
            k1 = v0
            k2 = rhs_aligned(z + 0.5 * h * k1, k1)
            k3 = rhs_aligned(z + 0.75 * h * k2, k2)
            z3 = z + h * (2 * k1 + 3 * k2 + 4 * k3) / 9.0
            k4 = rhs_aligned(z3, k3)
            z2 = z + h * (7 * k1 + 6 * k2 + 8 * k3 + 3 * k4) / 24.0
        except StepUnderflow:
            reason = "critical-point"
            break
        err = abs(z3 - z2)
        if err > tol * max(1.0, abs(z3)) and h > h_min:
            h = max(h_min, 0.5 * h)
            continue

        # quadrature of sqrt(R) along the accepted segment (Simpson),
        # branch continued through the midpoint
        mid = 0.5 * (z + z3)
        r0, rm, r1 = curve(z), curve(mid), curve(z3)
        s0 = np.sqrt(r0)
        if root_prev is not None and (s0 * np.conj(root_prev)).real < 0:
            s0 = -s0
        sm = np.sqrt(rm)
        if (sm * np.conj(s0)).real < 0:
            sm = -sm
        s1 = np.sqrt(r1)
        if (s1 * np.conj(sm)).real < 0:
            s1 = -s1
        root_prev = s1
        seg = z3 - z
        drift += ((s0 + 4 * sm + s1) / 6.0 * seg).real
        max_drift = max(max_drift, abs(drift))

        # winding accounting near spiral-regime double poles
        if len(double_poles):
            j = int(np.argmin(np.abs(double_poles - z3)))
            p = double_poles[j]
            if abs(z3 - p) < 0.5 * escape:
                winding += np.angle((z3 - p) / (z - p))
                if abs(winding) > 2 * np.pi * WINDING_CAP:
                    z = z3
                    pts.append(z)
                    length += abs(seg)
                    reason = "winding-cap"
                    break

        z = z3
        pts.append(z)
        length += abs(seg)

        if len(finite):
            d = np.abs(finite - z)
            j = int(np.argmin(d))
            if d[j] < max(eps_stop, 2 * h) and orders[j] != -2:
                # close to a zero/pole: shrink the step so the endpoint
                # lands within eps_stop before declaring termination
                if d[j] < eps_stop:
                    reason = "critical-point"
                    pts[-1] = finite[j]
                    break
                h = min(h, 0.5 * d[j])
                if h <= h_min:
                    raise StepUnderflow(
                        f"step underflow at {z} near {finite[j]}"
                    )
                continue
        if abs(z) > escape:
            reason = "escape"
            break

        # step growth, limited by the variation of R over the step
        r_var = abs(r1 - r0) / (abs(r0) + abs(r1) + 1e-300)
        grow = 2.0 if err < 0.1 * tol else 1.2
        if r_var > 0.2:
            grow = 0.7
        h = min(h * grow, 0.05 * fs + 0.05)

    drift_rate = max_drift / max(length, 1e-12)
    return Trajectory(np.array(pts), reason, length, drift_rate)


def _closest_critical(crits, z, tol):
    for i, c in enumerate(crits):
        if c.is_finite and abs(c.point - z) < tol:
            return i
    return None


def critical_graph(
    curve: SpectralCurve,
    launch_offset: float | None = None,
) -> list[Trajectory]:
    """Traces from every finite critical point along every emanating
    direction, labeled by their endpoints and deduplicated by symmetric
    endpoint pair plus midpoint proximity."""
    crits = classify_critical_points(curve)
    fs = _feature_scale(crits)
    eps_stop = 1e-4 * fs
    if launch_offset is None:
        launch_offset = 20 * eps_stop
    finite = [c for c in crits if c.is_finite]
    escape = 10.0 * (1.0 + max([abs(c.point) for c in finite], default=0.0))

    inf_dirs = ()
    for c in crits:
        if not c.is_finite:
            inf_dirs = c.directions

    def _escape_label(z_final: complex) -> str:
        ang = float(np.angle(z_final)) % (2 * np.pi)
        if inf_dirs:
            j = int(np.argmin([
                min(abs(ang - d), 2 * np.pi - abs(ang - d)) for d in inf_dirs
            ]))
            return f"infinity-sector-{j}"
        return "infinity"

    raw: list[Trajectory] = []
    for i, c in enumerate(finite):
        for theta in c.directions:
            d = np.exp(1j * theta)
            z0 = c.point + launch_offset * d
            try:
                tr = trace_trajectory(curve, z0, d, critical_points=crits)
            except StepUnderflow:
                continue
            start = f"critical-{i}"
            z_end = tr.points[-1]
            j = _closest_critical(finite, z_end, max(10 * eps_stop,
                                                     launch_offset))
            if tr.reason == "critical-point" and j is not None:
                end = f"critical-{j}"
            elif abs(z_end) > 0.9 * escape:
                end = _escape_label(z_end)
            else:
                end = tr.reason
            pts = np.concatenate([[c.point], tr.points])
            raw.append(Trajectory(pts, tr.reason, tr.length + launch_offset,
                                  tr.drift_per_unit, (start, end)))

    # deduplicate: unordered endpoint pair + arclength-midpoint proximity
    graph: list[Trajectory] = []
    mid_tol = max(0.05 * fs, 2 * launch_offset)
    for tr in raw:
        key = frozenset(tr.endpoint_labels)
        mid = _arclength_midpoint(tr.points)
        dup = False
        for kept in graph:
            if frozenset(kept.endpoint_labels) == key and \
                    abs(_arclength_midpoint(kept.points) - mid) < mid_tol:
                dup = True
                break
        if not dup:
            graph.append(tr)
    return graph


def _arclength_midpoint(points: np.ndarray) -> complex:
    seg = np.abs(np.diff(points))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0:
        return complex(points[0])
    half = 0.5 * cum[-1]
    k = int(np.searchsorted(cum, half))
    k = min(max(k, 1), len(points) - 1)
    t = (half - cum[k - 1]) / max(cum[k] - cum[k - 1], 1e-300)
    return complex((1 - t) * points[k - 1] + t * points[k])


def export_graph(trajectories: list[Trajectory], directory) -> dict:
    """CSV per trajectory, a JSON index, and an SVG rendering."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for k, tr in enumerate(trajectories):
        name = f"trajectory_{k:02d}.csv"
        np.savetxt(directory / name,
                   np.column_stack([tr.points.real, tr.points.imag]),
                   delimiter=",", header="x,y", comments="")
        index.append({
            "file": name,
            "endpoints": list(tr.endpoint_labels),
            "length": tr.length,
            "reason": tr.reason,
            "drift_per_unit": tr.drift_per_unit,
        })
    (directory / "graph_index.json").write_text(json.dumps(index, indent=2))
    _render_svg(trajectories, directory / "graph.svg")
    return {"index": index, "directory": str(directory)}


def _render_svg(trajectories, path, size=640):
    all_pts = np.concatenate([t.points for t in trajectories]) \
        if trajectories else np.array([0j])
    xmin, xmax = all_pts.real.min(), all_pts.real.max()
    ymin, ymax = all_pts.imag.min(), all_pts.imag.max()
    span = max(xmax - xmin, ymax - ymin, 1e-9)
    pad = 0.05 * span

    def map_pt(z):
        x = (z.real - xmin + pad) / (span + 2 * pad) * size
        y = size - (z.imag - ymin + pad) / (span + 2 * pad) * size
        return x, y

    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for tr in trajectories:
        step = max(1, len(tr.points) // 2000)
        coords = " ".join(
            f"{x:.2f},{y:.2f}"
            for x, y in (map_pt(z) for z in tr.points[::step])
        )
        lines.append(f'<polyline points="{coords}" fill="none" '
                     'stroke="steelblue" stroke-width="1.5"/>')
        for z, label in zip((tr.points[0], tr.points[-1]),
                            tr.endpoint_labels):
            x, y = map_pt(z)
            color = "crimson" if label.startswith("critical") else "gray"
            lines.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" '
                         f'fill="{color}"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines))
