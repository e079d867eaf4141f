"""Energy variations: directional derivatives, criticality and symmetry
residuals, and the outer max-min ascent over contour deformations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .equilibrium import (
    DiscreteMeasure,
    equilibrium_measure,
    place_nodes,
    _phi_at_nodes,
)
from .errors import (
    InitInvalid,
    StalledBelowTolerance,
    TestFunctionViolation,
    TooFewProbes,
)
from .field import ExternalField, SectorSet
from .geometry import BumpField, Contour, perturb
from .topology import AdmissibleTriple, FixedPointSet, membership


def tangent_directions(mu: DiscreteMeasure) -> np.ndarray:
    """Unit tangents at the nodes, from neighbours in chain order; falls back
    to +1 where the chain breaks (component boundaries)."""
    z = mu.nodes
    n = len(z)
    tau = np.ones(n, dtype=complex)
    for k in range(n):
        lo = max(k - 1, 0)
        hi = min(k + 1, n - 1)
        # only trust neighbours that are actually adjacent on the same arc
        if abs(z[hi] - z[k]) > 6.0 * mu.gaps[k]:
            hi = k
        if abs(z[k] - z[lo]) > 6.0 * mu.gaps[k]:
            lo = k
        d = z[hi] - z[lo]
        if d != 0:
            tau[k] = d / abs(d)
    return tau


def check_test_function(
    h: BumpField,
    fixed: FixedPointSet | None = None,
    field: ExternalField | None = None,
    dead_radius: float = 0.1,
):
    """Raise TestFunctionViolation unless h vanishes at the fixed points and
    on a protective disc around every field singularity."""
    if fixed is not None:
        for c in fixed.points:
            if abs(complex(h(c))) > 1e-12:
                raise TestFunctionViolation(f"test field does not vanish at {c}")
    if field is not None:
        for s in field.singularities:
            ring = s + dead_radius * np.exp(2j * np.pi * np.arange(8) / 8)
            if np.max(np.abs(h(ring))) > 1e-12 or abs(complex(h(s))) > 1e-12:
                raise TestFunctionViolation(
                    f"test field enters the dead zone around {s}"
                )


def directional_derivative(
    mu: DiscreteMeasure,
    field: ExternalField | None,
    h,
    check: bool = False,
    fixed: FixedPointSet | None = None,
) -> float:
    """D_h I^phi(mu) = -Re( sum sum w_k w_l K(z_k, z_l)
                            - 2 sum w_k Phi'(z_k) h(z_k) ),
    K(x,y) = (h(x)-h(y))/(x-y) with its tangent extension on the diagonal."""
    if check:
        check_test_function(h, fixed=fixed, field=field)
    hvals = np.asarray(h(mu.nodes), dtype=complex)
    tau = tangent_directions(mu)
    hdiag = np.asarray(h.jacobian_action(mu.nodes, tau), dtype=complex) / tau
    dsum = kernels.quotient_double_sum(mu.nodes, mu.weights, hvals, hdiag)
    lin = 0j
    if field is not None:
        lin = complex(np.sum(mu.weights * field.phi_prime(mu.nodes) * hvals))
    return float(-np.real(dsum - 2.0 * lin))


class SumField:
    """Linear combination of bump fields; quacks like one for perturbation."""

    def __init__(self, terms: list[tuple[float, BumpField]]):
        self.terms = [(float(c), h) for c, h in terms]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c, h in self.terms:
            out = out + c * h(z)
        return out

    def jacobian_action(self, z, v):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c, h in self.terms:
            out = out + c * h.jacobian_action(z, v)
        return out

    def sup_norm(self) -> float:
        return sum(abs(c) * h.sup_norm() for c, h in self.terms)

    def scaled(self, factor: float) -> "SumField":
        return SumField([(c * factor, h) for c, h in self.terms])


def make_bump_basis(
    mu: DiscreteMeasure,
    fixed: FixedPointSet | None = None,
    field: ExternalField | None = None,
    basis_size: int = 12,
    dead_radius: float = 0.1,
) -> list[BumpField]:
    """Bumps covering supp mu: centers on a grid over the support's bounding
    box, two orthogonal directions each, radii respecting the dead zones."""
    sup = mu.support_nodes()
    xmin, xmax = sup.real.min(), sup.real.max()
    ymin, ymax = sup.imag.min(), sup.imag.max()
    diam = max(np.hypot(xmax - xmin, ymax - ymin), 1e-6)
    n_centers = max(2, basis_size // 2)
    width = max(xmax - xmin, 1e-12)
    ny = int(np.clip(round(n_centers * (ymax - ymin) / width), 1, n_centers // 2))
    nx = max(2, n_centers // ny)
    cx = np.linspace(xmin, xmax, nx)
    cy = np.linspace(ymin, ymax, ny) if ny > 1 else np.array([0.5 * (ymin + ymax)])
    centers = (cx[None, :] + 1j * cy[:, None]).ravel()
    radius = diam / 3.0
    fixed_pts = fixed.points if fixed is not None else ()
    sing = field.singularities if field is not None else ()
    basis: list[BumpField] = []
    for c in centers:
        for direction in (1.0, 1.0j):
            try:
                basis.append(
                    BumpField.admissible(
                        c,
                        radius,
                        direction,
                        fixed_points=fixed_pts,
                        singularities=sing,
                        dead_radius=dead_radius,
                    )
                )
            except TestFunctionViolation:
                continue
    return basis


def criticality_residual(
    mu: DiscreteMeasure,
    field: ExternalField | None,
    fixed: FixedPointSet | None = None,
    basis_size: int = 12,
    basis: list[BumpField] | None = None,
) -> float:
    """max over the bump basis of |D_h| / (1 + sup|h| + sup|h'|); a lower
    bound on the true criticality defect."""
    if basis is None:
        basis = make_bump_basis(mu, fixed=fixed, field=field, basis_size=basis_size)
    best = 0.0
    for h in basis:
        d = directional_derivative(mu, field, h)
        best = max(best, abs(d) / (1.0 + h.sup_norm() + h.deriv_sup_norm()))
    return best


def s_property_residual(
    mu: DiscreteMeasure,
    field: ExternalField | None,
    delta: float | None = None,
    edge_exclusion: float = 0.1,
) -> float:
    """Symmetry check: one-sided normal derivatives of U + phi/2 on the two
    sides of the support, by offset finite differences at s +- delta eta."""
    act = np.flatnonzero(mu.active)
    n_skip = max(1, int(edge_exclusion * len(act)))
    probes = act[n_skip:-n_skip]
    probes = probes[:: max(1, len(probes) // 40)]
    if len(probes) < 5:
        raise TooFewProbes(f"only {len(probes)} interior probe nodes")
    tau = tangent_directions(mu)
    worst = 0.0
    for k in probes:
        s = mu.nodes[k]
        eta = 1j * tau[k]
        d = delta if delta is not None else max(3.0 * mu.gaps[k], 1e-3 * max(1.0, abs(s)))
        pts = np.array([s + 1.5 * d * eta, s + 0.5 * d * eta,
                        s - 0.5 * d * eta, s - 1.5 * d * eta])
        u = kernels.potential_many(mu.nodes, mu.weights, pts)
        f = u + (0.5 * _phi_at_nodes(pts, field) if field is not None else 0.0)
        dplus = (f[0] - f[1]) / d
        dminus = (f[3] - f[2]) / d
        worst = max(worst, abs(dplus - dminus) / (abs(dplus) + abs(dminus) + 1.0))
    return worst


# -- the outer ascent --------------------------------------------------------

@dataclass
class AscentParams:
    n_nodes: int = 300
    tol_crit: float = 1e-3
    max_outer: int = 200
    step0: float = 0.15
    shrink: float = 0.5
    basis_size: int = 12
    dead_radius: float = 0.1
    clearance_radius: float = 3.0
    seed: int = 0


@dataclass
class AscentResult:
    contour: Contour
    measure: DiscreteMeasure
    ell: float
    energy: float
    residual: float
    iterations: int
    converged: bool
    trace: list = dc_field(default_factory=list)

    def trace_jsonl(self) -> str:
        return "\n".join(json.dumps(rec) for rec in self.trace)


def _apply_step(contour: Contour, h, t: float) -> Contour:
    """Move vertices by the normal component of t*h only.  Tangential motion
    is pure reparameterization of the set; letting it through just bunches
    vertices and corrupts the arclength discretization."""
    from .errors import FoldDetected
    from .geometry import Component

    comps = []
    for comp in contour.components:
        v = comp.vertices
        tau = np.empty(len(v), dtype=complex)
        d = np.diff(v)
        tau[0], tau[-1] = d[0], d[-1]
        if len(v) > 2:
            tau[1:-1] = v[2:] - v[:-2]
        tau = tau / np.abs(tau)
        eta = 1j * tau
        disp = np.asarray(h(v), dtype=complex)
        v2 = v + t * eta * np.real(np.conj(eta) * disp)
        for idx, c in comp.anchors:
            v2[idx] = c
        scale = max(1.0, np.max(np.abs(v2)))
        if np.any(np.abs(np.diff(v2)) < 1e-14 * scale):
            raise FoldDetected("step collapsed consecutive vertices")
        comps.append(Component(v2, comp.rays, comp.anchors))
    return Contour(tuple(comps))


def _resample(contour: Contour) -> Contour:
    """Redistribute each component's vertices uniformly by arclength, span by
    span between pinned vertices, keeping the vertex count."""
    from .geometry import Component

    comps = []
    for comp in contour.components:
        v = comp.vertices
        pins = sorted({0, len(v) - 1} | {idx for idx, _ in comp.anchors})
        new_v = v.copy()
        for a, b in zip(pins[:-1], pins[1:]):
            span = v[a:b + 1]
            if len(span) < 3:
                continue
            seg = np.abs(np.diff(span))
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            s_new = np.linspace(0.0, cum[-1], len(span))
            new_v[a:b + 1] = np.interp(s_new, cum, span.real) + 1j * np.interp(
                s_new, cum, span.imag
            )
        for idx, c in comp.anchors:
            new_v[idx] = c
        comps.append(Component(new_v, comp.rays, comp.anchors))
    return Contour(tuple(comps))


def _smoothed(contour: Contour, strength: float) -> Contour:
    """Laplacian smoothing of the polyline vertices; endpoints and pinned
    anchors stay put.  Used as an extra ascent candidate to shed the ripples
    that localized bump steps leave behind."""
    from .geometry import Component

    comps = []
    for comp in contour.components:
        v = comp.vertices.copy()
        if len(v) > 2:
            v[1:-1] = v[1:-1] + 0.5 * strength * (v[:-2] + v[2:] - 2.0 * v[1:-1])
        for idx, c in comp.anchors:
            v[idx] = c
        comps.append(Component(v, comp.rays, comp.anchors))
    return Contour(tuple(comps))


def _contour_valid(
    contour: Contour,
    triple: AdmissibleTriple | None,
    sectors: SectorSet | None,
    fixed: FixedPointSet | None,
    forbidden,
    field: ExternalField | None,
    clearance_radius: float,
    dead_radius: float,
) -> list[str]:
    report: list[str] = []
    if triple is not None and sectors is not None and fixed is not None:
        report += membership(contour, triple, sectors, fixed, clearance_radius)
    verts = contour.all_vertices()
    if forbidden is not None and any(forbidden.contains(z) for z in verts):
        report.append("touches-forbidden-region")
    if field is not None:
        for s in field.singularities:
            if np.min(np.abs(verts - s)) < dead_radius:
                report.append(f"enters-dead-zone:{s}")
                break
    return report


def maxmin_ascent(
    triple: AdmissibleTriple | None,
    field: ExternalField | None,
    init: Contour,
    params: AscentParams | None = None,
    sectors: SectorSet | None = None,
    fixed: FixedPointSet | None = None,
    forbidden=None,
) -> AscentResult:
    """Steepest-ascent deformation of the contour, maximizing the equilibrium
    energy; steps leaving the admissible class or touching the forbidden
    region are rejected by the line search."""
    p = params or AscentParams()
    bad = _contour_valid(
        init, triple, sectors, fixed, forbidden, field,
        p.clearance_radius, p.dead_radius,
    )
    if bad:
        raise InitInvalid("; ".join(bad))

    def solve(contour):
        nodes, gaps = place_nodes(contour, p.n_nodes, field=field, sectors=sectors)
        return equilibrium_measure((nodes, gaps), field=field)

    contour = init
    mu, ell, _ = solve(contour)
    from .equilibrium import weighted_energy

    value = weighted_energy(mu, field)
    trace: list[dict] = []
    residual = np.inf
    converged = False
    stalled = False
    it = 0
    for it in range(1, p.max_outer + 1):
        basis = make_bump_basis(
            mu, fixed=fixed, field=field,
            basis_size=p.basis_size, dead_radius=p.dead_radius,
        )
        derivs = [directional_derivative(mu, field, h) for h in basis]
        residual = max(
            (abs(d) / (1.0 + h.sup_norm() + h.deriv_sup_norm())
             for d, h in zip(derivs, basis)),
            default=0.0,
        )
        if residual < p.tol_crit:
            converged = True
            trace.append({"iter": it, "energy": value, "residual": residual,
                          "step": 0.0, "basis": len(basis)})
            break

        # diagonal-Newton scaling: probe each bump's own curvature so strongly
        # curved (overlapping) directions take proportionally smaller steps
        coeffs = []
        for d, h in zip(derivs, basis):
            if abs(d) < 1e-15:
                coeffs.append(0.0)
                continue
            tp = 0.02 / max(h.sup_norm(), 1e-12)
            try:
                probe = _apply_step(contour, SumField([(1.0, h)]), tp)
                val_p = weighted_energy(solve(probe)[0], field)
                curv = 2.0 * (val_p - value - tp * d) / tp**2
            except Exception:
                curv = 0.0
            coeffs.append(d / max(abs(curv), 1e-8))
        direction = SumField(
            [(c, h) for c, h in zip(coeffs, basis) if c != 0.0]
        )
        sup = direction.sup_norm()
        if sup == 0.0:
            converged = True
            break
        scale = min(1.0, p.step0 / sup)
        accepted = False
        t = 1.0
        init_step_base = contour
        for _ in range(30):
            try:
                cand = _apply_step(init_step_base, direction, scale * t)
            except Exception:
                t *= p.shrink
                continue
            if _contour_valid(cand, triple, sectors, fixed, forbidden, field,
                              p.clearance_radius, p.dead_radius):
                t *= p.shrink
                continue
            mu_c, ell_c, _ = solve(cand)
            val_c = weighted_energy(mu_c, field)
            if val_c > value + 1e-14:
                contour, mu, ell, value = cand, mu_c, ell_c, val_c
                accepted = True
                # expansion: keep doubling while the energy keeps improving
                for _ in range(8):
                    t2 = 2.0 * t
                    try:
                        cand2 = _apply_step(init_step_base, direction, scale * t2)
                    except Exception:
                        break
                    if _contour_valid(cand2, triple, sectors, fixed, forbidden,
                                      field, p.clearance_radius, p.dead_radius):
                        break
                    mu2, ell2, _ = solve(cand2)
                    val2 = weighted_energy(mu2, field)
                    if val2 <= value:
                        break
                    contour, mu, ell, value, t = cand2, mu2, ell2, val2, t2
                break
            t *= p.shrink
        # ripple shedding: accept a smoothing pass whenever it helps
        for strength in (1.0, 0.5, 0.25):
            try:
                cand = _smoothed(contour, strength)
            except Exception:
                continue
            if _contour_valid(cand, triple, sectors, fixed, forbidden, field,
                              p.clearance_radius, p.dead_radius):
                continue
            mu_c, ell_c, _ = solve(cand)
            val_c = weighted_energy(mu_c, field)
            if val_c > value + 1e-14:
                contour, mu, ell, value = cand, mu_c, ell_c, val_c
                accepted = True
                break
        if not accepted:
            # composite direction blocked: fall back to the strongest single
            # bumps before giving up
            order = np.argsort([-abs(c) for c in coeffs])
            for bi in order[:8]:
                if coeffs[bi] == 0.0:
                    continue
                single = SumField([(coeffs[bi], basis[bi])])
                for t in (1.0, 0.5, 0.25, 0.125):
                    try:
                        cand = _apply_step(contour, single, t)
                    except Exception:
                        continue
                    if _contour_valid(cand, triple, sectors, fixed, forbidden,
                                      field, p.clearance_radius, p.dead_radius):
                        continue
                    mu_c, ell_c, _ = solve(cand)
                    val_c = weighted_energy(mu_c, field)
                    if val_c > value + 1e-14:
                        contour, mu, ell, value = cand, mu_c, ell_c, val_c
                        accepted = True
                        break
                if accepted:
                    break
        if accepted:
            # keep the polyline well parameterized for the next step
            try:
                rs = _resample(contour)
                if not _contour_valid(rs, triple, sectors, fixed, forbidden,
                                      field, p.clearance_radius, p.dead_radius):
                    mu_r, ell_r, _ = solve(rs)
                    contour, mu, ell = rs, mu_r, ell_r
                    value = weighted_energy(mu_r, field)
            except Exception:
                pass
        trace.append({"iter": it, "energy": value, "residual": residual,
                      "step": scale * t if accepted else 0.0, "basis": len(basis)})
        if not accepted:
            stalled = True
            break

    result = AscentResult(contour, mu, ell, value, residual, it, converged, trace)
    if stalled and not converged:
        exc = StalledBelowTolerance(
            f"line search underflow at residual {residual:.3g}"
        )
        exc.result = result
        raise exc
    return result
