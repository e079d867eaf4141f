"""Discrete weighted equilibrium measures on sampled contours.

The inner problem: minimize the discretized weighted energy
I(lambda) = lambda' K lambda + 2 phi . lambda over the probability simplex,
where K is the log kernel with a cell self-energy on the diagonal.  The
Euler-Lagrange constant ell is the active-set value of K lambda + phi.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .errors import GrowthViolation, NodeCollision, NonConvergence, SingularNode
from .field import PROXIMITY_TOL, ExternalField, SectorSet
from .geometry import Contour

#: phi(z) - 2 log|z| beyond this value, ray nodes carry no mass worth keeping
RAY_CUTOFF = 20.0
RAY_GROWTH = 1.12
RAY_NODE_CAP = 200
ACTIVE_TOL = 1e-10


def chain_gaps(nodes: np.ndarray) -> np.ndarray:
    """Cell sizes for nodes ordered along a single arc: half the distance to
    each neighbour, full step at the two ends."""
    nodes = np.asarray(nodes, dtype=complex)
    if len(nodes) == 1:
        return np.array([1.0])
    step = np.abs(np.diff(nodes))
    gaps = np.empty(len(nodes))
    gaps[0] = step[0]
    gaps[-1] = step[-1]
    gaps[1:-1] = 0.5 * (step[:-1] + step[1:])
    return gaps


def segment_nodes(a: complex, b: complex, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints of n equal cells on the segment [a, b], with their gaps."""
    a, b = complex(a), complex(b)
    t = (np.arange(n) + 0.5) / n
    nodes = a + (b - a) * t
    gaps = np.full(n, abs(b - a) / n)
    return nodes, gaps


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights on complex nodes, with the cell sizes that gave
    rise to them (needed for the corrected self-energy)."""

    nodes: np.ndarray
    weights: np.ndarray
    gaps: np.ndarray = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=complex)
        w = np.asarray(self.weights, dtype=float)
        if len(nodes) != len(w):
            raise ValueError("nodes and weights must have equal length")
        if np.any(w < -1e-9):
            raise ValueError("weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if not np.isclose(total, 1.0, atol=1e-6):
            raise ValueError(f"weights sum to {total}, expected 1")
        w = w / total
        gaps = self.gaps
        if gaps is None:
            gaps = chain_gaps(nodes)
        gaps = np.asarray(gaps, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "gaps", gaps)

    def __len__(self):
        return len(self.nodes)

    @property
    def active(self) -> np.ndarray:
        return self.weights > ACTIVE_TOL

    def support_nodes(self) -> np.ndarray:
        return self.nodes[self.active]

    def total_variation_against(self, other: "DiscreteMeasure") -> float:
        """TV distance after binning both weight vectors on the union grid of
        a shared parameterization is overkill at desk scale; here nodes are
        matched by nearest neighbour."""
        from scipy.spatial import cKDTree

        a = np.column_stack([self.nodes.real, self.nodes.imag])
        b = np.column_stack([other.nodes.real, other.nodes.imag])
        idx = cKDTree(b).query(a)[1]
        merged = np.zeros(len(other))
        np.add.at(merged, idx, self.weights)
        return 0.5 * float(np.abs(merged - other.weights).sum())


def log_potential(mu: DiscreteMeasure, z) -> np.ndarray | float:
    """U(z) = sum_k w_k log 1/|z_k - z|; +inf on node hits."""
    scalar = np.isscalar(z) or isinstance(z, complex)
    targets = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = kernels.potential_many(mu.nodes, mu.weights, targets)
    return float(out[0]) if scalar else out.reshape(np.shape(z))

def cauchy_transform(mu: DiscreteMeasure, z) -> np.ndarray | complex:
    """C(z) = sum_k w_k / (z_k - z); refuses evaluation at a node."""
    scalar = np.isscalar(z) or isinstance(z, complex)
    targets = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    for t in targets:
        if np.min(np.abs(mu.nodes - t)) < 1e-12:
            raise NodeCollision(f"Cauchy transform at measure node {t}")
    out = kernels.cauchy_many(mu.nodes, mu.weights, targets)
    return complex(out[0]) if scalar else out.reshape(np.shape(z))


def _phi_at_nodes(nodes: np.ndarray, field: ExternalField | None) -> np.ndarray:
    if field is None:
        return np.zeros(len(nodes))
    for s in field.singularities:
        if np.min(np.abs(nodes - s)) < PROXIMITY_TOL * max(1.0, abs(s)):
            raise SingularNode(f"measure node at field singularity {s}")
    vals = field.phi_grid(nodes)
    if not np.all(np.isfinite(vals)):
        raise SingularNode("phi not finite at a measure node")
    return vals


def energy(mu: DiscreteMeasure) -> float:
    """Logarithmic energy with the cell self-energy on the diagonal."""
    k = kernels.log_kernel_matrix(mu.nodes, mu.gaps)
    return float(mu.weights @ k @ mu.weights)


def weighted_energy(mu: DiscreteMeasure, field: ExternalField | None) -> float:
    """I^phi(mu) = energy + 2 integral of phi d mu."""
    phi = _phi_at_nodes(mu.nodes, field)
    return energy(mu) + 2.0 * float(phi @ mu.weights)


# -- node placement ----------------------------------------------------------

def _polyline_nodes(vertices: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints of n equal-arclength cells along a polyline."""
    seg = np.abs(np.diff(vertices))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    s_mid = (np.arange(n) + 0.5) * total / n
    idx = np.searchsorted(cum, s_mid, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    t = (s_mid - cum[idx]) / seg[idx]
    nodes = vertices[idx] + t * (vertices[idx + 1] - vertices[idx])
    gaps = np.full(n, total / n)
    return nodes, gaps


def _ray_nodes(
    start: complex,
    angle: float,
    field: ExternalField | None,
    first_gap: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Geometrically graded nodes along a central ray, cut off where the field
    confines all mass: phi(z) - 2 log|z| > RAY_CUTOFF."""
    direction = np.exp(1j * angle)
    r0 = abs(start) if abs(start) > 0 else first_gap
    nodes = []
    r = r0 + max(first_gap, 1e-6 * max(1.0, r0))
    prev_conf = -np.inf
    for _ in range(RAY_NODE_CAP):
        z = r * direction
        if field is not None:
            conf = field.phi(z) - 2.0 * np.log(abs(z))
            if conf > RAY_CUTOFF:
                break
            if r > 4.0 * r0 and conf < prev_conf - 1e-12:
                raise GrowthViolation(
                    f"phi - 2 log|z| decreasing along the ray at angle {angle:.4g}"
                )
            prev_conf = max(prev_conf, conf)
        nodes.append(z)
        r = r0 + (r - r0) * RAY_GROWTH + first_gap * 0.1
    else:
        if field is not None:
            raise GrowthViolation(
                f"ray at angle {angle:.4g} never reaches the confinement cutoff"
            )
    nodes = np.array(nodes, dtype=complex)
    return nodes, chain_gaps(nodes) if len(nodes) else np.array([])


def place_nodes(
    contour: Contour,
    n: int,
    field: ExternalField | None = None,
    sectors: SectorSet | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample a contour: equal-arclength cells on the bounded polylines plus
    geometrically graded ray tails; returns (nodes, gaps)."""
    lengths = []
    for comp in contour.components:
        lengths.append(np.sum(np.abs(np.diff(comp.vertices))))
    total = sum(lengths)
    all_nodes, all_gaps = [], []
    for comp, length in zip(contour.components, lengths):
        n_comp = max(2, int(round(n * length / total))) if total > 0 else 2
        nodes, gaps = _polyline_nodes(comp.vertices, n_comp)
        all_nodes.append(nodes)
        all_gaps.append(gaps)
        for ray in comp.rays:
            if sectors is None:
                raise ValueError("ray-bearing contours need a SectorSet")
            start = comp.ray_start(ray)
            rn, rg = _ray_nodes(start, sectors.angles[ray.sector], field, gaps[0])
            if len(rn):
                all_nodes.append(rn)
                all_gaps.append(rg)
    return np.concatenate(all_nodes), np.concatenate(all_gaps)


# -- the inner solve ---------------------------------------------------------

def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u > css / (np.arange(len(v)) + 1))[0][-1]
    theta = css[rho] / (rho + 1)
    return np.clip(v - theta, 0.0, None)


def _kkt_solve(k: np.ndarray, phi: np.ndarray, active: np.ndarray):
    idx = np.flatnonzero(active)
    m = len(idx)
    mat = np.empty((m + 1, m + 1))
    mat[:m, :m] = 2.0 * k[np.ix_(idx, idx)]
    mat[:m, m] = 1.0
    mat[m, :m] = 1.0
    mat[m, m] = 0.0
    rhs = np.concatenate([-2.0 * phi[idx], [1.0]])
    sol = np.linalg.solve(mat, rhs)
    lam = np.zeros(len(phi))
    lam[idx] = sol[:m]
    return lam, float(sol[m])


def solve_weights(
    k: np.ndarray,
    phi: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, float, dict]:
    """Active-set KKT solve warm-starting a projected-gradient polish.

    Returns (weights, ell, info); the polish preserves monotone energy
    decrease and stops when the projected-gradient displacement drops
    below tol.
    """
    n = len(phi)
    active = np.ones(n, dtype=bool)
    lam = np.full(n, 1.0 / n)
    for _ in range(80):
        try:
            lam, _ = _kkt_solve(k, phi, active)
        except np.linalg.LinAlgError:
            break
        neg = lam < -1e-12
        if not np.any(neg & active):
            break
        active &= ~neg
        if active.sum() < 2:
            break
    lam = np.clip(lam, 0.0, None)
    s = lam.sum()
    lam = lam / s if s > 0 else np.full(n, 1.0 / n)

    def obj(l):
        return float(l @ k @ l + 2.0 * phi @ l)

    value = obj(lam)
    grad = 2.0 * (k @ lam + phi)
    iters = 0
    step_norm = np.inf
    stagnant = 0
    while iters < max_iter:
        target = _project_simplex(lam - grad)
        d = target - lam
        step_norm = float(np.linalg.norm(d))
        if step_norm < tol:
            break
        gd = float(grad @ d)
        t = 1.0
        while t > 1e-16:
            cand = lam + t * d
            cand_val = obj(cand)
            if cand_val <= value + 1e-4 * t * gd:
                break
            t *= 0.5
        if t <= 1e-16:
            break
        # numerical floor: the warm start is near-exact, so vanishing objective
        # progress means we are polishing rounding noise
        if value - cand_val < 1e-15 * (1.0 + abs(value)):
            stagnant += 1
            if stagnant >= 10:
                lam, value = cand, cand_val
                break
        else:
            stagnant = 0
        lam, value = cand, cand_val
        grad = 2.0 * (k @ lam + phi)
        iters += 1
    if iters >= max_iter and step_norm >= tol:
        raise NonConvergence(
            f"projected gradient hit the cap with displacement {step_norm:.3g}"
        )

    act = lam > ACTIVE_TOL
    f = k @ lam + phi
    ell = float(np.average(f[act], weights=lam[act]))
    info = {
        "pg_iterations": iters,
        "pg_step_norm": step_norm,
        "active": int(act.sum()),
        "energy": value,
    }
    return lam, ell, info


def equilibrium_measure(
    contour,
    field: ExternalField | None = None,
    n: int = 400,
    sectors: SectorSet | None = None,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> tuple[DiscreteMeasure, float, dict]:
    """Equilibrium weights on a contour (or a prebuilt (nodes, gaps) pair).

    Returns (measure, ell, info) with ell the Euler-Lagrange constant.
    """
    if isinstance(contour, Contour):
        nodes, gaps = place_nodes(contour, n, field=field, sectors=sectors)
    else:
        nodes, gaps = contour
        nodes = np.asarray(nodes, dtype=complex)
        gaps = np.asarray(gaps, dtype=float)
    phi = _phi_at_nodes(nodes, field)
    k = kernels.log_kernel_matrix(nodes, gaps)
    lam, ell, info = solve_weights(k, phi, tol=tol, max_iter=max_iter)
    return DiscreteMeasure(nodes, lam, gaps), ell, info


def refine_measure(
    mu: DiscreteMeasure,
    field: ExternalField | None = None,
    n_core: int = 360,
    margin_cells: float = 3.0,
    tol: float = 1e-9,
) -> tuple[DiscreteMeasure, float, dict]:
    """Re-solve on the same node chain with cosine-clustered cells around the
    detected support span.

    Uniform cells put an O(sqrt(gap)) density error into the cells straddling
    the soft support edges; square-root clustering there recovers it.
    """
    z = mu.nodes
    # split into ordered sub-chains (ray tails are stored after the polyline)
    steps = np.abs(np.diff(z))
    local = np.minimum.reduce([mu.gaps[:-1], mu.gaps[1:]])
    breaks = np.flatnonzero(steps > 6.0 * np.maximum(local, 1e-12)) + 1
    pieces = np.split(np.arange(len(z)), breaks)

    floor = 0.3  # blend toward uniform so edge cells never degenerate
    node_parts: list[np.ndarray] = []
    gap_parts: list[np.ndarray] = []
    for idx in pieces:
        sub = z[idx]
        act_local = np.flatnonzero(mu.active[idx])
        if len(act_local) < 3 or len(sub) < 8:
            node_parts.append(sub)
            gap_parts.append(mu.gaps[idx])
            continue
        g = mu.gaps[idx]
        # nodes are cell midpoints: the chain really extends half a cell past
        # the first and last node
        t0 = (sub[1] - sub[0]) / abs(sub[1] - sub[0])
        t1 = (sub[-1] - sub[-2]) / abs(sub[-1] - sub[-2])
        sub = np.concatenate(
            [[sub[0] - 0.5 * g[0] * t0], sub, [sub[-1] + 0.5 * g[-1] * t1]]
        )
        act_local = act_local + 1
        g = np.concatenate([[g[0]], g, [g[-1]]])
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(sub)))])
        sa = max(s[act_local[0]] - margin_cells * g[act_local[0]], s[0])
        sb = min(s[act_local[-1]] + margin_cells * g[act_local[-1]], s[-1])
        m_core = min(n_core, max(len(sub) - 4, 8))
        th = (np.arange(m_core) + 0.5) * np.pi / m_core
        cos_grid = 0.5 * (sa + sb) - 0.5 * (sb - sa) * np.cos(th)
        uni_grid = sa + (sb - sa) * (np.arange(m_core) + 0.5) / m_core
        core = (1.0 - floor) * cos_grid + floor * uni_grid
        n_out = max((len(sub) - m_core) // 2, 2)
        parts = [core]
        if sa - s[0] > 1e-12:
            parts.insert(0, np.linspace(s[0], sa, n_out, endpoint=False))
        if s[-1] - sb > 1e-12:
            parts.append(np.linspace(sb, s[-1], n_out + 1)[1:])
        s_new = np.concatenate(parts)
        new_sub = np.interp(s_new, s, sub.real) + 1j * np.interp(s_new, s, sub.imag)
        node_parts.append(new_sub)
        gap_parts.append(chain_gaps(new_sub))
    nodes = np.concatenate(node_parts)
    gaps = np.concatenate(gap_parts)
    phi = _phi_at_nodes(nodes, field)
    k = kernels.log_kernel_matrix(nodes, gaps)
    lam, ell, info = solve_weights(k, phi, tol=tol)
    return DiscreteMeasure(nodes, lam, gaps), ell, info


def euler_lagrange_residual(
    mu: DiscreteMeasure,
    ell: float,
    contour: Contour | None = None,
    field: ExternalField | None = None,
) -> dict:
    """Optimality check: the cell-averaged U + phi should equal ell on the
    support and dominate it off the support.

    The contour argument is accepted for interface symmetry; the measure's
    inactive nodes already sample the off-support part of the contour.
    """
    phi = _phi_at_nodes(mu.nodes, field)
    k = kernels.log_kernel_matrix(mu.nodes, mu.gaps)
    f = k @ mu.weights + phi
    act = mu.active
    sup_on = float(np.max(np.abs(f[act] - ell))) if act.any() else 0.0
    if (~act).any():
        deficit = float(max(0.0, ell - np.min(f[~act])))
    else:
        deficit = 0.0
    return {"sup_on_support": sup_on, "deficit_off_support": deficit}
