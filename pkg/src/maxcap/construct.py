"""Reconstruction of the max-min contour from a converged measure: the
region Lambda = {U^mu + phi > ell}, its N-tail verification, and the
assembly of Gamma_0 from the support, connecting paths, and central rays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import dijkstra

from .equilibrium import (
    DiscreteMeasure,
    equilibrium_measure,
    log_potential,
    refine_measure,
    weighted_energy,
)
from .errors import ComponentCountMismatch, Disconnected
from .field import ExternalField, GridMask, SectorSet, Window
from .geometry import Component, Contour, Ray, hausdorff_distance
from .topology import AdmissibleTriple, FixedPointSet, membership

R_DOUBLINGS = 10
BARRIER_PENALTY = 1000.0
EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class LambdaRegion(GridMask):
    """Grid mask of {U^mu + phi > ell} plus the verified tail radius."""

    values: np.ndarray | None = None
    ell: float = 0.0
    r_eps: float | None = None


def lambda_region(
    mu: DiscreteMeasure,
    ell: float,
    field: ExternalField | None,
    window: Window,
    resolution: int,
    sectors: SectorSet | None = None,
    check_tails: bool = True,
) -> LambdaRegion:
    """Boolean mask of U^mu + phi > ell on the window grid.

    With a SectorSet the tail structure is verified: for some radius R
    (doubling schedule, at most 2^10 times the initial guess) the mask
    outside |z| = R has exactly N connected components, each containing
    the samples of its central ray.  Failure raises ComponentCountMismatch
    with the last radius tried.
    """
    xs, ys, zz = window.grid(resolution)
    vals = log_potential(mu, zz)
    if field is not None:
        vals = vals + field.phi_grid(zz)
    mask = vals > ell
    region = LambdaRegion(xs, ys, mask, values=vals, ell=ell)
    if check_tails and sectors is not None:
        region.r_eps = _verify_tails(region, zz, mu, sectors)
    return region


def _verify_tails(region: LambdaRegion, zz: np.ndarray,
                  mu: DiscreteMeasure, sectors: SectorSet) -> float:
    rr = np.abs(zz)
    r_window = min(abs(region.xs[0]), abs(region.xs[-1]),
                   abs(region.ys[0]), abs(region.ys[-1]))
    sup = np.max(np.abs(mu.support_nodes()))
    r = 1.1 * (1.0 + sup)
    r_cap = min(2 ** R_DOUBLINGS * r, 0.8 * r_window)
    if r > r_cap:
        raise ComponentCountMismatch(
            f"window radius {r_window:.3g} too small for the tail check",
            radius=r,
        )

    def _label_at(labels, z):
        i = int(round(np.interp(z.imag, region.ys,
                                np.arange(len(region.ys)))))
        j = int(round(np.interp(z.real, region.xs,
                                np.arange(len(region.xs)))))
        return int(labels[i, j])

    last = r
    while r <= r_cap:
        last = r
        outside = region.mask & (rr > r)
        labels, num = ndimage.label(outside, structure=EIGHT)
        if num == sectors.n:
            ray_labels = []
            ok = True
            for j in range(sectors.n):
                ids = set()
                for rs in np.geomspace(1.05 * r, 0.95 * r_window, 6):
                    ids.add(_label_at(labels,
                                      sectors.central_ray_point(j, rs)))
                if len(ids) != 1 or 0 in ids:
                    ok = False
                    break
                ray_labels.append(ids.pop())
            if ok and len(set(ray_labels)) == sectors.n:
                return float(r)
        r *= 2.0
    raise ComponentCountMismatch(
        f"tail region never split into {sectors.n} ray-bearing components "
        f"(last radius {last:.3g})",
        radius=last,
    )


# -- grid path-finding -------------------------------------------------------

def _corridor(region: GridMask, mu: DiscreteMeasure) -> np.ndarray:
    """Closure of Lambda union the support cells (1-cell dilation)."""
    mask = ndimage.binary_dilation(region.mask, structure=EIGHT)
    sup = mu.support_nodes()
    ii = np.clip(np.round(np.interp(sup.imag, region.ys,
                                    np.arange(len(region.ys)))), 0,
                 len(region.ys) - 1).astype(int)
    jj = np.clip(np.round(np.interp(sup.real, region.xs,
                                    np.arange(len(region.xs)))), 0,
                 len(region.xs) - 1).astype(int)
    sup_mask = np.zeros_like(mask)
    sup_mask[ii, jj] = True
    return mask | ndimage.binary_dilation(sup_mask, structure=EIGHT)


def _grid_graph(region: GridMask, corridor: np.ndarray) -> sparse.csr_matrix:
    """8-connected grid with edge weight = length * (1 + barrier outside)."""
    ny, nx = corridor.shape
    dx = region.xs[1] - region.xs[0]
    dy = region.ys[1] - region.ys[0]
    idx = np.arange(ny * nx).reshape(ny, nx)
    penalty = np.where(corridor, 1.0, 1.0 + BARRIER_PENALTY)
    rows, cols, data = [], [], []
    for di, dj, step in ((0, 1, dx), (1, 0, dy),
                         (1, 1, np.hypot(dx, dy)), (1, -1, np.hypot(dx, dy))):
        si = slice(0, ny - di)
        ti = slice(di, ny)
        if dj >= 0:
            sj, tj = slice(0, nx - dj), slice(dj, nx)
        else:
            sj, tj = slice(-dj, nx), slice(0, nx + dj)
        a = idx[si, sj].ravel()
        b = idx[ti, tj].ravel()
        w = step * np.maximum(penalty[si, sj], penalty[ti, tj]).ravel()
        rows.append(a)
        cols.append(b)
        data.append(w)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    n = ny * nx
    g = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    return g + g.T


def _node_of(region: GridMask, z: complex) -> int:
    i = int(np.clip(round(np.interp(z.imag, region.ys,
                                    np.arange(len(region.ys)))), 0,
                    len(region.ys) - 1))
    j = int(np.clip(round(np.interp(z.real, region.xs,
                                    np.arange(len(region.xs)))), 0,
                    len(region.xs) - 1))
    return i * len(region.xs) + j


def _node_point(region: GridMask, k: int) -> complex:
    nx = len(region.xs)
    return complex(region.xs[k % nx], region.ys[k // nx])


def _shortest_path(graph, region, a: complex, b: complex) -> list[complex]:
    src, dst = _node_of(region, a), _node_of(region, b)
    dist, pred = dijkstra(graph, indices=src, return_predecessors=True)
    if not np.isfinite(dist[dst]):
        raise Disconnected(f"no grid path between {a} and {b}", pair=(a, b))
    # a long path spent mostly outside the mask means the corridor is broken
    dx = region.xs[1] - region.xs[0]
    if dist[dst] > 0.5 * BARRIER_PENALTY * dx:
        raise Disconnected(
            f"path between {a} and {b} leaves the corridor", pair=(a, b)
        )
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    return [_node_point(region, k) for k in reversed(path)]


def _smooth_path(points: np.ndarray, pinned: np.ndarray,
                 rounds: int = 4) -> np.ndarray:
    """Laplacian smoothing of the grid staircase, pinned vertices fixed."""
    p = points.copy()
    for _ in range(rounds):
        q = p.copy()
        q[1:-1] = 0.25 * p[:-2] + 0.5 * p[1:-1] + 0.25 * p[2:]
        q[pinned] = points[pinned]
        p = q
    keep = np.concatenate([[True], np.abs(np.diff(p)) > 1e-12])
    keep |= pinned
    return p[keep]


def _build_component(graph, region, terminals: list[complex],
                     rays: tuple[Ray, ...],
                     anchor_points: list[complex]) -> Component:
    """Polyline visiting the terminals in order, smoothed, with the
    terminals pinned exactly."""
    verts: list[complex] = [terminals[0]]
    pin_idx = [0]
    for a, b in zip(terminals[:-1], terminals[1:]):
        seg = _shortest_path(graph, region, a, b)
        seg = seg[1:-1]  # grid-snapped endpoints replaced by exact terminals
        verts.extend(seg)
        verts.append(b)
        pin_idx.append(len(verts) - 1)
    pts = np.array(verts, dtype=complex)
    keep = np.concatenate([[True], np.abs(np.diff(pts)) > 1e-12])
    for k in pin_idx:
        keep[k] = True
    pinned = np.zeros(len(pts), dtype=bool)
    pinned[pin_idx] = True
    pts, pinned = pts[keep], pinned[keep]
    pts = _smooth_path(pts, pinned)
    anchors = tuple(
        (int(np.argmin(np.abs(pts - c))), c) for c in anchor_points
    )
    # re-pin in case smoothing dropped duplicates around an anchor
    pts = pts.copy()
    for k, c in anchors:
        pts[k] = c
    return Component(pts, rays=rays, anchors=anchors)


def build_gamma0(
    region: LambdaRegion,
    mu: DiscreteMeasure,
    triple: AdmissibleTriple,
    sectors: SectorSet | None,
    fixed: FixedPointSet | None = None,
    r: float | None = None,
) -> Contour:
    """Assemble Gamma_0: shortest paths inside the corridor Lambda-bar union
    supp mu connect each fixed-point block with its sector anchors
    x_j = R e^{i theta_j}; free sector blocks are joined through their
    anchors; central rays are appended.  The result must pass membership
    for the triple, otherwise Disconnected is raised."""
    if fixed is None:
        fixed = FixedPointSet(())
    if r is None:
        r = region.r_eps
    if sectors is not None and r is None:
        raise ValueError("no verified tail radius; run lambda_region with "
                         "check_tails=True or pass r explicitly")
    corridor = _corridor(region, mu)
    graph = _grid_graph(region, corridor)

    def anchor(j: int) -> complex:
        return sectors.central_ray_point(j, r)

    components: list[Component] = []
    for block, image in zip(triple.c_partition, triple.psi):
        pts = [fixed.points[i] for i in block]
        secs = list(image)
        if len(secs) > 2:
            raise Disconnected(
                f"block {block}: more than two sectors per polyline "
                "component is not supported", pair=(block, image)
            )
        terminals = list(pts)
        terminals.sort(key=lambda z: (z.real, z.imag))
        rays: list[Ray] = []
        if len(secs) >= 1:
            terminals = [anchor(secs[0])] + terminals
            rays.append(Ray(secs[0], "head"))
        if len(secs) == 2:
            terminals = terminals + [anchor(secs[1])]
            rays.append(Ray(secs[1], "tail"))
        if len(terminals) < 2:
            continue  # a singleton block with no sector cannot be realized
        components.append(
            _build_component(graph, region, terminals, tuple(rays), pts)
        )

    for block in triple.free_sector_blocks():
        secs = sorted(block)
        if len(secs) > 2:
            raise Disconnected(
                f"sector block {block}: more than two sectors per polyline "
                "component is not supported", pair=(block, ())
            )
        terminals = [anchor(j) for j in secs]
        rays = tuple(
            Ray(j, end) for j, end in zip(secs, ("head", "tail"))
        )
        components.append(
            _build_component(graph, region, terminals, rays, [])
        )

    for j in triple.unconnected_singletons():
        seg = np.array([anchor(j) * 0.9, anchor(j)])
        components.append(Component(seg, rays=(Ray(j, "tail"),)))

    contour = Contour(tuple(components))
    if sectors is not None:
        report = membership(contour, triple, sectors, fixed,
                            clearance_radius=float(r))
        if report:
            raise Disconnected(
                f"reconstructed contour fails membership: {report}",
                pair=None,
            )
    return contour


def _densify(contour: Contour, sectors, pts_per_unit: float = 400.0):
    """Fine resampling of the contour polylines (plus ray samples) so that
    point-set distances approximate distances to the curve."""
    parts = []
    for comp in contour.components:
        v = comp.vertices
        for a, b in zip(v[:-1], v[1:]):
            m = max(2, int(np.ceil(abs(b - a) * pts_per_unit)))
            parts.append(a + (b - a) * np.linspace(0, 1, m))
        if sectors is not None:
            rs = comp.ray_samples(sectors)
            if len(rs):
                parts.append(rs)
    return np.concatenate(parts)


def _binned_tv(a: DiscreteMeasure, b: DiscreteMeasure,
               n_bins: int = 12) -> float:
    """Total variation after binning both weight vectors onto common cells
    of size ~ diameter / n_bins, which removes the grid-quantization
    aliasing of incommensurate node sets (the per-node comparison of two
    independent discretizations is dominated by alternating-sign jitter
    whose integral cancels)."""
    from scipy.spatial import cKDTree

    sup = b.support_nodes()
    diam = float(np.hypot(np.ptp(sup.real), np.ptp(sup.imag)))
    h = max(diam / n_bins, 1e-12)
    centers_list: list[complex] = []
    for z in sup:
        if all(abs(z - c) >= h for c in centers_list):
            centers_list.append(complex(z))
    centers = np.array(centers_list, dtype=complex)
    tree = cKDTree(np.column_stack([centers.real, centers.imag]))
    out = []
    for m in (a, b):
        idx = tree.query(np.column_stack([m.nodes.real, m.nodes.imag]))[1]
        w = np.zeros(len(centers))
        np.add.at(w, idx, m.weights)
        out.append(w)
    return 0.5 * float(np.abs(out[0] - out[1]).sum())


def verify_gamma0(
    contour: Contour,
    mu: DiscreteMeasure,
    field: ExternalField | None,
    sectors: SectorSet | None = None,
    n: int = 400,
) -> dict:
    """Re-solve the equilibrium problem on Gamma_0 and compare with mu:
    node-wise total variation after refining both to a common grid scale,
    support Hausdorff distance, and the energy gap."""
    nu, ell_nu, _ = equilibrium_measure(contour, field=field, n=n,
                                        sectors=sectors)
    nu_ref, ell_ref, _ = refine_measure(nu, field)
    tv = _binned_tv(nu_ref, mu)
    sup = mu.support_nodes()
    gamma_pts = _densify(contour, sectors)
    d_supp = max(
        float(np.min(np.abs(gamma_pts - s))) for s in sup
    )
    return {
        "tv": float(tv),
        "support_in_gamma0": d_supp,
        "ell": float(ell_ref),
        "energy_gap": float(weighted_energy(nu_ref, field)
                            - weighted_energy(mu, field)),
        "measure": nu_ref,
    }
