"""Connection topologies: fixed points, partitions, the sector map, and
membership tests for the admissible contour class."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import numpy.polynomial.polynomial as npp

from .errors import IndexOutOfRange, InsufficientExtent
from .field import PROXIMITY_TOL, ExternalField, SectorSet
from .geometry import Component, Contour


def _canonical_blocks(blocks) -> tuple[tuple[int, ...], ...]:
    out = tuple(sorted(tuple(sorted(int(i) for i in b)) for b in blocks))
    return out


@dataclass(frozen=True)
class FixedPointSet:
    """The points the max-min contour must pass through."""

    points: tuple[complex, ...]

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if abs(pts[i] - pts[j]) < PROXIMITY_TOL:
                    raise ValueError("fixed points must be pairwise distinct")

    def check_disjoint_from(self, field: ExternalField):
        for c in self.points:
            for s in field.singularities:
                if abs(c - s) < PROXIMITY_TOL * max(1.0, abs(c)):
                    raise ValueError(f"fixed point {c} coincides with singularity {s}")

    @property
    def c_poly(self) -> np.ndarray:
        """Coefficients of prod (z - c_j), ascending order."""
        p = np.array([1.0 + 0j])
        for c in self.points:
            p = npp.polymul(p, [-c, 1.0])
        return p

    def __len__(self):
        return len(self.points)


def is_non_crossing(blocks) -> bool:
    """No interleaving pattern j < k < j' < k' across distinct blocks.

    Labels carry the cyclic (angular) order via their integer values; the
    quadratic pair scan is fine at desk scale.
    """
    blocks = [sorted(set(b)) for b in blocks]
    for bi in range(len(blocks)):
        for bj in range(bi + 1, len(blocks)):
            b1, b2 = blocks[bi], blocks[bj]
            for a_idx in range(len(b1)):
                for b_idx in range(a_idx + 1, len(b1)):
                    a, b = b1[a_idx], b1[b_idx]
                    for c_idx in range(len(b2)):
                        for d_idx in range(c_idx + 1, len(b2)):
                            c, d = b2[c_idx], b2[d_idx]
                            if (a < c < b < d) or (c < a < d < b):
                                return False
    return True


@dataclass(frozen=True)
class AdmissibleTriple:
    """(partition of fixed points, sector map, partition of sectors).

    Blocks are canonical sorted tuples of indices; the sector map ``psi``
    assigns to each fixed-point block (by its position in ``c_partition``)
    a tuple of sector indices.
    """

    c_partition: tuple[tuple[int, ...], ...]
    psi: tuple[tuple[int, ...], ...]
    theta_partition: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        cp = tuple(tuple(sorted(int(i) for i in b)) for b in self.c_partition)
        psi = tuple(tuple(sorted(int(i) for i in s)) for s in self.psi)
        tp = _canonical_blocks(self.theta_partition)
        if len(psi) != len(cp):
            raise IndexOutOfRange("psi must assign one sector set per block")
        object.__setattr__(self, "c_partition", cp)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "theta_partition", tp)

    @property
    def psi_blocks(self) -> tuple[tuple[int, ...], ...]:
        """Nonempty sector images, one per mapped block."""
        return tuple(s for s in self.psi if s)

    @property
    def theta_nonsingleton(self) -> tuple[tuple[int, ...], ...]:
        return tuple(b for b in self.theta_partition if len(b) > 1)

    def free_sector_blocks(self) -> tuple[tuple[int, ...], ...]:
        """Non-singleton sector blocks not already claimed by the sector map."""
        psi = {tuple(sorted(s)) for s in self.psi_blocks}
        return tuple(b for b in self.theta_nonsingleton if b not in psi)

    def unconnected_singletons(self) -> tuple[int, ...]:
        """Sectors forming singleton blocks outside every sector image."""
        claimed = {j for s in self.psi_blocks for j in s}
        return tuple(
            b[0] for b in self.theta_partition if len(b) == 1 and b[0] not in claimed
        )

    @classmethod
    def from_config(cls, spec: dict) -> "AdmissibleTriple":
        cp = tuple(tuple(b) for b in spec["P_C"])
        psi_map = {int(k): tuple(v) for k, v in spec.get("Psi", {}).items()}
        psi = tuple(psi_map.get(i, ()) for i in range(len(cp)))
        tp = tuple(tuple(b) for b in spec["P_Theta"])
        return cls(cp, psi, tp)


def validate_triple(
    triple: AdmissibleTriple, n_sectors: int, n_fixed: int
) -> list[str]:
    """Return the list of violated admissibility conditions (empty = valid)."""
    report: list[str] = []
    flat_c = [i for b in triple.c_partition for i in b]
    if any(i < 0 or i >= n_fixed for i in flat_c):
        raise IndexOutOfRange("fixed-point index out of range")
    flat_t = [i for b in triple.theta_partition for i in b]
    if any(i < 0 or i >= n_sectors for i in flat_t):
        raise IndexOutOfRange("sector index out of range")
    for s in triple.psi:
        if any(i < 0 or i >= n_sectors for i in s):
            raise IndexOutOfRange("sector index out of range in psi")

    if sorted(flat_c) != list(range(n_fixed)):
        report.append("c-partition: blocks must cover the fixed points disjointly")
    if sorted(flat_t) != list(range(n_sectors)):
        report.append("theta-partition: blocks must cover the sectors disjointly")

    for block, image in zip(triple.c_partition, triple.psi):
        if len(block) == 1 and not image:
            report.append(
                f"singleton-needs-sector: block {block} has an empty sector image"
            )
    images = triple.psi_blocks
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            if set(images[i]) & set(images[j]):
                report.append(
                    "sector-images-overlap: "
                    f"{images[i]} and {images[j]} share a sector"
                )
    if not is_non_crossing(images):
        report.append("psi-images-crossing: sector images form a crossing partition")
    if not is_non_crossing(triple.theta_partition):
        report.append("theta-partition-crossing")
    theta_set = {tuple(sorted(b)) for b in triple.theta_partition}
    for s in images:
        if tuple(sorted(s)) not in theta_set:
            report.append(
                f"subordination: sector image {s} is not a theta-partition block"
            )
    return report


def stretches_to_infinity(
    component: Component,
    sector_index: int,
    sectors: SectorSet,
    epsilon: float,
    r0: float,
) -> bool:
    """True if the component meets {|z| = r} inside the epsilon-shrunk sector
    for every sampled r beyond r0; tagged ray tails qualify by construction."""
    for ray in component.rays:
        if ray.sector == sector_index:
            return True
    radii = np.abs(component.vertices)
    r_max = radii.max()
    if r_max <= r0:
        if component.rays:
            return False
        raise InsufficientExtent(f"component ends at radius {r_max:.3g} <= r0={r0:.3g}")
    width = sectors.half_width - epsilon
    n_shells = 16
    for r in np.linspace(r0, r_max, n_shells + 1)[1:]:
        hit = False
        v = component.vertices
        for k in range(len(v) - 1):
            ra, rb = abs(v[k]), abs(v[k + 1])
            if min(ra, rb) <= r <= max(ra, rb):
                t = 0.5 if ra == rb else (r - ra) / (rb - ra)
                z = v[k] + t * (v[k + 1] - v[k])
                if sectors.angular_distance(z, sector_index) < width:
                    hit = True
                    break
        if not hit:
            return False
    return True


def membership(
    contour: Contour,
    triple: AdmissibleTriple,
    sectors: SectorSet,
    fixed: FixedPointSet,
    clearance_radius: float,
    point_tol: float = 1e-9,
) -> list[str]:
    """Admissibility report for a sampled contour (empty = member)."""
    report: list[str] = []

    comp_points: list[set[int]] = []
    comp_sectors: list[set[int]] = []
    eps = sectors.epsilon
    for comp in contour.components:
        pts = {
            i
            for i, c in enumerate(fixed.points)
            if np.min(np.abs(comp.vertices - c)) <= point_tol * max(1.0, abs(c))
        }
        secs = set()
        for j in range(sectors.n):
            try:
                if stretches_to_infinity(comp, j, sectors, eps, clearance_radius):
                    secs.add(j)
            except InsufficientExtent:
                pass
        comp_points.append(pts)
        comp_sectors.append(secs)

    # (ii) one component per fixed-point block, reaching its sector image
    for block, image in zip(triple.c_partition, triple.psi):
        ok = any(
            set(block) <= pts and set(image) <= secs
            for pts, secs in zip(comp_points, comp_sectors)
        )
        if not ok:
            report.append(
                f"block-unrealized: no component carries points {block} "
                f"and sectors {image}"
            )

    # (iii) one component per free sector block
    for block in triple.free_sector_blocks():
        if not any(set(block) <= secs for secs in comp_sectors):
            report.append(f"sector-block-unrealized: {block}")

    # (iv) clearance of unconnected singleton sectors
    for j in triple.unconnected_singletons():
        for ci, comp in enumerate(contour.components):
            far = comp.vertices[np.abs(comp.vertices) > clearance_radius]
            if any(sectors.in_sector(z, j, margin=eps) for z in far) or any(
                r.sector == j for r in comp.rays
            ):
                report.append(
                    f"sector-clearance: component {ci} enters unconnected "
                    f"sector {j} beyond radius {clearance_radius:g}"
                )
                break

    # (v) component count and qualifying arcs
    max_comps = len(triple.c_partition) + len(triple.free_sector_blocks())
    if len(contour.components) > max_comps:
        report.append(
            f"too-many-components: {len(contour.components)} > {max_comps}"
        )
    for ci, (pts, secs) in enumerate(zip(comp_points, comp_sectors)):
        if not (len(pts) >= 2 or (len(pts) >= 1 and secs) or len(secs) >= 2):
            report.append(
                f"no-qualifying-arc: component {ci} joins neither two fixed "
                "points, nor a point to infinity, nor two sectors"
            )
    return report
