"""Candidate contours, the spherical metric, and pointwise perturbations."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import EmptySet, FoldDetected, TestFunctionViolation

#: sentinel for the point at infinity in metric computations
INFINITY = None

RAY_GRADE = 1.25
RAY_ESCAPE_FACTOR = 10.0


def sphere_embed(points: np.ndarray, include_inf: bool = False) -> np.ndarray:
    """Map complex samples onto the radius-1/2 sphere; chordal distance is
    the Euclidean distance of the images."""
    x, y = points.real, points.imag
    s = 1.0 + x * x + y * y
    out = np.column_stack([x / s, y / s, (x * x + y * y) / s])
    if include_inf:
        out = np.vstack([out, [0.0, 0.0, 1.0]])
    return out


def chordal_distance(z, w) -> float:
    """|z-w| / (sqrt(1+|z|^2) sqrt(1+|w|^2)); INFINITY stands for infinity."""
    if z is INFINITY and w is INFINITY:
        return 0.0
    if z is INFINITY:
        return 1.0 / np.sqrt(1.0 + abs(w) ** 2)
    if w is INFINITY:
        return 1.0 / np.sqrt(1.0 + abs(z) ** 2)
    return abs(z - w) / (np.sqrt(1.0 + abs(z) ** 2) * np.sqrt(1.0 + abs(w) ** 2))


def hausdorff_distance(
    k1: np.ndarray,
    k2: np.ndarray,
    inf1: bool = False,
    inf2: bool = False,
) -> float:
    """Hausdorff distance of sampled sets in the chordal metric.

    Unbounded sets are represented by samples up to their escape radius plus
    the point at infinity (``inf`` flags).
    """
    from scipy.spatial import cKDTree

    k1 = np.asarray(k1, dtype=complex).ravel()
    k2 = np.asarray(k2, dtype=complex).ravel()
    if (len(k1) == 0 and not inf1) or (len(k2) == 0 and not inf2):
        raise EmptySet("hausdorff_distance of an empty sample set")
    p1 = sphere_embed(k1, inf1)
    p2 = sphere_embed(k2, inf2)
    d12 = cKDTree(p2).query(p1)[0].max()
    d21 = cKDTree(p1).query(p2)[0].max()
    return float(max(d12, d21))


@dataclass(frozen=True)
class Ray:
    """Infinite tail attached to one end of a component polyline."""

    sector: int
    end: str  # "head" (before vertex 0) or "tail" (after the last vertex)

    def __post_init__(self):
        if self.end not in ("head", "tail"):
            raise ValueError("ray end must be 'head' or 'tail'")


@dataclass(frozen=True)
class Component:
    """Ordered polyline plus optional infinite ray tails."""

    vertices: np.ndarray  # complex, >= 2
    rays: tuple[Ray, ...] = ()
    anchors: tuple[tuple[int, complex], ...] = ()  # (vertex index, fixed point)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex)
        object.__setattr__(self, "vertices", v)
        if len(v) < 2:
            raise ValueError("component polylines need at least 2 vertices")
        if np.any(np.abs(np.diff(v)) == 0):
            raise ValueError("consecutive vertices must be distinct")
        for idx, c in self.anchors:
            if v[idx] != c:
                raise ValueError(f"pinned vertex {idx} != fixed point {c}")
        ends = {r.end for r in self.rays}
        if len(ends) != len(self.rays):
            raise ValueError("at most one ray per polyline end")

    def ray_start(self, ray: Ray) -> complex:
        return complex(self.vertices[0] if ray.end == "head" else self.vertices[-1])

    def ray_samples(self, sectors, escape_radius: float | None = None) -> np.ndarray:
        """Geometric discretization of the ray tails for metric purposes."""
        pts = []
        for ray in self.rays:
            start = self.ray_start(ray)
            r0 = max(abs(start), 1.0)
            rmax = escape_radius if escape_radius is not None else RAY_ESCAPE_FACTOR * r0
            direction = np.exp(1j * sectors.angles[ray.sector])
            r = r0
            while r <= rmax:
                pts.append(r * direction)
                r *= RAY_GRADE
        return np.array(pts, dtype=complex)


@dataclass(frozen=True)
class Contour:
    """Finite union of polyline components with optional infinite tails."""

    components: tuple[Component, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def unbounded(self) -> bool:
        return any(c.rays for c in self.components)

    def all_vertices(self) -> np.ndarray:
        return np.concatenate([c.vertices for c in self.components])

    def sample(self, sectors=None, escape_radius: float | None = None) -> np.ndarray:
        parts = [c.vertices for c in self.components]
        if sectors is not None:
            for c in self.components:
                rs = c.ray_samples(sectors, escape_radius)
                if len(rs):
                    parts.append(rs)
        return np.concatenate(parts)

    def fixed_anchor_points(self) -> list[complex]:
        return [c for comp in self.components for _, c in comp.anchors]


class BumpField:
    """Compactly supported C^2 displacement h(z) = d * psi(|z-center|/radius).

    psi(u) = (1-u^2)^3 on [0,1): value and first two radial derivatives vanish
    at the rim.
    """

    def __init__(self, center: complex, radius: float, direction: complex):
        if radius <= 0:
            raise TestFunctionViolation("bump radius must be positive")
        self.center = complex(center)
        self.radius = float(radius)
        self.direction = complex(direction)

    @classmethod
    def admissible(
        cls,
        center: complex,
        radius: float,
        direction: complex,
        fixed_points=(),
        singularities=(),
        dead_radius: float = 0.1,
        min_radius: float = 1e-3,
    ) -> "BumpField":
        """Shrink the radius so the support avoids fixed points and keeps a
        protective disc around every field singularity; reject if impossible."""
        r = float(radius)
        for c in fixed_points:
            r = min(r, abs(complex(c) - center))
        for s in singularities:
            r = min(r, abs(complex(s) - center) - dead_radius)
        if r < min_radius:
            raise TestFunctionViolation(
                "no admissible bump radius at this center (fixed point or "
                "singularity too close)"
            )
        return cls(center, r, direction)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        u2 = np.abs(z - self.center) ** 2 / self.radius**2
        psi = np.where(u2 < 1.0, (1.0 - np.minimum(u2, 1.0)) ** 3, 0.0)
        return self.direction * psi

    def jacobian_action(self, z, v):
        """Real-2D Jacobian of h applied to the direction v (complex form)."""
        z = np.asarray(z, dtype=complex)
        v = np.asarray(v, dtype=complex)
        rel = z - self.center
        u = np.abs(rel) / self.radius
        inside = u < 1.0
        # d/dr of (1-u^2)^3 = -6u(1-u^2)^2 / radius
        dpsi = np.where(inside, -6.0 * u * (1.0 - np.minimum(u, 1.0) ** 2) ** 2, 0.0)
        unit = np.where(np.abs(rel) > 0, rel / np.where(np.abs(rel) > 0, np.abs(rel), 1.0), 0.0)
        radial = np.real(np.conj(unit) * v)
        return self.direction * dpsi / self.radius * radial

    def sup_norm(self) -> float:
        return abs(self.direction)

    def deriv_sup_norm(self) -> float:
        # max_u 6u(1-u^2)^2 = 96 sqrt(5)/125 at u = 1/sqrt(5)
        return abs(self.direction) * (96.0 * np.sqrt(5.0) / 125.0) / self.radius

    def supports(self, z: complex) -> bool:
        return abs(z - self.center) < self.radius


def perturb(contour: Contour, h, t: float) -> Contour:
    """Image of the contour under z -> z + t h(z); pinned vertices stay put."""
    comps = []
    for comp in contour.components:
        v = comp.vertices + t * np.asarray(h(comp.vertices), dtype=complex)
        for idx, c in comp.anchors:
            v[idx] = c  # h vanishes there by invariant; enforce the pin exactly
        scale = max(1.0, np.max(np.abs(v)))
        if np.any(np.abs(np.diff(v)) < 1e-14 * scale):
            raise FoldDetected("perturbation collapsed consecutive vertices")
        comps.append(Component(v, comp.rays, comp.anchors))
    return Contour(tuple(comps))
