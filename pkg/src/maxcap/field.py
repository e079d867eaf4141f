"""Semiclassical external fields and everything derived pointwise from them.

The field datum is Phi = P/Q + sum_j rho_j log(z - w_j) with N = deg P - deg Q
>= 1.  The real part phi = Re Phi drives all potential-theoretic quantities;
Phi' = B/A is kept as an exact polynomial pair so that spectral-curve pole
structure downstream is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np
import numpy.polynomial.polynomial as npp

from .errors import BadEpsilon, FieldError, ResolutionTooCoarse, SingularPoint

PROXIMITY_TOL = 1e-9
MAX_DEGREE = 32


def _as_complex_list(coeffs) -> list[complex]:
    out = [complex(c) for c in coeffs]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def _poly_from_roots(roots: Sequence[complex]) -> np.ndarray:
    p = np.array([1.0 + 0j])
    for r in roots:
        p = npp.polymul(p, [-r, 1.0])
    return p


@dataclass(frozen=True)
class ExternalField:
    """Immutable semiclassical field Phi = P/Q + sum rho_j log(z - w_j)."""

    p_coeffs: tuple[complex, ...]
    q_factors: tuple[tuple[complex, int], ...] = ()
    log_terms: tuple[tuple[complex, complex], ...] = ()
    allow_real_rho: bool = False

    # derived, filled in __post_init__
    N: int = dc_field(init=False, default=0)
    alpha: complex = dc_field(init=False, default=0j)
    singularities: tuple[complex, ...] = dc_field(init=False, default=())
    a_coeffs: tuple[complex, ...] = dc_field(init=False, default=())
    b_coeffs: tuple[complex, ...] = dc_field(init=False, default=())
    b: complex = dc_field(init=False, default=0j)
    real_rho_warning: bool = dc_field(init=False, default=False)

    def __post_init__(self):
        p = _as_complex_list(self.p_coeffs)
        if len(p) - 1 > MAX_DEGREE:
            raise FieldError(f"deg P = {len(p) - 1} exceeds cap {MAX_DEGREE}")
        object.__setattr__(self, "p_coeffs", tuple(p))
        q_factors = tuple((complex(z), int(m)) for z, m in self.q_factors)
        log_terms = tuple((complex(w), complex(r)) for w, r in self.log_terms)
        object.__setattr__(self, "q_factors", q_factors)
        object.__setattr__(self, "log_terms", log_terms)

        if any(m <= 0 for _, m in q_factors):
            raise FieldError("pole orders m_j must be positive")
        deg_q = sum(m for _, m in q_factors)
        n = len(p) - 1 - deg_q
        if n < 1:
            raise FieldError(f"deg P - deg Q = {n}, must be >= 1")
        object.__setattr__(self, "N", n)
        alpha = p[-1]
        if alpha == 0:
            raise FieldError("leading coefficient of P vanishes")
        object.__setattr__(self, "alpha", alpha)

        sing = [z for z, _ in q_factors] + [w for w, _ in log_terms]
        for i in range(len(sing)):
            for j in range(i + 1, len(sing)):
                if abs(sing[i] - sing[j]) < PROXIMITY_TOL:
                    raise FieldError("singularities must be pairwise distinct")
        object.__setattr__(self, "singularities", tuple(sing))

        # gcd(P, Q) = 1: no pole may be a root of P
        for z, _ in q_factors:
            if abs(npp.polyval(z, p)) <= PROXIMITY_TOL * max(1.0, abs(z)):
                raise FieldError(f"P vanishes at the pole {z}: gcd(P,Q) != 1")

        warn = False
        for _, rho in log_terms:
            if rho.imag == 0:
                if not self.allow_real_rho:
                    raise FieldError(
                        f"log weight {rho} is real; pass allow_real_rho=True "
                        "to accept with a warning flag"
                    )
                warn = True
        object.__setattr__(self, "real_rho_warning", warn)

        a, b = self._derivative_pair(p, q_factors, log_terms)
        object.__setattr__(self, "a_coeffs", tuple(a))
        object.__setattr__(self, "b_coeffs", tuple(b))
        object.__setattr__(self, "b", b[-1])

        # structural audits of B
        n_q, n_l = len(q_factors), len(log_terms)
        expected_deg = len(p) - 1 + n_q + n_l - 1
        if len(b) - 1 != expected_deg:
            raise FieldError(
                f"deg B = {len(b) - 1}, expected {expected_deg}"
            )
        if abs(b[-1] - n * alpha) > 1e-9 * abs(n * alpha):
            raise FieldError("leading coefficient of B != N * alpha")

    @staticmethod
    def _derivative_pair(p, q_factors, log_terms):
        """Assemble Phi' = B/A without polynomial division.

        A = prod (z-z_j)^(m_j+1) * prod (z-w_j), and
        B = P' * prod(z-z_j) * W
            - P * sum_j m_j * prod_{k != j}(z-z_k) * W
            + sum_j rho_j * A/(z-w_j),
        every term an exact polynomial product.
        """
        zs = [z for z, _ in q_factors]
        ms = [m for _, m in q_factors]
        ws = [w for w, _ in log_terms]
        rhos = [r for _, r in log_terms]

        a = np.array([1.0 + 0j])
        for z, m in q_factors:
            a = npp.polymul(a, npp.polypow([-z, 1.0], m + 1))
        w_poly = _poly_from_roots(ws)
        a = npp.polymul(a, w_poly)

        zprod = _poly_from_roots(zs)
        b = npp.polymul(npp.polymul(npp.polyder(p), zprod), w_poly)
        for j, (zj, mj) in enumerate(zip(zs, ms)):
            others = _poly_from_roots([z for k, z in enumerate(zs) if k != j])
            term = npp.polymul(npp.polymul(p, others), w_poly)
            b = npp.polysub(b, mj * term)
        # pole part of A, without the log factors
        zpart = np.array([1.0 + 0j])
        for z, m in q_factors:
            zpart = npp.polymul(zpart, npp.polypow([-z, 1.0], m + 1))
        for j, (wj, rj) in enumerate(zip(ws, rhos)):
            others = _poly_from_roots([w for k, w in enumerate(ws) if k != j])
            b = npp.polyadd(b, rj * npp.polymul(zpart, others))
        return _as_complex_list(a), _as_complex_list(b)

    # -- pointwise evaluation -------------------------------------------------

    def _check_regular(self, z: complex):
        for s in self.singularities:
            if abs(z - s) < PROXIMITY_TOL * max(1.0, abs(z)):
                raise SingularPoint(f"{z} is within tolerance of {s}")

    def phi(self, z: complex) -> float:
        """phi(z) = Re Phi(z); branch-independent in the log terms."""
        self._check_regular(z)
        val = npp.polyval(z, self.p_coeffs)
        q = 1.0 + 0j
        for zj, m in self.q_factors:
            q *= (z - zj) ** m
        val = val / q
        out = val.real
        for wj, rho in self.log_terms:
            d = z - wj
            out += rho.real * np.log(abs(d)) - rho.imag * np.angle(d)
        return float(out)

    def phi_grid(self, zz: np.ndarray) -> np.ndarray:
        """Vectorized phi over an array; non-finite entries are the caller's
        problem (exact singularity hits)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            val = npp.polyval(zz, self.p_coeffs)
            q = np.ones_like(zz)
            for zj, m in self.q_factors:
                q = q * (zz - zj) ** m
            out = (val / q).real
            for wj, rho in self.log_terms:
                d = zz - wj
                out = out + rho.real * np.log(np.abs(d)) - rho.imag * np.angle(d)
        return out

    def phi_prime(self, z) -> complex:
        """Phi'(z) = B(z)/A(z)."""
        if np.isscalar(z) or isinstance(z, complex):
            self._check_regular(complex(z))
        return npp.polyval(z, self.b_coeffs) / npp.polyval(z, self.a_coeffs)

    def phi_prime_direct(self, z: complex) -> complex:
        """Term-by-term derivative of P/Q + sum rho log(z-w); cross-check."""
        self._check_regular(z)
        p, dp = self.p_coeffs, npp.polyder(self.p_coeffs)
        q = 1.0 + 0j
        dlogq = 0j
        for zj, m in self.q_factors:
            q *= (z - zj) ** m
            dlogq += m / (z - zj)
        out = npp.polyval(z, dp) / q - npp.polyval(z, p) / q * dlogq
        for wj, rho in self.log_terms:
            out += rho / (z - wj)
        return complex(out)

    @classmethod
    def from_config(cls, spec: dict, allow_real_rho: bool = False):
        """Build from the run-config dict form.

        {"P": [c0, c1, ...] or [[re, im], ...],
         "Q_factors": [[re, im, m], ...],
         "log_terms": [[re, im, rho_re, rho_im], ...]}
        """
        def as_c(c):
            if isinstance(c, (list, tuple)):
                return complex(c[0], c[1])
            return complex(c)

        p = [as_c(c) for c in spec["P"]]
        q = [(complex(f[0], f[1]), int(f[2])) for f in spec.get("Q_factors", [])]
        lt = [
            (complex(t[0], t[1]), complex(t[2], t[3]))
            for t in spec.get("log_terms", [])
        ]
        return cls(tuple(p), tuple(q), tuple(lt), allow_real_rho=allow_real_rho)


@dataclass(frozen=True)
class SectorSet:
    """The N admissible escape sectors of a field, plus a widening margin."""

    angles: tuple[float, ...]
    half_width: float
    epsilon: float

    @property
    def n(self) -> int:
        return len(self.angles)

    def central_ray_point(self, j: int, r: float) -> complex:
        return r * np.exp(1j * self.angles[j])

    def angular_distance(self, z: complex, j: int) -> float:
        """|arg z - theta_j| reduced to [0, pi]."""
        d = (np.angle(z) - self.angles[j]) % (2 * np.pi)
        return float(min(d, 2 * np.pi - d))

    def in_sector(self, z: complex, j: int, margin: float = 0.0) -> bool:
        """Strict membership in S_j widened (margin > 0) or shrunk."""
        return self.angular_distance(z, j) < self.half_width + margin

    def nearest(self, z: complex) -> int:
        return int(np.argmin([self.angular_distance(z, j) for j in range(self.n)]))


def admissible_sectors(field: ExternalField, epsilon: float) -> SectorSet:
    """Sectors where phi -> +inf: theta_j = -arg(alpha)/N + 2 pi (j-1)/N."""
    n = field.N
    half = np.pi / (2 * n)
    if not (0 < epsilon < half):
        raise BadEpsilon(
            f"epsilon must lie in (0, {half:.6g}) for disjoint widened sectors"
        )
    base = -np.angle(field.alpha) / n
    angles = tuple(sorted((base + 2 * np.pi * j / n) % (2 * np.pi) for j in range(n)))
    ss = SectorSet(angles, half, epsilon)
    for j in range(n):
        v10 = field.phi(ss.central_ray_point(j, 10.0))
        v100 = field.phi(ss.central_ray_point(j, 100.0))
        if not v100 > v10:
            raise FieldError(
                f"phi not increasing on the central ray of sector {j}"
            )
    return ss


@dataclass
class LevelCurve:
    """One classified component of the level set phi = -M."""

    points: np.ndarray  # complex samples
    kind: str  # "unbounded-arc" | "tear" | "log-arc"
    anchor: object  # singularity (tear/log-arc) or (sector_a, sector_b)

    @property
    def closed(self) -> bool:
        return bool(abs(self.points[0] - self.points[-1]) < 1e-12)


@dataclass
class Window:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def grid(self, resolution: int):
        xs = np.linspace(self.xmin, self.xmax, resolution)
        ys = np.linspace(self.ymin, self.ymax, resolution)
        zz = xs[None, :] + 1j * ys[:, None]
        return xs, ys, zz

    def on_boundary(self, z: complex, tol: float) -> bool:
        return (
            abs(z.real - self.xmin) < tol
            or abs(z.real - self.xmax) < tol
            or abs(z.imag - self.ymin) < tol
            or abs(z.imag - self.ymax) < tol
        )


def _winding_number(points: np.ndarray, z0: complex) -> int:
    rel = points - z0
    dphase = np.angle(rel[1:] / rel[:-1])
    return int(round(dphase.sum() / (2 * np.pi)))


def level_set(
    field: ExternalField,
    m_level: float,
    window: Window,
    resolution: int,
    sectors: SectorSet | None = None,
) -> list[LevelCurve]:
    """Extract and classify the curve phi = -M by marching squares."""
    from skimage import measure

    xs, ys, zz = window.grid(resolution)
    vals = field.phi_grid(zz)
    vals[~np.isfinite(vals)] = 1e9

    if sectors is None:
        sectors = admissible_sectors(field, epsilon=np.pi / (8 * field.N))

    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    cell = float(max(dx, dy))
    attach_tol = 4.0 * cell

    curves: list[LevelCurve] = []
    for cont in measure.find_contours(vals, -m_level):
        pts = (window.xmin + cont[:, 1] * dx) + 1j * (window.ymin + cont[:, 0] * dy)
        if len(pts) < 2:
            continue
        closed = abs(pts[0] - pts[-1]) < 1e-12
        poles = [z for z, _ in field.q_factors]
        logs = [w for w, _ in field.log_terms]

        if closed:
            touched = [z for z in poles if np.min(np.abs(pts - z)) < attach_tol]
            if touched:
                curves.append(LevelCurve(pts, "tear", touched[0]))
                continue
            enclosed_p = [z for z in poles if _winding_number(pts, z) != 0]
            if enclosed_p:
                curves.append(LevelCurve(pts, "tear", enclosed_p[0]))
                continue
            enclosed_w = [w for w in logs if _winding_number(pts, w) != 0]
            if enclosed_w:
                curves.append(LevelCurve(pts, "log-arc", enclosed_w[0]))
                continue
            raise ResolutionTooCoarse(
                "closed level curve encloses no singularity; refine the grid"
            )

        ends = [pts[0], pts[-1]]
        near_pole = [
            next((z for z in poles if abs(e - z) < attach_tol), None) for e in ends
        ]
        near_log = [
            next((w for w in logs if abs(e - w) < attach_tol), None) for e in ends
        ]
        if near_pole[0] is not None and near_pole[0] == near_pole[1]:
            curves.append(LevelCurve(pts, "tear", near_pole[0]))
            continue
        if near_log[0] is not None or near_log[1] is not None:
            w = near_log[0] if near_log[0] is not None else near_log[1]
            curves.append(LevelCurve(pts, "log-arc", w))
            continue
        if all(window.on_boundary(e, 2 * cell) for e in ends):
            sa, sb = sectors.nearest(ends[0]), sectors.nearest(ends[1])
            ok = sectors.in_sector(
                ends[0], sa, margin=2 * sectors.epsilon
            ) and sectors.in_sector(ends[1], sb, margin=2 * sectors.epsilon)
            if not ok:
                raise ResolutionTooCoarse(
                    "boundary endpoints fall outside the widened sectors"
                )
            curves.append(LevelCurve(pts, "unbounded-arc", (sa, sb)))
            continue
        raise ResolutionTooCoarse("open level curve with unattached endpoint")
    return curves


@dataclass
class GridMask:
    """Boolean mask over a window grid with bilinear membership lookup."""

    xs: np.ndarray
    ys: np.ndarray
    mask: np.ndarray  # shape (len(ys), len(xs))

    def contains(self, z: complex) -> bool:
        x, y = z.real, z.imag
        if not (self.xs[0] <= x <= self.xs[-1] and self.ys[0] <= y <= self.ys[-1]):
            return False
        fi = np.interp(y, self.ys, np.arange(len(self.ys)))
        fj = np.interp(x, self.xs, np.arange(len(self.xs)))
        i0, j0 = int(fi), int(fj)
        i1, j1 = min(i0 + 1, len(self.ys) - 1), min(j0 + 1, len(self.xs) - 1)
        ti, tj = fi - i0, fj - j0
        v = (
            self.mask[i0, j0] * (1 - ti) * (1 - tj)
            + self.mask[i1, j0] * ti * (1 - tj)
            + self.mask[i0, j1] * (1 - ti) * tj
            + self.mask[i1, j1] * ti * tj
        )
        return bool(v > 0.5)

    def component_count(self) -> int:
        from scipy import ndimage

        _, num = ndimage.label(self.mask)
        return int(num)


def forbidden_region(
    field: ExternalField,
    m_level: float,
    window: Window,
    resolution: int,
    margin: float = 8.0,
    sectors: SectorSet | None = None,
) -> GridMask:
    """Deep-negative region of phi kept clear of the unbounded escape arcs."""
    from scipy.spatial import cKDTree

    curves = level_set(field, m_level, window, resolution, sectors=sectors)
    xs, ys, zz = window.grid(resolution)
    vals = field.phi_grid(zz)
    vals[~np.isfinite(vals)] = 1e9
    mask = vals < -m_level

    arc_pts = [c.points for c in curves if c.kind == "unbounded-arc"]
    if arc_pts:
        pts = np.concatenate(arc_pts)
        tree = cKDTree(np.column_stack([pts.real, pts.imag]))
        q = np.column_stack([zz.real.ravel(), zz.imag.ravel()])
        dist, _ = tree.query(q)
        mask &= dist.reshape(zz.shape) > margin
    return GridMask(xs, ys, mask)
