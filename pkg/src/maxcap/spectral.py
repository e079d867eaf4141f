"""The rational spectral curve R = (C^mu + Phi')^2: sampling, prescribed-pole
least-squares fitting, residual checks, and the sqrt(R) density formula."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import numpy.polynomial.polynomial as npp

from .equilibrium import DiscreteMeasure, cauchy_transform
from .errors import (
    BranchAmbiguity,
    IllConditioned,
    InsufficientSamples,
    TooCloseToSupport,
)
from .field import ExternalField

COND_LIMIT = 1e12


@dataclass
class SpectralCurve:
    """R(z) = numerator / (A(z)^2 * C(z)) with the pole structure fixed by the
    field (order 2m_j+2 at z_j, 2 at w_j) and at most simple poles at the
    fixed points."""

    numerator_coeffs: np.ndarray
    a_coeffs: tuple[complex, ...]
    c_coeffs: tuple[complex, ...] = (1.0 + 0j,)
    finite_poles: tuple[tuple[complex, int], ...] = ()
    fit_residual: float = 0.0
    condition_number: float = 0.0

    def __post_init__(self):
        self.numerator_coeffs = np.asarray(self.numerator_coeffs, dtype=complex)

    def denominator(self, z):
        a = npp.polyval(z, self.a_coeffs)
        return a * a * npp.polyval(z, self.c_coeffs)

    def __call__(self, z):
        return npp.polyval(z, self.numerator_coeffs) / self.denominator(z)

    @property
    def leading_coefficient(self) -> complex:
        """Coefficient of the z^(2 deg B - 2 deg A) leading behavior."""
        return complex(self.numerator_coeffs[-1])

    def pole_order(self, p: complex, tol: float = 1e-7) -> int:
        """Order of the pole of R at p: denominator order minus numerator
        vanishing order there."""
        den_order = 0
        for loc, order in self.finite_poles:
            if abs(loc - p) < tol:
                den_order = order
        if den_order == 0:
            return 0
        num = self.numerator_coeffs.copy()
        scale = max(np.max(np.abs(num)), 1e-300)
        vanish = 0
        while vanish < den_order:
            if abs(npp.polyval(p, num)) > tol * scale:
                break
            num = npp.polyder(num)
            vanish += 1
        return den_order - vanish

    def residue_at_simple_pole(self, c: complex) -> complex:
        """Residue of R at a prescribed simple pole c (fixed point)."""
        num = npp.polyval(c, self.numerator_coeffs)
        den_rest = npp.polyval(c, self.a_coeffs) ** 2
        c_der = npp.polyval(c, npp.polyder(self.c_coeffs))
        return complex(num / (den_rest * c_der))

    def export_dict(self) -> dict:
        return {
            "numerator": [[z.real, z.imag] for z in self.numerator_coeffs],
            "a_coeffs": [[complex(z).real, complex(z).imag] for z in self.a_coeffs],
            "c_coeffs": [[complex(z).real, complex(z).imag] for z in self.c_coeffs],
            "poles": [
                [complex(p).real, complex(p).imag, int(o)]
                for p, o in self.finite_poles
            ],
            "fit_residual": self.fit_residual,
            "condition_number": self.condition_number,
        }


def _check_clearance(points, mu: DiscreteMeasure, field: ExternalField | None,
                     tol: float):
    pts = np.asarray(points, dtype=complex).ravel()
    for t in pts:
        if np.min(np.abs(mu.support_nodes() - t)) < tol:
            raise TooCloseToSupport(f"sample point {t} is within {tol} of supp mu")
        if field is not None:
            for s in field.singularities:
                if abs(t - s) < tol:
                    raise TooCloseToSupport(f"sample point {t} is near {s}")


def sample_R(
    mu: DiscreteMeasure,
    field: ExternalField | None,
    points,
    clearance: float = 1e-6,
) -> np.ndarray:
    """(C^mu(z) + Phi'(z))^2 pointwise; the square is taken before any fitting
    so no global square-root branch is ever needed."""
    pts = np.asarray(points, dtype=complex).ravel()
    _check_clearance(pts, mu, field, clearance)
    c = cauchy_transform(mu, pts)
    if field is not None:
        c = c + field.phi_prime(pts)
    return np.asarray(c * c)


def sample_points(
    mu: DiscreteMeasure,
    field: ExternalField | None = None,
    n_ring: int = 48,
    near_factor: float = 0.2,
) -> np.ndarray:
    """Two rings around the support hull plus near-field probes."""
    sup = mu.support_nodes()
    center = sup.mean()
    rad = max(np.max(np.abs(sup - center)), 1e-3)
    angles = 2 * np.pi * (np.arange(n_ring) + 0.5) / n_ring
    ring1 = center + 1.6 * rad * np.exp(1j * angles)
    ring2 = center + 3.0 * rad * np.exp(1j * angles[::2])
    step = max(1, len(sup) // 12)
    near = []
    for k in range(step // 2, len(sup) - 1, step):
        tangent = sup[min(k + 1, len(sup) - 1)] - sup[max(k - 1, 0)]
        tangent /= abs(tangent)
        off = near_factor * rad * 1j * tangent
        near += [sup[k] + off, sup[k] - off]
    pts = np.concatenate([ring1, ring2, np.array(near, dtype=complex)])
    if field is not None:
        keep = np.ones(len(pts), dtype=bool)
        for s in field.singularities:
            keep &= np.abs(pts - s) > 0.05 * max(1.0, rad)
        pts = pts[keep]
    keep = np.array(
        [np.min(np.abs(sup - t)) > 0.03 * rad for t in pts]
    )
    return pts[keep]


def curve_structure(
    field: ExternalField | None,
    fixed_points: tuple[complex, ...] = (),
) -> dict:
    """Pole prescription from the field and the fixed points: the denominator
    A^2 C, the numerator degree 2 deg B + deg C, and the pole list."""
    if field is not None:
        a = field.a_coeffs
        deg_b = len(field.b_coeffs) - 1
        poles = [(z, 2 * m + 2) for z, m in field.q_factors]
        poles += [(w, 2) for w, _ in field.log_terms]
    else:
        a = (1.0 + 0j,)
        deg_b = 0
        poles = []
    c = np.array([1.0 + 0j])
    for p in fixed_points:
        c = npp.polymul(c, [-p, 1.0])
    poles += [(p, 1) for p in fixed_points]
    return {
        "a_coeffs": tuple(a),
        "c_coeffs": tuple(complex(x) for x in c),
        "num_degree": 2 * deg_b + (len(c) - 1),
        "finite_poles": tuple(poles),
    }


def fit_spectral_curve(samples, structure: dict) -> SpectralCurve:
    """Linear least squares for the numerator of R = Num / (A^2 C).

    samples: (points, values) with values = sample_R output.
    """
    points, values = samples
    points = np.asarray(points, dtype=complex).ravel()
    values = np.asarray(values, dtype=complex).ravel()
    deg = int(structure["num_degree"])
    if len(points) < 2 * (deg + 1):
        raise InsufficientSamples(
            f"{len(points)} samples for numerator degree {deg}; need "
            f"{2 * (deg + 1)}"
        )
    den = npp.polyval(points, structure["a_coeffs"]) ** 2 * npp.polyval(
        points, structure["c_coeffs"]
    )
    target = values * den
    # scale the Vandermonde columns for conditioning
    scale = max(np.max(np.abs(points)), 1.0)
    vand = (points[:, None] / scale) ** np.arange(deg + 1)[None, :]
    # weight rows so large |target| values do not dominate
    w = 1.0 / (1.0 + np.abs(target))
    sol, _, rank, sv = np.linalg.lstsq(vand * w[:, None],
                                       target * w, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > COND_LIMIT or rank < deg + 1:
        raise IllConditioned(
            f"spectral fit condition number {cond:.3g}", condition_number=cond
        )
    coeffs = sol / scale ** np.arange(deg + 1)
    fitted = npp.polyval(points, coeffs) / den
    resid = float(np.max(np.abs(fitted - values) / (1.0 + np.abs(values))))
    return SpectralCurve(
        numerator_coeffs=coeffs,
        a_coeffs=structure["a_coeffs"],
        c_coeffs=structure["c_coeffs"],
        finite_poles=structure["finite_poles"],
        fit_residual=resid,
        condition_number=cond,
    )


def spectral_residual(
    curve: SpectralCurve,
    mu: DiscreteMeasure,
    field: ExternalField | None,
    probes,
) -> float:
    """max over probes of |sample_R - R| / (1 + |R|)."""
    probes = np.asarray(probes, dtype=complex).ravel()
    samples = sample_R(mu, field, probes)
    model = curve(probes)
    return float(np.max(np.abs(samples - model) / (1.0 + np.abs(model))))


def density_from_R(curve: SpectralCurve, arc) -> tuple[np.ndarray, float]:
    """Density (1/ pi i) sqrt(R)_+ along a trajectory arc, branch fixed once
    per arc by real-positivity; trapezoid mass."""
    arc = np.asarray(arc, dtype=complex).ravel()
    if len(arc) < 3:
        raise BranchAmbiguity("arc too short for branch selection")
    mids = 0.5 * (arc[:-1] + arc[1:])
    dz = np.diff(arc)
    root = np.sqrt(curve(mids).astype(complex))
    # continue the branch along the arc (nearest-value selection)
    for k in range(1, len(root)):
        if abs(-root[k] - root[k - 1]) < abs(root[k] - root[k - 1]):
            root[k] = -root[k]
    vals = root * dz / (np.pi * 1j)
    # one global flip per arc at most
    if np.real(vals.sum()) < 0:
        vals = -vals
    rel_imag = np.abs(np.imag(vals)).sum() / max(np.real(vals).sum(), 1e-300)
    if np.min(np.real(vals)) < -1e-9 * np.max(np.abs(vals)) or rel_imag > 0.05:
        raise BranchAmbiguity(
            "density changes sign or stays complex along the arc"
        )
    seg = np.abs(dz)
    density = np.real(vals) / seg
    mass = float(np.real(vals).sum())
    return density, mass
