"""Spherical metric, Hausdorff distance, bump fields, perturbation."""

import numpy as np
import pytest

from maxcap.errors import EmptySet, FoldDetected, TestFunctionViolation
from maxcap.geometry import (
    INFINITY,
    BumpField,
    Component,
    Contour,
    chordal_distance,
    hausdorff_distance,
    perturb,
    sphere_embed,
)


class TestChordal:
    def test_known_values(self):
        assert chordal_distance(0.0, INFINITY) == pytest.approx(1.0)
        assert chordal_distance(INFINITY, INFINITY) == 0.0
        assert chordal_distance(0.0, 1.0) == pytest.approx(1 / np.sqrt(2))
        assert chordal_distance(1j, 1j) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            z, w = (complex(*rng.standard_normal(2)) for _ in range(2))
            assert chordal_distance(z, w) == pytest.approx(
                chordal_distance(w, z))

    def test_triangle_inequality(self):
        rng = np.random.default_rng(9)
        for _ in range(10_000):
            pts = rng.standard_normal(3) * 3 + 3j * rng.standard_normal(3)
            a, b, c = (complex(p) for p in pts)
            lhs = chordal_distance(a, c)
            rhs = chordal_distance(a, b) + chordal_distance(b, c)
            assert lhs <= rhs + 1e-12

    def test_triangle_through_infinity(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            a, b = (complex(*rng.standard_normal(2)) * 4 for _ in range(2))
            assert chordal_distance(a, b) <= (
                chordal_distance(a, INFINITY)
                + chordal_distance(INFINITY, b) + 1e-12
            )

    def test_matches_sphere_embedding(self):
        rng = np.random.default_rng(4)
        z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        w = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        ez, ew = sphere_embed(z), sphere_embed(w)
        for i in range(50):
            assert np.linalg.norm(ez[i] - ew[i]) == pytest.approx(
                chordal_distance(z[i], w[i]), abs=1e-12)


class TestHausdorff:
    def test_identity(self):
        k = np.linspace(-1, 1, 50).astype(complex)
        assert hausdorff_distance(k, k) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        assert hausdorff_distance(a, b) == pytest.approx(
            hausdorff_distance(b, a))

    def test_shifted_segments(self):
        k1 = np.linspace(-1, 1, 400).astype(complex)
        k2 = k1 + 0.01j
        d = hausdorff_distance(k1, k2)
        # chordal metric contracts the Euclidean 0.01 offset
        assert 0.0 < d <= 0.01

    def test_infinity_flag(self):
        # the same bounded samples, but one set also contains infinity
        k = np.linspace(-1, 1, 50).astype(complex)
        d = hausdorff_distance(k, k, inf1=False, inf2=True)
        # nearest bounded sample to infinity is z = 1: distance 1/sqrt(2)
        assert d == pytest.approx(1 / np.sqrt(2))

    def test_empty_raises(self):
        with pytest.raises(EmptySet):
            hausdorff_distance(np.array([]), np.array([1.0 + 0j]))


class TestBumpField:
    def test_support_and_smoothness(self):
        h = BumpField(1j, 0.5, 1.0 + 0j)
        assert h(1j) == 1.0
        assert h(1j + 0.6) == 0.0
        assert h.sup_norm() == 1.0
        # value decays C^2-smoothly to the rim
        assert abs(h(1j + 0.499)) < 1e-6

    def test_jacobian_matches_fd(self):
        h = BumpField(0.3 + 0.2j, 0.8, 0.5 - 0.1j)
        rng = np.random.default_rng(8)
        for _ in range(40):
            z = complex(*rng.uniform(-0.4, 0.4, 2)) + 0.3 + 0.2j
            v = complex(*rng.standard_normal(2))
            step = 1e-6
            fd = (h(z + step * v) - h(z - step * v)) / (2 * step)
            assert abs(h.jacobian_action(z, v) - fd) < 1e-6

    def test_admissible_shrinks(self):
        h = BumpField.admissible(0.0, 2.0, 1.0, fixed_points=(1.0 + 0j,))
        assert h.radius == pytest.approx(1.0)

    def test_admissible_rejects(self):
        with pytest.raises(TestFunctionViolation):
            BumpField.admissible(0.0, 2.0, 1.0, singularities=(0.05 + 0j,))


class TestPerturb:
    def test_anchors_pinned(self):
        v = np.linspace(-1, 1, 21).astype(complex)
        comp = Component(v, anchors=((0, -1.0 + 0j), (20, 1.0 + 0j)))
        h = BumpField(0.0, 0.5, 0.3j)
        out = perturb(Contour((comp,)), h, 1.0)
        w = out.components[0].vertices
        assert w[0] == -1.0 and w[20] == 1.0
        assert abs(w[10] - 0.3j) < 1e-12  # midpoint fully displaced

    def test_fold_detected(self):
        v = np.array([0.0, 1e-15, 1.0], dtype=complex)
        h = BumpField(10.0, 0.5, 1.0)  # no displacement near the vertices
        with pytest.raises(FoldDetected):
            perturb(Contour((Component(v),)), h, 1.0)
