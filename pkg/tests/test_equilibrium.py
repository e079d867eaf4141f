"""Discrete equilibrium measures: closed-form oracles and KKT optimality."""

import numpy as np
import pytest

from maxcap import kernels
from maxcap.equilibrium import (
    DiscreteMeasure,
    cauchy_transform,
    chain_gaps,
    energy,
    equilibrium_measure,
    euler_lagrange_residual,
    log_potential,
    refine_measure,
    segment_nodes,
    weighted_energy,
)
from maxcap.errors import NodeCollision
from maxcap.field import ExternalField


class TestPrimitives:
    def test_chain_gaps(self):
        g = chain_gaps(np.array([0, 1, 3, 4], dtype=complex))
        assert np.allclose(g, [1.0, 1.5, 1.5, 1.0])

    def test_point_mass_potential(self):
        mu = DiscreteMeasure(np.array([0j]), np.array([1.0]))
        # U(z) = -log|z|, C(z) = 1/(0 - z)
        assert log_potential(mu, 2.0 + 0j) == pytest.approx(-np.log(2))
        assert cauchy_transform(mu, 2.0 + 0j) == pytest.approx(-0.5)

    def test_cauchy_node_collision(self):
        mu = DiscreteMeasure(np.array([1j]), np.array([1.0]))
        with pytest.raises(NodeCollision):
            cauchy_transform(mu, 1j)

    def test_two_node_off_diagonal_energy(self):
        # nodes at +-1, weights 1/2: off-diagonal energy -log(2)/2
        nodes = np.array([-1.0 + 0j, 1.0 + 0j])
        k = kernels.log_kernel_matrix(nodes, np.array([1.0, 1.0]))
        w = np.array([0.5, 0.5])
        off = w @ (k - np.diag(np.diag(k))) @ w
        assert off == pytest.approx(-np.log(2) / 2)

    def test_weighted_energy_decomposition(self):
        f = ExternalField((0, 0, 1))
        nodes, gaps = segment_nodes(-1, 1, 40)
        mu = DiscreteMeasure(nodes, np.full(40, 1 / 40), gaps)
        gap = weighted_energy(mu, f) - energy(mu)
        assert gap == pytest.approx(2 * np.sum(nodes.real ** 2) / 40)


class TestArcsine:
    """Unweighted equilibrium of [-1, 1]: arcsine law, ell = log 2."""

    def _solve(self):
        nodes, gaps = segment_nodes(-1, 1, 400)
        return equilibrium_measure((nodes, gaps))

    def test_robin_constant(self):
        _, ell, _ = self._solve()
        assert abs(ell - np.log(2)) < 2e-3

    def test_density(self):
        mu, _, _ = self._solve()
        dens = mu.weights / mu.gaps
        x = mu.nodes.real
        exact = 1 / (np.pi * np.sqrt(1 - x ** 2))
        # edge cells see the inverse square-root singularity; compare inside
        interior = np.abs(x) < 0.9
        assert np.max(np.abs(dens - exact)[interior]) < 5e-3

    def test_kkt_residual(self):
        mu, ell, _ = self._solve()
        r = euler_lagrange_residual(mu, ell)
        assert r["sup_on_support"] < 1e-8
        assert r["deficit_off_support"] < 1e-8


class TestSemicircle:
    """phi = Re z^2 on a segment: semicircle law on [-1, 1]."""

    FIELD = ExternalField((0, 0, 1))

    def _solve(self):
        nodes, gaps = segment_nodes(-2, 2, 500)
        return equilibrium_measure((nodes, gaps), field=self.FIELD)

    def test_support_and_ell(self):
        mu, ell, _ = self._solve()
        sup = mu.support_nodes().real
        assert abs(sup.min() + 1) < 2e-2 and abs(sup.max() - 1) < 2e-2
        assert abs(ell - (0.5 + np.log(2))) < 3e-3

    def test_density(self):
        mu, _, _ = self._solve()
        x = mu.nodes.real
        dens = mu.weights / mu.gaps
        exact = np.where(np.abs(x) < 1,
                         (2 / np.pi) * np.sqrt(np.clip(1 - x ** 2, 0, None)),
                         0.0)
        interior = np.abs(x) < 0.9
        assert np.max(np.abs(dens - exact)[interior]) < 5e-3

    def test_refine_keeps_ell(self):
        mu, ell, _ = self._solve()
        mu2, ell2, _ = refine_measure(mu, self.FIELD)
        assert abs(ell2 - (0.5 + np.log(2))) < 3e-3
        r = euler_lagrange_residual(mu2, ell2, field=self.FIELD)
        assert r["sup_on_support"] < 1e-8


class TestOptimalityGap:
    def test_uniform_is_not_equilibrium(self):
        nodes, gaps = segment_nodes(-1, 1, 300)
        w = np.full(300, 1 / 300)
        uni = DiscreteMeasure(nodes, w, gaps)
        k = kernels.log_kernel_matrix(nodes, gaps)
        best_ell = float(np.mean(k @ w))
        r = euler_lagrange_residual(uni, best_ell)
        assert r["sup_on_support"] > 0.05

    def test_equilibrium_minimizes_energy(self):
        nodes, gaps = segment_nodes(-1, 1, 200)
        mu, _, _ = equilibrium_measure((nodes, gaps))
        uni = DiscreteMeasure(nodes, np.full(200, 1 / 200), gaps)
        assert energy(mu) < energy(uni)
