"""Admissible triples: validation truth table, non-crossing invariance,
and contour membership."""

import numpy as np
import pytest

from maxcap.errors import IndexOutOfRange
from maxcap.field import ExternalField, admissible_sectors
from maxcap.geometry import Component, Contour, Ray
from maxcap.topology import (
    AdmissibleTriple,
    FixedPointSet,
    is_non_crossing,
    membership,
    validate_triple,
)


class TestValidateTriple:
    def test_crossing_images_rejected(self):
        # images (2,6) and (0,5) interleave: 0 < 2 < 5 < 6
        t = AdmissibleTriple(
            c_partition=((0,), (1, 2, 3)),
            psi=((2, 6), (0, 5)),
            theta_partition=((2, 6), (0, 5), (1,), (3,), (4,)),
        )
        report = validate_triple(t, n_sectors=7, n_fixed=4)
        assert any("crossing" in r for r in report)

    def test_single_block_valid(self):
        t = AdmissibleTriple(
            c_partition=((0, 1, 2, 3),),
            psi=((0, 2, 5, 6),),
            theta_partition=((0, 2, 5, 6), (1,), (3,), (4,)),
        )
        assert validate_triple(t, n_sectors=7, n_fixed=4) == []

    def test_three_blocks_valid(self):
        t = AdmissibleTriple(
            c_partition=((0,), (1, 2, 3), (4, 5)),
            psi=((3,), (), (2,)),
            theta_partition=((0,), (1,), (2,), (3,), (4, 5), (6,)),
        )
        assert validate_triple(t, n_sectors=7, n_fixed=6) == []

    def test_singleton_needs_sector(self):
        t = AdmissibleTriple(((0,),), ((),), ((0,), (1,)))
        report = validate_triple(t, n_sectors=2, n_fixed=1)
        assert any("singleton-needs-sector" in r for r in report)

    def test_subordination(self):
        # image (0, 1) is not a theta-partition block
        t = AdmissibleTriple(((0, 1),), ((0, 1),), ((0,), (1,)))
        report = validate_triple(t, n_sectors=2, n_fixed=2)
        assert any("subordination" in r for r in report)

    def test_overlapping_images(self):
        t = AdmissibleTriple(
            ((0,), (1,)), ((0,), (0, 1)), ((0,), (0, 1))
        )
        report = validate_triple(t, n_sectors=2, n_fixed=2)
        assert any("overlap" in r for r in report)

    def test_index_out_of_range(self):
        t = AdmissibleTriple(((0,),), ((5,),), ((0,),))
        with pytest.raises(IndexOutOfRange):
            validate_triple(t, n_sectors=2, n_fixed=1)

    def test_psi_length_mismatch(self):
        with pytest.raises(IndexOutOfRange):
            AdmissibleTriple(((0,), (1,)), ((0,),), ((0,),))


class TestNonCrossing:
    def test_basic(self):
        assert is_non_crossing([(0, 3), (1, 2)])
        assert not is_non_crossing([(0, 2), (1, 3)])

    def test_rotation_invariance(self):
        # non-crossing is a cyclic property: relabeling i -> (i + k) mod n
        # must not change the verdict
        rng = np.random.default_rng(17)
        n = 8
        for _ in range(200):
            labels = rng.permutation(n)
            cuts = np.sort(rng.choice(np.arange(1, n), size=3, replace=False))
            blocks = [tuple(b) for b in np.split(labels, cuts)]
            base = is_non_crossing(blocks)
            for k in range(1, n):
                rot = [tuple((i + k) % n for i in b) for b in blocks]
                assert is_non_crossing(rot) == base

    def test_singletons_never_cross(self):
        assert is_non_crossing([(i,) for i in range(10)])


class TestMembership:
    def setup_method(self):
        self.field = ExternalField((0, 0, 1))
        self.sectors = admissible_sectors(self.field, 0.2)

    def _line(self):
        x = np.linspace(-3.0, 3.0, 121)
        return Contour((Component(
            x.astype(complex), rays=(Ray(1, "head"), Ray(0, "tail"))
        ),))

    def test_real_line_member(self):
        triple = AdmissibleTriple((), (), ((0, 1),))
        rep = membership(self._line(), triple, self.sectors,
                         FixedPointSet(()), clearance_radius=2.0)
        assert rep == []

    def test_segment_not_member(self):
        # [-1, 1] reaches no sector: the free block (0, 1) is unrealized
        triple = AdmissibleTriple((), (), ((0, 1),))
        seg = Contour((Component(
            np.linspace(-1, 1, 41).astype(complex)
        ),))
        rep = membership(seg, triple, self.sectors,
                         FixedPointSet(()), clearance_radius=2.0)
        assert any("sector-block-unrealized" in r for r in rep)

    def test_half_line_member(self):
        # Laguerre-type topology: one fixed point at 0 wired to sector 0
        field = ExternalField((1, 0, 1), q_factors=((0j, 1),))
        sectors = admissible_sectors(field, 0.2)
        triple = AdmissibleTriple(((0,),), ((0,),), ((0,),))
        half = Contour((Component(
            np.linspace(0, 4, 81).astype(complex), rays=(Ray(0, "head"),)
        ),))
        rep = membership(half, triple, sectors, FixedPointSet((0j,)),
                         clearance_radius=2.0)
        assert rep == []

    def test_clearance_violation(self):
        # unconnected singleton sector 1 must stay clear beyond the radius
        triple = AdmissibleTriple(((0, 1),), ((0,),), ((0,), (1,)))
        rep = membership(
            Contour((Component(
                np.concatenate([
                    np.linspace(-3, 1, 81).astype(complex),
                    1 + np.linspace(0.1, 4.0, 40) * np.exp(3j * np.pi / 4),
                ]),
                rays=(Ray(0, "tail"),),
            ),)),
            triple, self.sectors, FixedPointSet((-1 + 0j, 1 + 0j)),
            clearance_radius=2.0,
        )
        assert any("sector-clearance" in r for r in rep)
