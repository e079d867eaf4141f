"""Shared fixtures; the expensive Hermite max-min run is session-scoped."""

import time

import numpy as np
import pytest

from maxcap.equilibrium import refine_measure
from maxcap.errors import StalledBelowTolerance
from maxcap.field import ExternalField, admissible_sectors
from maxcap.geometry import Component, Contour, Ray
from maxcap.topology import AdmissibleTriple
from maxcap.variation import AscentParams, maxmin_ascent


@pytest.fixture(scope="session")
def hermite_run():
    """Full criterion-2 pipeline: bent-line ascent for Phi = z^2, refined.

    Reused by the reconstruction criterion to stay inside its runtime
    budget.
    """
    field = ExternalField((0, 0, 1))
    sectors = admissible_sectors(field, 0.2)
    triple = AdmissibleTriple((), (), ((0, 1),))
    x = np.linspace(-3.0, 3.0, 241)
    verts = x + 0.25j * np.sin(np.pi * x) * np.exp(-(x ** 2))
    init = Contour((Component(verts, rays=(Ray(1, "head"), Ray(0, "tail"))),))
    params = AscentParams(n_nodes=400, basis_size=32, tol_crit=1e-4,
                          max_outer=400)
    t0 = time.time()
    try:
        res = maxmin_ascent(triple, field, init, params, sectors)
    except StalledBelowTolerance as exc:
        res = exc.result
    mu_ref, ell_ref, _ = refine_measure(res.measure, field)
    return {
        "field": field,
        "sectors": sectors,
        "triple": triple,
        "result": res,
        "mu": mu_ref,
        "ell": ell_ref,
        "wall_time": time.time() - t0,
    }
