"""maxcap: numerics for weighted max-min capacity problems in the plane."""

from . import kernels
from .equilibrium import (
    DiscreteMeasure,
    cauchy_transform,
    energy,
    equilibrium_measure,
    euler_lagrange_residual,
    log_potential,
    weighted_energy,
)
from .errors import MaxcapError
from .field import ExternalField, SectorSet, Window, admissible_sectors, level_set
from .geometry import (
    BumpField,
    Component,
    Contour,
    Ray,
    chordal_distance,
    hausdorff_distance,
    perturb,
)
from .topology import AdmissibleTriple, FixedPointSet, membership, validate_triple

__version__ = "0.1.0"
