"""Numerical spectral laboratory for magnetic Schrodinger (Pauli) operators
derived from plurisubharmonic polynomial weights, the associated weighted
Cauchy-Riemann Laplacians, and their compactness criteria."""

from .criteria import CriteriaReport, classify, dirac_verdict, radial_series
from .discretize import (
    Grid,
    SparseHermitianOperator,
    box00,
    box0n,
    build_grid,
    conjugation_scaling,
    covariant_pair,
    dirac,
    identity_residual,
    pauli,
)
from .eigensolve import (
    CompactnessProxy,
    SpectrumResult,
    compactness_proxy,
    near_kernel_count,
    smallest_eigs,
)
from .measure import DoublingReport, disk_mass, doubling_report
from .weights import LeviMatrix, WeightSpec, parse_weight

__version__ = "0.1.0"

__all__ = [
    "CriteriaReport",
    "CompactnessProxy",
    "DoublingReport",
    "Grid",
    "LeviMatrix",
    "SparseHermitianOperator",
    "SpectrumResult",
    "WeightSpec",
    "box00",
    "box0n",
    "build_grid",
    "classify",
    "compactness_proxy",
    "conjugation_scaling",
    "covariant_pair",
    "dirac",
    "dirac_verdict",
    "disk_mass",
    "doubling_report",
    "identity_residual",
    "near_kernel_count",
    "parse_weight",
    "pauli",
    "radial_series",
    "smallest_eigs",
]
