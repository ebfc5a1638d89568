"""Casimir sphere-plane numerics.

Free energy and force between a sphere and a plane from the scattering
approach: multipole round-trip matrices assembled without underflow,
log-determinants by dense Cholesky or hierarchical low-rank
factorization, Matsubara summation or zero-temperature quadrature, and
proximity-force-approximation references.
"""

from .casimir import (
    CasimirResult,
    ConvergenceError,
    JobSpec,
    ell_dim_auto,
    free_energy,
    free_energy_T0,
    force,
    pfa_correction_sweep,
    pfa_force,
    plane_plane_energy_per_area,
)
from .constants import CODATA, c, hbar, k_B
from .lindet import (
    HodlrFactorization,
    NotPositiveDefiniteError,
    benchmark_backends,
    compress_lowrank,
    hodlr_factorize,
    logdet_cholesky,
    logdet_hodlr,
)
from .materials import (
    Drude,
    DielectricModel,
    MaterialError,
    PerfectReflector,
    Plasma,
    Tabulated,
    TabulatedRangeError,
    Vacuum,
    gold_drude,
    load_tabulated,
)
from .quadrature import QuadratureError, gauss_laguerre_log
from .reflection import fresnel, fresnel_zero_frequency, mie
from .roundtrip import (
    RoundTripBlock,
    RoundTripParams,
    assemble_block,
    assemble_block_unsymmetrized,
)
from .specfun import DomainError, LogScaled

__version__ = "0.1.0"

__all__ = [
    "CODATA",
    "CasimirResult",
    "ConvergenceError",
    "DielectricModel",
    "DomainError",
    "Drude",
    "HodlrFactorization",
    "JobSpec",
    "LogScaled",
    "MaterialError",
    "NotPositiveDefiniteError",
    "PerfectReflector",
    "Plasma",
    "QuadratureError",
    "RoundTripBlock",
    "RoundTripParams",
    "Tabulated",
    "TabulatedRangeError",
    "Vacuum",
    "assemble_block",
    "assemble_block_unsymmetrized",
    "benchmark_backends",
    "c",
    "compress_lowrank",
    "ell_dim_auto",
    "force",
    "free_energy",
    "free_energy_T0",
    "fresnel",
    "fresnel_zero_frequency",
    "gauss_laguerre_log",
    "gold_drude",
    "hbar",
    "hodlr_factorize",
    "k_B",
    "load_tabulated",
    "logdet_cholesky",
    "logdet_hodlr",
    "mie",
    "pfa_correction_sweep",
    "pfa_force",
    "plane_plane_energy_per_area",
]
