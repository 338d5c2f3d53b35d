"""Isotropic Lévy processes on S^1, S^2 and flat tori.

Paths are built by rolling frames along geodesics (horizontal flows on the
orthonormal frame bundle); spectra come from closed-form zonal eigenfunctions
and radial quadrature against the jump measure.
"""

from .geom import Circle, OrthonormalFrame, Sphere2, TangentVector, Torus, make_manifold
from .levy import (Atom, Empty, LevyCharacteristics, Stable, TruncatedMeasure, TruncatedStable,
                   radial_quadrature, sample_jump, truncate)
from .sim import Grid, PathSample, SimConfig, brownian_step, project, simulate_batch, simulate_path
from .spectral import (SpectralMode, SpectrumTable, build_spectrum, eigenvalue, heat_trace,
                       jump_eigenvalue, kernel, laplace_eigenvalue)

__version__ = "0.1.0"

__all__ = [
    "Atom", "Circle", "Empty", "Grid", "LevyCharacteristics", "OrthonormalFrame", "PathSample",
    "SimConfig", "SpectralMode", "SpectrumTable", "Sphere2", "Stable", "TangentVector", "Torus",
    "TruncatedMeasure", "TruncatedStable", "brownian_step", "build_spectrum", "eigenvalue",
    "heat_trace", "jump_eigenvalue", "kernel", "laplace_eigenvalue", "make_manifold", "project",
    "radial_quadrature", "sample_jump", "simulate_batch", "simulate_path", "truncate",
]
