"""Numerics for the rightmost eigenvalue of non-Hermitian i.i.d. random matrices."""

from __future__ import annotations

__version__ = "0.1.0"

from rightmost.ensembles import EntryDistribution, sample_matrix, moments_selfcheck
from rightmost.spectral import (
    Spectrum,
    SingularSpectrum,
    eigvals,
    shifted_singulars,
    im_trace_resolvent,
    avg_trace_G,
    spectral_radius,
)
from rightmost.dyson import DysonPoint, solve_m, m_matrix, scaling_regime, local_law_residual

__all__ = [
    "EntryDistribution",
    "sample_matrix",
    "moments_selfcheck",
    "Spectrum",
    "SingularSpectrum",
    "eigvals",
    "shifted_singulars",
    "im_trace_resolvent",
    "avg_trace_G",
    "spectral_radius",
    "DysonPoint",
    "solve_m",
    "m_matrix",
    "scaling_regime",
    "local_law_residual",
]
