"""Scalar self-consistent equation for the Hermitized resolvent.

On the imaginary axis ``w = i eta`` the solution is ``m = i v`` with ``v > 0``
and the defining equation

    -1/m = w + m - |z|^2 / (w + m)

clears denominators to the real cubic

    v^3 + 2 eta v^2 + (eta^2 + delta) v - eta = 0,    delta = |z|^2 - 1,

which has exactly one positive root for ``eta > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rightmost.spectral import avg_trace_G, shifted_singulars


@dataclass(frozen=True)
class DysonPoint:
    z: complex
    eta: float
    v: float
    u: float
    mfrak: complex
    delta: float

    @property
    def m(self) -> complex:
        return 1j * self.v

    def cubic_residual(self) -> float:
        v, eta = self.v, self.eta
        return abs(v**3 + 2 * eta * v**2 + (eta**2 + self.delta) * v - eta)

    def self_consistency_residual(self) -> float:
        """|(w + m) + m (w + m)^2 - |z|^2 m|, the equation times ``m (w + m)``."""
        w = 1j * self.eta
        m = self.m
        return abs((w + m) + m * (w + m) ** 2 - abs(self.z) ** 2 * m)

    def equation_residual(self) -> float:
        """Residual of the equation as written, relative to ``|1/m|``."""
        w = 1j * self.eta
        m = self.m
        lhs = -1.0 / m
        rhs = w + m - abs(self.z) ** 2 / (w + m)
        return abs(lhs - rhs) / abs(lhs)


def _cubic(v, eta, delta):
    return ((v + 2 * eta) * v + (eta * eta + delta)) * v - eta


def _positive_root(eta: float, delta: float) -> float:
    lo, hi = 0.0, 1.0 / eta + 1.0
    while _cubic(hi, eta, delta) <= 0:  # p(v) > 0 for v large; guard only
        hi *= 2.0
    # bisection to a relative bracket, then safeguarded Newton
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cubic(mid, eta, delta) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-3 * hi or hi - lo <= 1e-14:
            break
    v = 0.5 * (lo + hi)
    for _ in range(60):
        p = _cubic(v, eta, delta)
        dp = 3 * v * v + 4 * eta * v + eta * eta + delta
        step = p / dp if dp > 0 else 0.0
        new = v - step
        if not lo < new < hi or dp <= 0:
            new = 0.5 * (lo + hi)
        if _cubic(new, eta, delta) > 0:
            hi = min(hi, new)
        else:
            lo = max(lo, new)
        if abs(new - v) <= 4e-16 * new:
            v = new
            break
        v = new
    return v


def solve_m(z: complex, eta: float) -> DysonPoint:
    """Solve for ``m^z(i eta) = i v`` and the derived ``u^z``, ``mfrak^z``.

    ``eta = 0`` returns the limiting root when ``|z| != 1``: ``v = sqrt(-delta)``
    inside the disk, ``v = 0`` outside (where ``u -> 1/|z|^2``).
    """
    z = complex(z)
    eta = float(eta)
    delta = abs(z) ** 2 - 1.0
    if eta < 0 or math.isnan(eta):
        raise ValueError("eta must be >= 0")
    if eta == 0:
        if delta == 0:
            raise ValueError("eta = 0 with |z| = 1 is the degenerate cube-root point")
        if delta < 0:
            v = math.sqrt(-delta)
            u = 1.0
        else:
            v = 0.0
            u = 1.0 / (1.0 + delta)
        return DysonPoint(z, 0.0, v, u, -z * u, delta)
    v = _positive_root(eta, delta)
    u = v / (eta + v)
    return DysonPoint(z, eta, v, u, -z * u, delta)


def m_matrix(p: DysonPoint) -> np.ndarray:
    """2x2 deterministic approximation ``M^z(i eta) = [[i v, mfrak], [conj(mfrak), i v]]``."""
    return np.array([[1j * p.v, p.mfrak], [np.conj(p.mfrak), 1j * p.v]])


def scaling_regime(z: complex, eta: float) -> float:
    """Order of ``Im m^z(i eta)`` for ``0 <= eta <= 1`` (two-branch formula)."""
    gap = abs(1.0 - abs(z) ** 2)
    if abs(z) > 1:
        return eta / (gap + eta ** (2.0 / 3.0))
    return eta ** (1.0 / 3.0) + math.sqrt(gap)


@dataclass(frozen=True)
class LocalLawProbe:
    z: complex
    eta: float
    psi: float
    residual: float

    @property
    def ratio(self) -> float:
        """Residual measured in units of ``psi = 1/(n eta)``."""
        return self.residual / self.psi


def local_law_residual(X: np.ndarray, z: complex, eta: float) -> LocalLawProbe:
    """``|<G^z(i eta)> - i v|`` for one matrix, with ``psi = 1/(n eta)``."""
    n = X.shape[0]
    if not 0 < eta:
        raise ValueError("eta must be positive")
    S = shifted_singulars(X, z)
    p = solve_m(z, eta)
    res = abs(avg_trace_G(S, eta) - 1j * p.v)
    return LocalLawProbe(complex(z), float(eta), 1.0 / (n * eta), float(res))
