"""Ornstein-Uhlenbeck interpolation towards Ginibre and the linear ODE corollary.

The matrix flow is sampled through its exact time-t law
``X_t = e^{-t/2} X_0 + sqrt(1 - e^{-t}) G`` with one Ginibre ``G`` shared by
all times of a path (common random numbers), so finite differences in ``t``
are differences of smooth functions of one pair ``(X_0, G)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.linalg import expm

from rightmost.ensembles import as_distribution, sample_matrix
from rightmost.edge_stats import gamma_n
from rightmost.mc import map_chunks
from rightmost.spectral import avg_trace_G, shifted_singulars

GINIBRE_CHANNEL = 1


@dataclass
class FlowState:
    t: float
    X0: np.ndarray
    Ggin: np.ndarray

    @property
    def Xt(self) -> np.ndarray:
        return interpolate(self.X0, self.Ggin, self.t)


def interpolate(X0: np.ndarray, Ggin: np.ndarray, t: float) -> np.ndarray:
    """``e^{-t/2} X0 + sqrt(1 - e^{-t}) Ggin``."""
    if not t >= 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return np.array(X0, dtype=complex)
    return math.exp(-0.5 * t) * X0 + math.sqrt(-math.expm1(-t)) * Ggin


def coupled_pair(dist, n: int, seed: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """``(X0, G)`` for sample ``index``; ``G`` comes from its own stream channel."""
    X0 = sample_matrix(dist, n, seed, index)
    G = sample_matrix("ginibre", n, seed, index, channel=GINIBRE_CHANNEL)
    return X0, G


def observable_trajectory(X0, Ggin, t_grid, z: complex, eta: float) -> np.ndarray:
    """``Im <G_t^z(i eta)>`` along ``t_grid`` for one coupled path."""
    out = []
    for t in np.atleast_1d(t_grid):
        S = shifted_singulars(interpolate(X0, Ggin, float(t)), z)
        out.append(avg_trace_G(S, eta).imag)
    return np.asarray(out)


def lemma_scale(n: int, eta: float) -> float:
    """``n^{-1/2} Psi^2 + Psi^5 + 1/n`` with ``Psi = 1/(n eta)``."""
    psi = 1.0 / (n * eta)
    return n**-0.5 * psi**2 + psi**5 + 1.0 / n


def _trajectory_chunk(dist, n, seed, t_grid, z, eta, start, count):
    rows = []
    for i in range(start, start + count):
        X0, G = coupled_pair(dist, n, seed, i)
        rows.append(observable_trajectory(X0, G, t_grid, z, eta))
    return rows


@dataclass
class DriftEstimate:
    t_grid: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    drift: float
    drift_se: float
    scale: float
    pairs: int
    trajectories: np.ndarray = field(repr=False, default=None)

    @property
    def ratio(self) -> float:
        """``|drift| / scale``; the lemma predicts O(1) up to n^xi factors."""
        return abs(self.drift) / self.scale


def drift_probe(
    dist,
    n: int,
    pairs: int,
    seed: int,
    z: complex = 1.0,
    eta: float | None = None,
    t0: float = 0.0,
    t1: float = 1.0,
    t_grid=None,
    workers: int | None = None,
) -> DriftEstimate:
    """Monte Carlo ``d/dt E Im<G_t>`` between ``t0`` and ``t1`` with common random numbers."""
    if pairs < 2:
        raise ValueError("need at least 2 pairs")
    eta = n**-0.75 if eta is None else eta
    grid = np.asarray(t_grid if t_grid is not None else [t0, t1], dtype=float)
    if t0 not in grid or t1 not in grid:
        grid = np.unique(np.concatenate([grid, [t0, t1]]))
    fn = partial(_trajectory_chunk, as_distribution(dist), n, seed, grid, complex(z), eta)
    traj = np.array(map_chunks(fn, pairs, workers=workers, chunk=8))
    i0, i1 = int(np.searchsorted(grid, t0)), int(np.searchsorted(grid, t1))
    diff = (traj[:, i1] - traj[:, i0]) / (t1 - t0)
    return DriftEstimate(
        t_grid=grid,
        mean=traj.mean(axis=0),
        std_error=traj.std(axis=0, ddof=1) / math.sqrt(pairs),
        drift=float(diff.mean()),
        drift_se=float(diff.std(ddof=1) / math.sqrt(pairs)),
        scale=lemma_scale(n, eta),
        pairs=pairs,
        trajectories=traj,
    )


# -- stability corollary ------------------------------------------------------


def growth_rate(g, max_re):
    """Asymptotic exponential rate ``-1 + g max Re sigma`` of ``u' = (-I + gX)u``."""
    return -1.0 + np.asarray(g, dtype=float) * np.asarray(max_re, dtype=float)


@dataclass
class StabilityVerdict:
    g: float
    n: int
    verdict: str
    decay_fraction: float
    band: tuple[float, float]
    band_source: str
    labels: list[str]


def classify_stability(
    g: float, n: int, max_re, C_n: float = 1.0, quantiles: tuple[float, float] = (0.05, 0.95)
) -> StabilityVerdict:
    """Per-sample decay/blow-up labels and a verdict relative to the critical band.

    The band is ``1 - sqrt(gamma_n/4n) -+ C_n / sqrt(4 n gamma_n)`` when
    ``gamma_n > 0`` and otherwise the empirical quantiles of ``1 / max_re``.
    """
    m = np.asarray(max_re, dtype=float).ravel()
    if m.size == 0:
        raise ValueError("need at least one max_re sample")
    rates = growth_rate(g, m)
    labels = ["decay" if r < 0 else "blowup" if r > 0 else "critical" for r in rates]
    gam = gamma_n(n) if n >= 3 else -1.0
    if gam > 0:
        centre = 1.0 - math.sqrt(gam / (4 * n))
        half = C_n / math.sqrt(4 * n * gam)
        band = (centre - half, centre + half)
        source = "asymptotic"
    else:
        inv = 1.0 / m[m > 0]
        band = tuple(float(q) for q in np.quantile(inv, quantiles))
        source = "empirical"
    verdict = "decay" if g < band[0] else "blowup" if g > band[1] else "critical-band"
    return StabilityVerdict(float(g), n, verdict, float(np.mean(rates < 0)), band, source, labels)


def propagate(X, g: float, u0, t_end: float, method: str = "expm") -> np.ndarray:
    """``u(t_end)`` for ``u' = (-I + gX) u``.

    ``"expm"`` is scaling-and-squaring; ``"eigen"`` uses the eigendecomposition
    (the oracle, valid for diagonalisable ``X``).
    """
    X = np.asarray(X, dtype=complex)
    u0 = np.asarray(u0, dtype=complex)
    if not t_end >= 0:
        raise ValueError("t_end must be >= 0")
    n = X.shape[0]
    A = -np.eye(n) + g * X
    if method == "expm":
        return expm(t_end * A) @ u0
    if method == "eigen":
        lam, V = np.linalg.eig(A)
        return V @ (np.exp(lam * t_end) * np.linalg.solve(V, u0))
    raise ValueError("method must be 'expm' or 'eigen'")


def observed_growth(X, g: float, u0, t_end: float, method: str = "expm") -> float:
    """Sup-norm growth exponent from the second half of ``[0, t_end]``.

    ``(log||u(t_end)|| - log||u(t_end/2)||) / (t_end/2)`` drops the transient
    of non-normal ``X`` that the plain ``log||u(t)||/t`` would carry.
    """
    half = propagate(X, g, u0, 0.5 * t_end, method)
    full = propagate(X, g, u0, t_end, method)
    return (math.log(np.abs(full).max()) - math.log(np.abs(half).max())) / (0.5 * t_end)
