"""Monte Carlo statistics of the rightmost eigenvalue.

The three-term centring ``gamma_n`` is negative for every feasible ``n``
(it turns positive only near ``n ~ 1e9``), so at desk scale the Gumbel
comparison uses fitted location and scale; the asymptotic constants are
reported for context only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from functools import partial

import numpy as np
from scipy import stats

from rightmost.ensembles import as_distribution, sample_matrix
from rightmost.mc import map_chunks
from rightmost.spectral import Spectrum, eigvals_batch


class GammaNonpositive(ValueError):
    """The three-term centring constant is not positive at this n."""

    code = "gamma_nonpositive"


def gamma_n(n: float) -> float:
    """``(log n - 5 log log n - log(2 pi^4)) / 2``."""
    if n < 3:
        raise ValueError("gamma_n needs n >= 3")
    return 0.5 * (math.log(n) - 5.0 * math.log(math.log(n)) - math.log(2.0 * math.pi**4))


@dataclass(frozen=True)
class EdgeSample:
    max_re: float
    argmax: complex
    rho: float
    gumbel_g: float | None = None
    index: int = -1
    counts: tuple[int, ...] = ()


def _values(spec) -> np.ndarray:
    return np.asarray(spec.values if isinstance(spec, Spectrum) else spec, dtype=complex)


def rescaled_max(max_re: float, n: int) -> float | None:
    """``sqrt(4 n gamma_n) (max_re - 1 - sqrt(gamma_n / 4n))`` when ``gamma_n > 0``."""
    if n < 3:
        return None
    g = gamma_n(n)
    if g <= 0:
        return None
    return math.sqrt(4 * n * g) * (max_re - 1.0 - math.sqrt(g / (4 * n)))


def rightmost(spec, theta: float = 0.0, index: int = -1) -> EdgeSample:
    """Largest ``Re(e^{i theta} sigma)`` over the spectrum and the eigenvalue attaining it."""
    vals = _values(spec)
    if vals.size == 0:
        raise ValueError("empty spectrum")
    proj = (np.exp(1j * theta) * vals).real
    k = int(np.argmax(proj))
    m = float(proj[k])
    return EdgeSample(m, complex(vals[k]), float(np.abs(vals).max()), rescaled_max(m, len(vals)), index)


def _edge_chunk(dist, n, seed, theta, backend, boxes, start, count):
    stack = np.stack([sample_matrix(dist, n, seed, start + i) for i in range(count)])
    ev = eigvals_batch(stack, backend)
    out = []
    for i in range(count):
        rec = rightmost(ev[i], theta, start + i)
        if boxes:
            rec = replace(rec, counts=tuple(count_in_box(ev[i], b) for b in boxes))
        out.append(rec)
    return out


def mc_edge_ensemble(
    dist,
    n: int,
    samples: int,
    seed: int,
    theta: float = 0.0,
    workers: int | None = None,
    backend: str = "numpy",
    chunk: int = 8,
    boxes=None,
) -> list[EdgeSample]:
    """``samples`` independent rightmost-eigenvalue records, in index order.

    With ``boxes`` each record also carries the eigenvalue count per box.
    """
    if samples < 0:
        raise ValueError("samples must be >= 0")
    dist = as_distribution(dist)
    fn = partial(_edge_chunk, dist, n, seed, theta, backend, tuple(boxes or ()))
    return map_chunks(fn, samples, workers=workers, chunk=chunk)


def gumbel_cdf(t):
    """``exp(-exp(-t))``."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-np.exp(-t))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GumbelFit:
    location: float
    scale: float
    ks_distance: float
    samples: int
    note: str = "parameters fitted on the same data; no p-value reported"

    def as_dict(self) -> dict:
        return asdict(self)


def gumbel_fit(values) -> GumbelFit:
    """Maximum-likelihood Gumbel (max) fit and the KS distance to the fitted law."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 100:
        raise ValueError("gumbel_fit needs at least 100 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values")
    if np.ptp(x) == 0:
        raise ValueError("constant input: Gumbel scale is degenerate")
    # fit on standardised data so the optimiser sees O(1) numbers
    mu, sd = x.mean(), x.std()
    loc, scale = stats.gumbel_r.fit((x - mu) / sd)
    loc, scale = mu + sd * loc, sd * scale
    ks = stats.kstest(x, stats.gumbel_r(loc, scale).cdf).statistic
    return GumbelFit(float(loc), float(scale), float(ks), int(x.size))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS distance and the 1% critical value ``1.628 sqrt((m+n)/(mn))``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = stats.ks_2samp(a, b).statistic
    m, k = len(a), len(b)
    crit = math.sqrt(-0.5 * math.log(0.01 / 2)) * math.sqrt((m + k) / (m * k))
    return float(d), float(crit)


@dataclass(frozen=True)
class BoxSpec:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self) -> None:
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError("box needs x_lo < x_hi and y_lo < y_hi")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, complex)
        return (z.real >= self.x_lo) & (z.real <= self.x_hi) & (z.imag >= self.y_lo) & (z.imag <= self.y_hi)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_lo, self.x_hi, self.y_lo, self.y_hi)


def count_in_box(spec, box: BoxSpec) -> int:
    """Number of eigenvalues in the closed box."""
    return int(np.count_nonzero(box.contains(_values(spec))))


def omega_boxes(
    n: int, C_n: float, tau: float, L: float | None = None, l: float | None = None
) -> tuple[BoxSpec, BoxSpec, BoxSpec]:
    """``(Omega_0, Omega_1, Omega_2)``.

    Omega_1 and Omega_2 need ``gamma_n > 0`` unless the centre ``L`` and
    half-width ``l`` are supplied (desk-scale override).
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    edge = n**tau / math.sqrt(n)
    h = n ** (tau / 2.0) / n**0.25
    omega0 = BoxSpec(1.0 - edge, 1.0 + edge, -h, h)
    if L is None or l is None:
        g = gamma_n(n)
        if g <= 0:
            raise GammaNonpositive(f"gamma_nonpositive: gamma_n({n}) = {g:.4f}; pass L and l")
        L = 1.0 + math.sqrt(g / (4 * n))
        l = C_n / math.sqrt(4 * n * g)
    omega1 = BoxSpec(L - l, L + l, -h, h)
    omega2 = BoxSpec(L + l, 1.0 + edge, -h, h)
    return omega0, omega1, omega2
