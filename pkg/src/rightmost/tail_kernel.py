"""Correlation kernel of the smallest eigenvalues of ``Y^z = (X - z)^*(X - z)``
for complex Ginibre ``X`` and ``|z|^2 = 1 + delta``, and the lower-tail bound.

The diagonal kernel is the double contour integral

    K_n(u, u) = (2n^3 / (i pi)) * 2 * oint dzeta int_0^{i inf} dw
                exp(n [f(w) - f(zeta)]) K_B(2n zeta sqrt(u), 2n w sqrt(u)) zeta w
                (1 - c^2 / ((c^2 - w^2)(c^2 - zeta^2))),

with ``f(w) = w^2 + log(c^2 - w^2)``, ``c^2 = 1 + delta``, and the factor 2
accounting for the mirror contour around ``-c``.  Two evaluations:

* ``contour``: double-precision quadrature on the rays
  ``zeta = sqrt(delta) + t(1 +- i)`` (convergent for ``u < delta``) or on a
  circle around ``c``; fine at small ``u``, ill-conditioned in the bulk.
* ``exact``: the Lommel form of ``K_B`` factorises the integral into
  one-dimensional residue and Laguerre sums ``A_j(rho)``, ``B_j(rho)``,
  evaluated in multiprecision once per ``(n, delta)`` on a Chebyshev table
  of ``g(rho) = C rho F(rho)``.  Then ``K(u) = G(sqrt u) / u`` with
  ``G' = g``, and every integral of ``K`` is a double-precision quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.stats import binomtest

from rightmost.bessel import bessel_scaled
from rightmost.ensembles import as_distribution, stream


class ContourResolutionError(ArithmeticError):
    """Quadrature could not resolve the kernel (imaginary residue or cancellation)."""


@dataclass(frozen=True)
class TailParams:
    n: int
    delta: float

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def n_delta2(self) -> float:
        return self.n * self.delta**2

    @property
    def z(self) -> float:
        """Real spectral parameter with ``|z|^2 = 1 + delta``."""
        return math.sqrt(1.0 + self.delta)

    @property
    def gap_scale(self) -> float:
        """``1/(n^2 delta)``, the natural scale of ``u = lambda_1^2``."""
        return 1.0 / (self.n**2 * self.delta)


@dataclass(frozen=True)
class ContourSpec:
    """Truncation and panelling of the ``t`` (zeta) and ``s`` (w = i s) integrals.

    ``None`` lengths are chosen where the log-integrand has dropped
    ``drop`` below its maximum.
    """

    t_max: float | None = None
    s_max: float | None = None
    panels: int = 16
    order: int = 40
    drop: float = 50.0
    circle_nodes: int = 512

    def __post_init__(self) -> None:
        for v in (self.t_max, self.s_max):
            if v is not None and not v > 0:
                raise ValueError("truncation lengths must be positive")
        if self.panels < 1 or self.order < 2:
            raise ValueError("need panels >= 1 and order >= 2")

    def doubled(self, t_max: float, s_max: float) -> "ContourSpec":
        return ContourSpec(2 * t_max, 2 * s_max, 2 * self.panels, self.order, self.drop, self.circle_nodes)


def phase_f(w, delta: float):
    """``f(w) = w^2 + log(1 + delta - w^2)``."""
    w = np.asarray(w, dtype=complex)
    out = w * w + np.log(1.0 + delta - w * w)
    return complex(out) if out.ndim == 0 else out


def phase_f_prime(w, delta: float):
    """``f'(w) = 2w - 2w/(1 + delta - w^2)``; zeros at ``0, +-sqrt(delta)``."""
    w = np.asarray(w, dtype=complex)
    out = 2.0 * w - 2.0 * w / (1.0 + delta - w * w)
    return complex(out) if out.ndim == 0 else out


# -- contour quadrature ----------------------------------------------------


def _gl_panels(a: float, b: float, panels: int, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    e = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(e)
    mid = 0.5 * (e[1:] + e[:-1])
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * w).ravel()


def _first_below(x: np.ndarray, logmag: np.ndarray, drop: float) -> float:
    top = np.maximum.accumulate(logmag)
    idx = np.nonzero(logmag < top - drop)[0]
    idx = idx[x[idx] > x[np.argmax(logmag)]]
    if idx.size == 0:
        raise ContourResolutionError("integrand does not decay on the search range")
    return float(x[idx[0]])


def _s_max(n: int, delta: float, u: float, drop: float) -> float:
    s = np.linspace(0.0, 20.0, 40001)
    # |e^{n f(is)}| with |I_0(2n i s sqrt u)| <= 1
    logmag = n * (-(s**2) + np.log(1.0 + delta + s**2)) + np.log(np.maximum(s, 1e-300))
    return _first_below(s, logmag, drop)


def _t_max(n: int, delta: float, u: float, drop: float) -> float:
    if not u < delta:
        raise ContourResolutionError("ray contour needs u < delta")
    t = np.linspace(0.0, 200.0, 200001)
    zeta = math.sqrt(delta) + t * (1 + 1j)
    logmag = -n * np.real(phase_f(zeta, delta)) + 2 * n * np.abs(zeta.real) * math.sqrt(u)
    logmag += np.log(np.abs(zeta) + 1e-300)
    return _first_below(t, logmag, drop)


@dataclass
class ContourResult:
    value: float
    imag_residue: float
    condition: float
    contour: str
    t_max: float
    s_max: float

    @property
    def rel_error_estimate(self) -> float:
        return self.condition * 1e-15


def _kernel_contour(p: TailParams, u: float, c: ContourSpec, contour: str) -> ContourResult:
    n, d = p.n, p.delta
    cc = math.sqrt(1.0 + d)
    su = math.sqrt(u)
    s_max = c.s_max or _s_max(n, d, u, c.drop)
    s, ws = _gl_panels(0.0, s_max, c.panels, c.order)
    b = n * (-(s**2) + np.log(1.0 + d + s**2))
    y = 2j * n * s * su
    I0y, I1y = bessel_scaled(y)
    if contour == "rays":
        t_max = c.t_max or _t_max(n, d, u, c.drop)
        t, wt = _gl_panels(0.0, t_max, c.panels, c.order)
        sd = math.sqrt(d)
        z = np.concatenate([sd + t * (1 - 1j), sd + t * (1 + 1j)])
        dz = np.concatenate([(1 - 1j) * wt, -(1 + 1j) * wt])
    else:
        t_max = float("nan")
        phi = 2 * math.pi * np.arange(c.circle_nodes) / c.circle_nodes
        best = None
        for rr in np.linspace(0.02, 0.98, 97) * cc:
            zz = cc + rr * np.exp(1j * phi)
            m = np.max(-n * np.real(phase_f(zz, d)) + 2 * n * np.abs(zz.real) * su)
            if best is None or m < best[0]:
                best = (m, rr)
        r = best[1]
        z = cc + r * np.exp(1j * phi)
        dz = 1j * r * np.exp(1j * phi) * (2 * math.pi / c.circle_nodes)
    a = -n * phase_f(z, d)
    x = 2 * n * z * su
    I0x, I1x = bessel_scaled(x)
    # log-space: combine exp(-n f) with the Bessel growth before exponentiating
    la = a.real + np.abs(x.real)
    Ma, Mb = la.max(), b.max()
    A = np.exp(a - Ma + np.abs(x.real))
    B = np.exp(b - Mb)
    X, Y = x[:, None], y[None, :]
    KB = (X * I1x[:, None] * I0y[None, :] - Y * I1y[None, :] * I0x[:, None]) / (X**2 - Y**2)
    w = 1j * s[None, :]
    Z = z[:, None]
    fac = 1.0 - (1.0 + d) / ((1.0 + d - w**2) * (1.0 + d - Z**2))
    integrand = (A * dz)[:, None] * (B * ws * 1j)[None, :] * KB * Z * w * fac
    tot = integrand.sum()
    scale = 4.0 * n**3 / math.pi * math.exp(Ma + Mb)
    val = -1j * tot * scale  # 1/i = -i
    mag = np.abs(integrand).sum() * scale
    return ContourResult(
        value=float(val.real),
        imag_residue=abs(val.imag) / max(abs(val.real), 1e-300),
        condition=float(mag / max(abs(val), 1e-300)),
        contour=contour,
        t_max=t_max,
        s_max=s_max,
    )


def kernel_Y_contour(
    p: TailParams, u: float, c: ContourSpec | None = None, contour: str | None = None, tol: float = 1e-8
) -> ContourResult:
    """``K_n(u, u)`` by double-contour quadrature in double precision.

    Rays are used when ``u < delta`` (where they converge), otherwise a
    circle around ``c``.  Raises ``ContourResolutionError`` when the
    imaginary residue or the cancellation-based error estimate exceeds ``tol``.
    """
    if not u > 0:
        raise ValueError("u must be > 0")
    c = c or ContourSpec()
    contour = contour or ("rays" if u < p.delta else "circle")
    r = _kernel_contour(p, u, c, contour)
    if r.imag_residue > tol or r.rel_error_estimate > tol:
        raise ContourResolutionError(
            f"kernel not resolved at u={u}: imaginary residue {r.imag_residue:.2e}, "
            f"condition {r.condition:.2e}"
        )
    return r


# -- exact (multiprecision) route -----------------------------------------


def _residue_sum(n: int, j: int, rho, c, c2):
    """``A_j(rho)``: residue at ``zeta = c`` of the zeta-integral, times 2 pi i."""
    N = n + j
    X = 2 * n * rho * c
    top = N + 1
    I = [mp.mpf(0)] * (top + 1)
    if X == 0:
        I[0] = mp.mpf(1)
    else:
        I[top] = mp.besseli(top, X)
        I[top - 1] = mp.besseli(top - 1, X)
        for i in range(top - 1, 0, -1):
            I[i - 1] = I[i + 1] + (2 * i / X) * I[i]
    r = n * rho / c
    s = mp.fsum(mp.binomial(N - 1, i) * (-n) ** (N - 1 - i) * r**i * I[i] for i in range(N))
    return mp.pi * 1j * (-1) ** N / mp.factorial(N - 1) * s * mp.exp(-n * c2)


def _laguerre_sum(n: int, j: int, rho, c2):
    """``B_j(rho)``: the w-integral along the imaginary axis in closed form."""
    N = n - j
    x = n * rho**2
    total = []
    Lprev, L = mp.mpf(0), mp.mpf(1)
    for k in range(N + 1):
        if k == 1:
            Lprev, L = L, 1 - x
        elif k > 1:
            Lprev, L = L, ((2 * k - 1 - x) * L - (k - 1) * Lprev) / k
        total.append(mp.binomial(N, k) * c2 ** (N - k) * mp.factorial(k) / (2 * mp.mpf(n) ** (k + 1)) * L)
    return -mp.exp(-x) * mp.fsum(total)


def _g_mp(n: int, delta: float, rho: float) -> complex:
    """``g(rho) = C rho F(rho)`` with ``F = A_0 B_0 - c^2 A_1 B_1``, ``C = 4n^3/(i pi)``."""
    rho = mp.mpf(rho)
    c2 = 1 + mp.mpf(delta)
    c = mp.sqrt(c2)
    F = _residue_sum(n, 0, rho, c, c2) * _laguerre_sum(n, 0, rho, c2)
    F -= c2 * _residue_sum(n, 1, rho, c, c2) * _laguerre_sum(n, 1, rho, c2)
    return complex(4 * mp.mpf(n) ** 3 / (1j * mp.pi) * rho * F)


def _rho_edges(n: int, delta: float) -> np.ndarray:
    rho_max = 2.0 + math.sqrt(1.0 + delta) + 6.0 / math.sqrt(n)
    micro = 1.0 / (n * math.sqrt(delta))  # sqrt of the gap scale
    geo = [0.0] + [micro * 2.0**k for k in range(-3, 40) if micro * 2.0**k < 0.25]
    rest = np.arange(geo[-1] + 0.25, rho_max + 0.25, 0.25)
    return np.concatenate([geo, rest])


@dataclass
class ExactTailKernel:
    """Piecewise-Chebyshev table of ``g`` and its antiderivative ``G``."""

    n: int
    delta: float
    edges: np.ndarray
    g_coefs: list
    G_coefs: list
    G_left: np.ndarray
    imag_residue: float
    evaluations: int = 0
    meta: dict = field(default_factory=dict)

    def G(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        k = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, len(self.edges) - 2)
        for i in np.unique(k):
            sel = k == i
            a, b = self.edges[i], self.edges[i + 1]
            x = (2 * np.minimum(r[sel], self.edges[-1]) - a - b) / (b - a)
            out[sel] = self.G_left[i] + cheb.chebval(x, self.G_coefs[i])
        return out

    def g(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        k = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, len(self.edges) - 2)
        for i in np.unique(k):
            sel = (k == i) & (r <= self.edges[-1])
            a, b = self.edges[i], self.edges[i + 1]
            out[sel] = cheb.chebval((2 * r[sel] - a - b) / (b - a), self.g_coefs[i])
        return out

    def K(self, u):
        """``K_n(u, u) = G(sqrt u) / u``."""
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise ValueError("u must be > 0")
        out = self.G(np.sqrt(u.ravel())) / u.ravel()
        return float(out[0]) if u.ndim == 0 else out.reshape(u.shape)

    def integral(self, U: float, order: int = 24) -> float:
        """``int_0^U K du = int_0^sqrt(U) 2 G(r)/r dr`` (smooth integrand)."""
        R = math.sqrt(U)
        cuts = self.edges[(self.edges > 0) & (self.edges < R)]
        bounds = np.concatenate([[0.0], cuts, [R]])
        t, w = np.polynomial.legendre.leggauss(order)
        total = 0.0
        for a, b in zip(bounds[:-1], bounds[1:]):
            r = 0.5 * (b - a) * (t + 1) + a
            total += 0.5 * (b - a) * float(np.sum(w * 2.0 * self.G(r) / r))
        return total

    @property
    def total_mass(self) -> float:
        return self.integral(self.edges[-1] ** 2)


@lru_cache(maxsize=8)
def exact_kernel(n: int, delta: float, degree: int = 40, dps: int | None = None) -> ExactTailKernel:
    """Tabulate ``g`` in multiprecision (``dps`` defaults to ``40 + 3n``)."""
    p = TailParams(n, delta)
    dps = dps or 40 + 3 * n
    edges = _rho_edges(n, delta)
    g_coefs, G_coefs, G_left = [], [], [0.0]
    worst = 0.0
    count = 0
    x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))  # Chebyshev points
    with mp.workdps(dps):
        for a, b in zip(edges[:-1], edges[1:]):
            r = 0.5 * (b - a) * (x + 1) + a
            vals = [_g_mp(p.n, p.delta, ri) for ri in r]
            count += len(vals)
            re = np.array([v.real for v in vals])
            im = np.array([v.imag for v in vals])
            worst = max(worst, float(np.max(np.abs(im)) / max(np.max(np.abs(re)), 1e-300)))
            cg = cheb.chebfit(x, re, degree)
            cG = cheb.chebint(cg, lbnd=-1) * (0.5 * (b - a))
            g_coefs.append(cg)
            G_coefs.append(cG)
            G_left.append(G_left[-1] + cheb.chebval(1.0, cG))
    return ExactTailKernel(
        n, delta, edges, g_coefs, G_coefs, np.array(G_left[:-1]), worst, count, {"dps": dps, "degree": degree}
    )


def kernel_Y_diag(
    p: TailParams, u: float, c: ContourSpec | None = None, method: str = "auto", tol: float = 1e-8
) -> float:
    """``K_n(u, u)``, the one-point density of the eigenvalues of ``Y^z``.

    ``method="contour"`` uses double-precision quadrature and raises
    ``ContourResolutionError`` when it cannot meet ``tol``; ``"exact"`` uses
    the multiprecision table; ``"auto"`` tries the contour first.
    """
    if not u > 0:
        raise ValueError("u must be > 0")
    if p.n_delta2 > 50:
        raise ValueError("n delta^2 > 50: the kernel underflows the physical scale")
    if method in ("auto", "contour"):
        try:
            return kernel_Y_contour(p, u, c, tol=tol).value
        except ContourResolutionError:
            if method == "contour":
                raise
    if method not in ("auto", "exact"):
        raise ValueError("method must be 'auto', 'contour' or 'exact'")
    return exact_kernel(p.n, p.delta).K(u)


def kernel_integral(p: TailParams, U: float, method: str = "auto", panels_per_scale: float = 0.5) -> float:
    """``int_0^U K_n(u, u) du``.

    The contour route integrates over ``r = sqrt(u)`` (where ``u K`` is
    smooth) with Gauss-Legendre panels of width about the microscopic
    scale ``1/(n sqrt(delta))``; it needs ``U < delta``.
    """
    if not U > 0:
        raise ValueError("U must be > 0")
    if method == "exact" or (method == "auto" and not U < p.delta):
        return exact_kernel(p.n, p.delta).integral(U)
    R = math.sqrt(U)
    micro = 1.0 / (p.n * math.sqrt(p.delta))
    panels = max(2, int(math.ceil(R / (panels_per_scale * micro))))
    r, w = _gl_panels(0.0, R, panels, 10)
    vals = np.array([kernel_Y_contour(p, ri * ri).value for ri in r])
    return float(np.sum(w * 2.0 * r * vals))


# -- lower tail ------------------------------------------------------------


def tail_probability_bound(p: TailParams, y) -> np.ndarray | float:
    """``y^2 (n delta^2)^{4/3} exp(-n delta^2 / 2)`` (the O(delta) correction dropped)."""
    y = np.asarray(y, dtype=float)
    out = y**2 * p.n_delta2 ** (4.0 / 3.0) * np.exp(-p.n_delta2 / 2.0)
    return float(out) if out.ndim == 0 else out


def in_tail_regime(p: TailParams, y, C: float = 1.0):
    """Whether ``y <= C / (n delta^2)``, where the bound is stated."""
    return np.asarray(y) <= C / p.n_delta2


def smallest_singular_values(
    p: TailParams, samples: int, seed: int, dist="ginibre", start: int = 0, batch: int = 256
) -> np.ndarray:
    """``lambda_1^z`` for sample indices ``start .. start + samples - 1``."""
    dist = as_distribution(dist)
    n = p.n
    out = np.empty(samples)
    z = p.z
    for k0 in range(0, samples, batch):
        m = min(batch, samples - k0)
        stack = np.empty((m, n, n), complex)
        for i in range(m):
            stack[i] = dist.draw(stream(seed, start + k0 + i), (n, n)) / math.sqrt(n)
            stack[i].flat[:: n + 1] -= z
        out[k0 : k0 + m] = np.linalg.svd(stack, compute_uv=False)[:, -1]
    return out


@dataclass
class TailReport:
    params: TailParams
    samples: int
    y: np.ndarray
    hits: np.ndarray
    mc_p: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    bound: np.ndarray
    kernel_integral: np.ndarray

    def rows(self) -> list[dict]:
        keys = ("y", "hits", "mc_p", "ci_lo", "ci_hi", "bound", "kernel_integral")
        cols = [getattr(self, k) for k in keys]
        return [dict(zip(keys, (float(c[i]) for c in cols))) for i in range(len(self.y))]


def tail_mc(
    p: TailParams,
    y_grid,
    samples: int,
    seed: int,
    dist="ginibre",
    lam: np.ndarray | None = None,
    with_kernel: bool = True,
    confidence: float = 0.95,
) -> TailReport:
    """Empirical ``P(lambda_1^z <= y delta^{3/2})`` with Wilson intervals.

    ``lam`` may carry precomputed smallest singular values.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    y = np.asarray(y_grid, dtype=float)
    if lam is None:
        lam = smallest_singular_values(p, samples, seed, dist)
    lam = np.sort(np.asarray(lam)[:samples])
    x = y * p.delta**1.5
    hits = np.searchsorted(lam, x, side="right")
    lo, hi = [], []
    for k in hits:
        ci = binomtest(int(k), samples).proportion_ci(confidence, method="wilson")
        lo.append(ci.low)
        hi.append(ci.high)
    kint = np.array([kernel_integral(p, xi * xi) if with_kernel else np.nan for xi in x])
    return TailReport(p, samples, y, hits, hits / samples, np.array(lo), np.array(hi),
                      tail_probability_bound(p, y), kint)
