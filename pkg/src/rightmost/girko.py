"""Smooth edge cutoffs and both sides of Girko's Hermitization identity.

    sum_i f(sigma_i) = -(1/4 pi) int Laplacian f(z) int_0^T Im Tr G^z(i eta) d eta d^2z
                       + (1/4 pi) int Laplacian f(z) log|det(H^z - i T)| d^2z

The eta-integrals are exact antiderivative sums over the singular values of
``X - z``; only the ``d^2z`` integral is done by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rightmost.edge_stats import GammaNonpositive, gamma_n
from rightmost.spectral import SingularSpectrum, Spectrum


# quintic smoothstep S(t) = 6t^5 - 15t^4 + 10t^3 on [0, 1]
def _step(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _step_d1(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30.0 * t * t * (t - 1.0) ** 2, 0.0)


def _step_d2(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60.0 * t * (t - 1.0) * (2.0 * t - 1.0), 0.0)


# int_0^1 |S''| = 2 max S' = 2 * 15/8
STEP_D2_L1 = 3.75


@dataclass(frozen=True)
class Profile1D:
    """1 on ``[lo, hi]``, 0 outside ``[lo - band, hi + band]``, quintic in between."""

    lo: float
    hi: float
    band: float

    def _t(self, x):
        x = np.asarray(x, dtype=float)
        d = np.maximum(self.lo - x, x - self.hi)  # distance outside plateau (<=0 inside)
        return 1.0 - d / self.band, np.where(self.lo - x > x - self.hi, -1.0, 1.0)

    def value(self, x):
        t, _ = self._t(x)
        return _step(t)

    def d1(self, x):
        t, side = self._t(x)
        return -side * _step_d1(t) / self.band

    def d2(self, x):
        t, _ = self._t(x)
        return _step_d2(t) / self.band**2

    @property
    def support(self) -> tuple[float, float]:
        return self.lo - self.band, self.hi + self.band

    def breakpoints(self) -> list[float]:
        a, b = self.support
        return [a, self.lo, self.hi, b]

    def l1_d2(self) -> float:
        return 2.0 * STEP_D2_L1 / self.band

    def l1(self) -> float:
        return (self.hi - self.lo) + self.band


@dataclass(frozen=True)
class CutoffFunction:
    """Product cutoff ``f(x + iy) = g(x) h(y)`` with exact derivatives.

    ``kind="lower"`` is the inner regularisation of an Omega_1-type box
    (plateau ``|x - L| <= 4l/5``, support ``|x - L| <= l``, same ratios in y).
    ``kind="upper"`` covers an Omega_2-type box ``[x_lo, x_hi] x [-h, h]``
    with support enlarged by ``l/5`` and ``h/5``.
    """

    g: Profile1D
    h_prof: Profile1D
    kind: str
    L: float
    l: float
    h: float
    params: dict = field(default_factory=dict)

    def __call__(self, z):
        z = np.asarray(z)
        return self.g.value(z.real) * self.h_prof.value(z.imag)

    value = __call__

    def gradient(self, z):
        z = np.asarray(z)
        x, y = z.real, z.imag
        return (
            self.g.d1(x) * self.h_prof.value(y),
            self.g.value(x) * self.h_prof.d1(y),
        )

    def laplacian(self, z):
        z = np.asarray(z)
        x, y = z.real, z.imag
        return self.g.d2(x) * self.h_prof.value(y) + self.g.value(x) * self.h_prof.d2(y)

    @property
    def support(self) -> tuple[float, float, float, float]:
        return self.g.support + self.h_prof.support

    def second_derivative_l1(self) -> tuple[float, float]:
        """Exact ``(||g''||_1, ||h''||_1)``."""
        return self.g.l1_d2(), self.h_prof.l1_d2()

    def laplacian_l1_bound(self) -> float:
        """``||g''||_1 ||h||_1 + ||g||_1 ||h''||_1 >= ||Laplacian f||_1``."""
        return self.g.l1_d2() * self.h_prof.l1() + self.g.l1() * self.h_prof.l1_d2()


def omega_parameters(n: int, C_n: float, tau: float) -> tuple[float, float, float]:
    """``(L, l_n, h_n)`` of the edge boxes; needs ``gamma_n > 0``."""
    g = gamma_n(n)
    if g <= 0:
        raise GammaNonpositive(f"gamma_nonpositive: gamma_n({n}) = {g:.4f}")
    L = 1.0 + math.sqrt(g / (4.0 * n))
    l = C_n / math.sqrt(4.0 * n * g)
    h = n ** (-0.25 + tau / 2.0)
    return L, l, h


def build_cutoff(
    kind: str = "lower",
    n: int | None = None,
    C_n: float = 1.0,
    tau: float = 0.05,
    L: float | None = None,
    l: float | None = None,
    h: float | None = None,
    x_hi: float | None = None,
) -> CutoffFunction:
    """Build ``f_1^-`` (``kind="lower"``) or ``f_2^+`` (``kind="upper"``).

    Explicit ``L, l, h`` override the geometry, which is the only option
    at desk-scale ``n`` where ``gamma_n <= 0``.
    """
    if kind not in ("lower", "upper"):
        raise ValueError("kind must be 'lower' or 'upper'")
    override = L is not None and l is not None and h is not None
    if not override:
        if n is None:
            raise ValueError("need n (or an explicit L, l, h override)")
        L, l, h = omega_parameters(n, C_n, tau)
    if l <= 0 or h <= 0:
        raise ValueError("l and h must be positive")
    params = {"n": n, "C_n": C_n, "tau": tau, "override": override}
    if kind == "lower":
        g = Profile1D(L - 0.8 * l, L + 0.8 * l, 0.2 * l)
        hp = Profile1D(-0.8 * h, 0.8 * h, 0.2 * h)
    else:
        if x_hi is None:
            if n is None:
                raise ValueError("upper cutoff needs x_hi or n")
            x_hi = 1.0 + n**tau / math.sqrt(n)
        if x_hi <= L + l:
            raise ValueError("empty Omega_2 box: x_hi <= L + l")
        g = Profile1D(L + l, x_hi, 0.2 * l)
        hp = Profile1D(-h, h, 0.2 * h)
        params["x_hi"] = x_hi
    return CutoffFunction(g, hp, kind, float(L), float(l), float(h), params)


def laplacian(f: CutoffFunction, z) -> np.ndarray:
    """``Laplacian f = g'' h + g h''`` (closed form)."""
    return f.laplacian(z)


# -- eta integrals -------------------------------------------------------


def eta_integral_exact(S: SingularSpectrum, eta_a: float, eta_b: float) -> float:
    """``int_{eta_a}^{eta_b} Im Tr G^z(i eta) d eta = sum_i log((s_i^2 + b^2)/(s_i^2 + a^2))``."""
    if not 0 <= eta_a < eta_b:
        raise ValueError("need 0 <= eta_a < eta_b")
    s2 = S.values**2
    if eta_a == 0 and np.any(s2 == 0):
        raise ZeroDivisionError("resolvent_divergent: zero singular value with eta_a = 0")
    return float(np.sum(np.log1p((eta_b**2 - eta_a**2) / (s2 + eta_a**2))))


def logdet_term(S: SingularSpectrum, T: float) -> float:
    """``log|det(H^z - iT)| = sum_i log(s_i^2 + T^2)``."""
    return float(np.sum(np.log(S.values**2 + T**2)))


def girko_lhs(spec: Spectrum | np.ndarray, f: CutoffFunction) -> float:
    vals = spec.values if isinstance(spec, Spectrum) else np.asarray(spec)
    return float(np.sum(f(vals)))


# -- quadrature ----------------------------------------------------------


@dataclass
class QuadratureGrid:
    """Flat quadrature rule ``sum_k w_k F(z_k)`` over a box.

    Regular panels are tensor Gauss-Legendre.  A panel containing a declared
    log-singularity of the integrand is split at that point and each of the
    resulting corner rectangles is integrated in Duffy coordinates, which
    absorbs the ``log|z - p|`` singularity.
    """

    z: np.ndarray
    w: np.ndarray
    level: int
    box: tuple[float, float, float, float]
    singular_panels: int = 0

    @property
    def size(self) -> int:
        return len(self.z)

    def covers(self, f: CutoffFunction) -> bool:
        x0, x1, y0, y1 = f.support
        bx0, bx1, by0, by1 = self.box
        eps = 1e-12
        return bx0 <= x0 + eps and x1 <= bx1 + eps and by0 <= y0 + eps and y1 <= by1 + eps


def _panel_edges(breaks: list[float], band: float, level: int) -> np.ndarray:
    edges = [breaks[0]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        k = max(1, int(math.ceil((b - a) / band - 1e-9))) * 2**level
        edges.extend(np.linspace(a, b, k + 1)[1:])
    return np.asarray(edges)


def _tensor_rule(x0, x1, y0, y1, t, w):
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    xs = 0.5 * (x0 + x1) + hx * t
    ys = 0.5 * (y0 + y1) + hy * t
    Z = xs[:, None] + 1j * ys[None, :]
    W = np.outer(hx * w, hy * w)
    return Z.ravel(), W.ravel()


def _duffy_triangle(p: complex, a: complex, b: complex, t, w):
    """Rule on triangle (p, a, b) with the collapsed vertex at ``p``."""
    s = 0.5 * (t + 1.0)
    ws = 0.5 * w
    area2 = abs(((a - p).conjugate() * (b - p)).imag)
    if area2 == 0.0:
        return np.empty(0, complex), np.empty(0)
    S, U = np.meshgrid(s, s, indexing="ij")
    Z = p + S * ((a - p) + U * (b - a))
    W = np.outer(ws, ws) * S * area2
    return Z.ravel(), W.ravel()


def _singular_rule(x0, x1, y0, y1, p: complex, t, w):
    zs, ws = [], []
    corners = [
        (x0, y0, p.real, p.imag),
        (p.real, y0, x1, p.imag),
        (x0, p.imag, p.real, y1),
        (p.real, p.imag, x1, y1),
    ]
    for a0, b0, a1, b1 in corners:
        if a1 - a0 <= 0 or b1 - b0 <= 0:
            continue
        v = [complex(a0, b0), complex(a1, b0), complex(a1, b1), complex(a0, b1)]
        # rectangle = two triangles meeting at the corner opposite p, fanned from p
        others = [q for q in v if abs(q - p) > 0]
        far = max(others, key=lambda q: abs(q - p))
        for q in others:
            if q is far:
                continue
            z, wt = _duffy_triangle(p, q, far, t, w)
            zs.append(z)
            ws.append(wt)
    return np.concatenate(zs), np.concatenate(ws)


def _graded_rule(x0, x1, y0, y1, pts, t, w, depth, out):
    """Quadtree refinement toward singular points, Duffy in the finest cell."""
    size = max(x1 - x0, y1 - y0)
    dx = np.maximum(np.maximum(x0 - pts.real, pts.real - x1), 0.0)
    dy = np.maximum(np.maximum(y0 - pts.imag, pts.imag - y1), 0.0)
    near = pts[np.hypot(dx, dy) < size]
    if near.size == 0:
        out.append(_tensor_rule(x0, x1, y0, y1, t, w))
        return 0
    if depth == 0:
        mask = (near.real >= x0) & (near.real <= x1) & (near.imag >= y0) & (near.imag <= y1)
        if mask.any():
            out.append(_singular_rule(x0, x1, y0, y1, complex(near[mask][0]), t, w))
            return 1
        out.append(_tensor_rule(x0, x1, y0, y1, t, w))
        return 0
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    count = 0
    for a0, a1 in ((x0, xm), (xm, x1)):
        for b0, b1 in ((y0, ym), (ym, y1)):
            count += _graded_rule(a0, a1, b0, b1, near, t, w, depth - 1, out)
    return count


def make_grid(
    f: CutoffFunction,
    level: int = 0,
    order: int = 8,
    singular_points=None,
    grading_depth: int = 10,
) -> QuadratureGrid:
    """Grid at refinement ``level``: each band is split into ``2**level`` panels
    of ``order x order`` Gauss-Legendre nodes.

    ``singular_points`` (e.g. eigenvalues of the matrix) mark where
    ``log|det(X - z)|`` is log-singular.  Panels closer to such a point than
    their own size are split recursively (up to ``grading_depth`` times), and
    the finest cell holding the point gets a Duffy rule.  Without them the
    rule still converges, but only algebraically when a point lies in a band.
    """
    if order < 8:
        raise ValueError("need at least 8 nodes per transition band")
    t, w = np.polynomial.legendre.leggauss(order)
    xe = _panel_edges(f.g.breakpoints(), f.g.band, level)
    ye = _panel_edges(f.h_prof.breakpoints(), f.h_prof.band, level)
    pts = np.asarray([] if singular_points is None else singular_points, dtype=complex).ravel()
    out: list = []
    marked = 0
    for i in range(len(xe) - 1):
        for j in range(len(ye) - 1):
            marked += _graded_rule(xe[i], xe[i + 1], ye[j], ye[j + 1], pts, t, w, grading_depth, out)
    z = np.concatenate([o[0] for o in out])
    wt = np.concatenate([o[1] for o in out])
    return QuadratureGrid(z, wt, level, f.support, singular_panels=marked)


def integrate(grid: QuadratureGrid, F) -> float:
    """``sum_k w_k F(z_k)`` with a pairwise tree reduction."""
    return _tree_sum(grid.w * F(grid.z))


@dataclass
class GirkoSplit:
    eta0: float
    T: float
    I_small: float
    I_large: float
    logdet_term: float
    nodes: int = 0
    lnabs_total: float = float("nan")

    @property
    def total(self) -> float:
        return self.I_small + self.I_large + self.logdet_term


def _singular_values_at(X: np.ndarray, zs: np.ndarray, batch: int = 2048) -> np.ndarray:
    n = X.shape[0]
    eye = np.eye(n)
    out = np.empty((len(zs), n))
    for k in range(0, len(zs), batch):
        chunk = zs[k : k + batch]
        out[k : k + batch] = np.linalg.svd(X[None] - chunk[:, None, None] * eye, compute_uv=False)
    return out


def _tree_sum(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])


def girko_rhs(
    X: np.ndarray,
    f: CutoffFunction,
    eta0: float,
    T: float = 1e6,
    grid: QuadratureGrid | None = None,
) -> GirkoSplit:
    """Right-hand side of Girko's formula split at ``eta0``.

    ``I_small = -(1/4pi) int Lf * int_0^eta0``, ``I_large`` the same on
    ``[eta0, T]``, and ``logdet_term = (1/4pi) int Lf * log|det(H - iT)|``.
    ``lnabs_total`` is the recombined ``(1/2pi) int Lf sum_i log s_i``.
    """
    if not 0 < eta0 < T:
        raise ValueError("need 0 < eta0 < T")
    grid = grid or make_grid(f)
    if not grid.covers(f):
        raise ValueError("quadrature grid does not cover the support of the Laplacian")
    X = np.asarray(X, dtype=complex)
    lap = f.laplacian(grid.z)
    mask = lap != 0
    zs = grid.z[mask]
    wl = grid.w[mask] * lap[mask]
    s2 = _singular_values_at(X, zs) ** 2
    small = np.sum(np.log1p(eta0**2 / s2), axis=1)  # int_0^eta0
    large = np.sum(np.log1p((T**2 - eta0**2) / (s2 + eta0**2)), axis=1)
    logdet = np.sum(np.log(s2 + T**2), axis=1)
    lnabs = 0.5 * np.sum(np.log(s2), axis=1)
    c = 1.0 / (4.0 * math.pi)
    return GirkoSplit(
        eta0=eta0,
        T=T,
        I_small=-c * _tree_sum(wl * small),
        I_large=-c * _tree_sum(wl * large),
        logdet_term=c * _tree_sum(wl * logdet),
        nodes=int(mask.sum()),
        lnabs_total=_tree_sum(wl * lnabs) / (2.0 * math.pi),
    )


def default_eta0(n: int, tau: float = 0.05) -> float:
    return n ** (-7.0 / 8.0 - tau)
