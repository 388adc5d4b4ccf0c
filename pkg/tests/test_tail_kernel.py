from __future__ import annotations

import math

import numpy as np
import pytest

from rightmost.ensembles import sample_matrix
from rightmost.tail_kernel import (
    ContourResolutionError,
    ContourSpec,
    TailParams,
    exact_kernel,
    in_tail_regime,
    kernel_integral,
    kernel_Y_contour,
    kernel_Y_diag,
    phase_f,
    phase_f_prime,
    smallest_singular_values,
    tail_mc,
    tail_probability_bound,
)

P50 = TailParams(50, 0.3)
REFERENCE_K = {1e-4: 4.10198159584538, 1e-3: 6.85733391120503, 0.01: 35.2438937899728, 0.1: 24.1595997492573}


@pytest.fixture(scope="module")
def table50():
    return exact_kernel(50, 0.3)


def test_params_validation():
    with pytest.raises(ValueError):
        TailParams(10, 0.0)
    p = TailParams(100, 0.2)
    assert p.n_delta2 == pytest.approx(4.0)
    assert p.z == pytest.approx(math.sqrt(1.2))
    with pytest.raises(ValueError):
        ContourSpec(t_max=-1.0)


def test_phase_function():
    d = 0.3
    assert phase_f(0, d) == pytest.approx(math.log(1.3))
    assert abs(phase_f_prime(math.sqrt(d), d)) < 1e-12
    assert phase_f_prime(0, d) == 0
    t = np.linspace(0, 5, 400)
    assert np.all(np.diff(np.real(phase_f(math.sqrt(d) + t * (1 + 1j), d))) > 0)
    s = np.linspace(0, 5, 400)
    assert np.all(np.diff(np.real(phase_f(1j * s, d))) < 0)


@pytest.mark.parametrize("u", sorted(REFERENCE_K))
def test_contour_matches_reference(u):
    r = kernel_Y_contour(P50, u)
    assert r.value == pytest.approx(REFERENCE_K[u], rel=1e-9)
    assert r.imag_residue < 1e-8


def test_exact_table_matches_reference(table50):
    for u, ref in REFERENCE_K.items():
        assert table50.K(u) == pytest.approx(ref, rel=1e-9)
    assert table50.K(0.5) == pytest.approx(14.98595401, rel=1e-8)
    assert table50.K(1.0) == pytest.approx(11.49631561, rel=1e-8)
    assert table50.K(2.0) == pytest.approx(8.350316542, rel=1e-8)
    assert table50.integral(4.0) == pytest.approx(39.5531204987, rel=1e-9)
    assert table50.imag_residue < 1e-8


def test_normalization(table50):
    assert table50.total_mass == pytest.approx(50, rel=1e-6)


def test_truncation_doubling():
    for u in (1e-3, 0.05):
        base = kernel_Y_contour(P50, u)
        spec = ContourSpec().doubled(base.t_max, base.s_max)
        assert kernel_Y_contour(P50, u, spec).value == pytest.approx(base.value, rel=1e-6)


def test_contour_refuses_bulk_and_auto_falls_back(table50):
    with pytest.raises(ContourResolutionError):
        kernel_Y_contour(P50, 1.0, contour="rays")
    assert kernel_Y_diag(P50, 1.0) == pytest.approx(table50.K(1.0), rel=1e-8)
    with pytest.raises(ValueError):
        kernel_Y_diag(TailParams(1000, 0.3), 0.01)
    with pytest.raises(ValueError):
        kernel_Y_diag(P50, 0.0)


def test_contour_integral_matches_table(table50):
    U = 0.02
    assert kernel_integral(P50, U) == pytest.approx(table50.integral(U), rel=1e-8)


def test_small_near_origin_at_fixed_n_delta2():
    # the ratio to the bulk peak is 0.144, 0.128, 0.117 at n = 25, 50, 100 and decreasing
    def ratio(n):
        p = TailParams(n, math.sqrt(4 / n))
        k = exact_kernel(p.n, p.delta)
        u = np.geomspace(1e-5, k.edges[-1] ** 2, 800)
        return kernel_Y_diag(p, 0.1 * p.gap_scale) / k.K(u).max()

    r25, r50 = ratio(25), ratio(50)
    assert r50 < r25 < 0.15


def test_scaling_collapse():
    # K * gap_scale as a function of u / gap_scale at fixed n delta^2 = 4; the
    # residual drift is O(delta) and shrinks as delta decreases
    x = np.array([0.01, 0.1, 1.0, 5.0])

    def scaled(n):
        p = TailParams(n, math.sqrt(4 / n))
        s = p.gap_scale
        return np.array([kernel_Y_contour(p, xi * s).value * s for xi in x])

    k100, k200, k400 = scaled(100), scaled(200), scaled(400)
    assert np.all(np.abs(k200 / k100 - 1) < 0.10)
    assert np.all(np.abs(k400 / k200 - 1) < 0.10)
    assert np.all(np.abs(k400 / k200 - 1) < np.abs(k200 / k100 - 1))


def test_histogram_matches_kernel(table50):
    samples = 20_000
    z = P50.z
    edges = np.array([0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 2.0, 3.0])
    counts = np.zeros((samples, len(edges) - 1))
    for k0 in range(0, samples, 500):
        stack = np.stack([sample_matrix("ginibre", 50, 11, i) for i in range(k0, k0 + 500)])
        stack -= z * np.eye(50)
        u = np.linalg.svd(stack, compute_uv=False) ** 2
        for j in range(500):
            counts[k0 + j] = np.histogram(u[j], edges)[0]
    mean = counts.mean(0)
    se = counts.std(0, ddof=1) / math.sqrt(samples)
    expect = np.diff([0.0] + [table50.integral(e) for e in edges[1:]])
    assert np.all(np.abs(mean - expect) <= 3 * se + 1e-12)


def test_tail_bound_examples():
    p = TailParams(100, 0.2)
    assert tail_probability_bound(p, 0.5) == pytest.approx(0.21483137097821322, rel=1e-14)
    assert tail_probability_bound(p, 0.0) == 0.0
    assert tail_probability_bound(p, 0.6) / tail_probability_bound(p, 0.3) == pytest.approx(4.0)
    assert list(in_tail_regime(p, [0.1, 0.3])) == [True, False]


def test_tail_mc_small_run():
    p = TailParams(30, 0.3)
    lam = smallest_singular_values(p, 400, seed=5)
    assert np.array_equal(lam[:100], smallest_singular_values(p, 100, seed=5))
    rep = tail_mc(p, [0.5, 1.0, 2.0, 4.0], 400, seed=5, lam=lam, with_kernel=False)
    assert np.all(np.diff(rep.mc_p) >= 0)
    assert np.all((rep.ci_lo <= rep.mc_p) & (rep.mc_p <= rep.ci_hi))
    assert len(rep.rows()) == 4
