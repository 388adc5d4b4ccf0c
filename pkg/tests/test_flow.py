from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rightmost.edge_stats import mc_edge_ensemble
from rightmost.ensembles import sample_matrix
from rightmost.flow import (
    FlowState,
    classify_stability,
    coupled_pair,
    drift_probe,
    growth_rate,
    interpolate,
    lemma_scale,
    observable_trajectory,
    observed_growth,
    propagate,
)
from rightmost.spectral import avg_trace_G, eigvals, shifted_singulars


def test_interpolation_endpoints():
    X0, G = coupled_pair("bernoulli", 16, seed=1, index=0)
    assert np.array_equal(interpolate(X0, G, 0.0), X0)
    assert np.max(np.abs(interpolate(X0, G, 50.0) - G)) < 1e-10
    assert np.array_equal(FlowState(0.3, X0, G).Xt, interpolate(X0, G, 0.3))
    with pytest.raises(ValueError):
        interpolate(X0, G, -1.0)


def test_variance_preserved_along_flow():
    n, m = 16, 200
    norms = np.array([[np.sum(np.abs(interpolate(*coupled_pair("bernoulli", n, 3, i), t)) ** 2)
                       for t in (0.0, 0.5, 2.0)] for i in range(m)])
    # E ||X_t||_F^2 = n at every t
    se = norms.std(0, ddof=1) / math.sqrt(m)
    assert np.all(np.abs(norms.mean(0) - n) <= 4 * se + 1e-12)


def test_flow_endpoint_laws():
    X0, G = coupled_pair("bernoulli", 64, seed=2, index=0)
    late = interpolate(X0, G, 30.0).real.ravel()
    ref = sample_matrix("ginibre", 64, seed=3).real.ravel()
    assert stats.ks_2samp(late, ref).pvalue > 0.01
    assert set(np.round(np.abs(interpolate(X0, G, 0.0)) * 8, 12).ravel()) == {1.0}


def test_trajectory_singleton_matches_direct():
    X0, G = coupled_pair("ginibre", 32, 4, 0)
    eta = 0.05
    val = observable_trajectory(X0, G, [0.0], 1.0, eta)
    assert val[0] == pytest.approx(avg_trace_G(shifted_singulars(X0, 1.0), eta).imag, rel=1e-14)


def test_drift_probe_scale_and_halving_consistency():
    n = 64
    a = drift_probe("bernoulli", n, 40, seed=5, t_grid=[0.0, 0.5, 1.0])
    assert a.ratio <= 20
    assert a.scale == pytest.approx(lemma_scale(n, n**-0.75))
    half = drift_probe("bernoulli", n, 40, seed=5, t1=0.5, t_grid=[0.0, 0.5, 1.0])
    assert abs(a.drift - half.drift) <= 3 * math.hypot(a.drift_se, half.drift_se)
    with pytest.raises(ValueError):
        drift_probe("ginibre", n, 1, seed=0)


def test_bernoulli_reaches_ginibre_observable():
    n, pairs, eta = 48, 100, 48**-0.75
    b = np.array([observable_trajectory(*coupled_pair("bernoulli", n, 6, i), [8.0], 1.0, eta)[0] for i in range(pairs)])
    g = np.array([observable_trajectory(*coupled_pair("ginibre", n, 7, i), [0.0], 1.0, eta)[0] for i in range(pairs)])
    se = math.hypot(b.std(ddof=1), g.std(ddof=1)) / math.sqrt(pairs)
    assert abs(b.mean() - g.mean()) <= 3 * se


def test_growth_rate():
    assert growth_rate(1.0, 1.0) == 0.0
    assert growth_rate(0.0, 5.0) == -1.0
    assert growth_rate(2.0, 0.7) - growth_rate(1.0, 0.7) == pytest.approx(0.7)


def test_classify_examples():
    v = classify_stability(0.5, 64, [1.0, 1.2, 1.5])
    assert v.verdict == "decay" and v.decay_fraction == 1.0 and v.band_source == "empirical"
    v = classify_stability(2.0, 64, [1.0, 1.1])
    assert v.verdict == "blowup" and set(v.labels) == {"blowup"}
    v = classify_stability(1.0, 10**10, [1.0])
    assert v.band_source == "asymptotic" and v.band[0] < 1.0
    with pytest.raises(ValueError):
        classify_stability(1.0, 64, [])


def test_classify_at_empirical_median():
    m = np.array([r.max_re for r in mc_edge_ensemble("ginibre", 64, 1000, seed=11)])
    g = float(np.median(1.0 / m))
    v = classify_stability(g, 64, m)
    assert abs(v.decay_fraction - 0.5) <= 0.05
    assert v.verdict == "critical-band"


@settings(max_examples=30, deadline=None)
@given(g=st.floats(-3, 3), t=st.floats(0, 5))
def test_propagate_trivial_cases(g, t):
    u0 = np.array([1.0, -2.0, 0.5j])
    assert np.allclose(propagate(np.zeros((3, 3)), g, u0, t), math.exp(-t) * u0, rtol=1e-12)
    lam = np.array([0.2, -1.0, 0.5 + 0.5j])
    exact = np.exp((-1 + g * lam) * t) * u0
    assert np.allclose(propagate(np.diag(lam), g, u0, t), exact, rtol=1e-10, atol=1e-14)


def test_propagate_methods_agree_and_growth_matches():
    rng = np.random.default_rng(0)
    for i in range(5):
        X = sample_matrix("ginibre", 32, 20, i)
        mr = eigvals(X).values.real.max()
        g = float(rng.uniform(0.5, 1.5))
        rate = float(growth_rate(g, mr))
        u0 = np.ones(32, complex)
        T = max(40.0, 50.0 / abs(rate))
        a = propagate(X, g, u0, 10.0)
        assert np.allclose(a, propagate(X, g, u0, 10.0, method="eigen"), rtol=1e-8)
        assert observed_growth(X, g, u0, T, method="eigen") == pytest.approx(rate, abs=1e-2)
    with pytest.raises(ValueError):
        propagate(np.eye(2), 1.0, np.ones(2), 1.0, method="rk")
