from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rightmost.dyson import local_law_residual, m_matrix, scaling_regime, solve_m
from rightmost.ensembles import sample_matrix

# positive roots of v^3 + 2 eta v^2 + (eta^2 + |z|^2 - 1) v - eta, mpmath polyroots at 40 digits
V_Z05_ETA01 = 0.8327805993489360637975699
V_Z1_ETA1EM6 = 0.009999333344444691207214957
V_Z12_ETA001 = 0.02267226789422559922243260


@pytest.mark.parametrize(
    "z, eta, v",
    [(0.5, 0.1, V_Z05_ETA01), (1.0, 1e-6, V_Z1_ETA1EM6), (1.2, 0.01, V_Z12_ETA001)],
)
def test_frozen_roots(z, eta, v):
    assert solve_m(z, eta).v == pytest.approx(v, rel=1e-14)


def test_cube_root_at_unit_circle():
    p = solve_m(1.0, 1e-6)
    assert 0.99 <= p.v / 1e-6 ** (1 / 3) <= 1.0


def test_bulk_limit():
    p = solve_m(0.6, 0.0)
    assert p.v == pytest.approx(math.sqrt(1 - 0.36))
    assert p.u == 1.0
    assert solve_m(0.6, 1e-10).v == pytest.approx(0.8, rel=1e-9)


def test_exterior_limit():
    # for fixed delta > 0 and eta -> 0, v ~ eta/delta and u -> 1/|z|^2
    z = 1.5 + 0.0j
    p = solve_m(z, 1e-9)
    delta = abs(z) ** 2 - 1
    assert p.v == pytest.approx(1e-9 / delta, rel=1e-6)
    assert p.mfrak == pytest.approx(-z / abs(z) ** 2, rel=1e-6)
    assert solve_m(z, 0.0).u == pytest.approx(1 / abs(z) ** 2)


def test_errors():
    with pytest.raises(ValueError):
        solve_m(1.0, 0.0)
    with pytest.raises(ValueError):
        solve_m(0.5, -1e-3)


def test_m_matrix_structure():
    p = solve_m(0.9 + 0.3j, 0.05)
    M = m_matrix(p)
    assert M[0, 0] == M[1, 1] == 1j * p.v
    assert M[1, 0] == np.conj(M[0, 1])


@settings(max_examples=200, deadline=None)
@given(
    r=st.floats(0.0, 3.0),
    phase=st.floats(0.0, 2 * math.pi),
    log_eta=st.floats(-10.0, 1.0),
)
def test_residuals_and_positivity(r, phase, log_eta):
    z = r * complex(math.cos(phase), math.sin(phase))
    eta = 10.0**log_eta
    p = solve_m(z, eta)
    assert p.v > 0
    assert 0 < p.u <= 1
    assert p.self_consistency_residual() < 1e-12
    assert p.equation_residual() < 1e-10


@settings(max_examples=100, deadline=None)
@given(r=st.floats(0.0, 2.0).filter(lambda r: abs(r - 1) > 1e-3), log_eta=st.floats(-8.0, 0.0))
def test_scaling_law_order(r, log_eta):
    eta = 10.0**log_eta
    ratio = solve_m(r, eta).v / scaling_regime(r, eta)
    assert 1 / 20 <= ratio <= 20


def test_local_law_single_matrix():
    n = 128
    X = sample_matrix("ginibre", n, seed=4)
    probe = local_law_residual(X, 1.0, n ** -0.75)
    assert probe.psi == pytest.approx(1 / (n * n**-0.75))
    assert probe.ratio < 20
