from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaincc

from rightmost.ginibre_kernel import (
    erf_sinh_reference,
    expected_count,
    gram_spectrum,
    kernel_diag,
    kernel_diag_direct,
    kernel_offdiag,
    orthonormal_functions,
    tail_count_bound,
    variance_count,
)

cplx = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


def test_frozen_values():
    assert gammaincc(100, 100.0) == pytest.approx(0.48670120172085134, rel=1e-13)
    assert kernel_diag(10, 0.5 + 0.5j) == pytest.approx(3.0817870088520145, rel=1e-13)
    assert kernel_offdiag(7, 0.3 + 0.2j, -0.1 + 0.4j) == pytest.approx(
        0.61649407137117846 - 0.91878798808992662j, rel=1e-13
    )
    assert kernel_diag(5, 0) == pytest.approx(5 / math.pi)


@pytest.mark.parametrize("n", [1, 7, 100, 1500])
def test_diag_routes_agree(n):
    for z in [0.0, 0.3 + 0.4j, 0.99, 1.0 + 0.05j, 1.2j]:
        assert kernel_diag(n, z) == pytest.approx(kernel_diag_direct(n, z), rel=1e-12 + 1e-14 * n, abs=1e-300)
        assert kernel_offdiag(n, z, z).real == pytest.approx(kernel_diag(n, z), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("n", [1, 10, 100, 10_000])
def test_whole_plane_mass(n):
    assert expected_count(n).value == pytest.approx(n, rel=1e-12)


def test_half_plane_and_box_additivity():
    n = 100
    half = expected_count(n, (0.0, math.inf, -math.inf, math.inf))
    assert half.value == pytest.approx(50.0, rel=1e-10)
    a = expected_count(n, (1.0, 1.1, -0.3, 0.3)).value
    b = expected_count(n, (1.1, 1.2, -0.3, 0.3)).value
    assert a + b == pytest.approx(expected_count(n, (1.0, 1.2, -0.3, 0.3)).value, rel=1e-12)


def test_edge_box_reference_values():
    n, box = 100, (1.0, 1.2, -0.3, 0.3)
    assert expected_count(n, box).value == pytest.approx(0.262572, rel=1e-5)
    var = variance_count(n, box)
    assert var.value == pytest.approx(0.220248, rel=1e-5)
    assert 0.0 <= var.value <= expected_count(n, box).value


@settings(max_examples=60, deadline=None)
@given(z=cplx, w=cplx)
def test_hermitian_and_cauchy_schwarz(z, w):
    n = 12
    kzw, kwz = kernel_offdiag(n, z, w), kernel_offdiag(n, w, z)
    assert kzw == pytest.approx(np.conj(kwz), rel=1e-12, abs=1e-300)
    assert abs(kzw) ** 2 <= kernel_diag(n, z) * kernel_diag(n, w) * (1 + 1e-10) + 1e-300


def test_orthonormal_functions_reproduce_kernel():
    n = 9
    z = np.array([0.2 + 0.1j, -0.7j, 1.1])
    Phi = orthonormal_functions(n, z)
    K = Phi @ Phi.conj().T
    for i in range(3):
        for j in range(3):
            assert K[i, j] == pytest.approx(kernel_offdiag(n, z[i], z[j]), rel=1e-12)


def test_variance_of_constant_weight_vanishes_over_the_plane():
    n = 20
    big = (-3.0, 3.0, -3.0, 3.0)
    assert abs(variance_count(n, big).value) < 1e-9


def test_smooth_test_function_variance_nonnegative():
    n = 50
    f = lambda z: np.exp(-4 * np.abs(z - 1) ** 2)
    assert variance_count(n, (0.5, 1.5, -0.5, 0.5), f=f).value >= 0


def test_gram_spectrum_in_unit_interval():
    ev = gram_spectrum(100, (1.0, 1.2, -0.3, 0.3))
    assert ev.min() >= -1e-12 and ev.max() <= 1 + 1e-12
    assert ev.sum() == pytest.approx(0.262572, rel=1e-5)


def test_guards():
    with pytest.raises(ValueError):
        kernel_diag(0, 0.1)
    with pytest.raises(ValueError):
        kernel_offdiag(2001, 0.1, 0.1)
    with pytest.raises(ValueError):
        variance_count(501, (0, 1, 0, 1))
    with pytest.raises(ValueError):
        expected_count(10, (1.0, 0.0, 0.0, 1.0))


def test_reference_curves():
    assert erf_sinh_reference(3.0, 1.0) == pytest.approx(2.3503504657307211, rel=1e-14)
    t = np.array([0.0, 4.0, 8.0])
    assert np.all(np.diff(tail_count_bound(t)) < 0)
    assert tail_count_bound(4.0) == pytest.approx(math.exp(-1))
