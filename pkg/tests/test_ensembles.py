from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rightmost.ensembles import KINDS, EntryDistribution, moments_selfcheck, sample_matrix, stream


@pytest.mark.parametrize("kind", KINDS)
def test_analytic_moments(kind):
    mean, second, pseudo, fourth = EntryDistribution(kind).moments
    assert (mean, second, pseudo) == (0.0, 1.0, 0.0)
    assert fourth == (2.0 if kind == "ginibre" else 1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_selfcheck_passes(kind):
    report = moments_selfcheck(kind, 20000, seed=3)
    assert report.ok, report.rows()
    assert len(report.rows()) == 4


def test_selfcheck_needs_enough_draws():
    with pytest.raises(ValueError):
        moments_selfcheck("ginibre", 999)


def test_aliases_and_unknown():
    assert EntryDistribution("bernoulli").kind == "symmetrized-bernoulli-phase"
    with pytest.raises(ValueError):
        EntryDistribution("cauchy")


@pytest.mark.parametrize("kind", KINDS[1:])
def test_discrete_supports(kind):
    chi = EntryDistribution(kind).draw(stream(1, 0), 4000)
    assert np.allclose(np.abs(chi), 1.0)
    if kind == "symmetrized-bernoulli-phase":
        assert set(np.round(chi, 12)) <= {1, 1j, -1, -1j}
    if kind == "two-point-complex":
        assert np.allclose(np.abs(chi.real), np.sqrt(0.5))
        assert np.allclose(np.abs(chi.imag), np.sqrt(0.5))


def test_scaling_and_shape():
    X = sample_matrix("symmetrized-bernoulli-phase", 16, seed=5)
    assert X.shape == (16, 16)
    assert np.allclose(np.abs(X), 0.25)


def test_rejects_empty_dimension():
    with pytest.raises(ValueError):
        sample_matrix("ginibre", 0, seed=0)


def test_sample_is_pure_function_of_index():
    a = sample_matrix("ginibre", 8, seed=11, index=7)
    b = sample_matrix("ginibre", 8, seed=11, index=7)
    c = sample_matrix("ginibre", 8, seed=11, index=8)
    d = sample_matrix("ginibre", 8, seed=11, index=7, channel=1)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63), index=st.integers(0, 10**6))
def test_frobenius_norm_of_unimodular_entries(seed, index):
    X = sample_matrix("uniform-on-circle", 6, seed, index)
    assert np.linalg.norm(X) ** 2 == pytest.approx(6.0)
