import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from farmakit.exceptions import BasisMismatchError, RankDeficientError
from farmakit.fnspace import (
    BasisSpec,
    FunctionSample,
    FunctionSeries,
    evaluate,
    fourier_design,
    gram_matrix,
    inner_product,
    minute_grid,
    norm,
    smooth_series,
    smooth_to_basis,
)

B11 = BasisSpec(11)
coeff_vectors = arrays(np.float64, 11, elements=st.floats(-1e3, 1e3, allow_nan=False))


def e(k, basis=B11):
    v = np.zeros(basis.size)
    v[k] = 1.0
    return FunctionSample(v, basis)


def test_gram_is_identity():
    for K in (1, 2, 11, 31, 60):
        assert np.abs(gram_matrix(K) - np.eye(K)).max() < 1e-12


def test_basis_ordering_constant_first():
    t = np.array([0.1, 0.3])
    B = fourier_design(t, 5)
    assert np.allclose(B[:, 0], 1.0)
    assert np.allclose(B[:, 1], np.sqrt(2) * np.sin(2 * np.pi * t))
    assert np.allclose(B[:, 2], np.sqrt(2) * np.cos(2 * np.pi * t))
    assert np.allclose(B[:, 3], np.sqrt(2) * np.sin(4 * np.pi * t))


def test_default_basis():
    b = BasisSpec()
    assert b.K == 31 and b.grid.size == 1440
    assert b.grid[0] == 0.0 and b.grid[-1] == 1439 / 1440


def test_inner_product_unit_vectors():
    assert inner_product(e(0), e(0)) == 1.0
    assert inner_product(e(1), e(2)) == 0.0


def test_inner_product_one_and_t_against_quadrature():
    one = smooth_to_basis(np.ones(1440), B11)
    tt = smooth_to_basis(B11.grid, B11)
    grid = np.linspace(0, 1, 10_000)
    oracle = np.trapezoid(grid, grid) if hasattr(np, "trapezoid") else np.trapz(grid, grid)
    assert abs(inner_product(one, tt) - oracle) < 1e-3


def test_basis_mismatch():
    with pytest.raises(BasisMismatchError):
        inner_product(e(0), e(0, BasisSpec(11, minute_grid(720))))
    with pytest.raises(BasisMismatchError):
        e(0) + FunctionSample(np.zeros(5), BasisSpec(5))


def test_smooth_constant():
    f = smooth_to_basis(np.full(1440, 5.0), B11)
    assert np.allclose(f.coeffs, np.r_[5.0, np.zeros(10)], atol=1e-12)


def test_smooth_recovers_sine():
    f = smooth_to_basis(np.sqrt(2) * np.sin(2 * np.pi * B11.grid), B11)
    assert np.abs(f.coeffs - e(1).coeffs).max() < 1e-6


def test_smooth_matches_normal_equations(rng):
    t = B11.grid
    raw = 3 * np.sin(2 * np.pi * t) + 0.5 * np.cos(6 * np.pi * t) + 0.3 * rng.standard_normal(t.size)
    f = smooth_to_basis(raw, B11)
    # dense normal-equations oracle, built from scratch
    X = np.column_stack(
        [np.ones_like(t)]
        + [np.sqrt(2) * fn(2 * np.pi * k * t) for k in range(1, 6) for fn in (np.sin, np.cos)]
    )
    oracle = np.linalg.solve(X.T @ X, X.T @ raw)
    assert np.abs(f.coeffs - oracle).max() < 1e-9
    # residual orthogonal to the design columns
    resid = raw - B11.design() @ f.coeffs
    assert np.abs(B11.design().T @ resid).max() < 1e-9


def test_smooth_rank_deficient_names_sizes():
    coarse = BasisSpec(11, minute_grid(8))
    with pytest.raises(RankDeficientError, match="K=11.*8 points"):
        smooth_to_basis(np.zeros(8), coarse)


def test_smooth_rejects_missing():
    raw = np.zeros(1440)
    raw[3] = np.nan
    with pytest.raises(ValueError, match="interpolate"):
        smooth_to_basis(raw, B11)


def test_evaluate_examples(rng):
    assert evaluate(e(0), 0.42) == 1.0
    assert evaluate(e(1), 0.0) == 0.0
    c = rng.standard_normal(11)
    t = 0.37
    naive = c[0]
    for k in range(1, 6):
        naive += c[2 * k - 1] * np.sqrt(2) * np.sin(2 * np.pi * k * t)
        naive += c[2 * k] * np.sqrt(2) * np.cos(2 * np.pi * k * t)
    assert abs(evaluate(FunctionSample(c, B11), t) - naive) < 1e-12


def test_evaluate_domain():
    with pytest.raises(ValueError):
        evaluate(e(0), 1.5)
    with pytest.raises(ValueError):
        evaluate(e(0), [-0.1, 0.5])
    assert evaluate(e(0), np.array([[0.0, 1.0]])).shape == (1, 2)


def test_function_sample_immutable():
    f = e(3)
    with pytest.raises(ValueError):
        f.coeffs[0] = 1.0
    with pytest.raises(ValueError):
        FunctionSample(np.r_[np.inf, np.zeros(10)], B11)


def test_series_slicing_keeps_labels():
    s = FunctionSeries(np.arange(33.0).reshape(3, 11), B11, start=5)
    assert list(s.index) == [5, 6, 7]
    assert s[1:].start == 6 and len(s[1:]) == 2
    assert np.array_equal(s.at(7).coeffs, s.coeffs[2])
    with pytest.raises(IndexError):
        s.at(8)
    with pytest.raises(ValueError):
        s[::2]
    assert np.allclose(s.centered().coeffs.mean(axis=0), 0)


@settings(max_examples=200, deadline=None)
@given(coeff_vectors)
def test_parseval(c):
    f = FunctionSample(c, B11)
    assert inner_product(f, f) == float(c @ c)
    assert norm(f) ** 2 == pytest.approx(float(c @ c), rel=1e-15, abs=0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 11, elements=st.floats(-10, 10, allow_nan=False)))
def test_smoothing_reproduces_basis_combinations(c):
    raw = B11.design() @ c
    f = smooth_to_basis(raw, B11)
    assert np.abs(evaluate(f, B11.grid) - raw).max() < 1e-9
    # projection is idempotent
    g = smooth_to_basis(evaluate(f, B11.grid), B11)
    assert np.abs(g.coeffs - f.coeffs).max() < 1e-9


def test_smooth_series_matches_rowwise(rng):
    raw = rng.standard_normal((4, 1440))
    s = smooth_series(raw, B11, start=3)
    assert s.start == 3
    for i in range(4):
        assert np.allclose(s.coeffs[i], smooth_to_basis(raw[i], B11).coeffs, atol=1e-12)
