import numpy as np
import pytest

from farmakit.fnspace import BasisSpec, FunctionSeries, fourier_design
from farmakit.fpca import EigenSystem, compute_scores, fpca
from farmakit.farma import FarmaModel, autocovariance, simulate, simulate_replications, true_eigensystem
from farmakit.forecast import (
    TABLE1_ORDERS,
    ErrorTable,
    ForecastConfig,
    algorithm1,
    baseline_errors,
    bound_experiment,
    error_metrics,
    functional_blp_far,
    gamma_bound,
    gamma_bound_operator,
    g_norms,
    predict_scores,
    rolling_cv,
    write_bounds_csv,
)
from farmakit.varma import brute_force_blp
from helpers import far1_bound_fixture, farma11_fixture, random_stable

B5 = BasisSpec(5)


def test_algorithm1_white_noise_exact_autocovs(rng):
    x = FunctionSeries(rng.standard_normal((30, 5)), B5)
    eig, _ = fpca(x)
    g = np.zeros((31, 3, 3))
    g[0] = np.eye(3)
    f = algorithm1(x, eig, 3, 1, 0, autocovs=g)
    assert not f.coeffs.any()


def test_algorithm1_white_noise_fitted_is_small():
    rng = np.random.default_rng(4)
    x = FunctionSeries(rng.standard_normal((400, 5)), B5).centered()
    eig, _ = fpca(x)
    f = algorithm1(x, eig, 3, 1, 0)
    assert np.linalg.norm(f.coeffs) < 0.3


def test_algorithm1_scalar_ar1_in_first_eigenfunction():
    phi, n = 0.7, 40
    eig = EigenSystem([1.0, 0.5, 0.2, 0.1, 0.05], np.eye(5), B5)
    s = 0.9 ** np.arange(n)  # any score path
    x = FunctionSeries(np.outer(s, np.eye(5)[0]), B5)
    g = np.array([phi ** h / (1 - phi ** 2) for h in range(n + 1)])[:, None, None]
    f = algorithm1(x, eig, 1, 1, 0, autocovs=g)
    assert np.allclose(f.coeffs, phi * s[-1] * np.eye(5)[0], atol=1e-12)


def test_algorithm1_matches_brute_force_far1():
    m = far1_bound_fixture(K=7)
    x, _ = simulate(m, 60, seed=5)
    eig = true_eigensystem(m)
    d = 3
    Vd = eig.vectors[:, :d]
    g = np.einsum("ka,hkl,lb->hab", Vd, autocovariance(m, 60), Vd)
    f = algorithm1(x, eig, d, 1, 0, autocovs=g)
    ref, _ = brute_force_blp(g, compute_scores(x, eig, d).scores, 1)
    assert np.abs(f.coeffs - Vd @ ref).max() < 1e-8


def test_algorithm1_sample_and_model_modes(rng):
    m = farma11_fixture(K=9)
    x, _ = simulate(m, 80, seed=6)
    eig, _ = fpca(x)
    xc = x.centered()
    a = algorithm1(xc, eig, 3, 1, 1, autocov="model")
    b = algorithm1(xc, eig, 3, 1, 1, autocov="sample")
    assert np.all(np.isfinite(a.coeffs)) and np.all(np.isfinite(b.coeffs))
    with pytest.raises(ValueError):
        algorithm1(xc, eig, 3, 1, 1, autocov="other")


def test_predict_scores_zero_history():
    assert not predict_scores(np.zeros((10, 2)), 1, 1).any()


def test_functional_blp_far_examples(rng):
    K = 4
    x = FunctionSeries(rng.standard_normal((5, K)), BasisSpec(K))
    z = FarmaModel([np.zeros((K, K))], [], np.eye(K))
    assert not functional_blp_far(z, x).coeffs.any()
    c = FarmaModel([0.4 * np.eye(K)], [], np.eye(K))
    assert np.allclose(functional_blp_far(c, x).coeffs, 0.4 * x.coeffs[-1])
    with pytest.raises(ValueError, match="q = 0"):
        functional_blp_far(FarmaModel([], [np.eye(K) * 0.1], np.eye(K)), x)
    with pytest.raises(ValueError, match="h = 1"):
        functional_blp_far(c, x, 2)


def test_functional_blp_far_innovation_variance():
    m = far1_bound_fixture(K=7)
    x, _ = simulate(m, 5001, seed=7)
    errs = [
        ((x.coeffs[n] - functional_blp_far(m, x[:n]).coeffs) ** 2).sum()
        for n in range(1, 5001)
    ]
    assert abs(np.mean(errs) / m.sigma2 - 1) < 0.05


def test_gamma_bound_examples():
    K = 3
    a = np.array([0.5, 0.4, 0.3])
    lam_eps = np.array([3.0, 2.0, 1.0])
    m = FarmaModel([np.diag(a)], [], np.diag(lam_eps))
    eig = true_eigensystem(m)
    lam = lam_eps / (1 - a ** 2)
    assert np.allclose(eig.eigenvalues, lam)
    assert gamma_bound(m, eig, K) == 0.0
    # d = 1: g = sqrt(a2^2 + a3^2), gamma = (lam2 + lam3)(4 g + 1)
    g = np.sqrt(a[1] ** 2 + a[2] ** 2)
    assert gamma_bound(m, eig, 1) == pytest.approx((lam[1] + lam[2]) * (4 * g + 1), rel=1e-12)
    assert gamma_bound(m, eig, 1, squared=True) == pytest.approx((lam[1] + lam[2]) * (4 * g * g + 1), rel=1e-12)
    assert g_norms(m, eig, 2) == pytest.approx((a[2],))
    op = gamma_bound_operator(m, eig, 1)
    assert op == pytest.approx(4 * 0.5 ** 2 * (np.sqrt(lam[1]) + np.sqrt(lam[2])) ** 2 + lam[1] + lam[2])
    with pytest.raises(ValueError):
        gamma_bound(FarmaModel([], [np.eye(3) * 0.1], np.eye(3)), eig, 1)


def test_error_metrics_examples():
    b = BasisSpec(5)
    x = FunctionSeries(np.random.default_rng(0).standard_normal((4, 5)), b)
    assert error_metrics(x, x) == (0.0, 0.0)
    c = -1.5
    off = FunctionSeries(x.coeffs + c * np.eye(5)[1], b)
    rmse, mae = error_metrics(x, off)
    assert rmse == pytest.approx(abs(c), rel=1e-14)
    t = np.linspace(0, 1, 200_001)
    y = np.abs(c * np.sqrt(2) * np.sin(2 * np.pi * t))
    oracle = np.sum((y[1:] + y[:-1]) / 2 * np.diff(t))
    assert mae == pytest.approx(oracle, abs=1e-5)
    assert mae == pytest.approx(abs(c) * 2 * np.sqrt(2) / np.pi, abs=1e-5)
    _, pw = error_metrics(x, off, mae="pointwise")
    assert pw == pytest.approx(np.abs(c * fourier_design(b.grid, 5)[:, 1]).mean())
    with pytest.raises(ValueError):
        error_metrics(x, x[:2])


def test_config_validation():
    cfg = ForecastConfig()
    assert len(cfg.cells) == 35 and cfg.order_grid == TABLE1_ORDERS
    for bad in (dict(d_grid=()), dict(d_grid=(0,)), dict(order_grid=((-1, 0),)), dict(holdout=0),
                dict(autocov="x"), dict(mae="x")):
        with pytest.raises(ValueError):
            ForecastConfig(**bad)


def test_error_table_argmin_ties_and_csv(tmp_path):
    t = ErrorTable(holdout=3)
    t.add(3, 1, 1, 1.0, 2.0)
    t.add(2, 1, 1, 1.0, 2.0)
    t.add(4, 1, 0, 1.0, 2.0)
    t.add(2, 2, 1, 0.5, 3.0)
    assert t.argmin("rmse") == (2, 2, 1)
    assert t.argmin("mae") == (4, 1, 0)
    t2 = ErrorTable()
    t2.add(3, 1, 1, 1.0, 1.0)
    t2.add(2, 1, 1, 1.0, 1.0)
    assert t2.argmin() == (2, 1, 1)
    t.to_csv(tmp_path / "t.csv")
    back = ErrorTable.from_csv(tmp_path / "t.csv")
    assert back.rows == t.rows
    ds, orders, M = t.grid()
    assert ds == [2, 3, 4] and orders == [(1, 1), (1, 0), (2, 1)] and M.shape == (3, 3)
    with pytest.raises(ValueError):
        ErrorTable().argmin()


def test_rolling_cv_constant_series_is_exact():
    b = BasisSpec(5)
    x = FunctionSeries(np.tile(np.eye(5)[0], (20, 1)), b)
    t = rolling_cv(x, ForecastConfig((2,), ((1, 0),), holdout=4))
    assert not t.failed
    assert t.lookup(2, 1, 0) == (0.0, 0.0)


def test_rolling_cv_duplicates_and_determinism():
    m = farma11_fixture(K=7)
    x, _ = simulate(m, 60, seed=8)
    cfg = ForecastConfig((2, 3, 2), ((1, 0), (1, 1)), holdout=4)
    a = rolling_cv(x, cfg, threads=1)
    b = rolling_cv(x, cfg, threads=2)
    assert a.rows == b.rows
    assert len(a) == 6 and a.rows[0][3:] == a.rows[4][3:] and a.rows[1][3:] == a.rows[5][3:]


def test_rolling_cv_records_failures():
    m = farma11_fixture(K=7)
    x, _ = simulate(m, 30, seed=9)
    # VARMA(2, 2) on 6 scores from 26 curves cannot be fitted
    t = rolling_cv(x, ForecastConfig((1, 6), ((1, 0), (2, 2)), holdout=3))
    assert (6, 2, 2) in t.failed
    assert (1, 1, 0) in {r[:3] for r in t.rows}
    with pytest.raises(ValueError):
        rolling_cv(x, ForecastConfig((8,), ((1, 0),), holdout=3))
    with pytest.raises(ValueError):
        rolling_cv(x, ForecastConfig((2,), ((1, 0),), holdout=30))


def test_baselines():
    b = BasisSpec(3)
    x = FunctionSeries(np.arange(15.0).reshape(5, 3), b)
    base = baseline_errors(x, 2)
    # last value misses by one row step (3 per coordinate)
    assert base["last_value"][0] == pytest.approx(np.sqrt(27))
    assert base["mean"][0] > base["last_value"][0]


def test_predictor_gap_shrinks_with_d():
    rng = np.random.default_rng(31)
    K = 8
    phi = random_stable(rng, K, 0.7)
    m = FarmaModel([phi], [], np.diag(1.0 / np.arange(1, K + 1) ** 1.2))
    reps = bound_experiment(m, range(1, K + 1), n=30, reps=600, seed=32)
    gaps = np.array([r.gap_mse for r in reps])
    se = np.array([r.empirical_se for r in reps])
    assert np.all(np.diff(gaps) <= 2 * se[1:])
    assert gaps[-1] < 0.01 * m.sigma2


def test_error_decomposition_identity():
    m = far1_bound_fixture(K=6)
    eig = true_eigensystem(m)
    X, _ = simulate_replications(m, 20, 31, seed=33)
    V = eig.vectors
    for d in (1, 3, 6):
        Vd = V[:, :d]
        pred_scores = X[:, -2] @ Vd * 0.5  # any d-dimensional predictor
        err = X[:, -1] - pred_scores @ Vd.T
        lhs = (err ** 2).sum(axis=1)
        head = ((X[:, -1] @ Vd - pred_scores) ** 2).sum(axis=1)
        tail = ((X[:, -1] @ V[:, d:]) ** 2).sum(axis=1)
        assert np.abs(lhs - head - tail).max() < 1e-10


def test_bound_experiment_and_csv(tmp_path):
    m = far1_bound_fixture(K=6)
    reps = bound_experiment(m, [1, 3, 6], n=20, reps=400, seed=34)
    assert all(r.holds() for r in reps)
    assert reps[-1].gamma == 0.0 and reps[-1].tail_eigen_sum == 0.0
    write_bounds_csv(reps, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "d,sigma2,gamma,empirical_mse,empirical_se" and len(lines) == 4
    again = bound_experiment(m, [1, 3, 6], n=20, reps=400, seed=34)
    assert [r.empirical_mse for r in again] == [r.empirical_mse for r in reps]


def test_nilpotent_ma_inverts_to_finite_far(rng):
    # theta strictly upper triangular, theta^3 = 0: X_n = eps_n + theta eps_{n-1}
    # inverts to eps_n = sum_{j<3} (-theta)^j X_{n-j}, i.e. a FAR(2)
    K = 3
    theta = np.array([[0.0, 0.9, 0.4], [0.0, 0.0, 0.7], [0.0, 0.0, 0.0]])
    assert not np.linalg.matrix_power(theta, 3).any()
    C = np.diag([2.0, 1.0, 0.5])
    fma = FarmaModel([], [theta], C, basis=BasisSpec(K))
    x, eps = simulate(fma, 400, burn_in=10, seed=3)
    X, E = x.coeffs, eps.coeffs[10:]
    far = FarmaModel([theta, -theta @ theta], [], C, basis=BasisSpec(K))
    for n in range(2, 399):
        pred = functional_blp_far(far, x[: n + 1]).coeffs
        assert np.allclose(X[n + 1] - pred, E[n + 1], atol=1e-12)
    # the vector BLP from the exact autocovariances agrees once n >= 2
    g = np.zeros((8, K, K))
    g[0] = C + theta @ C @ theta.T
    g[1] = theta @ C
    ref, _ = brute_force_blp(g, X[:6], 1)
    assert np.allclose(ref, functional_blp_far(far, x[:6]).coeffs, atol=1e-10)
