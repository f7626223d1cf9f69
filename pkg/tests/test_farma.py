import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from farmakit.exceptions import NotCausalError
from farmakit.fnspace import BasisSpec, FunctionSample, FunctionSeries, inner_product
from farmakit.fpca import EigenSystem, eigendecompose
from farmakit.farma import (
    FarmaModel,
    autocovariance,
    causal_solution,
    causal_solution_statespace,
    delta_bound,
    delta_series,
    delta_term,
    exactness_check,
    ma_cutoff_se,
    model_from_text,
    model_to_text,
    project_model,
    projected_stationarity,
    psi_weights,
    score_residual,
    simulate,
    simulate_replications,
    true_eigensystem,
)
from farmakit.hsop import op_norm
from farmakit.varma import sample_autocov


def rand_op(rng, K, norm):
    A = rng.standard_normal((K, K))
    return norm * A / op_norm(A)


def test_zero_operators_reproduce_noise():
    K = 4
    m = FarmaModel([np.zeros((K, K))], [np.zeros((K, K))], np.eye(K))
    x, eps = simulate(m, 50, burn_in=10, seed=1)
    assert np.array_equal(x.coeffs, eps.coeffs[10:])
    assert eps.start == -10 and x.start == 0


def test_white_noise_lag1_small():
    K, N = 5, 2000
    C = np.diag([2.0, 1.0, 0.5, 0.5, 0.1])
    m = FarmaModel([], [], C)
    x, _ = simulate(m, N, seed=2)
    g = sample_autocov(x.coeffs, 1)
    se = ma_cutoff_se(np.array([C]), 0, N)
    assert np.linalg.norm(g[1]) < 3 * se


def test_far1_lag1_relation():
    K, N = 4, 5000
    phi = 0.5 * np.diag([1.0, 0.8, 0.6, 0.4])
    C_eps = np.diag([1.0, 0.7, 0.4, 0.2])
    m = FarmaModel([phi], [], C_eps)
    x, _ = simulate(m, N, seed=3)
    g = sample_autocov(x.coeffs, 1)
    # analytic fixed point C_X = phi C_X phi^T + C_eps for diagonal phi
    CX = C_eps / (1 - np.diag(phi) ** 2)
    target = phi @ CX
    assert np.linalg.norm(g[1] - target) / np.linalg.norm(target) < 0.10
    assert np.allclose(autocovariance(m, 1)[1], target)


def test_noncausal_model_refuses_to_simulate():
    m = FarmaModel([1.01 * np.eye(3)], [], np.eye(3))
    assert m.certificate is None and not m.is_causal
    with pytest.raises(NotCausalError, match="check_contraction"):
        simulate(m, 10)


def test_model_validation():
    with pytest.raises(ValueError):
        FarmaModel([np.eye(3)], [], np.eye(4))
    with pytest.raises(ValueError, match="symmetric"):
        FarmaModel([], [], np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="semidefinite"):
        FarmaModel([], [], np.diag([1.0, -1.0]))
    m = FarmaModel([0.5 * np.eye(3)], [0.2 * np.eye(3)], np.diag([3.0, 2.0, 1.0]))
    assert (m.p, m.q, m.K, m.certificate) == (1, 1, 3, 1)
    assert m.sigma2 == 6.0 and m.noise_kind == "gaussian-swn"


def test_simulation_is_seed_deterministic():
    m = FarmaModel([0.5 * np.eye(3)], [], np.eye(3))
    a, _ = simulate(m, 20, seed=5)
    b, _ = simulate(m, 20, seed=5)
    c, _ = simulate(m, 20, seed=6)
    assert np.array_equal(a.coeffs, b.coeffs) and not np.array_equal(a.coeffs, c.coeffs)


def test_psi_weights_closed_forms(rng):
    K = 3
    phi = rand_op(rng, K, 0.5)
    psis = psi_weights(phi, np.zeros((0, K, K)), 5)
    for j in range(6):
        assert np.allclose(psis[j], np.linalg.matrix_power(phi, j))
    th = rand_op(rng, K, 0.7)
    psis = psi_weights(np.zeros((K, K)), th[None], 4)
    assert np.allclose(psis[0], np.eye(K)) and np.allclose(psis[1], th)
    assert np.allclose(psis[2:], 0)
    # q = 2: psi_j = phi^{j-2} beta for j >= 2
    t1, t2 = rand_op(rng, K, 0.3), rand_op(rng, K, 0.3)
    psis = psi_weights(phi, np.array([t1, t2]), 6)
    beta = phi @ phi + phi @ t1 + t2
    assert np.allclose(psis[1], phi + t1)
    for j in range(2, 7):
        assert np.allclose(psis[j], np.linalg.matrix_power(phi, j - 2) @ beta)


def test_causal_solution_pure_ma(rng):
    K = 3
    th = rand_op(rng, K, 0.8)
    m = FarmaModel([np.zeros((K, K))], [th], np.eye(K))
    x, eps = simulate(m, 30, burn_in=5, seed=4)
    cs = causal_solution(m, eps, 10)
    assert np.allclose(cs.coeffs[5:], x.coeffs, atol=1e-14)


def test_causal_solution_matches_simulation():
    rng = np.random.default_rng(8)
    K = 6
    phi = rand_op(rng, K, 0.5)
    th = rand_op(rng, K, 0.9)
    m = FarmaModel([phi], [th], np.diag(np.linspace(1, 0.2, K)))
    x, eps = simulate(m, 200, burn_in=100, seed=9)
    cs = causal_solution(m, eps, 60)
    diff = np.linalg.norm(cs.coeffs[100:] - x.coeffs, axis=1)
    assert diff.max() < 1e-6


def test_causal_solution_errors():
    K = 3
    m2 = FarmaModel([0.3 * np.eye(K), 0.2 * np.eye(K)], [0.5 * np.eye(K)], np.eye(K))
    _, eps = simulate(m2, 10, burn_in=5, seed=1)
    with pytest.raises(ValueError, match="p = 1"):
        causal_solution(m2, eps, 10)
    m1 = FarmaModel([0.3 * np.eye(K)], [0.5 * np.eye(K), 0.1 * np.eye(K)], np.eye(K))
    with pytest.raises(ValueError, match="J=1"):
        causal_solution(m1, eps, 1)


def test_statespace_solution_for_p2(rng):
    K = 4
    m = FarmaModel([rand_op(rng, K, 0.4), rand_op(rng, K, 0.3)], [rand_op(rng, K, 0.5)], np.eye(K))
    assert m.is_causal
    x, eps = simulate(m, 100, burn_in=150, seed=10)
    cs = causal_solution_statespace(m, eps, 149)
    assert np.abs(cs.coeffs[150:] - x.coeffs).max() < 1e-9


def _model_and_eig(rng, K=6, p=1, q=1):
    phis = [rand_op(rng, K, 0.5 / p) for _ in range(p)]
    thetas = [rand_op(rng, K, 0.6) for _ in range(q)]
    L = rng.standard_normal((K, K))
    m = FarmaModel(phis, thetas, L @ L.T / K + 0.1 * np.eye(K))
    return m, true_eigensystem(m)


def test_project_model_entries(rng):
    m, eig = _model_and_eig(rng, K=6)
    pm = project_model(m, eig, 3)
    nus = eig.eigenfunctions
    phi = m.phis[0]
    for l in range(3):
        for lp in range(6):
            val = inner_product(phi(nus[lp]), nus[l])
            if lp < 3:
                assert abs(pm.Phi[0][l, lp] - val) < 1e-12
            else:
                assert abs(pm.Phi_inf[0][l, lp - 3] - val) < 1e-12
    full = project_model(m, eig, 6)
    assert full.Phi_inf.shape == (1, 6, 0) and full.Theta_inf.shape == (1, 6, 0)
    with pytest.raises(ValueError):
        project_model(m, eig, 7)


def test_project_diagonal_phi():
    K = 5
    lam = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    m = FarmaModel([np.diag(np.linspace(0.5, 0.1, K))], [], np.diag(lam))
    eig = true_eigensystem(m)
    pm = project_model(m, eig, 2)
    assert np.abs(pm.Phi[0] - np.diag(np.diag(pm.Phi[0]))).max() < 1e-14
    assert not np.abs(pm.Phi_inf).max() > 1e-14


def test_delta_identity_on_simulated_path(rng):
    m, eig = _model_and_eig(rng, K=6, p=1, q=1)
    x, eps = simulate(m, 300, seed=11)
    V = eig.vectors
    S, E = x.coeffs @ V, eps.coeffs[200:] @ V
    for d in range(1, 7):
        pm = project_model(m, eig, d)
        lhs = score_residual(pm, S[:, :d], E[:, :d])
        rhs = delta_series(pm, S[:, d:], E[:, d:])
        assert np.abs(lhs - rhs).max() < 1e-10
        n = 17
        assert np.allclose(delta_term(pm, S[:, d:], E[:, d:], n), rhs[n - 1], atol=1e-14)


def test_delta_identity_general_orders(rng):
    m, eig = _model_and_eig(rng, K=5, p=2, q=2)
    x, eps = simulate(m, 200, seed=12)
    S, E = x.coeffs @ eig.vectors, eps.coeffs[200:] @ eig.vectors
    pm = project_model(m, eig, 2)
    assert np.abs(score_residual(pm, S[:, :2], E[:, :2]) - delta_series(pm, S[:, 2:], E[:, 2:])).max() < 1e-10


def test_delta_zero_cases(rng):
    K = 4
    eig = EigenSystem([4.0, 3.0, 2.0, 1.0], np.eye(K), BasisSpec(K))
    blk = np.zeros((K, K))
    blk[:2, :2] = [[0.3, 0.1], [0.0, 0.2]]
    m = FarmaModel([blk], [blk.copy()], np.diag([4.0, 3.0, 2.0, 1.0]))
    pm = project_model(m, eig, 2)
    tails = rng.standard_normal((10, 2))
    assert not delta_term(pm, tails, tails, 5).any()
    m2, eig2 = _model_and_eig(rng, K=4)
    pm2 = project_model(m2, eig2, 2)
    assert not delta_term(pm2, np.zeros((5, 2)), np.zeros((5, 2)), 3).any()
    with pytest.raises(ValueError, match="earlier"):
        delta_term(pm2, np.zeros((5, 2)), np.zeros((5, 2)), 0)


def test_delta_bound_examples():
    K, c = 4, 0.6
    lam = np.array([4.0, 2.0, 1.0, 0.5])
    m = FarmaModel([c * np.eye(K)], [], np.diag(lam * (1 - c * c)))
    eig = true_eigensystem(m)
    assert np.allclose(eig.eigenvalues, lam)
    for d in range(K + 1):
        assert delta_bound(m, eig, d) == pytest.approx(2 * c * c * lam[d:].sum(), rel=1e-12, abs=1e-15)
    assert delta_bound(m, eig, K) == 0.0


def test_delta_bound_nonincreasing(rng):
    m, eig = _model_and_eig(rng, K=7, p=2, q=1)
    b = [delta_bound(m, eig, d) for d in range(8)]
    assert np.all(np.diff(b) <= 1e-12) and b[-1] == 0.0


def test_delta_bound_monte_carlo_farma12():
    # the default factor is p + q = 3 for a FARMA(1, 2)
    rng = np.random.default_rng(21)
    K, R = 5, 2000
    m = FarmaModel([rand_op(rng, K, 0.6)], [rand_op(rng, K, 0.8), rand_op(rng, K, 0.8)],
                   np.diag([1.0, 0.8, 0.5, 0.3, 0.1]))
    assert delta_bound(m, true_eigensystem(m), 2) == delta_bound(m, true_eigensystem(m), 2, factor=3)
    eig = true_eigensystem(m)
    X, eps = simulate_replications(m, R, 2, burn_in=100, seed=22)
    V = eig.vectors
    for d in range(1, K):
        pm = project_model(m, eig, d)
        Vt = V[:, d:]
        delta = (X[:, 1] @ Vt) @ pm.Phi_inf[0].T
        delta += (eps[:, 101] @ Vt) @ pm.Theta_inf[0].T + (eps[:, 100] @ Vt) @ pm.Theta_inf[1].T
        sq = (delta ** 2).sum(axis=1)
        assert sq.mean() <= delta_bound(m, eig, d) + 3 * sq.std(ddof=1) / np.sqrt(R)


def test_exactness_examples(rng):
    K, d = 5, 2
    eig = EigenSystem([5.0, 4.0, 3.0, 2.0, 1.0], np.eye(K), BasisSpec(K))
    phi = np.zeros((K, K))
    phi[:d, :d] = [[0.4, 0.1], [0.2, 0.3]]
    m = FarmaModel([phi], [0.5 * np.eye(K)], np.eye(K))
    rep = exactness_check(m, eig, d)
    assert rep.exact and rep.orders_preserved
    assert rep.residual_autocov.shape == (m.q + 4, d, d)
    assert not rep.residual_autocov[m.q + 1:].any()
    generic = FarmaModel([rand_op(rng, K, 0.5)], [], np.eye(K))
    assert not exactness_check(generic, eig, d).exact
    # zero compression but nonzero coupling: exact flag set, orders not preserved
    phi2 = phi.copy()
    phi2[:d, d:] = 0.1
    rep2 = exactness_check(FarmaModel([phi2], [], np.eye(K)), eig, d)
    assert rep2.exact and not rep2.orders_preserved


def test_ma_cutoff_se_formula():
    C = np.array([np.diag([2.0, 1.0]), np.diag([0.5, 0.25])])
    # sum_ab [C0aa C0bb + 2 C1aa C1bb] = 9 + 2 * 0.5625
    assert ma_cutoff_se(C, 1, 100) == pytest.approx(np.sqrt((9 + 2 * 0.5625) / 100))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 7), st.floats(0.2, 1.6))
def test_projected_stationarity_under_certificate(seed, K, scale):
    rng = np.random.default_rng(seed)
    phi = rand_op(rng, K, scale)
    m = FarmaModel([phi], [], np.diag(rng.uniform(0.1, 1.0, K)))
    if not m.is_causal:
        return
    eig = true_eigensystem(m)
    for d in range(1, K + 1):
        ok, radius = projected_stationarity(m, eig, d)
        assert ok and radius < 1


def test_model_text_round_trip(rng):
    K = 4
    m = FarmaModel([rand_op(rng, K, 0.3), rand_op(rng, K, 0.2)], [rand_op(rng, K, 0.5)],
                   np.diag(rng.uniform(0.1, 2, K)), j_max=32)
    m2 = model_from_text(model_to_text(m))
    for a, b in zip(m.phis + m.thetas, m2.phis + m2.thetas):
        assert np.array_equal(a.mat, b.mat)
    assert np.array_equal(m.noise_cov.mat, m2.noise_cov.mat)
    assert m.basis == m2.basis and m2.j_max == 32
    assert model_to_text(m2) == model_to_text(m)


def test_model_text_custom_grid():
    b = BasisSpec(3, np.linspace(0, 1, 7))
    m = FarmaModel([], [], np.eye(3), b)
    assert model_from_text(model_to_text(m)).basis == b


def test_model_text_errors():
    with pytest.raises(ValueError, match="missing key"):
        model_from_text("p = 1\nq = 0\n")
    with pytest.raises(ValueError, match="declares"):
        model_from_text("p = 1\nq = 0\nK = 1\nnoise_cov = [[1.0]]\n")
    with pytest.raises(ValueError, match="parse"):
        model_from_text("p = = 1")
