"""Vector ARMA models on score space and their best linear predictors.

Autocovariances follow ``gammas[h] = E[X_{t+h} X_t^T]``. Three predictor
routes are provided: the multivariate Innovations algorithm, the Whittle
(multivariate Durbin-Levinson) recursion, and a direct solve of the block
Toeplitz normal equations used as an oracle. All three return the predictor
as explicit weights on the observed vectors so they can be compared entry by
entry.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._kernels import arma_recursion, innovations_kernel, whittle_kernel
from .exceptions import NonStationaryError, RankDeficientError
from .fpca import ScoreSeries

__all__ = [
    "VarmaModel",
    "PredictorWeights",
    "companion_matrix",
    "companion_stationary",
    "arma_autocovariance",
    "sample_autocov",
    "fit_varma",
    "simulate_varma",
    "innovations_predict",
    "durbin_levinson_predict",
    "brute_force_blp",
    "orthogonality_residual",
]

log = logging.getLogger(__name__)

RIDGE = 1e-10


def _stack(mats, d=None) -> np.ndarray:
    if isinstance(mats, np.ndarray) and mats.ndim == 3:
        return np.array(mats, dtype=float)
    mats = [np.asarray(m, dtype=float) for m in mats]
    if not mats:
        if d is None:
            raise ValueError("cannot infer dimension from an empty list")
        return np.zeros((0, d, d))
    return np.stack(mats)


def _as_scores(scores) -> np.ndarray:
    if isinstance(scores, ScoreSeries):
        return scores.scores
    S = np.asarray(scores, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2:
        raise ValueError("scores must be an N x d matrix")
    return S


@dataclass(frozen=True, eq=False)
class VarmaModel:
    """``X_t = sum Phi_i X_{t-i} + E_t + sum Theta_j E_{t-j}`` with ``Cov(E_t) = Sigma``."""

    Phi: np.ndarray
    Theta: np.ndarray
    Sigma: np.ndarray
    stationary: bool | None = None
    spectral_radius: float | None = None
    method: str = "given"

    def __post_init__(self):
        Sigma = np.array(self.Sigma, dtype=float)
        if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
            raise ValueError("Sigma must be square")
        d = Sigma.shape[0]
        Phi = _stack(self.Phi, d)
        Theta = _stack(self.Theta, d)
        for name, arr in (("Phi", Phi), ("Theta", Theta)):
            if arr.shape[1:] != (d, d):
                raise ValueError(f"{name} matrices must be {d}x{d}, got {arr.shape[1:]}")
        if not np.allclose(Sigma, Sigma.T, atol=1e-10 * max(1.0, np.abs(Sigma).max())):
            raise ValueError("Sigma must be symmetric")
        Sigma = 0.5 * (Sigma + Sigma.T)
        stationary, radius = companion_stationary(Phi)
        for arr in (Phi, Theta, Sigma):
            arr.flags.writeable = False
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Theta", Theta)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "stationary", stationary)
        object.__setattr__(self, "spectral_radius", radius)

    @property
    def d(self) -> int:
        return self.Sigma.shape[0]

    @property
    def p(self) -> int:
        return self.Phi.shape[0]

    @property
    def q(self) -> int:
        return self.Theta.shape[0]

    def autocovariance(self, max_lag: int) -> np.ndarray:
        return arma_autocovariance(self.Phi, self.Theta, self.Sigma, max_lag)


@dataclass(frozen=True, eq=False)
class PredictorWeights:
    """``X_hat_{n+h} = sum_i coefs[i] @ X_{i+1}`` with error covariance ``mse``."""

    horizon: int
    coefs: np.ndarray
    mse: np.ndarray

    @property
    def n(self) -> int:
        return self.coefs.shape[0]

    def apply(self, scores) -> np.ndarray:
        S = _as_scores(scores)
        if S.shape[0] != self.n:
            raise ValueError(f"weights are for {self.n} observations, got {S.shape[0]}")
        return np.einsum("iab,ib->a", self.coefs, S)


# ---------------------------------------------------------------- stationarity

def companion_matrix(Phis) -> np.ndarray:
    """The ``dp x dp`` block companion matrix of ``Phi_1..Phi_p``."""
    Phi = _stack(Phis)
    p, d, _ = Phi.shape
    F = np.zeros((d * p, d * p))
    if p:
        F[:d, :] = np.concatenate(list(Phi), axis=1)
    if p > 1:
        F[d:, :-d] = np.eye(d * (p - 1))
    return F


def companion_stationary(Phis) -> tuple[bool, float]:
    """``(radius < 1, radius)`` for the spectral radius of the companion matrix."""
    if len(Phis) == 0:
        return True, 0.0
    radius = float(np.abs(np.linalg.eigvals(companion_matrix(Phis))).max())
    return radius < 1.0, radius


# ---------------------------------------------------------------- autocovariances

def _state_space(Phi, Theta):
    p, q = Phi.shape[0], Theta.shape[0]
    d = Phi.shape[1] if p else Theta.shape[1]
    pe = max(p, 1)
    n = d * (pe + q)
    F = np.zeros((n, n))
    G = np.zeros((n, d))
    for i in range(p):
        F[:d, i * d:(i + 1) * d] = Phi[i]
    off = pe * d
    for j in range(q):
        F[:d, off + j * d:off + (j + 1) * d] = Theta[j]
    G[:d] = np.eye(d)
    for i in range(1, pe):
        F[i * d:(i + 1) * d, (i - 1) * d:i * d] = np.eye(d)
    if q:
        G[off:off + d] = np.eye(d)
        for j in range(1, q):
            F[off + j * d:off + (j + 1) * d, off + (j - 1) * d:off + j * d] = np.eye(d)
    return F, G


def arma_autocovariance(Phis, Thetas, Sigma, max_lag: int) -> np.ndarray:
    """Stationary autocovariances ``gammas[h] = E[X_{t+h} X_t^T]``, ``h = 0..max_lag``.

    Solved exactly through the discrete Lyapunov equation of the state vector
    ``(X_t..X_{t-p+1}, E_t..E_{t-q+1})``.

    Raises
    ------
    NonStationaryError
        If the autoregressive part has companion spectral radius >= 1.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    d = Sigma.shape[0]
    Phi = _stack(Phis, d)
    Theta = _stack(Thetas, d)
    ok, radius = companion_stationary(Phi)
    if not ok:
        raise NonStationaryError(f"autoregressive part is not stationary (spectral radius {radius:.6g})")
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    F, G = _state_space(Phi, Theta)
    P = scipy.linalg.solve_discrete_lyapunov(F, G @ Sigma @ G.T)
    P = 0.5 * (P + P.T)
    out = np.empty((max_lag + 1, d, d))
    M = P
    for h in range(max_lag + 1):
        out[h] = M[:d, :d]
        M = F @ M
    return out


def sample_autocov(scores, max_lag: int, demean: bool = False) -> np.ndarray:
    """``C_h = (1/N) sum_n X_{n+h} X_n^T`` for ``h = 0..max_lag``.

    Scores are taken as mean zero unless ``demean`` is set.
    """
    S = _as_scores(scores)
    N = S.shape[0]
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    if N <= max_lag:
        raise ValueError(f"need more than {max_lag} observations for lag {max_lag}, got {N}")
    if demean:
        S = S - S.mean(axis=0)
    out = np.empty((max_lag + 1, S.shape[1], S.shape[1]))
    for h in range(max_lag + 1):
        out[h] = S[h:].T @ S[:N - h] / N
    return out


def _extend_autocov(gammas: np.ndarray, lags: int) -> np.ndarray:
    """Pad with zero matrices up to ``lags``."""
    if gammas.shape[0] >= lags + 1:
        return gammas
    pad = np.zeros((lags + 1 - gammas.shape[0],) + gammas.shape[1:])
    return np.concatenate([gammas, pad])


# ---------------------------------------------------------------- fitting

def _lstsq_ridge(Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Solve ``min ||Y - Z B||`` via normal equations with a small ridge; returns ``B``."""
    A = Z.T @ Z
    scale = np.trace(A) / max(A.shape[0], 1)
    if not scale > 0:
        raise RankDeficientError("regression design is singular (all-zero regressors)")
    w = np.linalg.eigvalsh(A)
    if w[0] <= 1e-12 * w[-1]:
        raise RankDeficientError(
            f"regression design is singular (condition number {w[-1] / max(w[0], 1e-300):.3g})"
        )
    A = A + RIDGE * scale * np.eye(A.shape[0])
    return np.linalg.solve(A, Z.T @ Y)


def _lagged(S: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Rows ``t = start..N-1`` of ``[S_{t-1}, ..., S_{t-lags}]``."""
    N = S.shape[0]
    return np.concatenate([S[start - k:N - k] for k in range(1, lags + 1)], axis=1)


def fit_varma(scores, p: int, q: int) -> VarmaModel:
    """Fit a vector ARMA(p, q) to mean-zero scores.

    Pure autoregressions use the multivariate Yule-Walker equations on the
    sample autocovariances. With ``q >= 1`` the Hannan-Rissanen two-stage
    least squares is used: a long autoregression of order
    ``m = min(10, N // 10)`` supplies residual proxies, then ``X_t`` is
    regressed on its own lags and the lagged proxies.

    Raises
    ------
    RankDeficientError
        If the lag-0 covariance or a regression design is singular.
    """
    S = _as_scores(scores)
    N, d = S.shape
    if p < 0 or q < 0:
        raise ValueError("orders must be nonnegative")
    if N < 10 * d * max(p + q, 1):
        log.info("fit_varma: N=%d is below the heuristic floor 10*d*(p+q)=%d", N, 10 * d * (p + q))
    G0 = S.T @ S / N
    w = np.linalg.eigvalsh(G0)
    if not w[-1] > 0 or w[0] <= 1e-12 * w[-1]:
        raise RankDeficientError("lag-0 score covariance is singular; cannot fit (all-zero or collinear scores)")

    if q == 0:
        Phi, Sigma = _yule_walker(S, p)
        method = "yule-walker"
        Theta = np.zeros((0, d, d))
    else:
        Phi, Theta, Sigma = _hannan_rissanen(S, p, q)
        method = "hannan-rissanen"
    model = VarmaModel(Phi, Theta, Sigma, method=method)
    if not model.stationary:
        log.warning("fitted VARMA(%d,%d) is not stationary (spectral radius %.4f)", p, q, model.spectral_radius)
    return model


def _yule_walker(S, p):
    N, d = S.shape
    G = sample_autocov(S, max(p, 0))
    if p == 0:
        return np.zeros((0, d, d)), G[0]
    # [Phi_1..Phi_p] M = [G(1)..G(p)],  M[i, k] = G(k - i)
    M = np.zeros((p * d, p * d))
    for i in range(p):
        for k in range(p):
            M[i * d:(i + 1) * d, k * d:(k + 1) * d] = G[k - i] if k >= i else G[i - k].T
    R = np.concatenate(list(G[1:p + 1]), axis=1)
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    if w[0] <= 1e-12 * w[-1]:
        raise RankDeficientError("Yule-Walker system is singular")
    W = np.linalg.solve(M.T, R.T).T
    Phi = np.stack([W[:, i * d:(i + 1) * d] for i in range(p)])
    Sigma = G[0] - sum(Phi[i] @ G[i + 1].T for i in range(p))
    return Phi, 0.5 * (Sigma + Sigma.T)


def _hannan_rissanen(S, p, q):
    N, d = S.shape
    m = max(min(10, N // 10), 1)
    if N - m <= m * d:
        raise RankDeficientError(f"series of length {N} is too short for a long autoregression of order {m}")
    Z = _lagged(S, m, m)
    B = _lstsq_ridge(Z, S[m:])
    resid = np.zeros_like(S)
    resid[m:] = S[m:] - Z @ B
    start = m + q
    start = max(start, p)
    if N - start <= (p + q) * d:
        raise RankDeficientError(f"series of length {N} is too short for a VARMA({p},{q}) regression")
    blocks = []
    if p:
        blocks.append(_lagged(S, p, start))
    blocks.append(_lagged(resid, q, start))
    Z2 = np.concatenate(blocks, axis=1)
    Y = S[start:]
    B2 = _lstsq_ridge(Z2, Y)
    coef = B2.T  # d x (p+q)d
    Phi = np.stack([coef[:, i * d:(i + 1) * d] for i in range(p)]) if p else np.zeros((0, d, d))
    Theta = np.stack([coef[:, (p + j) * d:(p + j + 1) * d] for j in range(q)])
    E = Y - Z2 @ B2
    Sigma = E.T @ E / E.shape[0]
    return Phi, Theta, 0.5 * (Sigma + Sigma.T)


def simulate_varma(model: VarmaModel, n: int, burn_in: int = 200, seed=None) -> np.ndarray:
    """Simulate ``n`` Gaussian observations after discarding ``burn_in``."""
    rng = np.random.default_rng(seed)
    w, U = np.linalg.eigh(model.Sigma)
    root = (U * np.sqrt(np.clip(w, 0, None))) @ U.T
    eps = rng.standard_normal((1, n + burn_in, model.d)) @ root
    X = arma_recursion(model.Phi, model.Theta, eps)[0]
    return X[burn_in:]


# ---------------------------------------------------------------- prediction

def _check_inputs(autocovs, scores, h):
    S = _as_scores(scores)
    n, d = S.shape
    if n < 1:
        raise ValueError("need at least one observation")
    if int(h) != h or h < 1:
        raise ValueError(f"horizon must be a positive integer, got {h}")
    g = np.asarray(autocovs, dtype=float)
    if g.ndim != 3 or g.shape[1:] != (d, d):
        raise ValueError(f"autocovariances must have shape (L, {d}, {d}), got {g.shape}")
    if g.shape[0] < n + h:
        raise ValueError(f"need autocovariances up to lag {n + h - 1}, got {g.shape[0] - 1}")
    G0 = g[0]
    if not np.allclose(G0, G0.T, atol=1e-10 * max(1.0, np.abs(G0).max())):
        raise ValueError("lag-0 autocovariance is not symmetric")
    try:
        np.linalg.cholesky(0.5 * (G0 + G0.T))
    except np.linalg.LinAlgError:
        raise ValueError("lag-0 autocovariance is not positive definite") from None
    return S, g[:n + h], n, d


def _mse(g, coefs, n, h):
    # Gamma_0 - sum_i A_i Gamma(n+h-i)^T with i = 1..n
    lags = n + h - 1 - np.arange(n)
    M = g[0] - np.einsum("iab,icb->ac", coefs, g[lags])
    return 0.5 * (M + M.T)


def innovations_predict(autocovs, scores, h: int = 1, weights: bool = True):
    """h-step best linear predictor by the multivariate Innovations algorithm.

    Parameters
    ----------
    autocovs : (L, d, d) array
        ``autocovs[k] = E[X_{t+k} X_t^T]``; lags ``0..n+h-1`` are used.
    scores : (n, d) array or ScoreSeries
        Observations ``X_1..X_n`` in time order.
    h : int
    weights : bool
        If false, skip the O(n^3) weight expansion and return ``None`` in its
        place; the prediction is then formed from the innovations directly.

    Returns
    -------
    prediction : (d,) array
    weights : PredictorWeights or None
    """
    S, g, n, d = _check_inputs(autocovs, scores, h)
    M = n + h - 1
    Theta, V = innovations_kernel(g, M)
    for k in range(n):
        if np.linalg.eigvalsh(V[k])[0] <= 1e-14 * np.abs(g[0]).max():
            raise ValueError(f"innovation covariance V_{k} is singular; autocovariances are degenerate")
    if not weights:
        U = np.empty((n, d))
        for k in range(n):
            js = np.arange(1, k + 1)
            U[k] = S[k] - np.einsum("jab,jb->a", Theta[k, js], U[k - js])
        js = np.arange(h, n + h)
        return np.einsum("jab,jb->a", Theta[M, js], U[n + h - 1 - js]), None
    # B[k] maps (X_1..X_n) to the innovation U_{k+1} = X_{k+1} - X_hat_{k+1}
    B = np.zeros((n, n, d, d))
    for k in range(n):
        B[k, k] = np.eye(d)
        if k:
            js = np.arange(1, k + 1)
            B[k] -= np.einsum("jab,jibc->iac", Theta[k, js], B[k - js])
    js = np.arange(h, n + h)
    coefs = np.einsum("jab,jibc->iac", Theta[M, js], B[n + h - 1 - js])
    weights = PredictorWeights(h, coefs, _mse(g, coefs, n, h))
    return weights.apply(S), weights


def durbin_levinson_predict(autocovs, scores, h: int = 1):
    """h-step best linear predictor by the Whittle (multivariate Durbin-Levinson) recursion.

    Further steps iterate ``P_n X_{n+k} = sum_j Phi_{n+k-1, j} P_n X_{n+k-j}``,
    which is exact because projections onto nested spaces compose.
    """
    S, g, n, d = _check_inputs(autocovs, scores, h)
    M = n + h - 1
    Phi, V = whittle_kernel(g, M)
    for k in range(n):
        if np.linalg.eigvalsh(V[k])[0] <= 1e-14 * np.abs(g[0]).max():
            raise ValueError(f"prediction error covariance V_{k} is singular; autocovariances are degenerate")
    # W[t] maps (X_1..X_n) to P_n X_{t+1}
    W = np.zeros((n + h, n, d, d))
    for t in range(n):
        W[t, t] = np.eye(d)
    for k in range(1, h + 1):
        m = n + k - 1  # predictor of X_{m+1} from X_1..X_m
        js = np.arange(1, m + 1)
        W[m] = np.einsum("jab,jibc->iac", Phi[m, js], W[m - js])
    coefs = W[n + h - 1]
    weights = PredictorWeights(h, coefs, _mse(g, coefs, n, h))
    return weights.apply(S), weights


def _toeplitz_system(g, n, h):
    d = g.shape[1]
    G = np.empty((n * d, n * d))
    for i in range(n):
        for j in range(n):
            G[i * d:(i + 1) * d, j * d:(j + 1) * d] = g[i - j] if i >= j else g[j - i].T
    R = np.concatenate([g[n + h - 1 - j] for j in range(n)], axis=1)
    return G, R


def brute_force_blp(autocovs, scores, h: int = 1):
    """Best linear predictor from a dense solve of the block Toeplitz normal equations.

    Solves ``W G = R`` where ``G[i, j] = Gamma(i - j)`` and
    ``R[j] = Gamma(n + h - 1 - j)`` (zero-based blocks in time order).
    """
    S, g, n, d = _check_inputs(autocovs, scores, h)
    G, R = _toeplitz_system(g, n, h)
    w = np.linalg.eigvalsh(0.5 * (G + G.T))
    if w[0] <= 1e-13 * w[-1]:
        raise ValueError(f"block Toeplitz system is singular (condition number {w[-1] / max(w[0], 1e-300):.3g})")
    W = scipy.linalg.solve(G, R.T, assume_a="sym").T
    coefs = np.stack([W[:, i * d:(i + 1) * d] for i in range(n)])
    weights = PredictorWeights(h, coefs, _mse(g, coefs, n, h))
    return weights.apply(S), weights


def orthogonality_residual(autocovs, weights: PredictorWeights) -> float:
    """Residual ``||W G - R||`` of the normal equations, relative to ``max(||R||, ||Gamma_0||)``."""
    g = np.asarray(autocovs, dtype=float)
    n, h = weights.n, weights.horizon
    G, R = _toeplitz_system(g, n, h)
    W = np.concatenate(list(weights.coefs), axis=1)
    return float(np.linalg.norm(W @ G - R) / max(np.linalg.norm(R), np.linalg.norm(g[0])))
