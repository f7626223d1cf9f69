"""Hot loops: ARMA recursions, MA filtering, Innovations and Whittle recursions.

Each kernel has a ``_nb`` twin written as explicit loops for numba and a
``_np`` twin that vectorises over replications with numpy. The public names
dispatch on :data:`farmakit._accel.NUMBA_ENABLED`; tests run both twins
against each other.

Conventions
-----------
``gammas[h]`` is the lag-``h`` autocovariance ``E[X_{t+h} X_t^T]`` for
``h = 0..H``; negative lags are transposes.
"""

import numpy as np

from . import _accel
from ._accel import njit

# Above this many replications the numpy ARMA recursion wins: its matmuls
# batch over paths while the compiled loop cannot.
BATCH_CROSSOVER = 48

__all__ = [
    "arma_recursion",
    "ma_filter",
    "innovations_kernel",
    "whittle_kernel",
]


# ---------------------------------------------------------------- recursion

@njit
def _arma_recursion_nb(phis, thetas, eps):
    R, T, K = eps.shape
    p = phis.shape[0]
    q = thetas.shape[0]
    X = np.zeros((R, T, K))
    for r in range(R):
        for t in range(T):
            for a in range(K):
                acc = eps[r, t, a]
                for i in range(p):
                    s = t - 1 - i
                    if s < 0:
                        break
                    for b in range(K):
                        acc += phis[i, a, b] * X[r, s, b]
                for j in range(q):
                    s = t - 1 - j
                    if s < 0:
                        break
                    for b in range(K):
                        acc += thetas[j, a, b] * eps[r, s, b]
                X[r, t, a] = acc
    return X


def _arma_recursion_np(phis, thetas, eps):
    R, T, K = eps.shape
    X = np.zeros((R, T, K))
    for t in range(T):
        acc = eps[:, t].copy()
        for i in range(min(phis.shape[0], t)):
            acc += X[:, t - 1 - i] @ phis[i].T
        for j in range(min(thetas.shape[0], t)):
            acc += eps[:, t - 1 - j] @ thetas[j].T
        X[:, t] = acc
    return X


def arma_recursion(phis, thetas, eps):
    """Run ``X_t = sum phi_i X_{t-i} + eps_t + sum theta_j eps_{t-j}`` from zero state.

    Parameters
    ----------
    phis : (p, K, K) array
    thetas : (q, K, K) array
    eps : (R, T, K) array
        ``R`` independent noise paths.

    Returns
    -------
    (R, T, K) array
    """
    phis, thetas, eps = _prep_recursion(phis, thetas, eps)
    if _accel.NUMBA_ENABLED and eps.shape[0] < BATCH_CROSSOVER:
        return _arma_recursion_nb(phis, thetas, eps)
    return _arma_recursion_np(phis, thetas, eps)


def _prep_recursion(phis, thetas, eps):
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    if eps.ndim != 3:
        raise ValueError(f"eps must have shape (R, T, K), got {eps.shape}")
    K = eps.shape[2]
    phis = np.ascontiguousarray(np.reshape(phis, (-1, K, K)), dtype=np.float64)
    thetas = np.ascontiguousarray(np.reshape(thetas, (-1, K, K)), dtype=np.float64)
    return phis, thetas, eps


# ---------------------------------------------------------------- MA filter

@njit
def _ma_filter_nb(psis, eps):
    R, T, K = eps.shape
    J = psis.shape[0]
    out = np.zeros((R, T, K))
    for r in range(R):
        for t in range(T):
            for j in range(min(J, t + 1)):
                s = t - j
                for a in range(K):
                    acc = 0.0
                    for b in range(K):
                        acc += psis[j, a, b] * eps[r, s, b]
                    out[r, t, a] += acc
    return out


def _ma_filter_np(psis, eps):
    R, T, K = eps.shape
    out = np.zeros((R, T, K))
    for j in range(min(psis.shape[0], T)):
        out[:, j:] += eps[:, :T - j] @ psis[j].T
    return out


def ma_filter(psis, eps):
    """Causal filter ``out_t = sum_{j <= min(J, t)} psi_j eps_{t-j}``.

    Parameters
    ----------
    psis : (J+1, K, K) array
    eps : (R, T, K) array
    """
    eps = np.ascontiguousarray(eps, dtype=np.float64)
    psis = np.ascontiguousarray(psis, dtype=np.float64)
    # one matmul per lag beats the compiled loop at every size measured in
    # benchmarks/bench_kernels.py, so the loop twin is only a cross-check
    return _ma_filter_np(psis, eps)


# ---------------------------------------------------------------- Innovations

@njit
def _innovations_nb(gammas, M):
    d = gammas.shape[1]
    Theta = np.zeros((M + 1, M + 1, d, d))
    V = np.zeros((M + 1, d, d))
    # TV[m, j] = Theta[m, m - j] @ V[j], reused for every k
    TV = np.zeros((M + 1, M + 1, d, d))
    acc = np.empty((d, d))
    V[0] = gammas[0]
    for m in range(1, M + 1):
        for k in range(m + 1):
            for a in range(d):
                for b in range(d):
                    acc[a, b] = gammas[m - k, a, b]
            for j in range(k):
                for a in range(d):
                    for b in range(d):
                        s = 0.0
                        for c in range(d):
                            s += TV[m, j, a, c] * Theta[k, k - j, b, c]
                        acc[a, b] -= s
            if k < m:
                # acc V_k^{-1}, V_k symmetric
                Theta[m, m - k] = np.linalg.solve(V[k], acc.T.copy()).T
                for a in range(d):
                    for b in range(d):
                        s = 0.0
                        for c in range(d):
                            s += Theta[m, m - k, a, c] * V[k, c, b]
                        TV[m, k, a, b] = s
            else:
                # k == m: V_m = Gamma_0 - sum_j Theta V Theta^T, with Theta[m, 0] = 0
                for a in range(d):
                    for b in range(d):
                        V[m, a, b] = 0.5 * (acc[a, b] + acc[b, a])
    return Theta, V


def _innovations_np(gammas, M):
    d = gammas.shape[1]
    Theta = np.zeros((M + 1, M + 1, d, d))
    V = np.zeros((M + 1, d, d))
    V[0] = gammas[0]
    # TVf[j] = Theta[m, m - j] @ V[j] for the current m, laid out as d x (j*d) columns
    TVf = np.zeros((d, (M + 1) * d))
    for m in range(1, M + 1):
        for k in range(m):
            acc = gammas[m - k].copy()
            if k:
                # sum_j TV[m, j] Theta[k, k - j]^T as one product
                Tk = Theta[k, k:0:-1].transpose(1, 0, 2).reshape(d, k * d)
                acc -= TVf[:, :k * d] @ Tk.T
            T = np.linalg.solve(V[k], acc.T).T
            Theta[m, m - k] = T
            TVf[:, k * d:(k + 1) * d] = T @ V[k]
        Tm = Theta[m, m:0:-1].transpose(1, 0, 2).reshape(d, m * d)
        acc = gammas[0] - TVf[:, :m * d] @ Tm.T
        V[m] = 0.5 * (acc + acc.T)
    return Theta, V


def innovations_kernel(gammas, M):
    """Multivariate Innovations coefficients up to step ``M``.

    Returns
    -------
    Theta : (M+1, M+1, d, d) array
        ``Theta[m, j]`` multiplies the innovation ``U_{m+1-j}`` in the
        one-step predictor of ``X_{m+1}``.
    V : (M+1, d, d) array
        One-step innovation covariances.
    """
    gammas = np.ascontiguousarray(gammas, dtype=np.float64)
    if gammas.shape[0] < M + 1:
        raise ValueError(f"need autocovariances up to lag {M}, got {gammas.shape[0] - 1}")
    if _accel.NUMBA_ENABLED:
        return _innovations_nb(gammas, M)
    return _innovations_np(gammas, M)


# ---------------------------------------------------------------- Whittle

@njit
def _whittle_nb(gammas, M):
    d = gammas.shape[1]
    Phi = np.zeros((M + 1, M + 1, d, d))
    PhiB = np.zeros((M + 1, M + 1, d, d))
    V = np.zeros((M + 1, d, d))
    VB = np.zeros((M + 1, d, d))
    V[0] = gammas[0]
    VB[0] = gammas[0]
    for n in range(M):
        delta = gammas[n + 1].copy()
        for j in range(1, n + 1):
            delta -= Phi[n, j] @ gammas[n + 1 - j]
        Phi[n + 1, n + 1] = np.linalg.solve(VB[n].T, delta.T).T
        PhiB[n + 1, n + 1] = np.linalg.solve(V[n].T, delta).T
        for k in range(1, n + 1):
            Phi[n + 1, k] = Phi[n, k] - Phi[n + 1, n + 1] @ PhiB[n, n + 1 - k]
            PhiB[n + 1, k] = PhiB[n, k] - PhiB[n + 1, n + 1] @ Phi[n, n + 1 - k]
        v = V[n] - Phi[n + 1, n + 1] @ delta.T
        vb = VB[n] - PhiB[n + 1, n + 1] @ delta
        V[n + 1] = 0.5 * (v + v.T)
        VB[n + 1] = 0.5 * (vb + vb.T)
    return Phi, V


def _whittle_np(gammas, M):
    d = gammas.shape[1]
    Phi = np.zeros((M + 1, M + 1, d, d))
    PhiB = np.zeros((M + 1, M + 1, d, d))
    V = np.zeros((M + 1, d, d))
    VB = np.zeros((M + 1, d, d))
    V[0] = VB[0] = gammas[0]
    for n in range(M):
        js = np.arange(1, n + 1)
        delta = gammas[n + 1] - np.einsum("jab,jbc->ac", Phi[n, js], gammas[n + 1 - js])
        Phi[n + 1, n + 1] = np.linalg.solve(VB[n].T, delta.T).T
        PhiB[n + 1, n + 1] = np.linalg.solve(V[n].T, delta).T
        if n:
            Phi[n + 1, js] = Phi[n, js] - Phi[n + 1, n + 1] @ PhiB[n, n + 1 - js]
            PhiB[n + 1, js] = PhiB[n, js] - PhiB[n + 1, n + 1] @ Phi[n, n + 1 - js]
        v = V[n] - Phi[n + 1, n + 1] @ delta.T
        vb = VB[n] - PhiB[n + 1, n + 1] @ delta
        V[n + 1] = 0.5 * (v + v.T)
        VB[n + 1] = 0.5 * (vb + vb.T)
    return Phi, V


def whittle_kernel(gammas, M):
    """Multivariate Durbin-Levinson (Whittle) coefficients up to order ``M``.

    Returns
    -------
    Phi : (M+1, M+1, d, d) array
        ``Phi[n, j]`` multiplies ``X_{n+1-j}`` in the one-step predictor of
        ``X_{n+1}`` from ``X_1..X_n``.
    V : (M+1, d, d) array
        Forward prediction error covariances.
    """
    gammas = np.ascontiguousarray(gammas, dtype=np.float64)
    if gammas.shape[0] < M + 1:
        raise ValueError(f"need autocovariances up to lag {M}, got {gammas.shape[0] - 1}")
    if _accel.NUMBA_ENABLED:
        return _whittle_nb(gammas, M)
    return _whittle_np(gammas, M)


KERNEL_PAIRS = {
    "arma_recursion": (_arma_recursion_nb, _arma_recursion_np),
    "ma_filter": (_ma_filter_nb, _ma_filter_np),
    "innovations": (_innovations_nb, _innovations_np),
    "whittle": (_whittle_nb, _whittle_np),
}
