"""Functional ARMA(p, q) models: definition, simulation, causal solution and projection.

A model lives in the coordinates of a truncated orthonormal basis: each
operator is a ``K x K`` matrix and the noise is Gaussian strong white noise
with covariance ``C_eps``. Projecting on the first ``d`` eigenfunctions of
the stationary covariance gives a ``d``-dimensional vector ARMA recursion plus
a remainder ``Delta`` that carries the influence of the discarded directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import arma_recursion, ma_filter
from .exceptions import NotCausalError
from .fnspace import BasisSpec, FunctionSeries, check_same_basis, minute_grid
from .fpca import EigenSystem, eigendecompose
from .hsop import DEFAULT_J_MAX, KernelOperator, as_matrix, check_contraction, op_norm, state_space_lift
from .varma import arma_autocovariance, companion_stationary, sample_autocov

__all__ = [
    "FarmaModel",
    "ProjectedModel",
    "ExactnessReport",
    "simulate",
    "simulate_replications",
    "psi_weights",
    "causal_solution",
    "causal_solution_statespace",
    "autocovariance",
    "true_eigensystem",
    "project_model",
    "delta_term",
    "delta_series",
    "score_residual",
    "delta_bound",
    "exactness_check",
    "model_to_text",
    "model_from_text",
    "save_model",
    "load_model",
]

DEFAULT_BURN_IN = 200


def _as_ops(ops, K, basis) -> tuple[KernelOperator, ...]:
    out = []
    for op in ops:
        if not isinstance(op, KernelOperator):
            op = KernelOperator(op, basis)
        check_same_basis(basis, op.basis)
        if op.K != K:
            raise ValueError(f"operator is {op.K}x{op.K} but the noise covariance is {K}x{K}")
        out.append(op)
    return tuple(out)


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(C)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


@dataclass(frozen=True, eq=False)
class FarmaModel:
    """``X_n = sum phi_i X_{n-i} + eps_n + sum theta_j eps_{n-j}`` with Gaussian noise.

    Parameters
    ----------
    phis, thetas : sequences of K x K matrices or KernelOperator
    noise_cov : K x K symmetric PSD matrix or KernelOperator
    basis : BasisSpec, optional
        Defaults to a Fourier basis of size K on the minute grid.
    j_max : int
        Search limit for the contraction certificate.

    Attributes
    ----------
    certificate : int or None
        Smallest ``j0`` with ``||phi_tilde^j0|| < 1`` for the state-space lift;
        ``1`` for pure moving averages.
    """

    phis: Sequence = ()
    thetas: Sequence = ()
    noise_cov: object = None
    basis: BasisSpec | None = None
    j_max: int = DEFAULT_J_MAX
    certificate: int | None = field(init=False, default=None)
    noise_kind: str = field(init=False, default="gaussian-swn")

    def __post_init__(self):
        if self.noise_cov is None:
            raise ValueError("noise_cov is required")
        C = as_matrix(self.noise_cov)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("noise covariance must be square")
        K = C.shape[0]
        basis = self.basis
        if basis is None and isinstance(self.noise_cov, KernelOperator):
            basis = self.noise_cov.basis
        if basis is None:
            basis = BasisSpec(K, minute_grid(max(1440, 2 * K)))
        if basis.size != K:
            raise ValueError(f"basis has K={basis.size} but operators are {K}x{K}")
        scale = max(1.0, float(np.abs(C).max()))
        if np.abs(C - C.T).max() > 1e-10 * scale:
            raise ValueError("noise covariance must be symmetric")
        if np.linalg.eigvalsh(0.5 * (C + C.T))[0] < -1e-10 * scale:
            raise ValueError("noise covariance must be positive semidefinite")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "noise_cov", KernelOperator(0.5 * (C + C.T), basis))
        object.__setattr__(self, "phis", _as_ops(self.phis, K, basis))
        object.__setattr__(self, "thetas", _as_ops(self.thetas, K, basis))
        if self.phis:
            lifted, _ = state_space_lift(self.phis)
            cert = check_contraction(lifted, self.j_max)
        else:
            cert = 1
        object.__setattr__(self, "certificate", cert)

    @property
    def p(self) -> int:
        return len(self.phis)

    @property
    def q(self) -> int:
        return len(self.thetas)

    @property
    def K(self) -> int:
        return self.noise_cov.K

    @property
    def is_causal(self) -> bool:
        return self.certificate is not None

    @property
    def phi_array(self) -> np.ndarray:
        return np.array([op.mat for op in self.phis]).reshape(self.p, self.K, self.K)

    @property
    def theta_array(self) -> np.ndarray:
        return np.array([op.mat for op in self.thetas]).reshape(self.q, self.K, self.K)

    @property
    def sigma2(self) -> float:
        """``E||eps||^2 = trace(C_eps)``."""
        return float(np.trace(self.noise_cov.mat))

    def noise_sqrt(self) -> np.ndarray:
        return _psd_sqrt(self.noise_cov.mat)

    def require_causal(self):
        if not self.is_causal:
            raise NotCausalError(
                f"no contraction certificate up to j_max={self.j_max}: no j0 with "
                "||phi_tilde^j0|| < 1 was found; check the operators with check_contraction"
            )


# ---------------------------------------------------------------- simulation

def _draw_noise(model: FarmaModel, R: int, T: int, rng) -> np.ndarray:
    return rng.standard_normal((R, T, model.K)) @ model.noise_sqrt()


def simulate_replications(model: FarmaModel, R: int, n: int, burn_in: int = DEFAULT_BURN_IN, seed=None):
    """``R`` independent paths as arrays.

    Returns
    -------
    X : (R, n, K) array
        Observations with labels ``0..n-1``.
    eps : (R, burn_in + n, K) array
        The full noise, labels ``-burn_in..n-1``.
    """
    model.require_causal()
    if burn_in < 0 or n < 1 or R < 1:
        raise ValueError("need R >= 1, n >= 1 and burn_in >= 0")
    rng = np.random.default_rng(seed)
    eps = _draw_noise(model, R, burn_in + n, rng)
    X = arma_recursion(model.phi_array, model.theta_array, eps)
    return X[:, burn_in:], eps


def simulate(model: FarmaModel, n: int, burn_in: int = DEFAULT_BURN_IN, seed=None):
    """Simulate one path from the zero initial state, discarding ``burn_in`` steps.

    Returns
    -------
    series : FunctionSeries
        Labels ``0..n-1``.
    noise : FunctionSeries
        All noise draws, labels ``-burn_in..n-1``.

    Raises
    ------
    NotCausalError
        If the model carries no contraction certificate.
    """
    X, eps = simulate_replications(model, 1, n, burn_in, seed)
    return FunctionSeries(X[0], model.basis, 0), FunctionSeries(eps[0], model.basis, -burn_in)


# ---------------------------------------------------------------- causal solution

def psi_weights(phi: np.ndarray, thetas: np.ndarray, J: int) -> np.ndarray:
    """Weights of ``X_n = sum_{j<=J} psi_j eps_{n-j}`` for an ARMA(1, q).

    ``psi_j = sum_{k<=j} phi^{j-k} theta_k`` for ``j < q`` and
    ``psi_j = phi^{j-q} beta`` for ``j >= q``, where
    ``beta = sum_{k=0}^q phi^{q-k} theta_k`` and ``theta_0 = I``.
    """
    K = phi.shape[0]
    q = len(thetas)
    th = [np.eye(K)] + [np.asarray(t, dtype=float) for t in thetas]
    powers = [np.eye(K)]
    for _ in range(max(q, 1)):
        powers.append(powers[-1] @ phi)
    psis = np.empty((J + 1, K, K))
    for j in range(min(q, J + 1)):
        psis[j] = sum(powers[j - k] @ th[k] for k in range(j + 1))
    beta = sum(powers[q - k] @ th[k] for k in range(q + 1))
    P = beta
    for j in range(q, J + 1):
        psis[j] = P
        P = phi @ P
    return psis


def causal_solution(model: FarmaModel, noise: FunctionSeries, J: int) -> FunctionSeries:
    """Evaluate the explicit MA(infinity) solution of a FARMA(1, q) truncated at lag ``J``.

    The output has the labels of ``noise``; lags reaching before the first
    noise label are left out of the sum.
    """
    if model.p != 1:
        raise ValueError(
            f"causal_solution needs p = 1, got p = {model.p}; use causal_solution_statespace"
        )
    model.require_causal()
    check_same_basis(model.basis, noise.basis)
    if J < model.q:
        raise ValueError(f"truncation J={J} must be at least q={model.q}")
    psis = psi_weights(model.phis[0].mat, model.theta_array, J)
    X = ma_filter(psis, noise.coeffs[None])[0]
    return FunctionSeries(X, noise.basis, noise.start)


def causal_solution_statespace(model: FarmaModel, noise: FunctionSeries, J: int) -> FunctionSeries:
    """Causal solution for any ``p >= 1`` through the lift to ``H^p``.

    The lifted ARMA(1, q) weights are computed on ``H^p`` and the first block
    (the projection ``P_1``) is applied to the noise.
    """
    if model.p < 1:
        raise ValueError("state-space causal solution needs p >= 1")
    model.require_causal()
    check_same_basis(model.basis, noise.basis)
    if J < model.q:
        raise ValueError(f"truncation J={J} must be at least q={model.q}")
    phi_t, theta_t = state_space_lift(model.phis, model.thetas)
    psis = psi_weights(phi_t.mat, np.array([t.mat for t in theta_t]), J)
    K = model.K
    X = ma_filter(np.ascontiguousarray(psis[:, :K, :K]), noise.coeffs[None])[0]
    return FunctionSeries(X, noise.basis, noise.start)


# ---------------------------------------------------------------- second moments

def autocovariance(model: FarmaModel, max_lag: int) -> np.ndarray:
    """Stationary lag covariances ``C_h = E[X_{n+h} X_n^T]`` in coordinates."""
    model.require_causal()
    return arma_autocovariance(model.phi_array, model.theta_array, model.noise_cov.mat, max_lag)


def true_eigensystem(model: FarmaModel) -> EigenSystem:
    """Eigenpairs of the stationary covariance operator ``C_X``."""
    return eigendecompose(autocovariance(model, 0)[0], model.basis)


# ---------------------------------------------------------------- projection

@dataclass(frozen=True, eq=False)
class ProjectedModel:
    """Blocks of the model operators in the eigenbasis ``nu_1..nu_K``.

    ``Phi[i]`` is ``d x d`` with entries ``<phi_i nu_l', nu_l>``;
    ``Phi_inf[i]`` is the ``d x (K-d)`` block acting on the tail scores.
    """

    d: int
    Phi: np.ndarray
    Theta: np.ndarray
    Phi_inf: np.ndarray
    Theta_inf: np.ndarray
    E_cov: np.ndarray
    eig: EigenSystem

    @property
    def p(self) -> int:
        return self.Phi.shape[0]

    @property
    def q(self) -> int:
        return self.Theta.shape[0]


def _conjugate(stack: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.einsum("ka,ikl,lb->iab", V, stack, V)


def _full_eig(eig: EigenSystem, K: int):
    if eig.vectors.shape != (K, K):
        raise ValueError(f"need a complete eigensystem of size {K}, got {eig.vectors.shape}")


def project_model(model: FarmaModel, eig: EigenSystem, d: int) -> ProjectedModel:
    """Conjugate every operator into the eigenbasis and cut the head and tail blocks."""
    check_same_basis(model.basis, eig.basis)
    _full_eig(eig, model.K)
    if int(d) != d or not 1 <= d <= model.K:
        raise ValueError(f"d must be in 1..{model.K}, got {d}")
    V = eig.vectors
    P = _conjugate(model.phi_array, V)
    T = _conjugate(model.theta_array, V)
    C = V[:, :d].T @ model.noise_cov.mat @ V[:, :d]
    return ProjectedModel(
        d=int(d),
        Phi=P[:, :d, :d].copy(),
        Theta=T[:, :d, :d].copy(),
        Phi_inf=P[:, :d, d:].copy(),
        Theta_inf=T[:, :d, d:].copy(),
        E_cov=0.5 * (C + C.T),
        eig=eig,
    )


def delta_term(pm: ProjectedModel, tail_scores, tail_noise, n: int) -> np.ndarray:
    """``Delta_{n-1} = sum_i Phi_i^inf X^inf_{n-i} + sum_j Theta_j^inf E^inf_{n-j}``.

    ``tail_scores[t]`` and ``tail_noise[t]`` are the tail coordinates at
    position ``t``; ``n`` is a position in those arrays.
    """
    Xt = np.asarray(tail_scores, dtype=float)
    Et = np.asarray(tail_noise, dtype=float)
    need = max(pm.p, pm.q)
    if n - need < 0 or n > min(len(Xt), len(Et)):
        raise ValueError(f"delta_term at position {n} needs {need} earlier observations")
    out = np.zeros(pm.d)
    for i in range(pm.p):
        out += pm.Phi_inf[i] @ Xt[n - 1 - i]
    for j in range(pm.q):
        out += pm.Theta_inf[j] @ Et[n - 1 - j]
    return out


def delta_series(pm: ProjectedModel, tail_scores, tail_noise) -> np.ndarray:
    """``delta_term`` at every position ``n = max(p, q) .. N-1`` as an array."""
    Xt = np.asarray(tail_scores, dtype=float)
    Et = np.asarray(tail_noise, dtype=float)
    N = min(len(Xt), len(Et))
    s = max(pm.p, pm.q)
    out = np.zeros((N - s, pm.d))
    for i in range(pm.p):
        out += Xt[s - 1 - i:N - 1 - i] @ pm.Phi_inf[i].T
    for j in range(pm.q):
        out += Et[s - 1 - j:N - 1 - j] @ pm.Theta_inf[j].T
    return out


def score_residual(pm: ProjectedModel, scores, noise_scores) -> np.ndarray:
    """``X_n - sum Phi_i X_{n-i} - E_n - sum Theta_j E_{n-j}`` for ``n = max(p, q) .. N-1``."""
    X = np.asarray(scores, dtype=float)
    E = np.asarray(noise_scores, dtype=float)
    N = min(len(X), len(E))
    s = max(pm.p, pm.q)
    out = X[s:N] - E[s:N]
    for i in range(pm.p):
        out = out - X[s - 1 - i:N - 1 - i] @ pm.Phi[i].T
    for j in range(pm.q):
        out = out - E[s - 1 - j:N - 1 - j] @ pm.Theta[j].T
    return out


def delta_bound(model: FarmaModel, eig: EigenSystem, d: int, factor: float | None = None) -> float:
    """Upper bound on ``E||Delta_{n-1}||^2``.

    ``factor * (sum_i ||phi_i||^2 * sum_{l>d} lambda_l
    + sum_j ||theta_j||^2 * sum_{l>d} <C_eps nu_l, nu_l>)``.

    The default factor ``max(2, p + q)`` comes from
    ``||a_1 + ... + a_m||^2 <= m sum ||a_k||^2``; it equals 2 for ARMA(1, 1).
    """
    check_same_basis(model.basis, eig.basis)
    _full_eig(eig, model.K)
    if int(d) != d or not 0 <= d <= model.K:
        raise ValueError(f"d must be in 0..{model.K}, got {d}")
    if factor is None:
        factor = max(2, model.p + model.q)
    tail_lam = float(eig.eigenvalues[d:].sum())
    Vt = eig.vectors[:, d:]
    tail_noise = float(np.einsum("kl,km,ml->", Vt, model.noise_cov.mat, Vt)) if Vt.size else 0.0
    phi_sq = sum(op_norm(op) ** 2 for op in model.phis)
    theta_sq = sum(op_norm(op) ** 2 for op in model.thetas)
    return float(factor * (phi_sq * tail_lam + theta_sq * max(tail_noise, 0.0)))


# ---------------------------------------------------------------- exact reduction

@dataclass(frozen=True)
class ExactnessReport:
    """Diagnostics for an exact vector ARMA reduction on ``span(nu_1..nu_d)``.

    Attributes
    ----------
    exact : bool
        All tail compressions of the ``phi_i`` vanish (Frobenius < 1e-10).
    compression_norms : tuple of float
        Frobenius norms of the tail-tail block of each ``phi_i``.
    coupling_norms : tuple of float
        Frobenius norms of the head-tail blocks ``Phi_i^inf``. When these are
        nonzero the scores are still a vector ARMA but of larger orders.
    residual_autocov : (q+4, d, d) array
        Lag covariances of ``R_n = X_n - sum Phi_i X_{n-i}`` implied by the model.
    empirical_autocov : array or None
        Sample lag covariances of the same residual on supplied scores.
    """

    exact: bool
    compression_norms: tuple
    coupling_norms: tuple
    residual_autocov: np.ndarray
    empirical_autocov: np.ndarray | None = None

    @property
    def orders_preserved(self) -> bool:
        return self.exact and all(c < 1e-10 for c in self.coupling_norms)


def residual_ma_autocov(model: FarmaModel, eig: EigenSystem, d: int, max_lag: int) -> np.ndarray:
    """Lag covariances of the scores of ``R_n = sum_{j=0}^q theta_j eps_{n-j}``."""
    th = [np.eye(model.K)] + [op.mat for op in model.thetas]
    C = model.noise_cov.mat
    Vd = eig.vectors[:, :d]
    out = np.zeros((max_lag + 1, d, d))
    for h in range(min(max_lag, model.q) + 1):
        M = sum(th[j + h] @ C @ th[j].T for j in range(model.q - h + 1))
        out[h] = Vd.T @ M @ Vd
    return out


def exactness_check(model: FarmaModel, eig: EigenSystem, d: int, scores=None) -> ExactnessReport:
    """Check whether the ``d`` leading scores follow a vector ARMA(p, q) exactly.

    Parameters
    ----------
    scores : (N, d) array, optional
        Observed scores; if given, the sample lag covariances of the AR
        residual ``X_n - sum Phi_i X_{n-i}`` at lags ``0..q+3`` are reported.
    """
    pm = project_model(model, eig, d)
    V = eig.vectors
    Vt = V[:, d:]
    comp = tuple(float(np.linalg.norm(Vt.T @ op.mat @ Vt)) for op in model.phis)
    coup = tuple(float(np.linalg.norm(B)) for B in pm.Phi_inf)
    lags = model.q + 3
    theo = residual_ma_autocov(model, eig, d, lags)
    emp = None
    if scores is not None:
        X = np.asarray(scores, dtype=float)
        R = X[model.p:].copy()
        for i in range(model.p):
            R -= X[model.p - 1 - i:len(X) - 1 - i] @ pm.Phi[i].T
        emp = sample_autocov(R, lags)
    return ExactnessReport(all(c < 1e-10 for c in comp), comp, coup, theo, emp)


def ma_cutoff_se(autocov: np.ndarray, q: int, N: int) -> float:
    """Standard error of ``||C_hat_h||_F`` for a vector MA(q) at lags ``h > q``.

    Bartlett's formula gives ``Var(C_hat_h[a, b]) ~ (1/N) sum_{|k|<=q} C_k[a, a] C_k[b, b]``;
    summing over entries gives the mean square of the Frobenius norm.
    """
    diag = np.array([np.diag(autocov[k]) for k in range(q + 1)])
    tot = np.outer(diag[0], diag[0])
    for k in range(1, q + 1):
        tot = tot + 2 * np.outer(diag[k], diag[k])
    return float(np.sqrt(tot.sum() / N))


def projected_stationarity(model: FarmaModel, eig: EigenSystem, d: int) -> tuple[bool, float]:
    """Companion spectral radius of the projected ``Phi_i``."""
    pm = project_model(model, eig, d)
    return companion_stationary(pm.Phi)


# ---------------------------------------------------------------- text format

def _fmt_matrix(M: np.ndarray) -> str:
    rows = ",\n  ".join("[" + ", ".join(repr(float(x)) for x in row) + "]" for row in M)
    return "[\n  " + rows + ",\n]"


def model_to_text(model: FarmaModel) -> str:
    """Serialise to a TOML document; floats are written with ``repr`` for exact round-trips."""
    lines = [
        "# farmakit functional ARMA model",
        f"p = {model.p}",
        f"q = {model.q}",
        f"K = {model.K}",
        f'basis = "{model.basis.kind}"',
    ]
    grid = model.basis.grid
    if np.array_equal(grid, minute_grid(grid.size)):
        lines.append(f"grid_points = {grid.size}")
    else:
        lines.append("grid = [" + ", ".join(repr(float(t)) for t in grid) + "]")
    lines.append(f"j_max = {model.j_max}")
    lines.append("")
    lines.append("noise_cov = " + _fmt_matrix(model.noise_cov.mat))
    for name, ops in (("phi", model.phis), ("theta", model.thetas)):
        for op in ops:
            lines.append("")
            lines.append(f"[[{name}]]")
            lines.append("matrix = " + _fmt_matrix(op.mat))
    return "\n".join(lines) + "\n"


def _toml_loads(text: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    return tomllib.loads(text)


def model_from_text(text: str) -> FarmaModel:
    """Inverse of :func:`model_to_text`."""
    try:
        doc = _toml_loads(text)
    except Exception as exc:
        raise ValueError(f"cannot parse model file: {exc}") from None
    try:
        p, q, K = int(doc["p"]), int(doc["q"]), int(doc["K"])
        kind = doc.get("basis", "fourier")
        grid = np.array(doc["grid"], dtype=float) if "grid" in doc else minute_grid(int(doc.get("grid_points", 1440)))
        basis = BasisSpec(K, grid, kind)
        C = np.array(doc["noise_cov"], dtype=float)
        phis = [np.array(b["matrix"], dtype=float) for b in doc.get("phi", [])]
        thetas = [np.array(b["matrix"], dtype=float) for b in doc.get("theta", [])]
    except KeyError as exc:
        raise ValueError(f"model file is missing key {exc}") from None
    if len(phis) != p or len(thetas) != q:
        raise ValueError(f"model file declares p={p}, q={q} but lists {len(phis)} phi and {len(thetas)} theta blocks")
    for M in phis + thetas + [C]:
        if M.shape != (K, K):
            raise ValueError(f"matrix of shape {M.shape} does not match K={K}")
    return FarmaModel(phis, thetas, C, basis, j_max=int(doc.get("j_max", DEFAULT_J_MAX)))


def save_model(model: FarmaModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> FarmaModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
