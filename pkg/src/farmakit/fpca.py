"""Functional principal components: covariance, eigenpairs, scores and CPV."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fnspace import BasisSpec, FunctionSample, FunctionSeries, check_same_basis
from .hsop import KernelOperator, as_matrix

__all__ = [
    "EigenSystem",
    "ScoreSeries",
    "center",
    "estimate_covariance",
    "eigendecompose",
    "compute_scores",
    "tail_scores",
    "cpv",
    "cpv_select",
    "karhunen_loeve_truncate",
    "fpca",
]

# relative gap below which two eigenvalues count as tied
_TIE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenpairs of a covariance operator.

    ``vectors[:, j]`` are the basis coordinates of the eigenfunction
    ``nu_{j+1}``; eigenvalues are nonincreasing and nonnegative.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    basis: BasisSpec | None = None

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float, copy=True)
        V = np.array(self.vectors, dtype=float, copy=True)
        if V.ndim != 2 or lam.ndim != 1 or V.shape[1] != lam.size:
            raise ValueError("vectors must be K x m with one column per eigenvalue")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be nonincreasing")
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if self.basis is not None and V.shape[0] != self.basis.size:
            raise ValueError("eigenvector length does not match the basis")
        lam.flags.writeable = False
        V.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "vectors", V)

    @property
    def K(self) -> int:
        return self.vectors.shape[0]

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def eigenfunctions(self) -> list[FunctionSample]:
        if self.basis is None:
            raise ValueError("eigensystem has no basis attached")
        return [FunctionSample(v, self.basis) for v in self.vectors.T]

    def head(self, d: int) -> np.ndarray:
        _check_d(d, len(self))
        return self.vectors[:, :d]

    def tail(self, d: int) -> np.ndarray:
        _check_d(d, len(self), allow_zero=True)
        return self.vectors[:, d:]


@dataclass(frozen=True, eq=False)
class ScoreSeries:
    """Rows ``scores[i]`` are the first ``d`` scores of the observation with label ``start + i``."""

    scores: np.ndarray
    eig: EigenSystem | None = None
    d: int | None = None
    start: int = 0

    def __post_init__(self):
        S = np.array(self.scores, dtype=float, copy=True)
        if S.ndim != 2:
            raise ValueError("scores must be an N x d matrix")
        if not np.all(np.isfinite(S)):
            raise ValueError("scores contain non-finite values")
        d = S.shape[1] if self.d is None else int(self.d)
        if d != S.shape[1]:
            raise ValueError(f"d={d} but scores have {S.shape[1]} columns")
        if self.eig is not None and d > len(self.eig):
            raise ValueError(f"d={d} exceeds the {len(self.eig)} available eigenfunctions")
        S.flags.writeable = False
        object.__setattr__(self, "scores", S)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "start", int(self.start))

    def __len__(self) -> int:
        return self.scores.shape[0]

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self))


def _check_d(d, m, allow_zero=False):
    lo = 0 if allow_zero else 1
    if int(d) != d or not lo <= d <= m:
        raise ValueError(f"d must be an integer in {lo}..{m}, got {d}")


def center(series: FunctionSeries) -> tuple[FunctionSeries, FunctionSample]:
    """Subtract the sample mean function; returns ``(centered, mean)``."""
    return series.centered(), series.mean()


def estimate_covariance(series: FunctionSeries, divisor: str = "n") -> KernelOperator:
    """Empirical covariance operator ``(1/N) sum_n c_n c_n^T`` of a centred series.

    The data are not re-centred here. ``divisor="n-1"`` switches to the
    unbiased normalisation.
    """
    N = len(series)
    if N < 2:
        raise ValueError(f"need at least 2 observations to estimate a covariance, got {N}")
    if divisor not in ("n", "n-1"):
        raise ValueError(f"divisor must be 'n' or 'n-1', got {divisor!r}")
    C = series.coeffs.T @ series.coeffs
    C /= N if divisor == "n" else N - 1
    return KernelOperator(0.5 * (C + C.T), series.basis)


def eigendecompose(C, basis: BasisSpec | None = None, tol: float = 1e-9) -> EigenSystem:
    """Full eigensystem of a symmetric PSD operator.

    Eigenvalues are sorted nonincreasing and clipped at zero. Each eigenvector
    is signed so its largest-magnitude coordinate is positive; eigenvalues
    tied to relative precision are ordered by the position of that coordinate.

    Raises
    ------
    ValueError
        If ``C`` is asymmetric beyond ``tol`` or has an eigenvalue below ``-tol``
        (both relative to the largest entry).
    """
    if basis is None and isinstance(C, KernelOperator):
        basis = C.basis
    M = as_matrix(C)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("covariance must be a square matrix")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    asym = float(np.abs(M - M.T).max(initial=0.0))
    if asym > tol * scale:
        raise ValueError(f"covariance is not symmetric (max |C - C^T| = {asym:.3g})")
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    if lam.size and lam[0] < -tol * scale:
        raise ValueError(f"covariance is not positive semidefinite (eigenvalue {lam[0]:.3g})")
    lam = np.clip(lam, 0.0, None)

    lead = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[lead, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    V = V * signs

    # round eigenvalues onto tie groups, then order by (-lambda, lead index)
    top = lam.max(initial=0.0)
    order = np.argsort(-lam, kind="stable")
    groups = np.zeros(lam.size, dtype=int)
    g = 0
    for a, b in zip(order[:-1], order[1:]):
        if lam[a] - lam[b] > _TIE_RTOL * max(top, 1e-300):
            g += 1
        groups[b] = g
    order = np.lexsort((lead, groups))
    return EigenSystem(lam[order], V[:, order], basis)


def compute_scores(series: FunctionSeries, eig: EigenSystem, d: int) -> ScoreSeries:
    """Scores ``<X_n, nu_j>`` for ``j = 1..d``."""
    check_same_basis(series.basis, eig.basis)
    _check_d(d, len(eig))
    return ScoreSeries(series.coeffs @ eig.vectors[:, :d], eig, d, series.start)


def tail_scores(series: FunctionSeries, eig: EigenSystem, d: int) -> np.ndarray:
    """Scores on the remaining eigenfunctions ``nu_{d+1}, ...``."""
    check_same_basis(series.basis, eig.basis)
    return series.coeffs @ eig.tail(d)


def cpv(eigenvalues) -> np.ndarray:
    """Cumulative percentage of variance ``CPV(d)`` for ``d = 1..m``."""
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if not total > 0:
        raise ValueError("eigenvalues are all zero; CPV is undefined")
    return np.cumsum(lam) / total


def cpv_select(eigenvalues, threshold: float = 0.8) -> int:
    """Smallest ``d`` whose CPV reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be nonincreasing")
    c = cpv(lam)
    # tolerance so that an exact 0.8 hit is not lost to rounding
    return int(np.argmax(c >= threshold - 1e-12)) + 1


def karhunen_loeve_truncate(X: FunctionSample, eig: EigenSystem, d: int) -> FunctionSample:
    """``sum_{j<=d} <X, nu_j> nu_j``."""
    check_same_basis(X.basis, eig.basis)
    _check_d(d, len(eig), allow_zero=True)
    Vd = eig.vectors[:, :d]
    return FunctionSample(Vd @ (Vd.T @ X.coeffs), X.basis)


def fpca(series: FunctionSeries, divisor: str = "n") -> tuple[EigenSystem, FunctionSample]:
    """Centre, estimate the covariance and decompose it; returns ``(eig, mean)``."""
    centered, mean = center(series)
    C = estimate_covariance(centered, divisor)
    return eigendecompose(C, series.basis), mean
