"""Functions on [0, 1] represented in a finite orthonormal Fourier basis.

All Hilbert-space arithmetic is done on coefficient vectors. By Parseval,
inner products and norms of basis expansions are plain Euclidean operations
on the coefficients, so the continuum only enters when raw samples are
smoothed onto the basis or when a function is evaluated at points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .exceptions import BasisMismatchError, RankDeficientError

__all__ = [
    "BasisSpec",
    "FunctionSample",
    "FunctionSeries",
    "fourier_design",
    "gram_matrix",
    "minute_grid",
    "inner_product",
    "norm",
    "smooth_to_basis",
    "smooth_series",
    "evaluate",
    "check_same_basis",
]

# odd so the basis holds whole sin/cos pairs; an even K drops the last cosine
DEFAULT_K = 31
SQRT2 = np.sqrt(2.0)


def minute_grid(points_per_day: int = 1440) -> np.ndarray:
    """Sampling grid ``m / points_per_day`` for ``m = 0 .. points_per_day - 1``."""
    if points_per_day < 1:
        raise ValueError("points_per_day must be positive")
    return np.arange(points_per_day, dtype=float) / points_per_day


def _frequencies(K: int) -> tuple[np.ndarray, np.ndarray]:
    # (kind, frequency) per column: kind 0 = constant, 1 = sin, 2 = cos
    idx = np.arange(K)
    freq = (idx + 1) // 2
    kind = np.where(idx == 0, 0, np.where(idx % 2 == 1, 1, 2))
    return kind, freq


def fourier_design(t, K: int) -> np.ndarray:
    """Evaluate the first ``K`` Fourier basis functions at points ``t``.

    Columns are ordered ``1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t),
    sqrt2 sin(4 pi t), ...``.

    Returns
    -------
    ndarray of shape (len(t), K)
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    kind, freq = _frequencies(K)
    arg = 2.0 * np.pi * np.outer(t, freq)
    out = np.where(kind == 1, SQRT2 * np.sin(arg), SQRT2 * np.cos(arg))
    out[:, kind == 0] = 1.0
    return out


def _int_cos(m: np.ndarray) -> np.ndarray:
    """Closed form of the integral of cos(2 pi m t) over [0, 1]."""
    m = np.asarray(m, dtype=float)
    safe = np.where(m == 0, 1.0, m)
    return np.where(m == 0, 1.0, np.sin(2 * np.pi * m) / (2 * np.pi * safe))


def _int_sin(m: np.ndarray) -> np.ndarray:
    """Closed form of the integral of sin(2 pi m t) over [0, 1]."""
    m = np.asarray(m, dtype=float)
    safe = np.where(m == 0, 1.0, m)
    return np.where(m == 0, 0.0, (1.0 - np.cos(2 * np.pi * m)) / (2 * np.pi * safe))


def gram_matrix(K: int) -> np.ndarray:
    """Gram matrix of the Fourier basis from closed-form integrals.

    Products of trigonometric functions are reduced with product-to-sum
    identities and integrated analytically, so no quadrature is involved.
    """
    kind, freq = _frequencies(K)
    ka, kb = np.meshgrid(kind, kind, indexing="ij")
    a, b = np.meshgrid(freq, freq, indexing="ij")
    # scale factors: constant has amplitude 1, the rest sqrt2
    amp = np.where(ka == 0, 1.0, SQRT2) * np.where(kb == 0, 1.0, SQRT2)
    # treat the constant as cos(0 t)
    ca = np.where(ka == 0, 2, ka)
    cb = np.where(kb == 0, 2, kb)
    ss = 0.5 * (_int_cos(a - b) - _int_cos(a + b))
    cc = 0.5 * (_int_cos(a - b) + _int_cos(a + b))
    sc = 0.5 * (_int_sin(a + b) + _int_sin(a - b))
    cs = 0.5 * (_int_sin(a + b) - _int_sin(a - b))
    G = np.where((ca == 1) & (cb == 1), ss, 0.0)
    G = np.where((ca == 2) & (cb == 2), cc, G)
    G = np.where((ca == 1) & (cb == 2), sc, G)
    G = np.where((ca == 2) & (cb == 1), cs, G)
    return amp * G


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """A truncated Fourier basis plus the grid raw data live on.

    Parameters
    ----------
    size : int
        Number of basis functions ``K``. Odd values give complete sin/cos pairs.
    grid : array_like, optional
        Strictly increasing points in [0, 1]; defaults to the 1440-point minute grid.
    kind : str
        Only ``"fourier"`` is supported.
    """

    size: int = DEFAULT_K
    grid: np.ndarray = field(default_factory=minute_grid)
    kind: str = "fourier"

    def __post_init__(self):
        if self.kind != "fourier":
            raise ValueError(f"unsupported basis kind {self.kind!r}")
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"basis size must be a positive integer, got {self.size!r}")
        grid = np.array(self.grid, dtype=float, copy=True).ravel()
        if grid.size == 0:
            raise ValueError("grid must be non-empty")
        if np.any(grid < 0) or np.any(grid > 1):
            raise ValueError("grid points must lie in [0, 1]")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        grid.flags.writeable = False
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "grid", grid)

    @property
    def K(self) -> int:
        return self.size

    def design(self, t=None) -> np.ndarray:
        """Basis evaluated at ``t`` (default: the grid)."""
        return fourier_design(self.grid if t is None else t, self.size)

    def __eq__(self, other):
        if not isinstance(other, BasisSpec):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.size == other.size
            and np.array_equal(self.grid, other.grid)
        )

    def __hash__(self):
        return hash((self.kind, self.size, self.grid.size, float(self.grid[0]), float(self.grid[-1])))

    def __repr__(self):
        return f"BasisSpec(kind={self.kind!r}, size={self.size}, grid=<{self.grid.size} points>)"


def check_same_basis(a: BasisSpec | None, b: BasisSpec | None) -> None:
    if a is None or b is None or a is b:
        return
    if a != b:
        raise BasisMismatchError(f"basis mismatch: {a!r} vs {b!r}")


def _frozen(arr, ndim: int, name: str) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    if out.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class FunctionSample:
    """One element of L2[0, 1] given by its basis coordinates."""

    coeffs: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        coeffs = _frozen(self.coeffs, 1, "coeffs")
        if coeffs.size != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficients, got {coeffs.size}")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, t):
        return evaluate(self, t)

    def __add__(self, other: FunctionSample) -> FunctionSample:
        check_same_basis(self.basis, other.basis)
        return FunctionSample(self.coeffs + other.coeffs, self.basis)

    def __sub__(self, other: FunctionSample) -> FunctionSample:
        check_same_basis(self.basis, other.basis)
        return FunctionSample(self.coeffs - other.coeffs, self.basis)

    def __mul__(self, scalar: float) -> FunctionSample:
        return FunctionSample(self.coeffs * float(scalar), self.basis)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class FunctionSeries:
    """Consecutive functional observations sharing a basis.

    ``coeffs[i]`` holds the coordinates of the observation with time label
    ``start + i``.
    """

    coeffs: np.ndarray
    basis: BasisSpec
    start: int = 0

    def __post_init__(self):
        coeffs = _frozen(self.coeffs, 2, "coeffs")
        if coeffs.shape[1] != self.basis.size:
            raise ValueError(f"expected {self.basis.size} columns, got {coeffs.shape[1]}")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "start", int(self.start))

    @classmethod
    def from_samples(cls, samples: Sequence[FunctionSample], start: int = 0) -> FunctionSeries:
        if not samples:
            raise ValueError("need at least one sample")
        basis = samples[0].basis
        for s in samples[1:]:
            check_same_basis(basis, s.basis)
        return cls(np.stack([s.coeffs for s in samples]), basis, start)

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start, self.start + len(self))

    @property
    def samples(self) -> list[FunctionSample]:
        return list(self)

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __iter__(self) -> Iterator[FunctionSample]:
        for row in self.coeffs:
            yield FunctionSample(row, self.basis)

    def __getitem__(self, i):
        if isinstance(i, slice):
            lo, _, step = i.indices(len(self))
            if step != 1:
                raise ValueError("series slices must be contiguous")
            return FunctionSeries(self.coeffs[i], self.basis, self.start + lo)
        return FunctionSample(self.coeffs[i], self.basis)

    def at(self, label: int) -> FunctionSample:
        """Sample with time label ``label``."""
        pos = label - self.start
        if not 0 <= pos < len(self):
            raise IndexError(f"time label {label} outside {self.start}..{self.start + len(self) - 1}")
        return FunctionSample(self.coeffs[pos], self.basis)

    def mean(self) -> FunctionSample:
        return FunctionSample(self.coeffs.mean(axis=0), self.basis)

    def centered(self) -> FunctionSeries:
        return FunctionSeries(self.coeffs - self.coeffs.mean(axis=0), self.basis, self.start)


def inner_product(f: FunctionSample, g: FunctionSample) -> float:
    """L2 inner product, exact in coordinates."""
    check_same_basis(f.basis, g.basis)
    return float(f.coeffs @ g.coeffs)


def norm(f: FunctionSample) -> float:
    return float(np.sqrt(f.coeffs @ f.coeffs))


def _lstsq_projector(basis: BasisSpec, n_points: int):
    if n_points != basis.grid.size:
        raise ValueError(f"raw data has {n_points} points but the grid has {basis.grid.size}")
    B = basis.design()
    if basis.grid.size < basis.size or np.linalg.matrix_rank(B) < basis.size:
        raise RankDeficientError(
            f"design is rank deficient: K={basis.size} basis functions on a grid of "
            f"{basis.grid.size} points"
        )
    return B


def smooth_to_basis(raw, basis: BasisSpec) -> FunctionSample:
    """Least-squares projection of values sampled on ``basis.grid`` onto the basis."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1:
        raise ValueError("raw must be one-dimensional; use smooth_series for several curves")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw data contains non-finite values; interpolate missing values first")
    B = _lstsq_projector(basis, raw.size)
    coeffs, *_ = np.linalg.lstsq(B, raw, rcond=None)
    return FunctionSample(coeffs, basis)


def smooth_series(raw, basis: BasisSpec, start: int = 0) -> FunctionSeries:
    """Smooth each row of ``raw`` (days x grid points) onto the basis."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError("raw must be two-dimensional (curves x grid points)")
    if not np.all(np.isfinite(raw)):
        raise ValueError("raw data contains non-finite values; interpolate missing values first")
    B = _lstsq_projector(basis, raw.shape[1])
    coeffs, *_ = np.linalg.lstsq(B, raw.T, rcond=None)
    return FunctionSeries(coeffs.T, basis, start)


def evaluate(f: FunctionSample, t):
    """Value of ``f`` at ``t`` (scalar or array) using analytic basis evaluation."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
        raise ValueError("evaluation points must lie in [0, 1]")
    values = fourier_design(arr.ravel(), f.basis.size) @ f.coeffs
    if arr.ndim == 0:
        return float(values[0])
    return values.reshape(arr.shape)
