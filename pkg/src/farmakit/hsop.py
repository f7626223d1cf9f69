"""Bounded operators on the basis-truncated space, as coordinate matrices.

An operator ``Psi`` is stored as the matrix ``A`` with ``A[l, k] = <Psi e_k, e_l>``
so that applying it is a matrix-vector product on coefficients. Norms are
those of the truncated operator: the spectral norm is a lower bound for the
operator norm on all of L2[0, 1], and exact when the model is specified in
coordinates to begin with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .fnspace import BasisSpec, FunctionSample, check_same_basis

__all__ = [
    "KernelOperator",
    "StackedOperator",
    "op_norm",
    "hs_norm",
    "state_space_lift",
    "check_contraction",
    "geometric_decay_constants",
    "as_matrix",
]

DEFAULT_J_MAX = 64


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Bounded linear operator given by its K x K coordinate matrix."""

    mat: np.ndarray
    basis: BasisSpec | None = None

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator matrix has non-finite entries")
        if self.basis is not None and mat.shape[0] != self.basis.size:
            raise ValueError(f"matrix is {mat.shape[0]}x{mat.shape[0]} but basis has K={self.basis.size}")
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    @property
    def K(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def identity(cls, K: int, basis: BasisSpec | None = None) -> KernelOperator:
        return cls(np.eye(K), basis)

    @classmethod
    def zero(cls, K: int, basis: BasisSpec | None = None) -> KernelOperator:
        return cls(np.zeros((K, K)), basis)

    def apply(self, f: FunctionSample) -> FunctionSample:
        check_same_basis(self.basis, f.basis)
        return FunctionSample(self.mat @ f.coeffs, f.basis)

    def __call__(self, f: FunctionSample) -> FunctionSample:
        return self.apply(f)

    def __matmul__(self, other: KernelOperator) -> KernelOperator:
        check_same_basis(self.basis, other.basis)
        return KernelOperator(self.mat @ other.mat, self.basis or other.basis)

    def __add__(self, other: KernelOperator) -> KernelOperator:
        check_same_basis(self.basis, other.basis)
        return KernelOperator(self.mat + other.mat, self.basis or other.basis)

    def __mul__(self, scalar: float) -> KernelOperator:
        return KernelOperator(self.mat * float(scalar), self.basis)

    __rmul__ = __mul__

    def power(self, j: int) -> KernelOperator:
        return KernelOperator(np.linalg.matrix_power(self.mat, j), self.basis)

    @property
    def adjoint(self) -> KernelOperator:
        return KernelOperator(self.mat.T, self.basis)


@dataclass(frozen=True, eq=False)
class StackedOperator:
    """Operator on the product space H^p held as a (pK x pK) block matrix."""

    mat: np.ndarray
    p: int
    basis: BasisSpec | None = None

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % self.p:
            raise ValueError(f"block matrix of shape {mat.shape} does not split into {self.p}x{self.p} blocks")
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    @property
    def K(self) -> int:
        return self.mat.shape[0] // self.p

    def block(self, i: int, j: int) -> KernelOperator:
        K = self.K
        return KernelOperator(self.mat[i * K:(i + 1) * K, j * K:(j + 1) * K], self.basis)

    @property
    def blocks(self) -> list[list[KernelOperator]]:
        return [[self.block(i, j) for j in range(self.p)] for i in range(self.p)]


OperatorLike = Union[KernelOperator, StackedOperator, np.ndarray]


def as_matrix(A: OperatorLike) -> np.ndarray:
    if isinstance(A, (KernelOperator, StackedOperator)):
        return A.mat
    return np.asarray(A, dtype=float)


def op_norm(A: OperatorLike) -> float:
    """Largest singular value of the coordinate matrix."""
    M = as_matrix(A)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hs_norm(A: OperatorLike) -> float:
    """Hilbert-Schmidt (Frobenius) norm of the coordinate matrix."""
    return float(np.linalg.norm(as_matrix(A), "fro"))


def state_space_lift(
    phis: Sequence[KernelOperator], thetas: Sequence[KernelOperator] = ()
) -> tuple[StackedOperator, list[StackedOperator]]:
    """Rewrite an ARMA(p, q) on H as an ARMA(1, q) on H^p.

    The AR part becomes the block companion operator with ``phi_1 .. phi_p``
    in the first block row and identities on the sub-diagonal. Each
    ``theta_j`` is placed in block (0, 0) of an otherwise zero operator.
    """
    if len(phis) == 0:
        raise ValueError("state_space_lift needs at least one autoregressive operator")
    basis = phis[0].basis
    for op in list(phis) + list(thetas):
        check_same_basis(basis, op.basis)
    K = phis[0].K
    p = len(phis)
    big = np.zeros((p * K, p * K))
    for i, phi in enumerate(phis):
        if phi.K != K:
            raise ValueError("all operators must have the same size")
        big[:K, i * K:(i + 1) * K] = phi.mat
    for i in range(1, p):
        big[i * K:(i + 1) * K, (i - 1) * K:i * K] = np.eye(K)
    lifted = []
    for theta in thetas:
        t = np.zeros((p * K, p * K))
        t[:K, :K] = theta.mat
        lifted.append(StackedOperator(t, p, basis))
    return StackedOperator(big, p, basis), lifted


def check_contraction(A: OperatorLike, j_max: int = DEFAULT_J_MAX) -> int | None:
    """Smallest ``j0 <= j_max`` with ``op_norm(A**j0) < 1``, or ``None``.

    Any such ``j0`` certifies geometric decay ``||A^j|| <= a b^j`` with
    ``b < 1`` (see :func:`geometric_decay_constants`).
    """
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    M = as_matrix(A)
    P = M.copy()
    for j in range(1, j_max + 1):
        if op_norm(P) < 1.0:
            return j
        if j < j_max:
            P = P @ M
            if not np.all(np.isfinite(P)):
                return None
    return None


def geometric_decay_constants(A: OperatorLike, j0: int) -> tuple[float, float]:
    """Constants ``(a, b)`` with ``||A^j|| <= a * b**j`` for all ``j >= 0``.

    Built from ``c = ||A^j0|| < 1``: ``b = c**(1/j0)`` and
    ``a = max_{r < j0} ||A^r|| / b**(j0 - 1)``.
    """
    M = as_matrix(A)
    c = op_norm(np.linalg.matrix_power(M, j0))
    if not c < 1.0:
        raise ValueError(f"||A^{j0}|| = {c:.6g} is not below 1")
    b = c ** (1.0 / j0) if c > 0 else 0.0
    norms = [op_norm(np.linalg.matrix_power(M, r)) for r in range(j0)]
    if b == 0.0:
        # nilpotent: ||A^j|| = 0 for j >= j0; any b in (0, 1) works
        b = 0.5
    a = max(norms) / b ** (j0 - 1)
    return a, b
