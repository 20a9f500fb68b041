"""Finite-dimensional realizations of the operator ``A`` and its functional calculus.

``A`` is a Hermitian positive-definite ``d x d`` matrix.  Everything here is
computed from one cached eigendecomposition ``A = V diag(lam) V*``; the
shifted operator ``A_xi = A + |xi|^2`` shares the eigenvectors, so cosine and
sine families are diagonal in that basis.

Convention: ``C(t) = cos(t A_xi^{1/2})`` and ``S(t) = A_xi^{-1/2} sin(t A_xi^{1/2})``,
the pair that solves ``v'' + A_xi v = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NotAbsolutePositiveError, OperatorError

HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    name: str = "A"

    @property
    def hdim(self) -> int:
        return self.matrix.shape[0]

    @property
    def positivity_margin(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def spectral_radius(self) -> float:
        return float(self.eigenvalues[-1])

    def to_eigenbasis(self, values: np.ndarray) -> np.ndarray:
        """Coordinates ``V* x`` of fiber vectors stored on the last axis."""
        return values @ self.eigenvectors.conj()

    def from_eigenbasis(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.eigenvectors.T

    def function(self, g) -> np.ndarray:
        """``V diag(g(lam)) V*`` for a scalar function ``g``."""
        V = self.eigenvectors
        return (V * g(self.eigenvalues)) @ V.conj().T


@dataclass(frozen=True, eq=False)
class ShiftedOperator:
    """``A_xi = A + shift * I`` with ``shift = |xi|^2``."""

    base: OperatorSpec
    shift: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.shift) or self.shift < 0:
            raise OperatorError(f"shift |xi|^2 must be a nonnegative real, got {self.shift}")

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.base.eigenvalues + self.shift

    @property
    def matrix(self) -> np.ndarray:
        return self.base.matrix + self.shift * np.eye(self.base.hdim)

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    def function(self, g) -> np.ndarray:
        V = self.base.eigenvectors
        return (V * g(self.eigenvalues)) @ V.conj().T


def build_operator(matrix, name: str = "A") -> OperatorSpec:
    """Validate a Hermitian positive-definite matrix and cache its eigendecomposition."""
    A = np.atleast_2d(np.asarray(matrix, dtype=complex))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise OperatorError(f"operator matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("operator matrix has non-finite entries")
    scale = np.linalg.norm(A, 2)
    if np.linalg.norm(A - A.conj().T, 2) > HERMITIAN_TOL * max(scale, 1.0):
        raise OperatorError("operator matrix is not Hermitian")
    A = 0.5 * (A + A.conj().T)
    if np.all(A.imag == 0):
        A = A.real
    lam, V = np.linalg.eigh(A)
    if lam[0] <= POSITIVITY_TOL * max(abs(lam[-1]), 1.0):
        raise NotAbsolutePositiveError(
            f"operator is not absolute positive: smallest eigenvalue {lam[0]:.6g}"
        )
    return OperatorSpec(A, lam, V, name)


def build_sturm_liouville(a, c, points: int) -> OperatorSpec:
    """Dirichlet finite-difference matrix of ``-(a u')' + c u`` on ``(0, 1)``.

    ``points`` counts all nodes including both ends (spacing ``1/(points-1)``).
    ``a`` and ``c`` are callables or arrays sampled at the nodes; ``a`` is
    averaged onto cell midpoints.  The result acts on the interior nodes.
    """
    points = int(points)
    if points < 3:
        raise OperatorError("need at least 3 nodes for a Sturm-Liouville operator")
    x = np.linspace(0.0, 1.0, points)
    h = x[1] - x[0]
    a_nodes = np.broadcast_to(a(x) if callable(a) else np.asarray(a, float), x.shape).astype(float)
    c_nodes = np.broadcast_to(c(x) if callable(c) else np.asarray(c, float), x.shape).astype(float)
    if np.any(a_nodes <= 0):
        raise OperatorError("diffusion coefficient a must be positive")
    a_mid = 0.5 * (a_nodes[1:] + a_nodes[:-1])
    diag = (a_mid[:-1] + a_mid[1:]) / h**2 + c_nodes[1:-1]
    off = -a_mid[1:-1] / h**2
    mat = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    return build_operator(mat, name=f"sturm-liouville[{points}]")


def diagonal_operator(values) -> OperatorSpec:
    return build_operator(np.diag(np.asarray(values, dtype=float)), name="diagonal")


def fractional_power(op: OperatorSpec, theta: float) -> np.ndarray:
    """``A^theta = V diag(lam^theta) V*``."""
    if theta == 0:
        return np.eye(op.hdim, dtype=op.matrix.dtype)
    return op.function(lambda lam: lam**theta)


def shifted(op: OperatorSpec, xi_squared: float) -> ShiftedOperator:
    return ShiftedOperator(op, float(xi_squared))


def cosine_at(sh: ShiftedOperator, t: float) -> np.ndarray:
    return sh.function(lambda lam: np.cos(t * np.sqrt(lam)))


def sine_at(sh: ShiftedOperator, t: float) -> np.ndarray:
    return sh.function(lambda lam: np.sin(t * np.sqrt(lam)) / np.sqrt(lam))


def modal_frequencies(op: OperatorSpec, xi_squared: np.ndarray) -> np.ndarray:
    """``omega = sqrt(lam_j + |xi|^2)`` with shape ``(*points, d)``."""
    return np.sqrt(xi_squared[..., None] + op.eigenvalues)
