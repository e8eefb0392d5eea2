"""Symmetric eigendecomposition (cyclic Jacobi), heat kernel and semigroup action."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import FormMatrix
from .core import Grid1D, GTildeFn, gtilde
from .errors import (
    ContractError,
    DomainError,
    NumericalError,
    PropertyViolation,
    ResolutionWarning,
)

JACOBI_MAX_SWEEPS = 100
EXP_UNDERFLOW_CAP = 700.0  # exp(-x) underflows to exact zero well before x = 745


def _jacobi_sweeps_python(A: np.ndarray, V: np.ndarray, tol: float, max_sweeps: int) -> int:
    """Cyclic Jacobi sweeps with row-vectorized rotations; numpy fallback."""
    n = A.shape[0]
    skip = tol / (2.0 * n)
    for sweep in range(max_sweeps):
        off = math.sqrt(2.0) * np.linalg.norm(A[np.triu_indices(n, 1)])
        if off <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return -1


try:  # pragma: no cover - exercised implicitly
    from numba import njit

    @njit(cache=True)
    def _jacobi_sweeps_numba(A, V, tol, max_sweeps):  # pragma: no cover
        n = A.shape[0]
        skip = tol / (2.0 * n)
        for sweep in range(max_sweeps):
            off = 0.0
            for i in range(n - 1):
                for j in range(i + 1, n):
                    off += A[i, j] * A[i, j]
            if math.sqrt(2.0 * off) <= tol:
                return sweep
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if abs(apq) <= skip:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = A[k, p]
                        akq = A[k, q]
                        A[k, p] = c * akp - s * akq
                        A[k, q] = s * akp + c * akq
                    for k in range(n):
                        apk = A[p, k]
                        aqk = A[q, k]
                        A[p, k] = c * apk - s * aqk
                        A[q, k] = s * apk + c * aqk
                    for k in range(n):
                        vkp = V[k, p]
                        vkq = V[k, q]
                        V[k, p] = c * vkp - s * vkq
                        V[k, q] = s * vkp + c * vkq
        return -1

    _jacobi_sweeps = _jacobi_sweeps_numba
except ImportError:  # pragma: no cover
    _jacobi_sweeps = _jacobi_sweeps_python


def jacobi_eigh(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotates until all off-diagonal magnitudes are below 1e-12 * ||M||_F,
    at most 100 sweeps. Returns ascending eigenvalues and orthonormal columns.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    if scale > 0 and np.linalg.norm(M - M.T) > 1e-10 * scale:
        raise ContractError("jacobi_eigh requires a symmetric matrix")
    n = M.shape[0]
    A = 0.5 * (M + M.T)
    V = np.eye(n)
    tol = 1e-12 * max(scale, np.finfo(float).tiny)
    sweeps = _jacobi_sweeps(A, V, tol, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise NumericalError(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and h-orthonormal eigenvectors of a form matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns phi_k with <phi_k, phi_l>_h = delta_kl
    grid: Grid1D
    m: int

    @classmethod
    def from_form(cls, form: FormMatrix) -> "SpectralDecomposition":
        w, v = jacobi_eigh(form.operator)
        phi = v / math.sqrt(form.grid.h)
        return cls(eigenvalues=w, eigenvectors=phi, grid=form.grid, m=form.m)

    @property
    def gap(self) -> float:
        return spectral_gap(self)

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Modal coefficients <f, phi_k>_h."""
        return self.grid.h * (self.eigenvectors.T @ f)

    def operator_matrix(self, weights: np.ndarray | None = None) -> np.ndarray:
        """Matrix sum_k w_k phi_k phi_k^T h acting in the discrete L2 geometry."""
        w = self.eigenvalues if weights is None else weights
        return self.grid.h * (self.eigenvectors * w) @ self.eigenvectors.T

    def propagator(self, t: float, shift: float = 0.0) -> np.ndarray:
        """Matrix of exp(-(H - shift) t) with underflowing modes dropped."""
        ex = t * (self.eigenvalues - shift)
        weights = np.where(ex > EXP_UNDERFLOW_CAP, 0.0, np.exp(-np.clip(ex, None, EXP_UNDERFLOW_CAP)))
        return self.operator_matrix(weights)


def spectral_gap(d: SpectralDecomposition) -> float:
    """Least eigenvalue; the infimum of the discrete Rayleigh quotient."""
    s = float(d.eigenvalues[0])
    if s <= 0:
        raise PropertyViolation(f"Dirichlet positivity violated: mu_1 = {s}")
    return s


def semigroup_apply(d: SpectralDecomposition, t: float, f: np.ndarray) -> np.ndarray:
    """Evolve f by the semigroup: sum_k exp(-mu_k t) <f, phi_k>_h phi_k."""
    if t < 0:
        raise DomainError(f"semigroup time must be non-negative, got {t}")
    c = d.coefficients(f)
    ex = t * d.eigenvalues
    weights = np.where(ex > EXP_UNDERFLOW_CAP, 0.0, np.exp(-np.clip(ex, None, EXP_UNDERFLOW_CAP)))
    return d.eigenvectors @ (weights * c)


@dataclass(frozen=True)
class HeatKernelEvaluator:
    """Heat kernel by eigen-expansion: k(t, x_i, y_j) = sum exp(-mu t) phi(x) phi(y)."""

    decomposition: SpectralDecomposition

    @property
    def grid(self) -> Grid1D:
        return self.decomposition.grid

    @property
    def t_floor(self) -> float:
        """Resolvable-time floor h^{2m}; below it the continuum short-time
        singularity is not representable on the grid."""
        return self.grid.h ** (2 * self.decomposition.m)

    def _weights(self, t: float) -> np.ndarray:
        ex = t * self.decomposition.eigenvalues
        return np.where(ex > EXP_UNDERFLOW_CAP, 0.0, np.exp(-np.clip(ex, None, EXP_UNDERFLOW_CAP)))

    def matrix(self, t: float) -> np.ndarray:
        """Full kernel table k(t, x_i, x_j) over the grid."""
        self._check_floor(t)
        phi = self.decomposition.eigenvectors
        return (phi * self._weights(t)) @ phi.T

    def _check_floor(self, t: float) -> None:
        if t <= 0:
            raise DomainError(f"kernel time must be positive, got {t}")
        if t < self.t_floor:
            warnings.warn(
                f"t={t} below the resolvable floor {self.t_floor}; result is discretization-limited",
                ResolutionWarning,
                stacklevel=3,
            )


def kernel_eval(ev: HeatKernelEvaluator, t: float, i: int, j: int) -> float:
    """Kernel value at grid indices (i, j); symmetric in (i, j) by construction."""
    ev._check_floor(t)
    phi = ev.decomposition.eigenvectors
    return float(np.sum(ev._weights(t) * phi[i] * phi[j]))


_CENTERED_STENCILS = {
    0: (np.array([1.0]), 0),
    1: (np.array([-0.5, 0.0, 0.5]), 1),
    2: (np.array([1.0, -2.0, 1.0]), 1),
}
_ONESIDED_STENCILS = {
    # forward one-sided, first-order accurate; mirrored for the right boundary
    1: np.array([-1.0, 1.0]),
    2: np.array([1.0, -2.0, 1.0]),
}


def grid_derivative(grid: Grid1D, values: np.ndarray, order: int, i: int) -> float:
    """Finite-difference derivative of a grid function at node i.

    Uses the centered stencil when it fits; falls back to a one-sided stencil
    of matching order near the boundary (flagged with a ResolutionWarning).
    """
    if order not in _CENTERED_STENCILS:
        raise DomainError(f"derivative order {order} not supported (v1 caps m <= 3)")
    coeffs, halo = _CENTERED_STENCILS[order]
    n = grid.n_interior
    h = grid.h
    if halo <= i <= n - 1 - halo:
        window = values[i - halo : i + halo + 1]
        return float(np.dot(coeffs, window)) / h**order
    stencil = _ONESIDED_STENCILS[order]
    width = len(stencil)
    warnings.warn(
        f"one-sided order-{order} stencil at node {i}", ResolutionWarning, stacklevel=2
    )
    if i < halo:  # left boundary
        window = values[i : i + width]
        return float(np.dot(stencil, window)) / h**order
    window = values[i - width + 1 : i + 1]
    sgn = (-1.0) ** order
    return sgn * float(np.dot(stencil[::-1], window)) / h**order


def kernel_derivative(ev: HeatKernelEvaluator, order: int, t: float, i: int, j: int) -> float:
    """order-th x-derivative of k(t, ., y_j) at node i by finite differences."""
    if order >= ev.decomposition.m and order > 0:
        raise DomainError(f"derivative order {order} exceeds m-1 = {ev.decomposition.m - 1}")
    if order == 0:
        return kernel_eval(ev, t, i, j)
    ev._check_floor(t)
    phi = ev.decomposition.eigenvectors
    column = (phi * ev._weights(t)) @ phi[j]
    return grid_derivative(ev.grid, column, order, i)


def evolved_form_bound_check(
    d: SpectralDecomposition,
    t_grid: np.ndarray,
    f_samples: np.ndarray,
    rel_slack: float = 1e-10,
) -> list[dict]:
    """Check Q(e^{-Ht} f) <= g~(t) ||f||^2 for each (t, f); returns report rows.

    Raises PropertyViolation when any ratio exceeds 1 beyond the relative slack.
    """
    s = spectral_gap(d)
    g = GTildeFn(s)
    rows = []
    for fi, f in enumerate(np.atleast_2d(f_samples)):
        c2 = d.coefficients(f) ** 2
        norm2 = float(np.sum(c2))  # Parseval in the h geometry
        for t in np.atleast_1d(t_grid):
            ex = 2.0 * t * d.eigenvalues
            weights = np.where(ex > EXP_UNDERFLOW_CAP, 0.0, np.exp(-np.clip(ex, None, EXP_UNDERFLOW_CAP)))
            q_ft = float(np.sum(d.eigenvalues * weights * c2))
            bound = gtilde(g, float(t)) * norm2
            ratio = q_ft / bound if bound > 0 else math.inf
            rows.append({"t": float(t), "sample": fi, "ratio": ratio, "ok": ratio <= 1.0 + rel_slack})
            if ratio > 1.0 + rel_slack:
                raise PropertyViolation(
                    f"evolved form bound violated: ratio {ratio} at t={t}",
                    witness={"t": float(t), "sample_index": fi},
                )
    return rows
