"""Discretization of the quadratic form and the ellipticity measurement.

The derivative of order k is realized as the k-fold forward difference with
zero extension, so membership in the Dirichlet form domain is built into the
matrices. Each application of a difference (or an averaging) factor moves the
sample locations half a mesh width; coefficients are sampled at the staggered
locations of level max(i, j) and lower-order factors are lifted there by
averaging adjacent values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import Grid1D
from .errors import (
    ConfigurationError,
    ContractError,
    DomainError,
    EllipticityError,
    UnsupportedError,
)

MAX_ORDER = 3  # v1 cap on the order parameter m (operator order 2m <= 6)

CoeffFn = Callable[[np.ndarray], np.ndarray]


def level_positions(grid: Grid1D, level: int) -> np.ndarray:
    """Sample locations after `level` staggered applications of D or M."""
    return (np.arange(grid.n_interior + level) + 1.0 - level / 2.0) * grid.h


def _forward_difference(q: int, h: float) -> np.ndarray:
    """Forward difference with zero extension, mapping R^q -> R^{q+1}."""
    D = np.zeros((q + 1, q))
    idx = np.arange(q)
    D[idx, idx] = 1.0 / h
    D[idx + 1, idx] = -1.0 / h
    return D


def _edge_average(q: int) -> np.ndarray:
    """Adjacent-value average with zero extension, mapping R^q -> R^{q+1}."""
    M = np.zeros((q + 1, q))
    idx = np.arange(q)
    M[idx, idx] = 0.5
    M[idx + 1, idx] = 0.5
    return M


@dataclass(frozen=True)
class DifferenceOperator:
    """k-fold zero-extended forward difference on a grid, 1/h^k included."""

    order: int
    matrix: np.ndarray
    grid: Grid1D

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f


def difference_matrix(grid: Grid1D, k: int) -> DifferenceOperator:
    """Build D_k = (D_1)^k with zero extension at every stage."""
    if k < 0:
        raise DomainError(f"difference order must be non-negative, got {k}")
    if k > MAX_ORDER:
        raise UnsupportedError(f"difference order {k} exceeds the v1 cap m <= {MAX_ORDER}")
    A = np.eye(grid.n_interior)
    for level in range(k):
        A = _forward_difference(grid.n_interior + level, grid.h) @ A
    return DifferenceOperator(order=k, matrix=A, grid=grid)


_staggered_cache: dict[tuple[Grid1D, int, int], np.ndarray] = {}


def staggered_operator(grid: Grid1D, n_diff: int, n_avg: int) -> np.ndarray:
    """Matrix of D^{n_diff} followed by M^{n_avg}; the factors commute.

    Cached per (grid, orders): the matrices are constant and reused heavily
    by the dual-path perturbation checks.
    """
    key = (grid, n_diff, n_avg)
    if key not in _staggered_cache:
        A = difference_matrix(grid, n_diff).matrix
        q = grid.n_interior + n_diff
        for _ in range(n_avg):
            A = _edge_average(q) @ A
            q += 1
        A.setflags(write=False)
        _staggered_cache[key] = A
    return _staggered_cache[key]


def lifted_difference(grid: Grid1D, k: int, level: int) -> np.ndarray:
    """D_k lifted to sample level `level` >= k by averaging."""
    if level < k:
        raise DomainError(f"cannot lift order-{k} difference to lower level {level}")
    return staggered_operator(grid, k, level - k)


def constant_coefficient(value: float) -> CoeffFn:
    return lambda x: np.full_like(np.asarray(x, dtype=float), float(value))


@dataclass(frozen=True)
class OperatorSpec:
    """Order parameter m and Hermitian coefficient table a_{ij}, 0 <= i,j <= m.

    Coefficients are callables sampled on staggered grids at assembly time.
    v1 requires a_{ij} = a_{ji} pointwise (Hermitian real table).
    """

    m: int
    coefficients: Mapping[tuple[int, int], CoeffFn]

    def __post_init__(self):
        if not (1 <= self.m <= MAX_ORDER):
            raise UnsupportedError(f"order parameter m={self.m} outside 1..{MAX_ORDER}")
        for (i, j) in self.coefficients:
            if not (0 <= i <= self.m and 0 <= j <= self.m):
                raise ConfigurationError(f"coefficient index ({i},{j}) outside 0..m={self.m}")

    def sample(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        fn = self.coefficients.get((i, j))
        if fn is None:
            raise ConfigurationError(f"missing coefficient a_{{{i}{j}}}")
        vals = np.asarray(fn(x), dtype=float)
        if vals.shape != np.asarray(x).shape:
            raise ConfigurationError(f"coefficient a_{{{i}{j}}} returned wrong shape")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError(f"coefficient a_{{{i}{j}}} has non-finite samples")
        return vals

    def check_hermitian(self, grid: Grid1D) -> None:
        """Require a_{ij} = a_{ji} pointwise on every staggered level used."""
        for (i, j) in self.coefficients:
            if (j, i) not in self.coefficients:
                raise UnsupportedError(f"non-Hermitian table: a_{{{i}{j}}} present, a_{{{j}{i}}} missing")
            x = level_positions(grid, max(i, j))
            aij = self.sample(i, j, x)
            aji = self.sample(j, i, x)
            scale = max(np.max(np.abs(aij)), 1.0)
            if np.max(np.abs(aij - aji)) > 1e-12 * scale:
                raise UnsupportedError(f"non-Hermitian table: a_{{{i}{j}}} != a_{{{j}{i}}} pointwise")


def polyharmonic_spec(m: int) -> OperatorSpec:
    """Pure (-Laplace)^m reference operator: a_mm = 1, all other entries 0."""
    return OperatorSpec(m=m, coefficients={(m, m): constant_coefficient(1.0)})


@dataclass(frozen=True)
class FormMatrix:
    """Assembled symmetric form matrix Q_h with Q(f) = f^T Q_h f."""

    matrix: np.ndarray
    grid: Grid1D
    m: int
    spec: OperatorSpec | None = field(default=None, compare=False)

    def __call__(self, f: np.ndarray) -> float:
        return float(np.dot(np.conj(f), self.matrix @ f).real)

    @property
    def operator(self) -> np.ndarray:
        """Operator matrix in the discrete L2 geometry, H = Q_h / h."""
        return self.matrix / self.grid.h


def assemble_form(spec: OperatorSpec, grid: Grid1D) -> FormMatrix:
    """Assemble Q_h = h * sum_{ij} B_i^T diag(a_ij) B_j with staggered sampling.

    B_i lifts the order-i difference to level max(i, j); the 1/h^{i+j} scaling
    is carried inside the difference matrices.
    """
    spec.check_hermitian(grid)
    n = grid.n_interior
    Q = np.zeros((n, n))
    for (i, j) in sorted(spec.coefficients):
        level = max(i, j)
        x = level_positions(grid, level)
        A = spec.sample(i, j, x)
        Bi = lifted_difference(grid, i, level)
        Bj = lifted_difference(grid, j, level)
        Q += grid.h * (Bi.T * A) @ Bj
    scale = np.linalg.norm(Q)
    if scale > 0 and np.linalg.norm(Q - Q.T) > 1e-12 * scale:
        raise ContractError("assembled form is not symmetric to round-off")
    Q = 0.5 * (Q + Q.T)
    return FormMatrix(matrix=Q, grid=grid, m=spec.m, spec=spec)


def measure_ellipticity(form: FormMatrix, grid: Grid1D, m: int) -> float:
    """Extremes of the pencil Q_h f = lambda P_h f against the polyharmonic form.

    Returns c = max(lambda_max, 1/lambda_min) >= 1 certifying the two-sided
    sandwich; rejects the operator when an extreme is non-positive.
    """
    from .spectral import jacobi_eigh  # local import to avoid a cycle

    P = assemble_form(polyharmonic_spec(m), grid)
    wp, vp = jacobi_eigh(P.matrix)
    if wp[0] <= 0:
        raise EllipticityError("polyharmonic reference form is not positive definite")
    P_inv_half = (vp / np.sqrt(wp)) @ vp.T
    C = P_inv_half @ form.matrix @ P_inv_half
    C = 0.5 * (C + C.T)
    wc, _ = jacobi_eigh(C)
    lo, hi = float(wc[0]), float(wc[-1])
    if lo <= 0 or hi <= 0:
        raise EllipticityError(f"pencil extremes non-positive: [{lo}, {hi}]")
    return max(hi, 1.0 / lo, 1.0)


def frac_power(laplacian_decomp, p: float) -> np.ndarray:
    """Spectral power of the discrete Dirichlet Laplacian, V diag(mu^p) V^T."""
    if p < 0:
        raise DomainError(f"fractional power requires p >= 0, got {p}")
    if laplacian_decomp.m != 1:
        raise ContractError("frac_power expects a decomposition of the m=1 Laplacian")
    w = laplacian_decomp.eigenvalues
    phi = laplacian_decomp.eigenvectors
    h = laplacian_decomp.grid.h
    # phi columns are h-orthonormal; the operator matrix is h * phi diag phi^T
    return h * (phi * w**p) @ phi.T


def load_coefficients_csv(path: str) -> dict[tuple[int, int], CoeffFn]:
    """Read a coefficient table from CSV with columns i,j,x,value.

    Samples per (i, j) entry are linearly interpolated between the listed x
    values and extended by their end values outside the listed range.
    """
    raw: dict[tuple[int, int], list[tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"i", "j", "x", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigurationError(
                f"coefficient CSV must have header columns i,j,x,value, got {reader.fieldnames}"
            )
        for row in reader:
            key = (int(row["i"]), int(row["j"]))
            raw.setdefault(key, []).append((float(row["x"]), float(row["value"])))
    if not raw:
        raise ConfigurationError(f"coefficient CSV {path!r} contains no data rows")

    out: dict[tuple[int, int], CoeffFn] = {}
    for key, pts in raw.items():
        pts.sort()
        xs = np.array([p[0] for p in pts])
        vs = np.array([p[1] for p in pts])

        def fn(x, xs=xs, vs=vs):
            return np.interp(np.asarray(x, dtype=float), xs, vs)

        out[key] = fn
    return out
