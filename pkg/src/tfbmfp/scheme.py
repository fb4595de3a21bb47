"""Implicit five-point schemes on graded and spliced time grids.

Each step solves the symmetric positive definite system

    (1 + 2 r_x + 2 r_y) u_mn - r_x (u_m+1,n + u_m-1,n) - r_y (u_m,n+1 + u_m,n-1) = u_mn^old

with Jacobi-preconditioned conjugate gradients, applying the operator
matrix-free on the padded field storage. The coefficient r is rebuilt every
step from the actual transformed time difference t_{k+1}^theta - t_k^theta,
with theta = 2H on graded segments and theta = H past the Case II splice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SolverDivergenceError
from .grids import GridLaw, TimeGrid
from .mesh import Field, SpatialMesh
from .special import ModelParams, bessel_k

DEFAULT_SOLVER_TOL = 1e-10

Sink = Callable[[int, float, Field], None]


@dataclass(frozen=True)
class StepOperator:
    """Coefficients of one implicit step: ``r_x = r / h^2`` and ``r_y = r / l^2``."""

    r_x: float
    r_y: float
    grid_shape: tuple[int, int]

    def __post_init__(self) -> None:
        if not (self.r_x >= 0.0 and self.r_y >= 0.0):
            raise DomainError(f"step coefficients must be nonnegative; got {self.r_x}, {self.r_y}")

    @classmethod
    def from_coefficient(cls, r: float, mesh: SpatialMesh) -> "StepOperator":
        return cls(r / mesh.h**2, r / mesh.l**2, (mesh.M, mesh.N))

    @property
    def diag(self) -> float:
        return 1.0 + 2.0 * self.r_x + 2.0 * self.r_y

    @property
    def is_identity(self) -> bool:
        return self.r_x == 0.0 and self.r_y == 0.0

    def apply(self, values: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Matrix-vector product on padded storage; the boundary ring of ``out`` is zero."""
        if out is None:
            out = np.zeros_like(values)
        out[1:-1, 1:-1] = (
            self.diag * values[1:-1, 1:-1]
            - self.r_x * (values[1:-1, 2:] + values[1:-1, :-2])
            - self.r_y * (values[2:, 1:-1] + values[:-2, 1:-1])
        )
        return out

    def matrix(self) -> sp.csr_matrix:
        """Assembled growth matrix in the flattened (x fastest) ordering."""
        M, N = self.grid_shape

        def second_diff(n: int, r: float) -> sp.spmatrix:
            return sp.diags([-r, 2.0 * r, -r], [-1, 0, 1], shape=(n, n))

        C = (
            sp.identity(M * N)
            + sp.kron(sp.identity(N), second_diff(M, self.r_x))
            + sp.kron(second_diff(N, self.r_y), sp.identity(M))
        )
        return sp.csr_matrix(C)


@dataclass
class SolverStats:
    steps: int = 0
    identity_steps: int = 0
    iterations: int = 0


def coefficient_case1(params: ModelParams, t_next: float, tau: float) -> float:
    """r = Gamma(H+1/2) / (2H sqrt(pi) (2 lambda)^H) * lambda t^(1-H) K_(H-1)(lambda t) * tau.

    Bounded as t -> 0 for every H, so the first step may be taken straight
    from t = 0.
    """
    if tau < 0.0:
        raise DomainError(f"transformed step must be nonnegative; got {tau!r}")
    if tau == 0.0:
        return 0.0
    if not t_next > 0.0:
        raise DomainError(f"coefficient needs t_next > 0; got {t_next!r}")
    H, lam = params.hurst, params.lam
    k = bessel_k(H - 1.0, lam * t_next)
    return params.prefactor / (2.0 * H) * lam * t_next ** (1.0 - H) * k * tau


def coefficient_case2(params: ModelParams, t_next: float, tau: float) -> float:
    """r1 = Gamma(H+1/2) / (H sqrt(pi) (2 lambda)^H) * lambda t K_(H-1)(lambda t) * tau."""
    if tau < 0.0:
        raise DomainError(f"transformed step must be nonnegative; got {tau!r}")
    if tau == 0.0:
        return 0.0
    if not t_next > 0.0:
        raise DomainError(f"coefficient needs t_next > 0; got {t_next!r}")
    H, lam = params.hurst, params.lam
    k = bessel_k(H - 1.0, lam * t_next)
    return params.prefactor / H * lam * t_next * k * tau


def conjugate_gradient(
    op: StepOperator,
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int | None = None,
) -> tuple[np.ndarray, int]:
    """Solve ``C x = rhs`` on padded storage; returns the solution and iteration count.

    Stops once ``||rhs - C x||_2 <= tol * ||rhs||_2`` holds for the true
    (recomputed) residual.
    """
    M, N = op.grid_shape
    if max_iter is None:
        max_iter = 10 * M * N
    b_norm = math.sqrt(float(np.vdot(rhs, rhs)))
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    if b_norm == 0.0:
        return np.zeros_like(rhs), 0
    target = tol * b_norm
    inv_diag = 1.0 / op.diag

    Ap = np.zeros_like(rhs)
    r = rhs - op.apply(x, Ap)
    it = 0
    while True:
        if math.sqrt(float(np.vdot(r, r))) <= target:
            return x, it
        z = inv_diag * r
        p = z.copy()
        rz = float(np.vdot(r, z))
        while it < max_iter:
            op.apply(p, Ap)
            alpha = rz / float(np.vdot(p, Ap))
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if math.sqrt(float(np.vdot(r, r))) <= target:
                break
            z = inv_diag * r
            rz_new = float(np.vdot(r, z))
            p *= rz_new / rz
            p += z
            rz = rz_new
        else:
            raise SolverDivergenceError(
                f"CG did not reach relative residual {tol:g} in {max_iter} iterations"
            )
        # recurrence residual can drift; confirm against the true residual
        r = rhs - op.apply(x, Ap)


def solve_step(
    field: Field,
    op: StepOperator,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int | None = None,
) -> tuple[Field, int]:
    """One implicit step; returns the new field and the CG iteration count."""
    if field.grid_shape != op.grid_shape:
        raise DomainError(f"field shape {field.grid_shape} does not match operator {op.grid_shape}")
    if op.is_identity:
        return field.copy(), 0
    x, iters = conjugate_gradient(op, field.values, field.values, solver_tol, max_iter)
    return Field(x), iters


def step(field: Field, op: StepOperator, solver_tol: float = DEFAULT_SOLVER_TOL) -> Field:
    """Advance ``field`` by one implicit step of operator ``op``."""
    return solve_step(field, op, solver_tol)[0]


def _check_law(params: ModelParams, grid: TimeGrid) -> None:
    H = params.hurst
    if grid.hurst is None or not math.isclose(grid.hurst, H, rel_tol=0.0, abs_tol=1e-15):
        raise DomainError(f"grid was built for H={grid.hurst}, parameters have H={H}")
    if H < 0.5 and grid.law is not GridLaw.GRADED_CASE_I:
        raise DomainError(f"H={H} < 0.5 needs a graded Case I grid, got {grid.law.value}")
    if H > 0.5 and grid.law not in (GridLaw.SPLICED_CASE_II, GridLaw.GRADED_CASE_I):
        raise DomainError(f"H={H} > 0.5 needs a spliced Case II grid, got {grid.law.value}")


def step_coefficient(params: ModelParams, grid: TimeGrid, k: int) -> float:
    """Scheme coefficient r for the step from node ``k`` to node ``k + 1``."""
    H = params.hurst
    t0, t1 = float(grid.nodes[k]), float(grid.nodes[k + 1])
    if grid.in_tail_segment(k + 1):
        return coefficient_case2(params, t1, t1**H - t0**H)
    return coefficient_case1(params, t1, t1 ** (2.0 * H) - t0 ** (2.0 * H))


def run(
    params: ModelParams,
    mesh: SpatialMesh,
    grid: TimeGrid,
    u0: Field,
    sink: Optional[Sink] = None,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    max_iter: int | None = None,
    stats: SolverStats | None = None,
) -> Field:
    """March ``u0`` through every node of ``grid``; returns the final field.

    ``sink(k, t_k, field)`` is called for the initial level and after every
    step. The field passed in is not modified.
    """
    _check_law(params, grid)
    if u0.grid_shape != (mesh.M, mesh.N):
        raise DomainError(f"initial field shape {u0.grid_shape} does not match mesh {(mesh.M, mesh.N)}")
    if not u0.boundary_is_zero():
        raise DomainError("initial field violates the homogeneous Dirichlet boundary")
    stats = stats if stats is not None else SolverStats()
    u = u0.copy()
    if sink is not None:
        sink(0, float(grid.nodes[0]), u)
    for k in range(grid.steps):
        r = step_coefficient(params, grid, k)
        op = StepOperator.from_coefficient(r, mesh)
        u, iters = solve_step(u, op, solver_tol, max_iter)
        stats.steps += 1
        stats.iterations += iters
        stats.identity_steps += op.is_identity
        if sink is not None:
            sink(k + 1, float(grid.nodes[k + 1]), u)
    return u
