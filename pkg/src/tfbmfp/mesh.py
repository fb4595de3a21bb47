"""Rectangular spatial mesh, Dirichlet fields and the interior flattening order.

Field values are stored as an ``(N + 2, M + 2)`` array indexed ``[n, m]``
(y index first), so the C-order ravel of the interior block runs the x index
fastest: vector entry ``(n - 1) * M + (m - 1)`` holds ``u[m, n]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform node-centred mesh on ``[x_min, x_max] x [y_min, y_max]``.

    ``M`` and ``N`` count interior nodes; the boundary ring adds one node on
    each side, so spacings are ``h = (x_max - x_min) / (M + 1)`` and
    ``l = (y_max - y_min) / (N + 1)``.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    M: int
    N: int

    def __post_init__(self) -> None:
        if self.M < 1 or self.N < 1:
            raise DomainError(f"need at least one interior node per axis; got M={self.M}, N={self.N}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DomainError("domain bounds must satisfy x_min < x_max and y_min < y_max")

    @classmethod
    def from_nodes(cls, domain: tuple[float, float, float, float], nx: int, ny: int | None = None) -> "SpatialMesh":
        """Mesh with ``nx`` x ``ny`` nodes in total, boundary nodes included."""
        ny = nx if ny is None else ny
        return cls(*map(float, domain), M=int(nx) - 2, N=int(ny) - 2)

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.M + 1)

    @property
    def l(self) -> float:  # noqa: E743
        return (self.y_max - self.y_min) / (self.N + 1)

    @property
    def shape(self) -> tuple[int, int]:
        """Storage shape ``(N + 2, M + 2)`` including the boundary ring."""
        return (self.N + 2, self.M + 2)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.M + 2)

    @property
    def y(self) -> np.ndarray:
        return self.y_min + self.l * np.arange(self.N + 2)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``(X, Y)`` in storage layout."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def zeros(self) -> "Field":
        return Field(np.zeros(self.shape))


@dataclass
class Field:
    """Solution values at one time level, boundary ring included.

    The boundary ring is held at exactly zero (homogeneous Dirichlet data).
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] < 3:
            raise DomainError(f"field storage must be 2-D with a boundary ring; got shape {v.shape}")
        self.values = v

    @property
    def interior(self) -> np.ndarray:
        """View of the interior block, shape ``(N, M)``."""
        return self.values[1:-1, 1:-1]

    @property
    def grid_shape(self) -> tuple[int, int]:
        """Interior counts ``(M, N)``."""
        n, m = self.interior.shape
        return m, n

    def copy(self) -> "Field":
        return Field(self.values.copy())

    def boundary_is_zero(self) -> bool:
        v = self.values
        return not (v[0].any() or v[-1].any() or v[:, 0].any() or v[:, -1].any())


def flatten(field: Field) -> np.ndarray:
    """Interior values as a length ``M * N`` vector, x index fastest.

    The interior block of the padded storage is not contiguous, so this is a
    copy; the solver itself works on the padded array and never flattens.
    """
    return field.interior.reshape(-1)


def unflatten(vector: np.ndarray, M: int, N: int) -> Field:
    """Inverse of :func:`flatten`; the boundary ring is set to zero."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (M * N,):
        raise DomainError(f"expected a vector of length {M * N}; got shape {vector.shape}")
    values = np.zeros((N + 2, M + 2))
    values[1:-1, 1:-1] = vector.reshape(N, M)
    return Field(values)


def initial_condition(mesh: SpatialMesh, expr: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Field:
    """Sample ``expr(x, y)`` at interior nodes; boundary values are zero."""
    X, Y = mesh.coordinates()
    values = np.zeros(mesh.shape)
    inner = np.broadcast_to(np.asarray(expr(X[1:-1, 1:-1], Y[1:-1, 1:-1]), dtype=float), (mesh.N, mesh.M))
    if not np.all(np.isfinite(inner)):
        raise DomainError("initial condition produced non-finite samples")
    values[1:-1, 1:-1] = inner
    return Field(values)


def gaussian_initial_data(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """exp(-x^2 - 2 y^2): per-axis variances 1/2 and 1/4."""
    return np.exp(-(x**2) - 2.0 * y**2)


def second_difference_x(field: Field) -> np.ndarray:
    """u[m+1, n] - 2 u[m, n] + u[m-1, n] at interior nodes (no 1/h^2)."""
    v = field.values
    return v[1:-1, 2:] - 2.0 * v[1:-1, 1:-1] + v[1:-1, :-2]


def second_difference_y(field: Field) -> np.ndarray:
    v = field.values
    return v[2:, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[:-2, 1:-1]


def l2_norm(field: Field, mesh: SpatialMesh | None = None) -> float:
    """Discrete L2 norm; with a mesh it carries the ``h * l`` cell weight."""
    w = 1.0 if mesh is None else mesh.h * mesh.l
    return math.sqrt(w * float(np.vdot(field.values, field.values)))


def write_field_csv(path: str | Path, field: Field, mesh: SpatialMesh) -> None:
    """Write all nodes as ``x,y,u`` rows, y outer and x inner, 17 significant digits."""
    X, Y = mesh.coordinates()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "u"])
        for xv, yv, uv in zip(X.ravel(), Y.ravel(), field.values.ravel()):
            w.writerow([f"{xv:.17g}", f"{yv:.17g}", f"{uv:.17g}"])
