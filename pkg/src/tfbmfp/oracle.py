"""Exact Gaussian solutions used to verify the schemes.

With Gaussian initial data the equation is solved by a separable Gaussian
whose per-axis variance grows by ``2 int_0^t D(s) ds``. The integral is
computed in the variable ``w = s^(2H)``, where the integrand
``D(s) s^(1-2H) / (2H)`` is bounded for every H.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DomainError
from .mesh import Field, SpatialMesh
from .special import ModelParams, diffusion_coefficient, diffusion_small_time_limit

# beyond lambda t = 1500 the coefficient is exactly 0 in double precision
_LAMBDA_T_CUTOFF = 1500.0
_BREAKS = (0.01, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 800.0, _LAMBDA_T_CUTOFF)


def _transformed_integrand(params: ModelParams):
    H = params.hurst
    limit = diffusion_small_time_limit(params) / (2.0 * H)

    def g(w: float) -> float:
        s = w ** (1.0 / (2.0 * H))
        if s <= 0.0:  # w = 0 or s underflowed
            return limit
        return diffusion_coefficient(params, s) * s ** (1.0 - 2.0 * H) / (2.0 * H)

    return g


def variance_growth(params: ModelParams, t: float, tol: float = 1e-10) -> float:
    """Per-axis variance growth ``2 int_0^t D(s) ds``."""
    if not (t >= 0.0 and math.isfinite(t)):
        raise DomainError(f"time must be nonnegative; got {t!r}")
    if t == 0.0:
        return 0.0
    H, lam = params.hurst, params.lam
    g = _transformed_integrand(params)
    t_end = min(t, _LAMBDA_T_CUTOFF / lam)
    edges = [0.0] + [b / lam for b in _BREAKS if b / lam < t_end] + [t_end]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(
            g, a ** (2.0 * H), b ** (2.0 * H), epsabs=0.0, epsrel=tol, limit=200
        )
        if not math.isfinite(val) or err > max(tol * abs(val), 1e-300):
            raise AccuracyError(f"variance quadrature on [{a}, {b}] failed: {val} +/- {err}")
        total += val
    return 2.0 * total


def variance_growth_total(params: ModelParams, tol: float = 1e-10) -> float:
    """``2 int_0^inf D(s) ds``; the integrand is identically 0 past lambda t = 1500."""
    return variance_growth(params, _LAMBDA_T_CUTOFF / params.lam, tol)


@dataclass(frozen=True)
class VarianceGrowth:
    """Cumulative variance growth with a memoised total."""

    params: ModelParams
    tol: float = 1e-10

    def cumulative(self, t: float) -> float:
        return variance_growth(self.params, t, self.tol)

    def __call__(self, t: float) -> float:
        return self.cumulative(t)

    @property
    def total(self) -> float:
        cached = self.__dict__.get("_total")
        if cached is None:
            cached = variance_growth_total(self.params, self.tol)
            object.__setattr__(self, "_total", cached)
        return cached


def exact_field(
    params: ModelParams,
    mesh: SpatialMesh,
    sigma2_x0: float,
    sigma2_y0: float,
    t: float,
    scale: str = "density",
    growth: float | None = None,
) -> Field:
    """Gaussian solution on ``mesh`` at time ``t``, zero on the boundary ring.

    ``scale="density"`` gives the unit-mass density
    ``exp(-x^2/2 sx^2 - y^2/2 sy^2) / (2 pi sx sy)``; ``scale="initial"``
    rescales it so that at ``t = 0`` the peak value is 1, i.e. it continues
    ``exp(-x^2/(2 sx0^2) - y^2/(2 sy0^2))`` in time. ``growth`` overrides the
    variance growth at ``t`` when already known.
    """
    if not (sigma2_x0 > 0.0 and sigma2_y0 > 0.0):
        raise DomainError("initial variances must be positive")
    g = variance_growth(params, t) if growth is None else growth
    sx2, sy2 = sigma2_x0 + g, sigma2_y0 + g
    if scale == "density":
        amp = 1.0 / (2.0 * math.pi * math.sqrt(sx2 * sy2))
    elif scale == "initial":
        amp = math.sqrt(sigma2_x0 * sigma2_y0 / (sx2 * sy2))
    else:
        raise DomainError(f"unknown scale {scale!r}")
    X, Y = mesh.coordinates()
    values = amp * np.exp(-(X**2) / (2.0 * sx2) - Y**2 / (2.0 * sy2))
    values[0, :] = values[-1, :] = 0.0
    values[:, 0] = values[:, -1] = 0.0
    return Field(values)


def exact_msd(params: ModelParams, sigma2_x0: float, sigma2_y0: float, t: float) -> float:
    """Centred MSD of the Gaussian solution: sx0^2 + sy0^2 + 2 * variance growth."""
    return sigma2_x0 + sigma2_y0 + 2.0 * variance_growth(params, t)


def closed_form_total(params: ModelParams) -> float:
    """``2 int_0^inf D`` in closed form, ``2 Gamma(2H) / (2 lambda)^(2H)``.

    Follows from the Mellin transform of K and the duplication formula; kept
    as an independent check of the quadrature.
    """
    H = params.hurst
    return 2.0 * math.gamma(2.0 * H) / (2.0 * params.lam) ** (2.0 * H)
