"""Modified Bessel function K, incomplete gamma and the tfBm diffusion coefficient.

Everything here is evaluated from integral representations with composite
Gauss-Legendre panels, refined by panel doubling until two successive sums
agree to ``1e-12`` relative.

The Bessel function uses

    K_nu(x) = 1/2 int_0^inf z^(nu-1) exp(-x (z + 1/z) / 2) dz
            = int_0^inf cosh(nu v) exp(-x cosh v) dv        (z = e^v),

whose integrand is smooth and decays double-exponentially.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError

_GL_ORDER = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

# log of the smallest integrand ratio kept: exp(-750) is below the double range
_LOG_CUTOFF = 750.0
# exp(-40) ~ 4e-18, below double precision relative to O(1) integrals
_LOG_NEGLIGIBLE = 40.0

QUAD_RTOL = 1e-12
_MAX_DOUBLINGS = 12


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the tempered process.

    Parameters
    ----------
    hurst : float
        Hurst index H, ``0 < H < 1`` and ``H != 0.5``.
    lam : float
        Tempering rate lambda (1/time), strictly positive.
    """

    hurst: float
    lam: float

    def __post_init__(self) -> None:
        H, lam = self.hurst, self.lam
        if not (math.isfinite(H) and 0.0 < H < 1.0) or H == 0.5:
            raise DomainError(f"Hurst index must satisfy 0 < H < 1, H != 0.5; got {H!r}")
        if not (math.isfinite(lam) and lam > 0.0):
            raise DomainError(f"tempering rate must be positive; got {lam!r}")

    @property
    def alpha(self) -> float:
        """Kernel exponent alpha = 0.5 - H."""
        return 0.5 - self.hurst

    @property
    def prefactor(self) -> float:
        """Gamma(H + 1/2) / (sqrt(pi) (2 lambda)^H)."""
        H = self.hurst
        return math.gamma(H + 0.5) / (math.sqrt(math.pi) * (2.0 * self.lam) ** H)


def _panel_sum(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = mid[:, None] + half[:, None] * _GL_NODES
    return math.fsum((half[:, None] * _GL_WEIGHTS * f(pts)).ravel())


def integrate_panels(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    n_panels: int,
    rtol: float = QUAD_RTOL,
) -> float:
    """Integrate a vectorised ``f`` over ``[a, b]`` with doubling GL panels."""
    n = max(1, int(n_panels))
    prev = _panel_sum(f, a, b, n)
    for _ in range(_MAX_DOUBLINGS):
        n *= 2
        cur = _panel_sum(f, a, b, n)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise AccuracyError(
        f"panel quadrature on [{a}, {b}] did not reach rtol={rtol} with {n} panels"
    )


def _acosh_one_plus(a: float, x: float) -> float:
    # acosh(1 + a / x); for tiny x use log(2 a / x) so that a / x cannot overflow
    if x < 1e-290:
        return math.log(2.0 * a) - math.log(x)
    return math.acosh(1.0 + a / x)


def _bessel_cutoff(nu: float, x: float) -> float:
    # smallest v with x (cosh v - 1) - nu v >= _LOG_CUTOFF
    v = _acosh_one_plus(_LOG_CUTOFF, x)
    for _ in range(4):
        v = _acosh_one_plus(_LOG_CUTOFF + nu * v, x)
    return v


def bessel_k(nu: float, x: float) -> float:
    """Modified Bessel function of the second kind K_nu(x) for |nu| <= 1, x > 0.

    Evaluated with ``|nu|``, so ``bessel_k(nu, x) == bessel_k(-nu, x)`` holds
    exactly. Underflows to ``0.0`` once ``x`` exceeds roughly 745.
    """
    nu = abs(float(nu))
    x = float(x)
    if not nu <= 1.0:
        raise DomainError(f"order must lie in [-1, 1]; got {nu!r}")
    if not (x > 0.0 and math.isfinite(x)):
        raise DomainError(f"argument must be positive and finite; got {x!r}")

    root_x = math.sqrt(x)

    def scaled(v: np.ndarray) -> np.ndarray:
        # x (cosh v - 1) as 2 (sqrt(x) sinh(v/2))^2: accurate for small v, no overflow for tiny x
        s = 2.0 * (root_x * np.sinh(0.5 * v)) ** 2
        return 0.5 * (np.exp(nu * v - s) + np.exp(-nu * v - s))

    v_max = _bessel_cutoff(nu, x)
    width = min(1.0, 1.0 / math.sqrt(x))
    n0 = max(4, math.ceil(v_max / width))
    return math.exp(-x) * integrate_panels(scaled, 0.0, v_max, n0)


def gamma_upper_incomplete(s: float, x: float) -> float:
    """Upper incomplete gamma function Gamma(s, x) = int_x^inf z^(s-1) e^(-z) dz."""
    s = float(s)
    x = float(x)
    if not (s > 0.0 and math.isfinite(s)):
        raise DomainError(f"shape must be positive; got {s!r}")
    if not (x >= 0.0 and math.isfinite(x)):
        raise DomainError(f"lower limit must be nonnegative; got {x!r}")
    if x >= 1.0:
        return _gamma_tail(s, x)
    return _gamma_head(s, x) + _gamma_tail(s, 1.0)


def _gamma_tail(s: float, x: float) -> float:
    # Gamma(s, x) = e^-x int_0^inf (x + w)^(s-1) e^-w dw, for x >= 1
    def f(w: np.ndarray) -> np.ndarray:
        return np.exp((s - 1.0) * np.log(x + w) - w)

    peak = max(0.0, s - 1.0 - x)
    w_max = peak + 60.0 + 12.0 * math.sqrt(s)
    return math.exp(-x) * integrate_panels(f, 0.0, w_max, math.ceil(w_max))


def _gamma_head(s: float, x: float) -> float:
    # int_x^1 z^(s-1) e^-z dz with z = e^v; below v = -40, e^-z = 1 - z to double precision
    v_floor = -_LOG_NEGLIGIBLE
    v_lo = math.log(x) if x > 0.0 else -math.inf
    tail = 0.0
    if v_lo < v_floor:
        def antideriv(v: float) -> float:
            if v == -math.inf:
                return 0.0
            return math.exp(s * v) / s - math.exp((s + 1.0) * v) / (s + 1.0)

        tail = antideriv(v_floor) - antideriv(v_lo)
        v_lo = v_floor
    if v_lo >= 0.0:
        return tail

    def f(v: np.ndarray) -> np.ndarray:
        return np.exp(s * v - np.exp(v))

    return tail + integrate_panels(f, v_lo, 0.0, math.ceil(-v_lo))


def scaled_k_limit(h_eff: float, lam: float) -> float:
    """Small-time limit of t^H K_H(lambda t): 2^(H-1) Gamma(H) / lambda^H."""
    return 2.0 ** (h_eff - 1.0) * math.gamma(h_eff) / lam**h_eff


def scaled_k_bounds(params: ModelParams, h_eff: float, t: float) -> tuple[float, float]:
    """Lower and upper bounds on ``t^H K_H(lambda t)`` at ``H = h_eff``.

    Returns ``(2^(H-1) e^(-lambda t/2) Gamma(H, lambda t/2) / lambda^H,
    2^(H-1) Gamma(H) / lambda^H)``; both tend to the same value as t -> 0.
    """
    if not 0.0 < h_eff < 1.0:
        raise DomainError(f"effective Hurst index must lie in (0, 1); got {h_eff!r}")
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"time must be positive; got {t!r}")
    lam = params.lam
    half = 0.5 * lam * t
    upper = scaled_k_limit(h_eff, lam)
    lower = 2.0 ** (h_eff - 1.0) * math.exp(-half) * gamma_upper_incomplete(h_eff, half) / lam**h_eff
    return lower, upper


def diffusion_coefficient(params: ModelParams, t: float) -> float:
    """D(t) = Gamma(H+1/2) / (sqrt(pi) (2 lambda)^H) * lambda t^H K_(H-1)(lambda t).

    Returns exactly ``0.0`` once the Bessel factor underflows (lambda t beyond
    about 745).
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"diffusion coefficient needs t > 0; got {t!r}")
    H, lam = params.hurst, params.lam
    if lam * t == 0.0:  # lambda t underflowed; the leading term is exact here
        return diffusion_small_time_limit(params) * t ** (2.0 * H - 1.0)
    k = bessel_k(H - 1.0, lam * t)
    if k == 0.0:
        return 0.0
    return params.prefactor * lam * t**H * k


def diffusion_small_time_limit(params: ModelParams) -> float:
    """Limit of t^(1-2H) D(t) as t -> 0 (finite for every H)."""
    H, lam = params.hurst, params.lam
    return params.prefactor * lam * 2.0**-H * math.gamma(1.0 - H) / lam ** (1.0 - H)


def t_max_formula(params: ModelParams) -> float:
    """Fitted location of the maximum of D(t) for 0.5 < H < 1.

    ``(0.7442 H - 0.148 H^-1.3075) / lambda``. Callers clamp the result to
    the horizon.
    """
    H = params.hurst
    if H <= 0.5:
        raise DomainError(f"t_max is defined only for H > 0.5; got H={H}")
    return (0.7442 * H - 0.148 * H**-1.3075) / params.lam
