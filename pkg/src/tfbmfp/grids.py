"""Time discretisations: uniform, graded in t^(2H), and the spliced Case II grid."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .special import ModelParams, t_max_formula


class GridLaw(enum.Enum):
    UNIFORM = "uniform"
    GRADED_CASE_I = "graded"
    SPLICED_CASE_II = "spliced"


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time nodes starting at 0.

    ``splice_index`` is the index k1 of the last node of the t^(2H) segment
    on a spliced grid; nodes after it follow t_k = (tau k)^(1/H).
    """

    nodes: np.ndarray
    law: GridLaw
    tau: float
    horizon: float
    splice_index: int | None = None
    hurst: float | None = None
    t_splice: float | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2 or nodes[0] != 0.0:
            raise DomainError("a time grid needs at least two nodes starting at 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise DomainError("time nodes must be strictly increasing")

    @property
    def steps(self) -> int:
        return self.nodes.size - 1

    def __len__(self) -> int:
        return self.nodes.size

    def in_tail_segment(self, k: int) -> bool:
        """True when node ``k`` lies past the splice of a Case II grid.

        The step ending at such a node is taken in the t^H variable; every
        other step of a graded grid uses t^(2H).
        """
        return self.law is GridLaw.SPLICED_CASE_II and k > self.splice_index


def _ceil_ratio(a: float, b: float) -> int:
    # ceil(a / b) that ignores relative round-off below 1e-12
    return max(1, math.ceil(a / b * (1.0 - 1e-12)))


def _check_tau_T(tau: float, T: float) -> None:
    if not (tau > 0.0 and math.isfinite(tau)):
        raise DomainError(f"tau must be positive; got {tau!r}")
    if not (T > 0.0 and math.isfinite(T)):
        raise DomainError(f"horizon must be positive; got {T!r}")


def graded_case1(params: ModelParams, tau: float, T: float) -> TimeGrid:
    """Nodes t_k = (tau k)^(1/(2H)), k = 0..ceil(T^(2H)/tau), for 0 < H < 0.5."""
    H = params.hurst
    if H >= 0.5:
        raise DomainError(f"graded Case I grid needs H < 0.5; got H={H}")
    return _graded(H, tau, T)


def _graded(H: float, tau: float, T: float) -> TimeGrid:
    _check_tau_T(tau, T)
    span = T ** (2.0 * H)
    if tau >= span:
        raise DomainError(f"tau={tau} must be smaller than T^(2H)={span:.6g}")
    K = _ceil_ratio(span, tau)
    nodes = (tau * np.arange(K + 1)) ** (1.0 / (2.0 * H))
    return TimeGrid(nodes, GridLaw.GRADED_CASE_I, tau, T, hurst=H)


def spliced_case2(params: ModelParams, tau: float, T: float) -> TimeGrid:
    """Case II grid for 0.5 < H < 1.

    Segment A uses (tau k)^(1/(2H)) up to k1 = ceil(t_m^(2H)/tau), with
    t_m = min(t_max, T). Segment B continues with (tau k)^(1/H) from
    k2 + 1, where k2 = ceil(t_{k1}^H / tau), until the horizon is covered.
    If t_max >= T the grid degenerates to a single graded segment.
    """
    H = params.hurst
    if H <= 0.5:
        raise DomainError(f"spliced Case II grid needs H > 0.5; got H={H}")
    _check_tau_T(tau, T)
    t_splice = min(t_max_formula(params), T)
    if t_splice >= T:
        return _graded(H, tau, T)

    k1 = _ceil_ratio(t_splice ** (2.0 * H), tau)
    seg_a = (tau * np.arange(k1 + 1)) ** (1.0 / (2.0 * H))
    t_a = seg_a[-1]
    if t_a >= T:
        raise DomainError(
            f"tau={tau} too coarse: the graded segment already covers T={T}, "
            "leaving no nodes for the second segment"
        )
    k2 = math.ceil(t_a**H / tau)
    k_end = max(k2 + 1, _ceil_ratio(T**H, tau))
    seg_b = (tau * np.arange(k2 + 1, k_end + 1)) ** (1.0 / H)
    nodes = np.concatenate([seg_a, seg_b])
    return TimeGrid(
        nodes, GridLaw.SPLICED_CASE_II, tau, T, splice_index=k1, hurst=H, t_splice=t_splice
    )


def uniform(tau_t: float, T: float) -> TimeGrid:
    """Equispaced nodes k * tau_t, k = 0..ceil(T / tau_t)."""
    _check_tau_T(tau_t, T)
    if tau_t > T:
        raise DomainError(f"uniform step {tau_t} exceeds the horizon {T}")
    K = _ceil_ratio(T, tau_t)
    return TimeGrid(tau_t * np.arange(K + 1), GridLaw.UNIFORM, tau_t, T)


def select_grid(params: ModelParams, tau: float, T: float) -> TimeGrid:
    """Pick the graded grid for H < 0.5 and the spliced grid otherwise."""
    if params.hurst < 0.5:
        return graded_case1(params, tau, T)
    return spliced_case2(params, tau, T)
