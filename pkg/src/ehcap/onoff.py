"""On-off energy arrivals: amplitude 0 or sqrt(E), plus the comparison baselines.

With the "off" amplitude pinned at zero the extended input reduces to its second
coordinate, so the optimisation runs over a single amplitude-constrained
variable whose channel is a two-component Gaussian mixture.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ehcap.channel import (
    DEFAULT_POINTS_PER_UNIT,
    DEFAULT_TAIL,
    DiscreteDistribution,
    ExtendedChannel,
    StateAlphabet,
)
from ehcap.numerics import build_rule
from ehcap.solver import DEFAULT_KMAX, DEFAULT_TOL, CapacitySolution, smith_capacity, solve_capacity

log = logging.getLogger(__name__)

U_GRID_POINTS = 512
U_KKT_TOL = 1e-7
U_BRACKET = (1.0, 3.0)


@dataclass(frozen=True)
class OnOffProblem:
    p_on: float
    energy: float

    def __post_init__(self):
        if not (0.0 < self.p_on <= 1.0):
            raise ValueError(f"p_on must lie in (0, 1], got {self.p_on}")
        if not (self.energy >= 0.0 and math.isfinite(self.energy)):
            raise ValueError(f"energy must be finite and >= 0, got {self.energy}")

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.energy)

    @property
    def alphabet(self) -> StateAlphabet:
        """States (off, on).  With p_on = 1 the off state never occurs and is dropped."""
        if self.p_on == 1.0:
            return StateAlphabet([self.amplitude], [1.0])
        return StateAlphabet([0.0, self.amplitude], [1.0 - self.p_on, self.p_on])

    def channel(self, points_per_unit: int = DEFAULT_POINTS_PER_UNIT,
                tail: float = DEFAULT_TAIL) -> ExtendedChannel:
        alphabet = self.alphabet
        return ExtendedChannel(alphabet, build_rule(alphabet.max_amplitude, tail, points_per_unit))


@dataclass(frozen=True)
class BaselineSet:
    c_causal: float
    c_si_both: float
    c_no_si: float
    c_battery: float
    causal_solution: CapacitySolution | None = field(default=None, repr=False, compare=False)
    si_both_solution: CapacitySolution | None = field(default=None, repr=False, compare=False)

    def ordered(self, slack: float = 1e-6) -> bool:
        return (abs(self.c_no_si) <= slack
                and self.c_no_si <= self.c_causal + slack
                and self.c_causal <= self.c_si_both + slack
                and self.c_si_both <= self.c_battery + slack)

    def to_dict(self) -> dict:
        return {
            "c_causal_nats": self.c_causal,
            "c_si_both_nats": self.c_si_both,
            "c_no_si_nats": self.c_no_si,
            "c_battery_nats": self.c_battery,
        }


def onoff_capacity(prob: OnOffProblem, tol: float = DEFAULT_TOL, *, K_max: int = DEFAULT_KMAX,
                   points_per_unit: int = DEFAULT_POINTS_PER_UNIT, symmetric: bool = True,
                   ) -> CapacitySolution:
    """Capacity with causal state knowledge at the transmitter only.

    The returned distribution lives on the extended input (t_off, t_on) with
    t_off = 0; see :func:`on_marginal` for the distribution of the on-state symbol.
    """
    return solve_capacity(prob.channel(points_per_unit), tol, K_max, symmetric=symmetric)


def on_marginal(solution: CapacitySolution) -> DiscreteDistribution:
    """Distribution of the symbol sent in the on state."""
    F = solution.distribution
    return DiscreteDistribution.from_arrays(F.points[:, -1:], F.weights)


def _binary_channel(p_on: float, x: float, points_per_unit: int) -> tuple[ExtendedChannel, DiscreteDistribution]:
    prob = OnOffProblem(p_on, x * x)
    ch = prob.channel(points_per_unit)
    top = np.zeros(ch.dim)
    top[-1] = x
    return ch, DiscreteDistribution(np.vstack([top, -top]), [0.5, 0.5])


def g_function(p_on: float, x: float, t2, *, points_per_unit: int = DEFAULT_POINTS_PER_UNIT):
    """Information density at (0, t2) under the equiprobable binary input at +/-x."""
    if x <= 0:
        raise ValueError("x must be positive")
    t2 = np.asarray(t2, dtype=float)
    if np.any(np.abs(t2) > x + 1e-12):
        raise ValueError("t2 must lie in [-x, x]")
    ch, F = _binary_channel(p_on, x, points_per_unit)
    pts = np.zeros((t2.size, ch.dim))
    pts[:, -1] = t2.ravel()
    out = ch.info_density(F, pts)
    return float(out[0]) if t2.ndim == 0 else out.reshape(t2.shape)


def binary_violation(p_on: float, x: float, n_grid: int = U_GRID_POINTS,
                     points_per_unit: int = DEFAULT_POINTS_PER_UNIT) -> float:
    """max over t2 in [-x, x] of g(t2, x) - g(x, x)."""
    ch, F = _binary_channel(p_on, x, points_per_unit)
    t2 = np.linspace(-x, x, n_grid + 1)
    pts = np.zeros((t2.size, ch.dim))
    pts[:, -1] = t2
    values = ch.info_density(F, pts)
    return float(values.max() - values[-1])


def u_threshold(p_on: float, tol_x: float = 1e-4, *, kkt_tol: float = U_KKT_TOL,
                bracket: tuple[float, float] = U_BRACKET, n_grid: int = U_GRID_POINTS,
                points_per_unit: int = DEFAULT_POINTS_PER_UNIT) -> float:
    """Largest amplitude at which the equiprobable binary input stays optimal.

    Bisection on the predicate ``binary_violation(p_on, x) <= kkt_tol``.  The
    bracket is widened (with a log message) if it does not straddle the boundary.
    """
    if not (0.0 < p_on <= 1.0):
        raise ValueError("p_on must lie in (0, 1]")
    if tol_x <= 0:
        raise ValueError("tol_x must be positive")

    def ok(x):
        return binary_violation(p_on, x, n_grid, points_per_unit) <= kkt_tol

    lo, hi = bracket
    while not ok(lo):
        log.info("u_threshold(p_on=%g): binary fails at lower bracket %g, widening", p_on, lo)
        lo /= 2
        if lo < 1e-3:
            raise ArithmeticError(f"binary input never optimal for p_on={p_on}")
    while ok(hi):
        log.info("u_threshold(p_on=%g): binary still optimal at upper bracket %g, widening", p_on, hi)
        lo, hi = hi, hi * 1.5
        if hi > 50:
            raise ArithmeticError(f"no binary/ternary boundary found for p_on={p_on}")
    while hi - lo > tol_x:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def battery_capacity(prob: OnOffProblem) -> float:
    """Rate with an unlimited battery: average-power AWGN capacity at p_on * E."""
    return 0.5 * math.log1p(prob.p_on * prob.energy)


def general_si_both(alphabet: StateAlphabet, tol: float = DEFAULT_TOL, **kwargs) -> float:
    """Capacity with the state known at both ends: sum_i p_i C_Sm(a_i)."""
    return float(sum(p * smith_capacity(a, tol, **kwargs).capacity
                     for a, p in zip(alphabet.amplitudes, alphabet.probs)))


def general_no_si(alphabet: StateAlphabet, tol: float = DEFAULT_TOL, **kwargs) -> float:
    """Capacity with no state knowledge: Smith capacity at the smallest amplitude."""
    return smith_capacity(float(alphabet.amplitudes.min()), tol, **kwargs).capacity


def baselines(prob: OnOffProblem, tol: float = DEFAULT_TOL, *, K_max: int = DEFAULT_KMAX,
              points_per_unit: int = DEFAULT_POINTS_PER_UNIT) -> BaselineSet:
    causal = onoff_capacity(prob, tol, K_max=K_max, points_per_unit=points_per_unit)
    smith = smith_capacity(prob.amplitude, tol, K_max=K_max, points_per_unit=points_per_unit)
    return BaselineSet(
        c_causal=causal.capacity,
        c_si_both=prob.p_on * smith.capacity,
        c_no_si=smith_capacity(0.0, tol).capacity,
        c_battery=battery_capacity(prob),
        causal_solution=causal,
        si_both_solution=smith,
    )
