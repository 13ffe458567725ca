"""Numerical kernels shared by the rest of the package.

Everything works in natural-log units with unit noise variance.  Integrals
over the channel output are truncated composite Gauss-Legendre rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

MIN_TAIL = 6.0
MIN_POINTS_PER_UNIT = 16


class NumericalDomainError(ArithmeticError):
    """Raised when a kernel is fed values outside its mathematical domain."""


def gaussian_pdf(y, mean=0.0):
    """Standard normal density centred at ``mean``. Accepts scalars or arrays."""
    z = np.asarray(y, dtype=float) - mean
    out = np.exp(-0.5 * z * z - LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def gaussian_logpdf(y, mean=0.0):
    z = np.asarray(y, dtype=float) - mean
    return -0.5 * z * z - LOG_SQRT_2PI


def logsumexp(a, axis=None):
    """``log(sum(exp(a)))`` along ``axis`` with a max shift against overflow/underflow."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else float(out.ravel()[0])


def xlogx(v):
    """``v * ln(v)`` with the continuous extension ``0 * ln(0) = 0``."""
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise NumericalDomainError("xlogx is defined for finite v >= 0 only")
    safe = np.where(arr > 0, arr, 1.0)
    out = np.where(arr > 0, arr * np.log(safe), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Fixed nodes and positive weights on the closed interval ``domain``."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple[float, float]
    points_per_unit: int = 0
    tail: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        lo, hi = self.domain
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] < lo or nodes[-1] > hi:
            raise ValueError("nodes must lie inside the domain")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    def __len__(self):
        return self.nodes.size

    @property
    def degree(self) -> int:
        """Highest polynomial degree integrated exactly on every panel."""
        return 2 * self.points_per_unit - 1

    def describe(self) -> dict:
        return {
            "domain": list(self.domain),
            "points_per_unit": self.points_per_unit,
            "tail": self.tail,
            "num_nodes": len(self),
        }


def build_rule(a_max: float, tail: float = 10.0, points_per_unit: int = 32) -> QuadratureRule:
    """Composite Gauss-Legendre rule on ``[-(a_max + tail), a_max + tail]``.

    The interval is cut into ``ceil(length)`` equal panels (each at most one
    noise standard deviation wide) carrying ``points_per_unit`` nodes apiece.
    """
    if a_max < 0 or not math.isfinite(a_max):
        raise ValueError(f"a_max must be finite and >= 0, got {a_max}")
    if tail < MIN_TAIL:
        raise ValueError(f"tail must be >= {MIN_TAIL} noise std devs, got {tail}")
    if int(points_per_unit) != points_per_unit or points_per_unit < MIN_POINTS_PER_UNIT:
        raise ValueError(f"points_per_unit must be an integer >= {MIN_POINTS_PER_UNIT}")
    points_per_unit = int(points_per_unit)
    half = a_max + tail
    n_panels = max(1, math.ceil(2.0 * half - 1e-9))
    edges = np.linspace(-half, half, n_panels + 1)
    centres = 0.5 * (edges[:-1] + edges[1:])
    halfwidths = 0.5 * np.diff(edges)
    x, w = np.polynomial.legendre.leggauss(points_per_unit)
    nodes = (centres[:, None] + halfwidths[:, None] * x).ravel()
    weights = (halfwidths[:, None] * w).ravel()
    return QuadratureRule(nodes, weights, (-half, half), points_per_unit, float(tail))


def integrate(rule: QuadratureRule, f: Callable | np.ndarray) -> float:
    """Apply ``rule`` to ``f``, a vectorised callable or values at the nodes."""
    values = f(rule.nodes) if callable(f) else f
    values = np.broadcast_to(np.asarray(values, dtype=float), rule.nodes.shape)
    if not np.all(np.isfinite(values)):
        raise NumericalDomainError("integrand is not finite at every quadrature node")
    return float(values @ rule.weights)
