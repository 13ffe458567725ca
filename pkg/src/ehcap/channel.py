"""State alphabet, Shannon-strategy extended channel and its information functionals.

The transmitter sees the amplitude state causally, so it codes over vectors
``t = (t_1, ..., t_M)`` with ``|t_i| <= a_i`` and sends ``t_i`` when state ``i``
occurs.  The receiver sees ``Y = t_S + N`` with ``S`` drawn from the state
probabilities, which makes ``Y | t`` a Gaussian mixture.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ehcap.numerics import (
    NumericalDomainError,
    QuadratureRule,
    build_rule,
    gaussian_logpdf,
    gaussian_pdf,
    logsumexp,
    xlogx,
)

PROB_TOL = 1e-12
BOX_TOL = 1e-12
MERGE_TOL = 1e-7
DEFAULT_TAIL = 10.0
DEFAULT_POINTS_PER_UNIT = 32

# rows per block when evaluating many candidate points at once
_CHUNK = 4096
# array elements per block in lattice evaluation
_LATTICE_BLOCK = 1 << 22
_TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class StateAlphabet:
    amplitudes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float)).copy()
        p = np.atleast_1d(np.asarray(self.probs, dtype=float)).copy()
        if a.ndim != 1 or a.size == 0 or a.shape != p.shape:
            raise ValueError("amplitudes and probs must be non-empty 1-d sequences of equal length")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise ValueError("amplitudes must be finite and >= 0")
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("state probabilities must lie in (0, 1]")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"state probabilities sum to {p.sum()!r}, expected 1")
        a.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.amplitudes.size

    @property
    def max_amplitude(self) -> float:
        return float(self.amplitudes.max())

    @property
    def free_axes(self) -> np.ndarray:
        """Indices of states with a nonzero amplitude (the others pin t_i = 0)."""
        return np.flatnonzero(self.amplitudes > 0)

    @property
    def is_degenerate(self) -> bool:
        return self.free_axes.size == 0

    def in_box(self, t, tol: float = BOX_TOL) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(np.all(np.abs(t) <= self.amplitudes + tol))

    def clip(self, t):
        return np.clip(t, -self.amplitudes, self.amplitudes)

    def __repr__(self):
        return f"StateAlphabet(amplitudes={self.amplitudes.tolist()}, probs={self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finitely supported distribution over extended inputs.

    ``points`` has shape ``(K, M)``; ``weights`` has shape ``(K,)``.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        pts = pts.copy()
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if pts.ndim != 2 or pts.shape[0] != w.size or w.size == 0:
            raise ValueError("points must be (K, M) with one weight per point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("support points must be finite")
        if np.any(w <= 0) or np.any(w > 1 + PROB_TOL):
            raise ValueError("weights must lie in (0, 1]")
        if abs(w.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        if w.size > 1:
            gaps = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
            gaps[np.diag_indices(w.size)] = np.inf
            if gaps.min() <= MERGE_TOL:
                raise ValueError("support points must be pairwise distinct; use from_arrays to merge")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_arrays(cls, points, weights, merge_tol: float = MERGE_TOL, min_weight: float = 0.0):
        """Build a distribution, merging near-duplicate points and renormalising.

        Points within ``merge_tol`` (max-norm) of an earlier point are folded into
        it with summed weight; points with weight ``<= min_weight`` are dropped.
        """
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(weights, dtype=float).ravel()
        keep_pts, keep_w = [], []
        for t, wt in zip(pts, w):
            for j, s in enumerate(keep_pts):
                if np.max(np.abs(t - s)) <= merge_tol:
                    keep_w[j] += wt
                    break
            else:
                keep_pts.append(t.copy())
                keep_w.append(float(wt))
        keep_w = np.array(keep_w)
        mask = keep_w > min_weight
        if not np.any(mask):
            raise ValueError("no support point carries positive weight")
        out_pts = np.array(keep_pts)[mask]
        out_w = keep_w[mask]
        return cls(out_pts, out_w / out_w.sum())

    @classmethod
    def point_mass(cls, t):
        return cls(np.atleast_2d(np.asarray(t, dtype=float)), [1.0])

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def negated(self) -> "DiscreteDistribution":
        return DiscreteDistribution(-self.points, self.weights)

    def symmetrized(self) -> "DiscreteDistribution":
        """Average of the distribution and its mirror image under t -> -t."""
        return DiscreteDistribution.from_arrays(
            np.vstack([self.points, -self.points]),
            np.concatenate([self.weights, self.weights]) / 2.0,
        )

    def is_feasible(self, alphabet: StateAlphabet) -> bool:
        return self.dim == alphabet.size and all(alphabet.in_box(t) for t in self.points)

    def sorted(self) -> "DiscreteDistribution":
        order = np.lexsort(self.points.T[::-1])
        return DiscreteDistribution(self.points[order], self.weights[order])

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    def __repr__(self):
        pairs = ", ".join(
            f"{np.round(t, 6).tolist()}:{w:.6g}" for t, w in zip(self.points, self.weights)
        )
        return f"DiscreteDistribution({pairs})"


@dataclass(frozen=True, eq=False)
class ExtendedChannel:
    """Channel from the extended input T to Y with density sum_i p_i p_N(y - t_i)."""

    alphabet: StateAlphabet
    rule: QuadratureRule = field(default=None)

    def __post_init__(self):
        rule = self.rule
        reach = self.alphabet.max_amplitude + DEFAULT_TAIL
        if rule is None:
            rule = build_rule(self.alphabet.max_amplitude, DEFAULT_TAIL, DEFAULT_POINTS_PER_UNIT)
            object.__setattr__(self, "rule", rule)
        lo, hi = rule.domain
        if lo > -reach + 1e-12 or hi < reach - 1e-12:
            raise ValueError(f"quadrature domain {rule.domain} does not cover +/-{reach}")
        object.__setattr__(self, "_log_probs", np.log(self.alphabet.probs))

    @classmethod
    def build(cls, amplitudes, probs, points_per_unit: int = DEFAULT_POINTS_PER_UNIT,
              tail: float = DEFAULT_TAIL) -> "ExtendedChannel":
        alphabet = StateAlphabet(amplitudes, probs)
        return cls(alphabet, build_rule(alphabet.max_amplitude, tail, points_per_unit))

    @property
    def dim(self) -> int:
        return self.alphabet.size

    def _as_points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = t.reshape(1, 1)
        elif t.ndim == 1:
            t = t.reshape(1, -1) if t.size == self.dim else t.reshape(-1, 1)
        if t.shape[1] != self.dim:
            raise ValueError(f"expected points with {self.dim} coordinates, got shape {t.shape}")
        return t

    def _log_conditional_at(self, points: np.ndarray, y: np.ndarray) -> np.ndarray:
        # (K, M, Q) -> (K, Q) via logsumexp over states
        terms = self._log_probs[None, :, None] + gaussian_logpdf(
            y[None, None, :], points[:, :, None]
        )
        return logsumexp(terms, axis=1)

    def log_conditional(self, points) -> np.ndarray:
        """``log f(y_q | t_k)`` at the quadrature nodes, shape ``(K, Q)``."""
        return self._log_conditional_at(self._as_points(points), self.rule.nodes)

    def log_output(self, F: DiscreteDistribution) -> np.ndarray:
        """``log f(y_q; F)`` at the quadrature nodes."""
        return logsumexp(self.log_conditional(F.points) + np.log(F.weights)[:, None], axis=0)

    def conditional_density(self, t, y):
        pts = self._as_points(t)
        if pts.shape[0] != 1:
            raise ValueError("conditional_density takes a single extended point")
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.exp(self._log_conditional_at(pts, yy)[0])
        return float(out[0]) if np.ndim(y) == 0 else out

    def output_density(self, F: DiscreteDistribution, y):
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        logs = self._log_conditional_at(F.points, yy) + np.log(F.weights)[:, None]
        out = np.exp(logsumexp(logs, axis=0))
        return float(out[0]) if np.ndim(y) == 0 else out

    def info_density(self, F: DiscreteDistribution, t, log_out: np.ndarray | None = None):
        """Mutual-information density i(t; F) in nats.

        This is the divergence between f(.|t) and f(.; F).  ``t`` may be one point or
        an ``(N, M)`` array; the result is a float or an ``(N,)`` array accordingly.
        """
        single = np.ndim(t) <= 1 and np.size(t) == self.dim
        pts = self._as_points(t)
        if log_out is None:
            log_out = self.log_output(F)
        out = np.empty(pts.shape[0])
        w = self.rule.weights
        for start in range(0, pts.shape[0], _CHUNK):
            lc = self.log_conditional(pts[start:start + _CHUNK])
            integrand = np.exp(lc) * (lc - log_out)
            if not np.all(np.isfinite(integrand)):
                raise NumericalDomainError("non-finite information-density integrand")
            out[start:start + _CHUNK] = integrand @ w
        return float(out[0]) if single else out

    def info_density_lattice(self, F: DiscreteDistribution, axes,
                             log_out: np.ndarray | None = None) -> np.ndarray:
        """i(t; F) on the product lattice ``axes[0] x ... x axes[M-1]``, C-ordered ``(N,)``.

        f(y|t) is a sum of per-state kernels, so each axis is tabulated once and a
        lattice point costs M - 1 additions and one logarithm per node.
        """
        if len(axes) != self.dim:
            raise ValueError(f"expected {self.dim} axes, got {len(axes)}")
        if log_out is None:
            log_out = self.log_output(F)
        y, w = self.rule.nodes, self.rule.weights
        tables = [p * gaussian_pdf(y[None, :], np.asarray(ax, dtype=float)[:, None])
                  for p, ax in zip(self.alphabet.probs, axes)]
        lead, last = tables[:-1], tables[-1]
        lead_shape = tuple(len(t) for t in lead)
        n_lead = int(np.prod(lead_shape)) if lead else 1
        step = max(1, _LATTICE_BLOCK // last.size)
        out = np.empty((n_lead, last.shape[0]))
        for start in range(0, n_lead, step):
            stop = min(start + step, n_lead)
            base = np.zeros((stop - start, y.size))
            if lead:
                for tab, idx in zip(lead, np.unravel_index(np.arange(start, stop), lead_shape)):
                    base += tab[idx]
            f = base[:, None, :] + last[None, :, :]
            f *= np.log(np.maximum(f, _TINY)) - log_out
            out[start:stop] = f @ w
        if not np.all(np.isfinite(out)):
            raise NumericalDomainError("non-finite information density on the lattice")
        return out.ravel()

    def info_density_grad(self, F: DiscreteDistribution, t, log_out: np.ndarray | None = None):
        """Gradient of i(t; F) in t with F held fixed, shape ``(N, M)``."""
        pts = self._as_points(t)
        if log_out is None:
            log_out = self.log_output(F)
        y = self.rule.nodes
        lc = self.log_conditional(pts)
        ratio = (lc - log_out) * self.rule.weights
        # d/dt_i f(y|t) = p_i (y - t_i) p_N(y - t_i)
        dens = np.exp(self._log_probs[None, :, None] + gaussian_logpdf(y[None, None, :], pts[:, :, None]))
        dens *= y[None, None, :] - pts[:, :, None]
        return np.einsum("kmq,kq->km", dens, ratio)

    def mutual_information(self, F: DiscreteDistribution) -> float:
        """I_F(T; Y) in nats, computed as h(Y) - h(Y | T)."""
        w = self.rule.weights
        cond = np.exp(self.log_conditional(F.points))
        out = F.weights @ cond
        h_y = -float(xlogx(out) @ w)
        h_y_given_t = -float(F.weights @ (xlogx(cond) @ w))
        return h_y - h_y_given_t
