"""Capacity-achieving distributions by fixed-cardinality ascent plus support escalation.

At a fixed number of mass points the weights are optimised by the classical
alternating-maximisation (Blahut-Arimoto) fixed point followed by a Newton polish,
and the positions by projected gradient ascent inside the amplitude box.  A
candidate is accepted once the mutual-information density satisfies the
optimality conditions: ``i(t; F) <= C`` on the whole box and ``i(t; F) = C`` on
the support.  Otherwise a point is added where the density is largest.
"""

from __future__ import annotations

import functools
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from ehcap.channel import DiscreteDistribution, ExtendedChannel, StateAlphabet
from ehcap.numerics import build_rule, logsumexp

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_KMAX = 8
KKT_GRID_DENSITY = 64
WEIGHT_FLOOR = 1e-9
NEW_POINT_MASS = 1e-3
# below this many free axes the KKT grid is enumerated exhaustively
MAX_GRID_POINTS = 2_000_000


@dataclass(frozen=True)
class KktReport:
    capacity: float
    max_violation: float
    violation_argmax: np.ndarray
    support_slack: float
    grid_spec: str

    def passes(self, tol: float) -> bool:
        return self.max_violation <= tol and self.support_slack <= tol

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "max_violation": self.max_violation,
            "violation_argmax": np.asarray(self.violation_argmax).tolist(),
            "support_slack": self.support_slack,
            "grid_spec": self.grid_spec,
        }


@dataclass(frozen=True)
class CapacitySolution:
    distribution: DiscreteDistribution
    capacity: float
    kkt: KktReport
    cardinality_trace: tuple = ()
    converged: bool = False
    tol: float = DEFAULT_TOL

    @property
    def support_size(self) -> int:
        return self.distribution.size

    def to_dict(self) -> dict:
        return {
            "capacity_nats": self.capacity,
            "converged": self.converged,
            "support_size": self.support_size,
            "distribution": self.distribution.sorted().to_dict(),
            "kkt": self.kkt.to_dict(),
            "cardinality_trace": [list(x) for x in self.cardinality_trace],
        }


@dataclass(frozen=True)
class FixedCardinalityResult:
    distribution: DiscreteDistribution
    mutual_information: float
    stationary: bool
    iterations: int
    history: tuple = ()  # MI after each accepted iteration, starting value first


# --- atoms --------------------------------------------------------------------------
#
# The optimiser moves "atoms".  In the plain parameterisation an atom is one support
# point.  In the symmetric one an atom is an orbit {r, -r} carrying its weight split
# evenly between the two points (or the single point 0).


@dataclass
class _Atoms:
    reps: np.ndarray          # (J, M) representatives
    weights: np.ndarray       # (J,)
    symmetric: bool

    def __post_init__(self):
        self.centre = np.zeros(len(self.weights), dtype=bool)
        if self.symmetric:
            self.centre = np.all(np.abs(self.reps) <= 1e-12, axis=1)
            self.reps[self.centre] = 0.0

    def expansion(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points and the (P, J) map from atom weights to point weights."""
        if not self.symmetric:
            return self.reps, np.eye(len(self.weights))
        pts, cols = [], []
        for j, (r, c) in enumerate(zip(self.reps, self.centre)):
            members = [r] if c else [r, -r]
            for m in members:
                pts.append(m)
                cols.append((j, 1.0 / len(members)))
        A = np.zeros((len(pts), len(self.weights)))
        for i, (j, v) in enumerate(cols):
            A[i, j] = v
        return np.array(pts), A

    def distribution(self) -> DiscreteDistribution:
        pts, A = self.expansion()
        return DiscreteDistribution.from_arrays(pts, A @ self.weights)


def _atoms_from(F: DiscreteDistribution, symmetric: bool) -> _Atoms:
    if not symmetric:
        return _Atoms(F.points.copy(), F.weights.copy(), False)
    pts, w = F.points, F.weights
    used = np.zeros(len(w), dtype=bool)
    reps, weights = [], []
    for k in range(len(w)):
        if used[k]:
            continue
        used[k] = True
        if np.all(np.abs(pts[k]) <= 1e-12):
            reps.append(np.zeros_like(pts[k]))
            weights.append(w[k])
            continue
        mirror = np.flatnonzero(~used & np.all(np.abs(pts + pts[k]) <= 1e-9, axis=1))
        if mirror.size == 0 or abs(w[mirror[0]] - w[k]) > 1e-9:
            raise ValueError("symmetric optimisation needs a negation-symmetric initial distribution")
        used[mirror[0]] = True
        reps.append(pts[k].copy())
        weights.append(w[k] + w[mirror[0]])
    return _Atoms(np.array(reps), np.array(weights), True)


def _densities(lc: np.ndarray, A: np.ndarray, weights: np.ndarray, qw: np.ndarray):
    """Per-atom information densities, the mutual information and log f(y; F)."""
    pw = A @ weights
    live = pw > 0
    log_out = logsumexp(lc[live] + np.log(pw[live])[:, None], axis=0)
    D = (np.exp(lc) * (lc - log_out)) @ qw
    return A.T @ D, float(pw @ D), log_out


# --- weights -----------------------------------------------------------------------


def _optimize_weights(lc: np.ndarray, A: np.ndarray, weights: np.ndarray, qw: np.ndarray,
                      ba_iters: int = 200, newton_iters: int = 50, tol: float = 1e-13):
    """Maximise I over atom weights with the support points held fixed.

    Blahut-Arimoto steps first (monotone, robust), then an equality-constrained Newton
    polish on the concave objective.  Atoms whose weight falls under the floor are
    dropped; the returned mask marks the survivors.
    """
    w = weights.copy()
    D, mi, log_out = _densities(lc, A, w, qw)
    for _ in range(ba_iters):
        if np.max(D) - mi <= tol:
            break
        logw = np.log(w) + D
        w = np.exp(logw - logsumexp(logw))
        D, mi, log_out = _densities(lc, A, w, qw)

    alive = np.ones(w.size, dtype=bool)
    cond = np.exp(lc)
    for _ in range(newton_iters):
        idx = np.flatnonzero(alive)
        if idx.size == 1:
            break
        Ai = A[:, idx]
        wa = w[idx]
        Da, mi, log_out = _densities(lc, Ai, wa, qw)
        if np.max(Da) - np.min(Da) <= tol:
            break
        grad = Da - 1.0
        hp = -(cond * (qw * np.exp(-log_out))) @ cond.T
        hess = Ai.T @ hp @ Ai
        n = idx.size
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = hess
        kkt[:n, n] = kkt[n, :n] = 1.0
        try:
            step = np.linalg.solve(kkt, np.concatenate([-grad, [0.0]]))[:n]
        except np.linalg.LinAlgError:
            break
        # an atom driven to zero weight leaves the support
        neg = step < 0
        s_max = 1.0
        if np.any(neg):
            s_max = min(1.0, float(np.min(-wa[neg] / step[neg])))
        s = s_max
        accepted = False
        while s > 1e-12:
            trial = np.maximum(wa + s * step, 0.0)
            trial /= trial.sum()
            _, trial_mi, _ = _densities(lc, Ai, trial, qw)
            if trial_mi >= mi - 1e-15:
                w[idx] = trial
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        alive &= w > WEIGHT_FLOOR
        w[~alive] = 0.0
        w /= w.sum()

    alive &= w > WEIGHT_FLOOR
    w = np.where(alive, w, 0.0)
    return w / w.sum(), alive


# --- fixed cardinality -------------------------------------------------------------


def _ascend(ch: ExtendedChannel, atoms: _Atoms, max_iters: int):
    """Projected gradient ascent on positions interleaved with weight optimisation."""
    qw = ch.rule.weights
    amps = ch.alphabet.amplitudes
    free = amps > 0

    def evaluate(at):
        pts, A = at.expansion()
        lc = ch.log_conditional(pts)
        _, mi, log_out = _densities(lc, A, at.weights, qw)
        return mi, log_out

    def reweigh(at):
        pts, A = at.expansion()
        w, alive = _optimize_weights(ch.log_conditional(pts), A, at.weights, qw, ba_iters=20)
        return _Atoms(at.reps[alive].copy(), w[alive], at.symmetric)

    def merge(at):
        try:
            merged = at.distribution()
        except ValueError:
            return at
        if merged.size < at.expansion()[0].shape[0]:
            return reweigh(_atoms_from(merged, at.symmetric))
        return at

    atoms = reweigh(atoms)
    mi, log_out = evaluate(atoms)
    history = [mi]
    stationary = False
    step = 1.0
    prev = None
    it = 0
    for it in range(1, max_iters + 1):
        grad = _atom_gradient(ch, atoms, log_out)
        grad[:, ~free] = 0.0
        grad[atoms.centre] = 0.0
        projected = np.clip(atoms.reps + grad, -amps, amps) - atoms.reps
        if np.max(np.abs(projected)) <= 1e-10:
            stationary = True
            break
        # Barzilai-Borwein trial step while the support is unchanged
        s = min(1.0, 4.0 * step)
        if prev is not None and prev[0].shape == atoms.reps.shape:
            dx = (atoms.reps - prev[0]).ravel()
            dg = (grad - prev[1]).ravel()
            curv = -float(dx @ dg)
            if curv > 0:
                s = float(np.clip(dx @ dx / curv, 1e-6, 1e4))
        improved = False
        while s > 1e-12:
            reps = np.clip(atoms.reps + s * grad, -amps, amps)
            trial = _Atoms(reps, atoms.weights.copy(), atoms.symmetric)
            trial_mi, _ = evaluate(trial)
            # Armijo on the projected step, gradient scaled back by the atom weights
            gain = float(np.sum(atoms.weights[:, None] * grad * (reps - atoms.reps)))
            if trial_mi >= mi + 1e-4 * gain and trial_mi > mi - 1e-15:
                improved = True
                break
            s *= 0.5
        if not improved:
            stationary = float(np.max(np.abs(projected))) < 1e-6
            break
        step = s
        prev = (atoms.reps.copy(), grad)
        trial = merge(reweigh(trial))
        new_mi, log_out = evaluate(trial)
        moved = np.max(np.abs(projected)) * s
        atoms, gained, mi = trial, new_mi - mi, new_mi
        history.append(mi)
        if gained < 1e-15 and moved < 1e-10:
            stationary = True
            break
    atoms = reweigh(atoms)
    history.append(evaluate(atoms)[0])
    return atoms, stationary, it, tuple(history)


def _atom_gradient(ch: ExtendedChannel, atoms: _Atoms, log_out: np.ndarray) -> np.ndarray:
    """Gradient of i(t; F) at each representative (the ascent direction per atom)."""
    return ch.info_density_grad(None, atoms.reps, log_out=log_out)


def optimize_fixed_cardinality(ch: ExtendedChannel, K: int, init: DiscreteDistribution,
                               *, symmetric: bool = False,
                               max_iters: int = 500) -> FixedCardinalityResult:
    """Locally maximise I_F over distributions with (at most) ``K`` support points.

    Returns the best iterate; ``stationary`` is False when ``max_iters`` ran out
    before the projected gradient vanished.  Points whose weight collapses are
    pruned, so the result may carry fewer than ``K`` points.
    """
    if init.size != K:
        raise ValueError(f"init has {init.size} points, expected K={K}")
    if not init.is_feasible(ch.alphabet):
        raise ValueError("init distribution leaves the amplitude box")
    start_mi = ch.mutual_information(init)
    if K == 1:
        return FixedCardinalityResult(init, start_mi, True, 0, (start_mi,))
    atoms, stationary, iters, history = _ascend(ch, _atoms_from(init, symmetric), max_iters)
    F = atoms.distribution()
    mi = ch.mutual_information(F)
    if mi < start_mi - 1e-12:
        F, mi, stationary = init, start_mi, False
    if not stationary:
        log.warning("fixed-cardinality ascent stopped before stationarity (K=%d)", K)
    return FixedCardinalityResult(F, mi, stationary, iters, (start_mi, *history))


# --- optimality conditions ------------------------------------------------------------


def _axis_grid(a: float, density: int) -> np.ndarray:
    """Lattice {k / density : |k| <= a * density} plus both endpoints of [-a, a]."""
    if a == 0:
        return np.zeros(1)
    n = int(np.floor(a * density + 1e-9))
    g = np.arange(-n, n + 1) / density
    return np.unique(np.concatenate([[-a], g, [a]]))


def lattice_axes(alphabet: StateAlphabet, density: int) -> list[np.ndarray]:
    axes = [_axis_grid(a, density) for a in alphabet.amplitudes]
    n_points = int(np.prod([len(a) for a in axes]))
    if n_points > MAX_GRID_POINTS:
        raise ValueError(f"verification lattice would hold {n_points} points; lower the density")
    return axes


def box_lattice(alphabet: StateAlphabet, density: int) -> np.ndarray:
    axes = lattice_axes(alphabet, density)
    return np.array(list(itertools.product(*axes))) if len(axes) > 1 else axes[0][:, None]


def kkt_check(ch: ExtendedChannel, F: DiscreteDistribution,
              grid_density: int = KKT_GRID_DENSITY) -> KktReport:
    """Evaluate both optimality conditions for ``F`` on a lattice over the box."""
    log_out = ch.log_output(F)
    on_support = ch.info_density(F, F.points, log_out=log_out)
    C = float(F.weights @ on_support)
    axes = lattice_axes(ch.alphabet, grid_density)
    on_grid = ch.info_density_lattice(F, axes, log_out=log_out)
    k = int(np.argmax(on_grid))
    if on_grid[k] >= on_support.max():
        argmax = np.array([ax[i] for ax, i in zip(axes, np.unravel_index(k, [len(a) for a in axes]))])
        top = float(on_grid[k])
    else:
        j = int(np.argmax(on_support))
        argmax, top = F.points[j].copy(), float(on_support[j])
    shape = "x".join(str(len(a)) for a in axes)
    return KktReport(
        capacity=max(C, 0.0),
        max_violation=top - C,
        violation_argmax=argmax,
        support_slack=float(np.max(np.abs(on_support - C))),
        grid_spec=f"lattice {shape} at {grid_density}/unit + {F.size} support points",
    )


# --- escalation -------------------------------------------------------------------


def _corner_init(alphabet: StateAlphabet) -> DiscreteDistribution:
    a = alphabet.amplitudes
    return DiscreteDistribution(np.vstack([a, -a]), [0.5, 0.5])


def _add_point(F: DiscreteDistribution, t: np.ndarray, symmetric: bool) -> DiscreteDistribution:
    new = [t]
    if symmetric and np.any(np.abs(t) > 1e-12):
        new.append(-t)
    mass = NEW_POINT_MASS
    pts = np.vstack([F.points, *new])
    w = np.concatenate([F.weights * (1 - mass), np.full(len(new), mass / len(new))])
    return DiscreteDistribution.from_arrays(pts, w)


def solve_capacity(ch: ExtendedChannel, tol: float = DEFAULT_TOL, K_max: int = DEFAULT_KMAX,
                   *, symmetric: bool = True, grid_density: int = KKT_GRID_DENSITY,
                   max_iters: int = 500) -> CapacitySolution:
    """Capacity and optimal input distribution by cardinality escalation.

    Starts from two mass points at opposite box corners and grows the support at the
    worst optimality violation until both optimality conditions hold within ``tol``.
    With ``symmetric`` (the default) the support is kept closed under negation,
    so an off-centre violation adds its mirror image along with it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    alphabet = ch.alphabet
    if alphabet.is_degenerate:
        F = DiscreteDistribution.point_mass(np.zeros(alphabet.size))
        report = kkt_check(ch, F, grid_density)
        return CapacitySolution(F, 0.0, report, ((1, 0.0),), True, tol)

    F = _corner_init(alphabet)
    trace = []
    best = None
    while True:
        res = optimize_fixed_cardinality(ch, F.size, F, symmetric=symmetric,
                                         max_iters=max_iters)
        F = res.distribution
        report = kkt_check(ch, F, grid_density)
        mi = report.capacity
        if trace and mi < trace[-1][1]:
            mi = trace[-1][1]
        trace.append((F.size, mi))
        candidate = CapacitySolution(F, report.capacity, report, tuple(trace),
                                     report.passes(tol), tol)
        if best is None or candidate.capacity >= best.capacity:
            best = candidate
        if candidate.converged:
            log.debug("converged with %d points, C=%.12g", F.size, report.capacity)
            return candidate
        F = _add_point(F, report.violation_argmax, symmetric)
        if F.size > K_max:
            log.warning("support escalation exhausted K_max=%d (violation %.3g)",
                        K_max, report.max_violation)
            return CapacitySolution(best.distribution, best.capacity, best.kkt,
                                    tuple(trace), False, tol)


def _static_channel(a: float, points_per_unit: int, tail: float) -> ExtendedChannel:
    alphabet = StateAlphabet([a], [1.0])
    return ExtendedChannel(alphabet, build_rule(a, tail, points_per_unit))


@functools.lru_cache(maxsize=256)
def _smith_cached(a: float, tol: float, K_max: int, points_per_unit: int, tail: float,
                  symmetric: bool) -> CapacitySolution:
    return solve_capacity(_static_channel(a, points_per_unit, tail), tol, K_max,
                          symmetric=symmetric)


def smith_capacity(a: float, tol: float = DEFAULT_TOL, *, K_max: int = DEFAULT_KMAX,
                   points_per_unit: int = 32, tail: float = 10.0,
                   symmetric: bool = True) -> CapacitySolution:
    """Capacity of the static channel |X| <= a, in nats."""
    if a < 0:
        raise ValueError("amplitude must be >= 0")
    return _smith_cached(float(a), float(tol), int(K_max), int(points_per_unit),
                         float(tail), bool(symmetric))


# --- independent oracle ---------------------------------------------------------------


def blahut_arimoto(log_w: np.ndarray, qw: np.ndarray, iters: int = 20000,
                   rel_tol: float = 1e-10, gap_tol: float = 1e-11):
    """Alternating maximisation over input probabilities of a discretised channel.

    ``log_w[j, q]`` is the log conditional density of lattice input j at output node
    q and ``qw`` the output quadrature weights.  Returns (capacity, input pmf).

    Each round applies the classical update twice and then tries a squared
    extrapolation of the two steps (SQUAREM).  The extrapolated point is kept only
    if it does not lower I, so the iterates stay monotone.  Iteration stops once
    the upper/lower capacity bound gap is under ``gap_tol``, or once the relative
    change in I stays under ``rel_tol`` for 20 rounds.
    """
    cond = np.exp(log_w)
    cw = cond * qw
    hcond = np.sum(cw * log_w, axis=1)  # -h(Y | x_j)

    def densities(r):
        D = hcond - cw @ np.log(r @ cond)
        return D, float(r @ D)

    def update(r, D):
        logr = np.log(r) + D
        return np.exp(logr - logsumexp(logr))

    n = log_w.shape[0]
    r = np.full(n, 1.0 / n)
    D, mi = densities(r)
    quiet = 0
    for _ in range(iters // 3):
        if np.max(D) - mi <= gap_tol:
            break
        r1 = update(r, D)
        D1, _ = densities(r1)
        r2 = update(r1, D1)
        D2, mi2 = densities(r2)
        d1 = r1 - r
        d2 = r2 - 2 * r1 + r
        alpha = -np.linalg.norm(d1) / max(np.linalg.norm(d2), 1e-300)
        alpha = min(alpha, -1.0)
        rx = np.maximum(r - 2 * alpha * d1 + alpha * alpha * d2, 1e-300)
        rx /= rx.sum()
        Dx, mix = densities(rx)
        rx = update(rx, Dx)
        Dx, mix = densities(rx)
        if mix >= mi2:
            new_r, new_D, new_mi = rx, Dx, mix
        else:
            new_r, new_D, new_mi = r2, D2, mi2
        quiet = quiet + 1 if abs(new_mi - mi) <= rel_tol * max(abs(new_mi), 1e-300) else 0
        r, D, mi = new_r, new_D, new_mi
        if quiet >= 20:
            break
    return max(mi, 0.0), r


def lattice_column_generation(log_w: np.ndarray, qw: np.ndarray, max_rounds: int = 200,
                              gap_tol: float = 1e-11) -> tuple[float, np.ndarray]:
    """Capacity of a discretised channel by support reduction over the lattice.

    Keeps a small working support and fits its weights exactly.  On each round it
    admits the lattice input with the largest information density and drops inputs
    whose weight vanishes.  It stops once no lattice input beats the current rate
    by more than ``gap_tol``.  This complements :func:`blahut_arimoto`, which stalls
    when neighbouring lattice inputs are nearly interchangeable.
    """
    n = log_w.shape[0]
    cond = np.exp(log_w)
    hcond = (cond * log_w) @ qw

    def densities(support, weights):
        log_out = logsumexp(log_w[support] + np.log(weights)[:, None], axis=0)
        D = hcond - (cond * log_out) @ qw
        return D, float(weights @ D[support])

    support = np.array([0])
    weights = np.ones(1)
    D, mi = densities(support, weights)
    for _ in range(max_rounds):
        j = int(np.argmax(D))
        if D[j] - mi <= gap_tol or j in support:
            break
        support = np.append(support, j)
        weights = np.append(weights * (1 - NEW_POINT_MASS), NEW_POINT_MASS)
        w, alive = _optimize_weights(log_w[support], np.eye(support.size), weights, qw,
                                     ba_iters=100, newton_iters=100, tol=0.1 * gap_tol)
        support, weights = support[alive], w[alive]
        D, new_mi = densities(support, weights)
        if new_mi < mi - 1e-14:
            break
        mi = new_mi
    r = np.zeros(n)
    r[support] = weights
    return max(mi, 0.0), r


def ba_oracle(ch: ExtendedChannel, grid_density: int = 64, iters: int = 1500) -> float:
    """Capacity of the channel restricted to a regular input lattice over the box.

    A lower bound on the true capacity that tightens as ``grid_density`` grows.
    The alternating-maximisation value is refined by lattice column generation;
    both are rates of lattice-supported inputs, so the larger one is returned.
    """
    if grid_density < 16:
        raise ValueError("grid_density must be >= 16")
    if ch.alphabet.is_degenerate:
        return 0.0
    lattice = box_lattice(ch.alphabet, grid_density)
    log_w = ch.log_conditional(lattice)
    ba_value, _ = blahut_arimoto(log_w, ch.rule.weights, iters)
    cg_value, _ = lattice_column_generation(log_w, ch.rule.weights)
    return max(ba_value, cg_value)
