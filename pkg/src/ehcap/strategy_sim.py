"""Monte Carlo exercise of the Shannon-strategy code construction.

Codewords are ``M x n`` matrices whose columns are drawn i.i.d. from a solved
input distribution; at time k the transmitter sends the entry in the row of the
state it observes.  No decoder is implemented: the end-to-end check is an
empirical estimate of I(T; Y).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ehcap.channel import BOX_TOL, DiscreteDistribution, ExtendedChannel, StateAlphabet
from ehcap.numerics import gaussian_logpdf, logsumexp

MC_CHUNK = 1 << 20
MIN_MC_SAMPLES = 100_000


class InfeasibleSymbolError(ValueError):
    """A codeword entry violates the amplitude constraint of its state."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``seed``; ``stream`` selects a disjoint substream."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class CodebookSpec:
    block_length: int
    num_codewords: int
    distribution: DiscreteDistribution
    alphabet: StateAlphabet
    seed: int = 0

    def __post_init__(self):
        if self.block_length < 1 or self.num_codewords < 1:
            raise ValueError("block_length and num_codewords must be positive")
        if not self.distribution.is_feasible(self.alphabet):
            raise ValueError("distribution leaves the amplitude box of the alphabet")


@dataclass(frozen=True)
class TransmissionTrace:
    states: np.ndarray
    sent: np.ndarray
    received: np.ndarray

    def is_feasible(self, alphabet: StateAlphabet) -> bool:
        return bool(np.all(np.abs(self.sent) <= alphabet.amplitudes[self.states] + BOX_TOL))


def sample_codebook(spec: CodebookSpec) -> np.ndarray:
    """Codebook of shape ``(num_codewords, M, n)``; column j of a codeword is a support point."""
    rng = make_rng(spec.seed, 0)
    F = spec.distribution
    idx = rng.choice(F.size, size=(spec.num_codewords, spec.block_length), p=F.weights)
    return np.ascontiguousarray(np.moveaxis(F.points[idx], -1, 1))


def sample_states(alphabet: StateAlphabet, n: int, seed: int) -> np.ndarray:
    """i.i.d. state indices drawn with the alphabet's probabilities."""
    return make_rng(seed, 1).choice(alphabet.size, size=n, p=alphabet.probs)


def transmit(codeword: np.ndarray, state_seq, noise_seed: int,
             alphabet: StateAlphabet) -> TransmissionTrace:
    """Send one codeword through the channel under the observed state sequence."""
    codeword = np.asarray(codeword, dtype=float)
    states = np.asarray(state_seq, dtype=int)
    if codeword.ndim != 2 or codeword.shape[0] != alphabet.size:
        raise ValueError(f"codeword must have shape ({alphabet.size}, n)")
    if states.shape != (codeword.shape[1],):
        raise ValueError("state sequence length must equal the block length")
    sent = codeword[states, np.arange(states.size)]
    bad = np.abs(sent) > alphabet.amplitudes[states] + BOX_TOL
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InfeasibleSymbolError(
            f"symbol {sent[k]!r} at position {k} exceeds amplitude {alphabet.amplitudes[states[k]]!r}"
        )
    noise = make_rng(noise_seed, 2).standard_normal(states.size)
    return TransmissionTrace(states, sent, sent + noise)


def _mi_chunk(ch: ExtendedChannel, F: DiscreteDistribution, n: int, seed: int, chunk: int):
    rng = make_rng(seed, 3, chunk)
    alphabet = ch.alphabet
    k = rng.choice(F.size, size=n, p=F.weights)
    s = rng.choice(alphabet.size, size=n, p=alphabet.probs)
    y = F.points[k, s] + rng.standard_normal(n)
    # log f(y | t_j) for every support point j: (K, n)
    log_p = np.log(alphabet.probs)
    log_cond = logsumexp(
        log_p[None, :, None] + gaussian_logpdf(y[None, None, :], F.points[:, :, None]), axis=1
    )
    log_out = logsumexp(log_cond + np.log(F.weights)[:, None], axis=0)
    v = log_cond[k, np.arange(n)] - log_out
    return float(v.sum()), float(np.square(v).sum())


def empirical_mi(ch: ExtendedChannel, F: DiscreteDistribution, num_samples: int, seed: int,
                 workers: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate of I(T; Y) in nats and its standard error.

    Samples are split into fixed-size chunks with their own substreams, so the
    estimate depends only on ``seed`` and ``num_samples``, not on ``workers``.
    """
    if num_samples < MIN_MC_SAMPLES:
        raise ValueError(f"num_samples must be >= {MIN_MC_SAMPLES}")
    sizes = [MC_CHUNK] * (num_samples // MC_CHUNK)
    if num_samples % MC_CHUNK:
        sizes.append(num_samples % MC_CHUNK)
    jobs = [(ch, F, n, seed, i) for i, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _mi_chunk(*a), jobs))
    else:
        parts = [_mi_chunk(*a) for a in jobs]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / num_samples
    var = max(total_sq / num_samples - mean * mean, 0.0) * num_samples / (num_samples - 1)
    return mean, float(np.sqrt(var / num_samples))
