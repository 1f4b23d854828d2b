"""Random block partitions of the key set and exact block statistics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from ..bounds import mcdiarmid_block_delta
from .pulses import LABEL_I, LABEL_X, LABEL_Y, LABEL_Z, NON_SINGLE
from .rng import OracleStats, frequency_se, shards, stream

SHARD = 2000


@dataclass(frozen=True)
class BlockTally:
    """Composition of the key set: single-photon pulses by Pauli label plus the rest."""

    m_I: int
    m_X: int
    m_Y: int
    m_Z: int
    n_K: int

    def __post_init__(self):
        if min(self.m_I, self.m_X, self.m_Y, self.m_Z) < 0:
            raise ValueError("tallies must be non-negative")
        if self.s_K > self.n_K:
            raise ValueError(f"s_K = {self.s_K} exceeds n_K = {self.n_K}")

    @property
    def s_K(self) -> int:
        return self.m_I + self.m_X + self.m_Y + self.m_Z

    @property
    def r_Z(self) -> int:
        return self.m_X + self.m_Y

    @property
    def r_X(self) -> int:
        return self.m_Z + self.m_Y

    @property
    def r_notZ(self) -> int:
        return self.s_K - self.r_Z

    @property
    def r_notX(self) -> int:
        return self.s_K - self.r_X

    def labels(self) -> np.ndarray:
        counts = [self.n_K - self.s_K, self.m_I, self.m_X, self.m_Y, self.m_Z]
        codes = [NON_SINGLE, LABEL_I, LABEL_X, LABEL_Y, LABEL_Z]
        return np.repeat(np.array(codes, dtype=np.int8), counts)

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "BlockTally":
        c = np.bincount(np.asarray(labels, dtype=np.int64), minlength=5)
        return cls(int(c[LABEL_I]), int(c[LABEL_X]), int(c[LABEL_Y]), int(c[LABEL_Z]), int(len(labels)))


def transposition_shuffle(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle every row by the chain of transpositions ``(n x_n) ... (2 x_2)``.

    ``x_j`` is uniform on ``1..j``; the composition is a uniform permutation
    and changing one ``x_j`` moves at most two items, which is the bounded
    difference structure behind the block-count concentration bound.
    """
    out = np.array(rows, copy=True)
    t, n = out.shape
    r = np.arange(t)
    for j in range(n - 1, 0, -1):
        x = rng.integers(0, j + 1, size=t)
        tmp = out[r, j].copy()
        out[r, j] = out[r, x]
        out[r, x] = tmp
    return out


def block_counts(arranged: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Accepted all-single-photon blocks and those among them with odd phase flips.

    A block is accepted when its bit flips are all absent or all present, the
    parity-check outcome that AD keeps.
    """
    t, n = arranged.shape
    nb = n // b
    blk = arranged[:, : nb * b].reshape(t, nb, b)
    single = np.all(blk != NON_SINGLE, axis=2)
    flips = np.count_nonzero((blk == LABEL_X) | (blk == LABEL_Y), axis=2)
    phases = np.count_nonzero((blk == LABEL_Z) | (blk == LABEL_Y), axis=2)
    accepted = single & ((flips == 0) | (flips == b))
    odd = accepted & (phases % 2 == 1)
    return accepted.sum(axis=1), odd.sum(axis=1)


def permutation_block_experiment(tally: BlockTally, b: int, trials: int, seed: int,
                                 eps: float | None = None,
                                 center_S: float | None = None,
                                 center_R: float | None = None) -> OracleStats:
    """Randomly partition the key set ``trials`` times and count block types.

    ``empirical_mean`` is the mean of S (accepted single-photon blocks). With
    ``eps`` the violation frequency is that of ``|S - center_S| > 3 delta_H``,
    centred on the exact expectation unless ``center_S`` is given; the same
    frequency for R (odd-phase blocks) is in ``extra``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if b < 1 or tally.n_K < b:
        raise ValueError("need n_K >= b >= 1")
    base = tally.labels()
    S_all, R_all = [], []
    for i, size in shards(trials, SHARD):
        rng = stream(seed, i)
        rows = transposition_shuffle(np.broadcast_to(base, (size, base.size)), rng)
        S, R = block_counts(rows, b)
        S_all.append(S)
        R_all.append(R)
    S = np.concatenate(S_all).astype(float)
    R = np.concatenate(R_all).astype(float)
    extra = {
        "mean_R": float(R.mean()),
        "se_S": float(S.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        "se_R": float(R.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        "min_S": float(S.min()),
    }
    freq = 0.0
    se = extra["se_S"]
    if eps is not None:
        env = mcdiarmid_block_delta(tally.n_K, eps)
        cS = float(expected_blocks_exact(tally, b)[0]) if center_S is None else center_S
        cR = float(expected_blocks_exact(tally, b)[1]) if center_R is None else center_R
        freq = float(np.mean(np.abs(S - cS) > env))
        extra["freq_R"] = float(np.mean(np.abs(R - cR) > env))
        extra["envelope"] = env
        se = frequency_se(freq, trials)
    return OracleStats(trials, float(S.mean()), freq, se, seed, extra)


def _block_composition_probs(tally: BlockTally, b: int):
    """Yield ``(a_I, a_X, a_Y, a_Z, probability)`` for all-single-photon blocks."""
    total = comb(tally.n_K, b)
    m = (tally.m_I, tally.m_X, tally.m_Y, tally.m_Z)
    for a_X in range(b + 1):
        for a_Y in range(b + 1 - a_X):
            for a_Z in range(b + 1 - a_X - a_Y):
                a_I = b - a_X - a_Y - a_Z
                ways = comb(m[0], a_I) * comb(m[1], a_X) * comb(m[2], a_Y) * comb(m[3], a_Z)
                if ways:
                    yield a_I, a_X, a_Y, a_Z, Fraction(ways, total)


def expected_blocks_exact(tally: BlockTally, b: int) -> tuple[Fraction, Fraction]:
    """Exact expectations of S (accepted single blocks) and R (odd phase among them)."""
    if tally.n_K < b:
        return Fraction(0), Fraction(0)
    nb = tally.n_K // b
    S = R = Fraction(0)
    for a_I, a_X, a_Y, a_Z, p in _block_composition_probs(tally, b):
        flips = a_X + a_Y
        if flips in (0, b):
            S += p
            if (a_Y + a_Z) % 2 == 1:
                R += p
    return nb * S, nb * R


def expected_odd_phase_blocks_exact(tally: BlockTally, b: int) -> Fraction:
    """Exact expected number of accepted single-photon blocks with a logical X error."""
    return expected_blocks_exact(tally, b)[1]


def enumerate_all_tallies(n_K: int, b: int) -> dict[BlockTally, tuple[Fraction, Fraction]]:
    """Exact block expectations for every tally of size ``n_K`` by brute force.

    All ``5**n_K`` label sequences are enumerated. For a fixed tally every
    arrangement is equally likely under a uniform permutation, so the
    average over the sequences with that tally is the exact expectation.
    """
    if n_K > 9:
        raise ValueError("full enumeration is limited to n_K <= 9")
    seqs = np.array(list(itertools.product(range(5), repeat=n_K)), dtype=np.int8).reshape(-1, n_K)
    S, R = block_counts(seqs, b)
    counts = np.stack([np.count_nonzero(seqs == c, axis=1) for c in range(5)], axis=1)
    keys = counts @ (np.array([1, 16, 256, 4096, 65536]))
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    uniq, first, size = np.unique(keys_sorted, return_index=True, return_counts=True)
    S_sum = np.add.reduceat(S[order], first)
    R_sum = np.add.reduceat(R[order], first)
    out = {}
    for u, idx, cnt, ss, rs in zip(uniq, first, size, S_sum, R_sum):
        c = counts[order[idx]]
        tally = BlockTally(int(c[LABEL_I]), int(c[LABEL_X]), int(c[LABEL_Y]), int(c[LABEL_Z]), n_K)
        out[tally] = (Fraction(int(ss), int(cnt)), Fraction(int(rs), int(cnt)))
    return out
