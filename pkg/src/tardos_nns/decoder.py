"""Spherical embedding of codewords and pirate copies, and the linear decoder.

With ``v_j = 2 x_j - 1`` and ``q_i = (2 y_i - 1) / sqrt(p_i (1 - p_i))`` the
equivalent score of user ``j`` is exactly the dot product ``<v_j, q>``.  The
decoder never materialises ``v_j``: it works on the packed codebook through
:class:`ScoreKernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .core import (BiasVector, Codebook, DimensionError, DomainError, PirateCopy,
                   ScoreKind, UserScore)

#: Weight groups above this count switch the kernel from popcounts to byte tables.
MAX_POPCOUNT_GROUPS = 16
#: Rows scored per chunk (bounds temporary memory).
SCORE_CHUNK = 4096

_BYTE_BITS = ((np.arange(256)[None, :] >> np.arange(8)[:, None]) & 1).astype(np.float64)


@dataclass(frozen=True, eq=False)
class EmbeddedPoint:
    coords: np.ndarray
    norm: float

    def __len__(self) -> int:
        return self.coords.size


def embed_codeword(x) -> EmbeddedPoint:
    x = np.asarray(x, dtype=np.float64)
    v = 2.0 * x - 1.0
    return EmbeddedPoint(v, math.sqrt(v.size))


def embed_pirate(y, bias: BiasVector) -> EmbeddedPoint:
    y = y.bits if isinstance(y, PirateCopy) else np.asarray(y)
    if y.shape != bias.probs.shape:
        raise DimensionError(f"pirate copy length {y.size} != bias length {len(bias)}")
    q = (2.0 * y - 1.0) * bias.weights
    return EmbeddedPoint(q, float(np.sqrt(np.sum(bias.weights**2))))


@dataclass(frozen=True)
class Threshold:
    z: float


@dataclass(frozen=True)
class TopM:
    m: int

    def __post_init__(self):
        if self.m < 0:
            raise DomainError("m must be non-negative")


DecodeMode = Threshold | TopM


@dataclass
class DecodeStats:
    scores_computed: int = 0
    dot_products_total: int = 0
    hash_dot_products: int = 0


@dataclass
class AccusationResult:
    accused: tuple[UserScore, ...]
    threshold_used: float | None
    work: DecodeStats
    candidates: np.ndarray = field(default_factory=lambda: np.empty(0, np.intp), repr=False)
    scores: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @property
    def accused_users(self) -> list[int]:
        return [a.user for a in self.accused]


class ScoreKernel:
    """Scores packed codewords against one pirate copy.

    Both score kinds are affine in the shared partial sum ``S_j = sum_i q_i x_ji``:
    equivalent = ``2 S_j - sum(q)``, symmetric = ``sum_i g(0, y_i, p_i) + S_j``.
    Sharing ``S_j`` keeps the two rankings identical in floating point.

    ``S_j`` is computed from integer popcounts when ``p`` has few distinct values
    (so equal mathematical scores give bit-equal floats), otherwise from a
    per-byte lookup table.  Every row is reduced independently, so a user's score
    does not depend on which other users are scored alongside it.
    """

    def __init__(self, y, bias: BiasVector, kind: ScoreKind = ScoreKind.EQUIVALENT):
        y = y.bits if isinstance(y, PirateCopy) else np.asarray(y, dtype=np.uint8)
        if y.shape != bias.probs.shape:
            raise DimensionError(f"pirate copy length {y.size} != bias length {len(bias)}")
        self.kind = ScoreKind(kind)
        self.length = y.size
        w = bias.weights
        p = bias.probs
        q = np.where(y == 1, w, -w)
        self.q_sum = float(np.sum(q))
        # symmetric score of a codeword that is all zeros
        self.sym_base = float(np.sum(np.where(y == 1, -np.sqrt(p / (1 - p)), np.sqrt(p / (1 - p)))))
        self._nwords = -(-self.length // 64)
        groups = np.unique(w)
        if groups.size <= MAX_POPCOUNT_GROUPS:
            self._groups = []
            for wg in groups:
                in_g = w == wg
                pos = _pack_row(in_g & (y == 1), self._nwords)
                neg = _pack_row(in_g & (y == 0), self._nwords)
                self._groups.append((float(wg), pos, neg))
            self._table = None
        else:
            self._groups = None
            nbytes = self._nwords * 8
            qpad = np.zeros(nbytes * 8)
            qpad[: self.length] = q
            qb = qpad.reshape(nbytes, 8)
            table = np.zeros((nbytes, 256))
            for bit in range(8):
                table += qb[:, bit, None] * _BYTE_BITS[bit][None, :]
            self._table = table
            self._byte_idx = np.arange(nbytes)

    def partial_sums(self, words: np.ndarray) -> np.ndarray:
        words = np.atleast_2d(words)
        if words.shape[1] != self._nwords:
            raise DimensionError("codeword word count does not match the pirate copy")
        out = np.empty(words.shape[0])
        for start in range(0, words.shape[0], SCORE_CHUNK):
            block = words[start:start + SCORE_CHUNK]
            if self._groups is not None:
                acc = np.zeros(block.shape[0])
                for wg, pos, neg in self._groups:
                    k = (np.bitwise_count(block & pos).sum(axis=1, dtype=np.int64)
                         - np.bitwise_count(block & neg).sum(axis=1, dtype=np.int64))
                    acc += wg * k
            else:
                b = np.ascontiguousarray(block, dtype="<u8").view(np.uint8)
                acc = self._table[self._byte_idx, b].sum(axis=1)
            out[start:start + block.shape[0]] = acc
        return out

    def scores(self, codebook: Codebook, users=None) -> np.ndarray:
        if codebook.length != self.length:
            raise DimensionError(f"codebook length {codebook.length} != {self.length}")
        words = codebook.words if users is None else codebook.words[np.asarray(users, np.intp)]
        s = self.partial_sums(words)
        if self.kind is ScoreKind.EQUIVALENT:
            return 2.0 * s - self.q_sum
        return self.sym_base + s


def _pack_row(mask: np.ndarray, nwords: int) -> np.ndarray:
    padded = np.zeros(nwords * 64, dtype=np.uint8)
    padded[: mask.size] = mask
    return np.packbits(padded, bitorder="little").view("<u8")


def rank(users: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Positions sorted by score descending, ties by ascending user index."""
    return np.lexsort((users, -scores))


def select(users: np.ndarray, scores: np.ndarray, mode: DecodeMode) -> tuple[UserScore, ...]:
    order = rank(users, scores)
    if isinstance(mode, TopM):
        order = order[: mode.m]
    elif isinstance(mode, Threshold):
        order = order[scores[order] > mode.z]
    else:
        raise DomainError(f"unknown decode mode {mode!r}")
    return tuple(UserScore(int(users[i]), float(scores[i])) for i in order)


def linear_decode(codebook: Codebook, y, bias: BiasVector,
                  kind: ScoreKind = ScoreKind.EQUIVALENT,
                  mode: DecodeMode = TopM(1)) -> AccusationResult:
    """Score every user and accuse by threshold or top-m."""
    if len(bias) != codebook.length:
        raise DimensionError("bias vector and codebook lengths differ")
    if isinstance(mode, TopM) and mode.m > codebook.n:
        raise DomainError(f"m={mode.m} exceeds n={codebook.n}")
    kernel = ScoreKernel(y, bias, kind)
    scores = kernel.scores(codebook)
    users = np.arange(codebook.n)
    accused = select(users, scores, mode)
    work = DecodeStats(scores_computed=codebook.n, dot_products_total=codebook.n)
    z = mode.z if isinstance(mode, Threshold) else None
    return AccusationResult(accused, z, work, users, scores)


def innocent_score_model(bias: BiasVector, kind: ScoreKind,
                         y=None) -> tuple[float, float]:
    """Mean and standard deviation of an innocent user's score (normal model).

    Symmetric scores of innocents have mean 0 and variance ``l`` under any
    attack.  For equivalent scores the mean depends on the bias: given the
    pirate copy it is ``sum_i q_i (2 p_i - 1)`` with variance ``4 l``; without
    it, the interleaving attack (``E[y_i] = p_i``) is assumed.
    """
    p = bias.probs
    w = bias.weights
    length = p.size
    if ScoreKind(kind) is ScoreKind.SYMMETRIC:
        return 0.0, math.sqrt(length)
    if y is not None:
        y = y.bits if isinstance(y, PirateCopy) else np.asarray(y)
        q = np.where(y == 1, w, -w)
        return float(np.sum(q * (2 * p - 1))), 2.0 * math.sqrt(length)
    bias_sq = (2 * p - 1) ** 2
    mean = float(np.sum(w * bias_sq))
    var = float(np.sum(w**2 * (1.0 - bias_sq**2)))
    return mean, math.sqrt(var)


def suggest_threshold(bias: BiasVector, kind: ScoreKind, target_fp: float, n: int,
                      y=None) -> float:
    """Threshold expecting ``target_fp`` falsely accused innocents among ``n`` users."""
    rate = target_fp / n
    if not 0.0 < rate < 1.0:
        raise DomainError("target_fp / n must lie in (0, 1)")
    mean, sd = innocent_score_model(bias, kind, y)
    return mean + sd * float(norm.isf(rate))
