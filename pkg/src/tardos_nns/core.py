"""Shared domain types and the two per-segment score functions.

Bits are stored little-endian inside 64-bit words, row-major: bit ``i`` of a
codeword lives in word ``i // 64`` at position ``i % 64``.  Padding bits past
the code length are always zero.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

WORD_BITS = 64

#: Default memory budget (bytes) for codebooks and index tables.
MEMORY_BUDGET = 4 * 2**30


class FingerprintError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FingerprintError, ValueError):
    pass


class DimensionError(FingerprintError, ValueError):
    pass


class CapacityError(FingerprintError, MemoryError):
    pass


class IntegrityError(FingerprintError):
    pass


class NumericError(FingerprintError, ArithmeticError):
    pass


class FormatError(FingerprintError, ValueError):
    pass


class ScoreKind(enum.Enum):
    SYMMETRIC = "symmetric"
    EQUIVALENT = "equivalent"


def n_words(length: int) -> int:
    return -(-length // WORD_BITS)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, length) 0/1 array into (rows, n_words) little-endian uint64."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    rows, length = bits.shape
    padded = np.zeros((rows, n_words(length) * WORD_BITS), dtype=np.uint8)
    padded[:, :length] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(rows, -1)


def unpack_bits(words: np.ndarray, length: int) -> np.ndarray:
    words = np.atleast_2d(np.ascontiguousarray(words, dtype="<u8"))
    raw = words.view(np.uint8)
    return np.unpackbits(raw, axis=1, count=length, bitorder="little")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BiasVector:
    """Secret per-segment probabilities ``p_i``, each strictly inside (0, 1)."""

    probs: np.ndarray
    cutoff: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 1:
            raise DimensionError("bias vector must be a non-empty 1-d sequence")
        if not np.all((p > 0.0) & (p < 1.0)):
            raise DomainError("bias entries must lie in the open interval (0, 1)")
        if np.any(p < self.cutoff) or np.any(p > 1.0 - self.cutoff):
            raise DomainError(f"bias entries violate cutoff {self.cutoff}")
        object.__setattr__(self, "probs", _frozen(p))

    def __len__(self) -> int:
        return self.probs.size

    @property
    def length(self) -> int:
        return self.probs.size

    @cached_property
    def weights(self) -> np.ndarray:
        """Per-segment ``1/sqrt(p(1-p))``."""
        w = 1.0 / np.sqrt(self.probs * (1.0 - self.probs))
        w.setflags(write=False)
        return w


@dataclass(frozen=True, eq=False)
class Codebook:
    """``n`` user codewords of ``length`` bits, packed into uint64 words."""

    n: int
    length: int
    words: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.ascontiguousarray(self.words, dtype="<u8")
        if w.shape != (self.n, n_words(self.length)):
            raise DimensionError(
                f"expected packed shape {(self.n, n_words(self.length))}, got {w.shape}")
        tail = self.length % WORD_BITS
        if tail and self.n and np.any(w[:, -1] >> np.uint64(tail)):
            raise FormatError("padding bits must be zero")
        object.__setattr__(self, "words", _frozen(w))

    @classmethod
    def from_bits(cls, bits) -> Codebook:
        bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
        return cls(bits.shape[0], bits.shape[1], pack_bits(bits))

    def row(self, j: int) -> np.ndarray:
        if not 0 <= j < self.n:
            raise IndexError(f"user {j} out of range [0, {self.n})")
        return unpack_bits(self.words[j], self.length)[0]

    def rows(self, users) -> np.ndarray:
        return unpack_bits(self.words[np.asarray(users, dtype=np.intp)], self.length)

    def to_bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.length)

    @cached_property
    def checksum(self) -> bytes:
        h = hashlib.sha256()
        h.update(np.array([self.n, self.length], dtype="<u8").tobytes())
        h.update(self.words.tobytes())
        return h.digest()


@dataclass(frozen=True, eq=False)
class PirateCopy:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1:
            raise DimensionError("pirate copy must be 1-d")
        if np.any(b > 1):
            raise DomainError("pirate copy entries must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b))

    def __len__(self) -> int:
        return self.bits.size


@dataclass(frozen=True)
class UserScore:
    user: int
    score: float


def _check_p(p):
    p = np.asarray(p, dtype=np.float64)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("p must lie in the open interval (0, 1)")
    return p


def score_symmetric(x, y, p):
    """Symmetric Tardos score.  Vectorised over numpy inputs."""
    p = _check_p(p)
    x = np.asarray(x)
    y = np.asarray(y)
    up = np.sqrt(p / (1.0 - p))
    down = np.sqrt((1.0 - p) / p)
    out = np.where(y == 1, np.where(x == 1, down, -up), np.where(x == 1, -down, up))
    return float(out) if out.ndim == 0 else out


def score_equivalent(x, y, p):
    """``+1/sqrt(p(1-p))`` on a match, ``-1/sqrt(p(1-p))`` on a mismatch."""
    p = _check_p(p)
    w = 1.0 / np.sqrt(p * (1.0 - p))
    out = np.where(np.asarray(x) == np.asarray(y), w, -w)
    return float(out) if out.ndim == 0 else out


SCORE_FUNCTIONS = {
    ScoreKind.SYMMETRIC: score_symmetric,
    ScoreKind.EQUIVALENT: score_equivalent,
}


def accumulate_score(codeword, y, p, kind: ScoreKind = ScoreKind.EQUIVALENT) -> float:
    """Sum of per-segment scores of one codeword against a pirate copy."""
    x = np.asarray(codeword)
    y = y.bits if isinstance(y, PirateCopy) else np.asarray(y)
    p = p.probs if isinstance(p, BiasVector) else np.asarray(p, dtype=np.float64)
    if not (x.shape == y.shape == p.shape) or x.ndim != 1:
        raise DimensionError(f"length mismatch: {x.shape}, {y.shape}, {p.shape}")
    return float(np.sum(SCORE_FUNCTIONS[ScoreKind(kind)](x, y, p), dtype=np.float64))
