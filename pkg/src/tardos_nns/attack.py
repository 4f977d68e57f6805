"""Symmetric collusion channels and pirate-copy forging."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .core import Codebook, DimensionError, DomainError, FingerprintError, PirateCopy

#: Segments per independently seeded block when forging.
SEGMENT_BLOCK = 4096


class UnknownStrategyError(FingerprintError, LookupError):
    pass


@dataclass(frozen=True)
class AttackStrategy:
    """``theta[k]`` is the probability of outputting 1 when ``k`` colluders hold a 1."""

    theta: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        if len(theta) < 2:
            raise DomainError("strategy needs at least two entries (c >= 1)")
        if any(not 0.0 <= t <= 1.0 for t in theta):
            raise DomainError("theta entries must lie in [0, 1]")
        if theta[0] != 0.0 or theta[-1] != 1.0:
            raise DomainError("marking assumption requires theta[0] = 0 and theta[c] = 1")
        object.__setattr__(self, "theta", theta)

    @property
    def c(self) -> int:
        return len(self.theta) - 1

    def to_config(self) -> list[float]:
        return list(self.theta)

    @classmethod
    def from_config(cls, values) -> AttackStrategy:
        if isinstance(values, str):
            values = [v for v in values.replace(",", " ").split()]
        return cls(tuple(float(v) for v in values))


def interleaving(c: int) -> AttackStrategy:
    _check_c(c)
    return AttackStrategy(tuple(k / c for k in range(c + 1)))


def all_one(c: int) -> AttackStrategy:
    _check_c(c)
    return AttackStrategy((0.0,) + (1.0,) * c)


def _majority(c):
    half = Fraction(c, 2)
    return [1.0 if k > half else 0.5 if k == half else 0.0 for k in range(c + 1)]


def _minority(c):
    half = Fraction(c, 2)
    inner = [1.0 if k < half else 0.5 if k == half else 0.0 for k in range(1, c)]
    return [0.0] + inner + [1.0]


def _coinflip(c):
    return [0.0] + [0.5] * (c - 1) + [1.0]


_NAMED = {
    "interleaving": lambda c: interleaving(c).theta,
    "all-one": lambda c: all_one(c).theta,
    "majority": _majority,
    "minority": _minority,
    "coinflip": _coinflip,
}

STRATEGY_NAMES = tuple(_NAMED)


def named_strategy(name: str, c: int) -> AttackStrategy:
    _check_c(c)
    key = name.lower().replace("_", "-")
    if key in ("all-1", "allone", "all-ones"):
        key = "all-one"
    if key == "coin-flip":
        key = "coinflip"
    try:
        build = _NAMED[key]
    except KeyError:
        raise UnknownStrategyError(f"unknown strategy {name!r}; known: {STRATEGY_NAMES}") from None
    return AttackStrategy(tuple(build(c)))


def _check_c(c):
    if int(c) != c or c < 1:
        raise DomainError(f"colluder count must be a positive integer, got {c}")


def colluder_counts(codebook: Codebook, colluders) -> np.ndarray:
    """Per-segment number of colluders holding a 1."""
    return codebook.rows(colluders).sum(axis=0, dtype=np.int64)


def forge(codebook: Codebook, colluders, strategy: AttackStrategy, seed: int) -> PirateCopy:
    users = np.asarray(sorted(int(j) for j in colluders), dtype=np.intp)
    if users.size == 0:
        raise DomainError("colluder set is empty")
    if np.unique(users).size != users.size:
        raise DomainError("colluder indices must be distinct")
    if users[0] < 0 or users[-1] >= codebook.n:
        raise IndexError("colluder index out of range")
    if users.size != strategy.c:
        raise DimensionError(
            f"strategy is defined for c={strategy.c}, got {users.size} colluders")
    k = colluder_counts(codebook, users)
    theta = np.asarray(strategy.theta)
    u = np.empty(codebook.length)
    for block, start in enumerate(range(0, codebook.length, SEGMENT_BLOCK)):
        stop = min(start + SEGMENT_BLOCK, codebook.length)
        u[start:stop] = rng.stream(seed, rng.ATTACK, block).random(stop - start)
    # theta[0] = 0 and theta[c] = 1 with u in [0, 1) enforce the marking assumption exactly
    return PirateCopy((u < theta[k]).astype(np.uint8))
