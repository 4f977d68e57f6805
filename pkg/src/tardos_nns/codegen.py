"""Bias distributions, bias-vector sampling and codebook generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .core import (MEMORY_BUDGET, BiasVector, CapacityError, Codebook, DomainError,
                   n_words, pack_bits)

#: Rows per independently seeded block of the codebook.
ROW_BLOCK = 1024


@dataclass(frozen=True)
class ArcsineTruncated:
    """Arcsine law ``F(p) = (2/pi) asin(sqrt(p))`` restricted to ``[delta, 1-delta]``."""

    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta < 0.5:
            raise DomainError(f"cutoff must lie in [0, 1/2), got {self.delta}")

    @property
    def cutoff(self) -> float:
        return self.delta


@dataclass(frozen=True)
class Discrete:
    """Finite support: a tuple of ``(p, weight)`` pairs."""

    support: tuple[tuple[float, float], ...]

    def __post_init__(self):
        support = tuple((float(p), float(w)) for p, w in self.support)
        if not support:
            raise DomainError("discrete distribution needs at least one support point")
        for p, w in support:
            if not 0.0 < p < 1.0:
                raise DomainError(f"support point {p} outside (0, 1)")
            if not w > 0.0:
                raise DomainError(f"weight {w} must be positive")
        if abs(sum(w for _, w in support) - 1.0) > 1e-9:
            raise DomainError("discrete weights must sum to 1")
        object.__setattr__(self, "support", support)

    @property
    def points(self) -> np.ndarray:
        return np.array([p for p, _ in self.support])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.support])

    @property
    def cutoff(self) -> float:
        return 0.0


BiasDistribution = ArcsineTruncated | Discrete


def nuida_c3() -> Discrete:
    """Optimal two-point distribution for three colluders: ``p = 0.5 +- 0.289``."""
    return Discrete(((0.211, 0.5), (0.789, 0.5)))


def uniform_half() -> Discrete:
    return Discrete(((0.5, 1.0),))


def default_cutoff(c: int, kappa: float = 0.5) -> float:
    """Arcsine cutoff ``kappa * c**(-4/3)``, clamped to ``[0, 0.49]``."""
    if c < 1:
        raise DomainError("c must be positive")
    return min(max(kappa * c ** (-4.0 / 3.0), 0.0), 0.49)


def arcsine_cdf(p):
    return (2.0 / np.pi) * np.arcsin(np.sqrt(p))


def arcsine_inverse(u, delta: float = 0.0):
    """Map uniforms on [0, 1] to the truncated arcsine law by inverse transform."""
    lo, hi = arcsine_cdf(delta), arcsine_cdf(1.0 - delta)
    u_scaled = lo + np.asarray(u, dtype=np.float64) * (hi - lo)
    return np.sin(np.pi * u_scaled / 2.0) ** 2


def parse_distribution(text: str, c: int | None = None) -> BiasDistribution:
    """Parse ``half``, ``nuida-c3``, ``arcsine[:delta]`` or ``discrete:p:w,p:w,...``.

    ``arcsine:auto`` picks :func:`default_cutoff` for ``c``.
    """
    name, _, rest = text.strip().partition(":")
    name = name.lower()
    if name == "half":
        return uniform_half()
    if name in ("nuida-c3", "nuida3"):
        return nuida_c3()
    if name == "arcsine":
        if rest == "auto":
            if c is None:
                raise DomainError("arcsine:auto needs the colluder count")
            return ArcsineTruncated(default_cutoff(c))
        return ArcsineTruncated(float(rest) if rest else 0.0)
    if name == "discrete":
        pairs = []
        for item in rest.split(","):
            try:
                p, w = item.split(":")
                pairs.append((float(p), float(w)))
            except ValueError:
                raise DomainError(f"bad discrete support item {item!r}") from None
        return Discrete(tuple(pairs))
    raise DomainError(f"unknown distribution {text!r}")


def sample_bias(dist: BiasDistribution, length: int, seed: int) -> BiasVector:
    if length < 1:
        raise DomainError("code length must be positive")
    g = rng.stream(seed, rng.BIAS)
    u = g.random(length)
    if isinstance(dist, ArcsineTruncated):
        p = arcsine_inverse(u, dist.delta)
        lo = max(dist.delta, np.finfo(np.float64).tiny)
        hi = min(1.0 - dist.delta, np.nextafter(1.0, 0.0))
        return BiasVector(np.clip(p, lo, hi), cutoff=dist.delta)
    if isinstance(dist, Discrete):
        cdf = np.cumsum(dist.weights)
        idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), cdf.size - 1)
        return BiasVector(dist.points[idx])
    raise DomainError(f"unsupported distribution {dist!r}")


def generate_codebook(n: int, bias: BiasVector, seed: int,
                      memory_budget: int = MEMORY_BUDGET) -> Codebook:
    """Draw ``n`` codewords with ``x[j, i] = 1`` with probability ``p_i``.

    Rows are produced in blocks of :data:`ROW_BLOCK`, each from its own stream,
    so row ``j`` depends only on ``(seed, j, bias)``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    length = len(bias)
    if n * n_words(length) * 8 > memory_budget:
        raise CapacityError(f"codebook of {n} x {length} bits exceeds the memory budget")
    words = np.empty((n, n_words(length)), dtype="<u8")
    p = bias.probs
    for block, start in enumerate(range(0, n, ROW_BLOCK)):
        stop = min(start + ROW_BLOCK, n)
        g = rng.stream(seed, rng.CODEBOOK, block)
        words[start:stop] = pack_bits(g.random((stop - start, length)) < p)
    return Codebook(n, length, words)

