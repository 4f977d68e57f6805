"""Score moments under the interleaving attack and the NNS time/space trade-off.

Per-segment quantities for a bias law ``p ~ F``:

    mu0 / l     = E[(1 - 4 p (1 - p)) / sqrt(p (1 - p))]
    mu1 / l     = (1 - 1/c) mu0 / l + (1/c) E[1 / sqrt(p (1 - p))]
    |q| / sqrt(l) = sqrt(E[1 / (p (1 - p))])

Normalising by ``|v| |q|`` gives the dot products ``d0 < d1`` of innocent and
guilty users with the query, and ``alpha = sqrt(1 - d0) / sqrt(1 - d1)`` fixes
the exponent curve ``alpha^2 sqrt(rho_q) + (alpha^2 - 1) sqrt(rho_s) = sqrt(2 alpha^2 - 1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import rng
from .attack import AttackStrategy, forge, interleaving
from .codegen import (ArcsineTruncated, BiasDistribution, Discrete, arcsine_cdf,
                      generate_codebook, sample_bias)
from .core import DomainError, NumericError, accumulate_score, ScoreKind

QUAD_TOL = 1e-8
#: Relative tolerance; binds only when the integral is large (tiny cutoffs).
QUAD_RTOL = 1e-10

#: Commonly quoted value of column III at c = 2; the trade-off curve gives 3.
QUOTED_C2_COLUMN_III = 5.0


@dataclass(frozen=True)
class ScoreMoments:
    mu0_per_seg: float
    mu1_per_seg: float
    qnorm_per_sqrtseg: float
    var0: float | None = None
    var1: float | None = None
    se0: float | None = None
    se1: float | None = None


@dataclass(frozen=True)
class FixedSpace:
    rho_s: float


@dataclass(frozen=True)
class Balanced:
    pass


@dataclass(frozen=True)
class FixedQuery:
    rho_q: float


Regime = FixedSpace | Balanced | FixedQuery


@dataclass(frozen=True)
class TradeoffPoint:
    d0: float | None
    d1: float | None
    alpha: float
    rho_q: float
    rho_s: float


def expectation(dist: BiasDistribution, h) -> float:
    """``E[h(p)]`` under ``dist``; exact for discrete laws, adaptive quadrature otherwise.

    The arcsine integral is taken in the uniform variable ``u = F(p)`` where the
    density is flat, on ``[F(delta), F(1 - delta)]``.
    """
    if isinstance(dist, Discrete):
        return float(sum(w * h(p) for p, w in dist.support))
    if isinstance(dist, ArcsineTruncated):
        lo, hi = arcsine_cdf(dist.delta), arcsine_cdf(1.0 - dist.delta)

        def integrand(u):
            return h(math.sin(math.pi * u / 2.0) ** 2)

        # integrands blow up like 1/u or 1/u^2 at the ends; doubling pieces toward
        # each end keep every quad call well conditioned
        edges = _geometric_edges(lo, hi)
        value = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                for a, b in zip(edges[:-1], edges[1:]):
                    part, _ = integrate.quad(integrand, a, b, epsabs=QUAD_TOL / len(edges),
                                             epsrel=QUAD_RTOL, limit=200)
                    value += part
            except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
                raise NumericError(f"quadrature failed for {dist}: {exc}") from None
        if not math.isfinite(value):
            raise NumericError(f"expectation diverges for {dist}")
        return value / (hi - lo)
    raise DomainError(f"unsupported distribution {dist!r}")


def _geometric_edges(lo: float, hi: float) -> list[float]:
    mid = (lo + hi) / 2.0
    left, gap = [lo], 1.0 - hi
    right = [hi]
    while 0 < left[-1] < mid / 2.0:
        left.append(left[-1] * 2.0)
    while 0 < gap < (1.0 - mid) / 2.0:
        gap *= 2.0
        right.append(1.0 - gap)
    return left + [mid] + right[::-1]


def _weight(p):
    return 1.0 / math.sqrt(p * (1.0 - p))


def moments_interleaving(dist: BiasDistribution, c: int) -> ScoreMoments:
    if c < 1:
        raise DomainError("c must be positive")
    if isinstance(dist, ArcsineTruncated) and dist.delta == 0.0:
        raise NumericError("untruncated arcsine law: E[1/sqrt(p(1-p))] is infinite")
    mu0 = expectation(dist, lambda p: (1.0 - 4.0 * p * (1.0 - p)) * _weight(p))
    ew = expectation(dist, _weight)
    qsq = expectation(dist, lambda p: 1.0 / (p * (1.0 - p)))
    mu1 = (1.0 - 1.0 / c) * mu0 + ew / c
    return ScoreMoments(mu0, mu1, math.sqrt(qsq))


def normalized_dots(m: ScoreMoments) -> tuple[float, float]:
    if not m.qnorm_per_sqrtseg > 0:
        raise DomainError("query norm must be positive")
    return m.mu0_per_seg / m.qnorm_per_sqrtseg, m.mu1_per_seg / m.qnorm_per_sqrtseg


def approximation_factor(d0: float, d1: float) -> float:
    """``sqrt(1 - d0) / sqrt(1 - d1)``; infinite when ``d1`` reaches 1."""
    if d1 > 1.0 or d0 >= d1 or d0 < -1.0:
        raise DomainError(f"need -1 <= d0 < d1 <= 1, got d0={d0}, d1={d1}")
    if d1 == 1.0:
        return math.inf
    return math.sqrt(1.0 - d0) / math.sqrt(1.0 - d1)


def tradeoff_residual(alpha: float, rho_q: float, rho_s: float) -> float:
    a2 = alpha * alpha
    return a2 * math.sqrt(rho_q) + (a2 - 1.0) * math.sqrt(rho_s) - math.sqrt(2.0 * a2 - 1.0)


def tradeoff(alpha: float, regime: Regime, d0: float | None = None,
             d1: float | None = None) -> TradeoffPoint:
    """Point on the equality curve for the requested regime.

    ``FixedSpace(rho_s)`` past the curve's end (where ``rho_q`` hits 0) returns
    that end point: extra space buys nothing more, and equality still holds.
    """
    if alpha < 1.0 or math.isnan(alpha):
        raise DomainError("alpha must be >= 1")
    if math.isinf(alpha):
        return TradeoffPoint(d0, d1, alpha, 0.0, 0.0)
    a2 = alpha * alpha
    root = math.sqrt(2.0 * a2 - 1.0)
    if isinstance(regime, FixedSpace):
        if regime.rho_s < 0:
            raise DomainError("rho_s must be non-negative")
        if alpha == 1.0:
            return TradeoffPoint(d0, d1, alpha, 1.0, regime.rho_s)
        rho_s_end = (root / (a2 - 1.0)) ** 2
        rho_s = min(regime.rho_s, rho_s_end)
        rho_q = max(0.0, (root - (a2 - 1.0) * math.sqrt(rho_s)) / a2) ** 2
        return TradeoffPoint(d0, d1, alpha, rho_q, rho_s)
    if isinstance(regime, Balanced):
        rho = 1.0 / (2.0 * a2 - 1.0)
        return TradeoffPoint(d0, d1, alpha, rho, rho)
    if isinstance(regime, FixedQuery):
        if alpha == 1.0:
            raise DomainError("fixed query time needs alpha > 1")
        if not 0.0 <= regime.rho_q <= 1.0:
            raise DomainError("rho_q must lie in [0, 1]")
        rho_q = min(regime.rho_q, (root / a2) ** 2)
        rho_s = max(0.0, (root - a2 * math.sqrt(rho_q)) / (a2 - 1.0)) ** 2
        return TradeoffPoint(d0, d1, alpha, rho_q, rho_s)
    raise DomainError(f"unknown regime {regime!r}")


@dataclass(frozen=True)
class TableRow:
    c: int
    qnorm: float
    mu0: float
    mu1: float
    d0: float
    d1: float
    alpha: float
    rho_q_linear_space: float
    rho_balanced: float
    rho_s_constant_query: float

    HEADER = ("c", "qnorm_per_sqrt_l", "mu0_per_l", "mu1_per_l", "d0", "d1", "alpha",
              "I_rho_q_at_rho_s_0", "II_rho_balanced", "III_rho_s_at_rho_q_0")

    def values(self) -> tuple:
        return (self.c, self.qnorm, self.mu0, self.mu1, self.d0, self.d1, self.alpha,
                self.rho_q_linear_space, self.rho_balanced, self.rho_s_constant_query)

    @property
    def discrepancy(self) -> str:
        """Flag for cells where commonly quoted values disagree with the curve."""
        if self.c == 2 and abs(self.alpha - math.sqrt(2.0)) < 1e-9:
            return (f"III={self.rho_s_constant_query:.2f} from the trade-off curve; "
                    f"reference tables list {QUOTED_C2_COLUMN_III:.2f}")
        return ""


def row_from_dots(d0: float, d1: float, c: int = 0, moments: ScoreMoments | None = None) -> TableRow:
    alpha = approximation_factor(d0, d1)
    one = tradeoff(alpha, FixedSpace(0.0))
    two = tradeoff(alpha, Balanced())
    three = tradeoff(alpha, FixedQuery(0.0)) if alpha > 1.0 else TradeoffPoint(d0, d1, alpha, 1.0, math.inf)
    m = moments or ScoreMoments(math.nan, math.nan, math.nan)
    return TableRow(c, m.qnorm_per_sqrtseg, m.mu0_per_seg, m.mu1_per_seg, d0, d1, alpha,
                    one.rho_q, two.rho_q, three.rho_s)


def table_row(dist: BiasDistribution, c: int) -> TableRow:
    m = moments_interleaving(dist, c)
    d0, d1 = normalized_dots(m)
    if abs(d1 - 1.0) < 1e-12:
        d1 = 1.0
    return row_from_dots(d0, d1, c, m)


def monte_carlo_moments(dist: BiasDistribution, c: int, strategy: AttackStrategy | None,
                        length: int, trials: int, seed: int) -> ScoreMoments:
    """Empirical per-segment score moments from full simulations.

    Each trial draws a fresh bias vector, ``c`` colluders plus one innocent user,
    forges a copy, and scores the innocent and the first colluder with the
    equivalent score.  Variances are of ``s / l``; standard errors are of the
    trial means.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    strategy = strategy or interleaving(c)
    if strategy.c != c:
        raise DomainError("strategy is for a different colluder count")
    s0 = np.empty(trials)
    s1 = np.empty(trials)
    qn = np.empty(trials)
    for trial in range(trials):
        tseed = rng.derive_seed(seed, rng.MONTE_CARLO, trial)
        bias = sample_bias(dist, length, tseed)
        book = generate_codebook(c + 1, bias, tseed)
        y = forge(book, range(c), strategy, tseed)
        s0[trial] = accumulate_score(book.row(c), y, bias, ScoreKind.EQUIVALENT) / length
        s1[trial] = accumulate_score(book.row(0), y, bias, ScoreKind.EQUIVALENT) / length
        qn[trial] = math.sqrt(np.sum(bias.weights**2) / length)
    ddof = 1 if trials > 1 else 0
    var0, var1 = float(np.var(s0, ddof=ddof)), float(np.var(s1, ddof=ddof))
    return ScoreMoments(float(s0.mean()), float(s1.mean()), float(qn.mean()),
                        var0, var1, math.sqrt(var0 / trials), math.sqrt(var1 / trials))
