"""Monte-Carlo harness for LSH decoding: fresh code, collusion, index and query per trial."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import spearmanr

from . import rng
from .attack import forge, named_strategy
from .codegen import generate_codebook, parse_distribution, sample_bias
from .core import ScoreKind
from .decoder import ScoreKernel, TopM, embed_pirate, select
from .lsh import LshParams, build_index, query


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 20_000
    length: int = 2000
    c: int = 3
    trials: int = 20
    dist: str = "nuida-c3"
    strategy: str = "interleaving"
    lsh: LshParams = LshParams(t=30, k=13)
    kind: ScoreKind = ScoreKind.EQUIVALENT
    top: int = 1
    seed: int = 0
    window: int = 201
    bins: int = 40
    min_bin_count: int = 20

    def __post_init__(self):
        for name in ("n", "length", "c", "trials", "window", "bins"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.c >= self.n:
            raise ValueError("need more users than colluders")
        # fail early on bad names
        parse_distribution(self.dist, self.c)
        named_strategy(self.strategy, self.c)

    @classmethod
    def full_scale(cls, **kw) -> ExperimentConfig:
        """n = 1e5 users, l = 5000, c = 3, t = 100 tables of k = 16 bits."""
        base = dict(n=100_000, length=5000, c=3, trials=1000, dist="nuida-c3",
                    lsh=LshParams(t=100, k=16))
        base.update(kw)
        return cls(**base)

    def to_json(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass
class TrialResult:
    trial: int
    colluders: list[int]
    candidates: int
    innocent_candidates: int
    colluders_found: int
    scores_computed: int
    hash_dot_products: int
    dot_products_total: int
    top_is_colluder: bool
    innocent_fraction: float
    colluder_recall: float
    speedup: float
    # per-user exact scores and candidate flags, kept for the score-binned series
    scores: np.ndarray = field(repr=False, default=None)
    is_candidate: np.ndarray = field(repr=False, default=None)
    is_colluder: np.ndarray = field(repr=False, default=None)

    TSV_FIELDS = ("trial", "candidates", "innocent_candidates", "colluders_found",
                  "scores_computed", "hash_dot_products", "dot_products_total",
                  "top_is_colluder", "innocent_fraction", "colluder_recall", "speedup")

    def row(self) -> tuple:
        return tuple(getattr(self, f) for f in self.TSV_FIELDS)


def run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    tseed = rng.derive_seed(config.seed, rng.TRIAL, trial)
    n, c = config.n, config.c
    bias = sample_bias(parse_distribution(config.dist, c), config.length, tseed)
    book = generate_codebook(n, bias, tseed)
    colluders = np.sort(rng.stream(tseed, rng.COLLUDERS).choice(n, size=c, replace=False))
    y = forge(book, colluders, named_strategy(config.strategy, c), tseed)
    index = build_index(book, config.lsh, tseed)
    res = query(index, embed_pirate(y, bias), book, bias, config.kind)

    is_colluder = np.zeros(n, dtype=bool)
    is_colluder[colluders] = True
    is_candidate = np.zeros(n, dtype=bool)
    is_candidate[res.users] = True
    found = int(np.count_nonzero(is_candidate & is_colluder))
    innocent = int(res.users.size) - found
    top = select(res.users, res.scores, TopM(config.top))
    work = res.work.dot_products_total
    # exact scores of everyone, for the score-binned candidate statistics only
    scores = ScoreKernel(y, bias, config.kind).scores(book)
    return TrialResult(
        trial=trial, colluders=[int(j) for j in colluders], candidates=int(res.users.size),
        innocent_candidates=innocent, colluders_found=found,
        scores_computed=res.work.scores_computed, hash_dot_products=res.work.hash_dot_products,
        dot_products_total=work,
        top_is_colluder=bool(top) and bool(is_colluder[top[0].user]),
        innocent_fraction=innocent / (n - c), colluder_recall=found / c,
        speedup=n / work if work else math.inf,
        scores=scores, is_candidate=is_candidate, is_colluder=is_colluder)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    trials: list[TrialResult]
    aggregate: dict
    running: dict
    bins: dict

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "aggregate": self.aggregate,
            "trials": [dict(zip(TrialResult.TSV_FIELDS, t.row()), colluders=t.colluders)
                       for t in self.trials],
            "candidate_series": {"running_average": self.running, "binned": self.bins},
        }


def running_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows shrink symmetrically near the ends."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(values)))
    idx = np.arange(n)
    reach = np.minimum(half, np.minimum(idx, n - 1 - idx))
    return (csum[idx + reach + 1] - csum[idx - reach]) / (2 * reach + 1)


def figure_series(trials: list[TrialResult], window: int, bins: int, min_count: int,
                  max_points: int = 1000) -> tuple[dict, dict]:
    """Candidate probability as a function of exact user score, pooled over trials."""
    scores = np.concatenate([t.scores for t in trials])
    cand = np.concatenate([t.is_candidate for t in trials])
    guilty = np.concatenate([t.is_colluder for t in trials])
    order = np.argsort(scores, kind="stable")
    smooth = running_average(cand[order], window)
    # only positions where the full window fits; shrunken end windows are noise
    half = min(window // 2, (scores.size - 1) // 2)
    lo, hi = half, scores.size - 1 - half
    pick = np.unique(np.linspace(lo, hi, min(max_points, hi - lo + 1)).astype(int))
    running = {
        "window": window,
        "score": scores[order][pick].tolist(),
        "candidate_probability": smooth[pick].tolist(),
    }
    edges = np.linspace(scores.min(), scores.max(), bins + 1)
    which = np.clip(np.searchsorted(edges, scores, side="right") - 1, 0, bins - 1)
    count = np.bincount(which, minlength=bins)
    hits = np.bincount(which, weights=cand, minlength=bins)
    guilty_count = np.bincount(which, weights=guilty, minlength=bins)
    prob = np.divide(hits, count, out=np.zeros(bins), where=count > 0)
    keep = count >= min_count
    if keep.sum() >= 3 and np.ptp(prob[keep]) > 0:
        rho = float(spearmanr((edges[:-1] + edges[1:])[keep], prob[keep]).statistic)
    else:
        rho = math.nan
    binned = {
        "lower": edges[:-1].tolist(),
        "upper": edges[1:].tolist(),
        "users": count.astype(int).tolist(),
        "scores_computed": hits.astype(int).tolist(),
        "colluders": guilty_count.astype(int).tolist(),
        "candidate_probability": prob.tolist(),
        "min_count": min_count,
        "spearman": rho,
    }
    return running, binned


def aggregate(config: ExperimentConfig, trials: list[TrialResult]) -> dict:
    innocents = (config.n - config.c) * len(trials)
    work = np.array([t.dot_products_total for t in trials], dtype=np.float64)
    mean_work = float(work.mean())
    return {
        "trials": len(trials),
        "innocent_fraction_mean": float(np.mean([t.innocent_fraction for t in trials])),
        "innocent_fraction_pooled": sum(t.innocent_candidates for t in trials) / innocents,
        "colluder_recall_mean": float(np.mean([t.colluder_recall for t in trials])),
        "colluder_recall_pooled": sum(t.colluders_found for t in trials) / (config.c * len(trials)),
        "trials_with_colluder_found": float(np.mean([t.colluders_found > 0 for t in trials])),
        "top_is_colluder": float(np.mean([t.top_is_colluder for t in trials])),
        "mean_scores_computed": float(np.mean([t.scores_computed for t in trials])),
        "mean_hash_dot_products": float(np.mean([t.hash_dot_products for t in trials])),
        "mean_dot_products": mean_work,
        "linear_dot_products": config.n,
        "speedup": config.n / mean_work,
    }


def run_experiment(config: ExperimentConfig, threads: int = 1, progress=None) -> ExperimentReport:
    """Run all trials; output does not depend on ``threads``."""
    def one(i):
        result = run_trial(config, i)
        if progress is not None:
            progress(result)
        return result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(one, range(config.trials)))
    else:
        trials = [one(i) for i in range(config.trials)]
    running, bins = figure_series(trials, config.window, config.bins, config.min_bin_count)
    return ExperimentReport(config, trials, aggregate(config, trials), running, bins)
