"""Tardos-style collusion-resistant fingerprinting with sublinear decoding.

Scores of the (equivalent) symmetric Tardos decoder are dot products between
embedded codewords and an embedded pirate copy, so decoding is a nearest
neighbour search on the sphere.  This package generates codes, simulates
collusion channels, decodes linearly or through hyperplane LSH, and evaluates
the resulting time/space exponents.
"""

from .attack import AttackStrategy, all_one, forge, interleaving, named_strategy
from .codegen import (ArcsineTruncated, Discrete, default_cutoff, generate_codebook,
                      nuida_c3, parse_distribution, sample_bias, uniform_half)
from .core import (BiasVector, Codebook, PirateCopy, ScoreKind, UserScore, accumulate_score,
                   score_equivalent, score_symmetric)
from .decoder import (AccusationResult, DecodeStats, Threshold, TopM, embed_codeword,
                      embed_pirate, linear_decode, suggest_threshold)
from .lsh import LshParams, build_index, decode_lsh, hash_key, query

__version__ = "0.1.0"

__all__ = [
    "AccusationResult", "ArcsineTruncated", "AttackStrategy", "BiasVector", "Codebook",
    "DecodeStats", "Discrete", "LshParams", "PirateCopy", "ScoreKind", "Threshold", "TopM",
    "UserScore", "accumulate_score", "all_one", "build_index", "decode_lsh", "default_cutoff",
    "embed_codeword", "embed_pirate", "forge", "generate_codebook", "hash_key",
    "interleaving", "linear_decode", "named_strategy", "nuida_c3", "parse_distribution",
    "query", "sample_bias", "score_equivalent", "score_symmetric", "suggest_threshold",
    "uniform_half",
]
