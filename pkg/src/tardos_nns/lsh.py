"""Hyperplane LSH over embedded codewords and the sublinear decoder built on it."""

from __future__ import annotations

import heapq
import io
import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import rng
from .core import (MEMORY_BUDGET, BiasVector, CapacityError, Codebook, DimensionError,
                   DomainError, FormatError, IntegrityError, ScoreKind, unpack_bits)
from .decoder import (AccusationResult, DecodeMode, DecodeStats, EmbeddedPoint, ScoreKernel,
                      Threshold, TopM, embed_pirate, rank, select)

INDEX_MAGIC = b"TFLI"
INDEX_VERSION = 1
_HEADER = struct.Struct("<4sIIIQQdQ32s")

#: Codebook rows hashed per matrix product during index construction.
HASH_BLOCK = 2048


@dataclass(frozen=True)
class LshParams:
    t: int = 100
    k: int = 16
    sparsity: float = 1.0 / 3.0
    probes: int = 1

    def __post_init__(self):
        if self.t < 1:
            raise DomainError("need at least one hash table")
        if not 1 <= self.k <= 63:
            raise DomainError("hash length k must lie in [1, 63]")
        if not 0.0 < self.sparsity <= 1.0:
            raise DomainError("sparsity must lie in (0, 1]")
        if not 1 <= self.probes <= 2**self.k:
            raise DomainError("probes must lie in [1, 2**k]")


@dataclass(frozen=True, eq=False)
class SparseHyperplane:
    positions: np.ndarray
    signs: np.ndarray
    dim: int

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] < 0 or pos[-1] >= self.dim):
            raise DomainError("positions must be strictly increasing within [0, dim)")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "signs", np.asarray(self.signs, dtype=np.int8))

    def dot(self, v) -> float:
        v = np.asarray(v.coords if isinstance(v, EmbeddedPoint) else v, dtype=np.float64)
        if v.size != self.dim:
            raise DimensionError(f"vector of length {v.size} against plane of dim {self.dim}")
        return float(np.sum(self.signs * v[self.positions]))

    @classmethod
    def from_dense(cls, row: np.ndarray) -> SparseHyperplane:
        pos = np.flatnonzero(row)
        return cls(pos, row[pos], row.size)


def sample_planes(length: int, params: LshParams, seed: int) -> np.ndarray:
    """Dense ``(t, k, length)`` int8 array of {-1, 0, +1} hyperplanes.

    Each entry is +1 or -1 with probability ``sparsity / 2`` each, else 0.
    Only signs of dot products matter, so nonzeros are left unscaled.
    """
    planes = np.empty((params.t, params.k, length), dtype=np.int8)
    half = params.sparsity / 2.0
    for table in range(params.t):
        u = rng.stream(seed, rng.LSH, table).random((params.k, length))
        planes[table] = np.where(u < half, 1, np.where(u < params.sparsity, -1, 0))
    return planes


def hash_key(v, planes) -> int:
    """Bit ``b`` of the key is 1 iff ``<plane_b, v> >= 0``."""
    key = 0
    for b, plane in enumerate(planes):
        if not isinstance(plane, SparseHyperplane):
            plane = SparseHyperplane.from_dense(np.asarray(plane))
        if plane.dot(v) >= 0:
            key |= 1 << b
    return key


def _keys_from_bits(bits: np.ndarray) -> np.ndarray:
    """Collapse a trailing axis of k sign bits into uint64 keys."""
    k = bits.shape[-1]
    weights = np.left_shift(np.uint64(1), np.arange(k, dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


class HyperplaneIndex:
    """``t`` hash tables mapping ``k``-bit keys to the users stored there.

    Tables are kept in sorted (CSR-like) form: ``bucket_keys[i]`` holds the
    occupied keys of table ``i`` in ascending order, ``bucket_offsets[i]`` the
    slice bounds into ``members[i]``.  Empty buckets are never materialised.
    """

    def __init__(self, params: LshParams, n: int, length: int, checksum: bytes, seed: int,
                 planes: np.ndarray, bucket_keys, bucket_offsets, members):
        self.params = params
        self.n = n
        self.length = length
        self.checksum = checksum
        self.seed = seed
        self.planes_dense = planes
        self.bucket_keys = bucket_keys
        self.bucket_offsets = bucket_offsets
        self.members = members

    @cached_property
    def _plane_matrix(self) -> sp.csr_matrix:
        dense = self.planes_dense.reshape(-1, self.length)
        return sp.csr_matrix(dense.astype(np.float64))

    def planes(self, table: int) -> list[SparseHyperplane]:
        return [SparseHyperplane.from_dense(row) for row in self.planes_dense[table]]

    def bucket(self, table: int, key: int) -> np.ndarray:
        keys = self.bucket_keys[table]
        i = int(np.searchsorted(keys, np.uint64(key)))
        if i < keys.size and keys[i] == key:
            off = self.bucket_offsets[table]
            return self.members[table][off[i]:off[i + 1]]
        return np.empty(0, dtype=self.members[table].dtype)

    def bucket_sizes(self, table: int) -> np.ndarray:
        return np.diff(self.bucket_offsets[table])

    def project(self, q: EmbeddedPoint) -> np.ndarray:
        """All ``t * k`` hyperplane dot products of ``q``, shaped ``(t, k)``."""
        coords = q.coords if isinstance(q, EmbeddedPoint) else np.asarray(q, dtype=np.float64)
        if coords.size != self.length:
            raise DimensionError(f"query of length {coords.size} against index dim {self.length}")
        return (self._plane_matrix @ coords).reshape(self.params.t, self.params.k)


def build_index(codebook: Codebook, params: LshParams, seed: int,
                memory_budget: int = MEMORY_BUDGET) -> HyperplaneIndex:
    if codebook.n < 1:
        raise DomainError("cannot index an empty codebook")
    entries = params.t * codebook.n
    if entries * 16 > memory_budget:
        raise CapacityError(f"{entries} index entries exceed the memory budget")
    planes = sample_planes(codebook.length, params, seed)
    exact32 = codebook.length < 2**23
    flat = planes.reshape(-1, codebook.length).astype(np.float32 if exact32 else np.float64)
    plane_sums = flat.sum(axis=1)
    keys = np.empty((codebook.n, params.t), dtype=np.uint64)
    for start in range(0, codebook.n, HASH_BLOCK):
        stop = min(start + HASH_BLOCK, codebook.n)
        x = unpack_bits(codebook.words[start:stop], codebook.length).astype(flat.dtype)
        # <r, 2x - 1> = 2 <r, x> - sum(r); integer-valued, so exact in either precision
        dots = 2.0 * (x @ flat.T) - plane_sums
        bits = (dots >= 0).reshape(stop - start, params.t, params.k)
        keys[start:stop] = _keys_from_bits(bits)
    bucket_keys, bucket_offsets, members = [], [], []
    for table in range(params.t):
        order = np.argsort(keys[:, table], kind="stable")
        sorted_keys = keys[order, table]
        uniq, starts = np.unique(sorted_keys, return_index=True)
        bucket_keys.append(uniq)
        bucket_offsets.append(np.append(starts, codebook.n).astype(np.int64))
        members.append(order.astype(np.uint32 if codebook.n < 2**32 else np.int64))
    return HyperplaneIndex(params, codebook.n, codebook.length, codebook.checksum, seed,
                           planes, bucket_keys, bucket_offsets, members)


def probe_sequence(dots: np.ndarray, probes: int) -> list[int]:
    """Keys to visit in one table for a query with hyperplane dot products ``dots``.

    The home bucket comes first, then single-bit flips ordered by ascending
    ``|dot|``.  Beyond ``k + 1`` probes, multi-bit flips follow in order of
    increasing summed ``|dot|`` of the flipped bits.
    """
    k = dots.size
    base = int(_keys_from_bits(dots >= 0))
    order = np.argsort(np.abs(dots), kind="stable")
    out = [base]
    for b in order[: probes - 1]:
        out.append(base ^ (1 << int(b)))
    remaining = probes - len(out)
    if remaining <= 0:
        return out
    cost = np.abs(dots)[order]
    # shift/expand enumeration of all non-empty subsets in cost order; singletons
    # were already emitted above
    heap = [(float(cost[0]), (0,))]
    while heap and remaining > 0:
        _, subset = heapq.heappop(heap)
        last = subset[-1]
        if last + 1 < k:
            for nxt in (subset[:-1] + (last + 1,), subset + (last + 1,)):
                heapq.heappush(heap, (float(cost[list(nxt)].sum()), nxt))
        if len(subset) < 2:
            continue
        key = base
        for i in subset:
            key ^= 1 << int(order[i])
        out.append(key)
        remaining -= 1
    return out


@dataclass
class QueryResult:
    """Candidates found through the hash tables, best score first."""

    users: np.ndarray
    scores: np.ndarray
    work: DecodeStats


def candidate_users(index: HyperplaneIndex, q: EmbeddedPoint,
                    probes: int | None = None) -> np.ndarray:
    """Sorted user indices found in the buckets visited for ``q``."""
    params = index.params
    probes = params.probes if probes is None else probes
    if not 1 <= probes <= 2**params.k:
        raise DomainError("probes must lie in [1, 2**k]")
    hit = np.zeros(index.n, dtype=bool)
    if probes >= 2**params.k:
        hit[:] = True
        return np.flatnonzero(hit)
    dots = index.project(q)
    for table in range(params.t):
        keys = index.bucket_keys[table]
        probe = np.array(probe_sequence(dots[table], probes), dtype=np.uint64)
        pos = np.searchsorted(keys, probe)
        found = pos < keys.size
        found[found] = keys[pos[found]] == probe[found]
        off = index.bucket_offsets[table]
        for i in pos[found]:
            hit[index.members[table][off[i]:off[i + 1]]] = True
    return np.flatnonzero(hit)


def _check_source(index: HyperplaneIndex, codebook: Codebook):
    if (index.n, index.length) != (codebook.n, codebook.length) \
            or index.checksum != codebook.checksum:
        raise IntegrityError("index was built for a different codebook")


def query(index: HyperplaneIndex, q: EmbeddedPoint, codebook: Codebook, bias: BiasVector,
          kind: ScoreKind = ScoreKind.EQUIVALENT, probes: int | None = None) -> QueryResult:
    """Exact scores for the users colliding with ``q`` in at least one visited bucket.

    ``probes`` overrides the index's own multiprobe count for this query.
    """
    _check_source(index, codebook)
    coords = q.coords if isinstance(q, EmbeddedPoint) else np.asarray(q)
    users = candidate_users(index, q, probes)
    # the sign of q_i carries y_i
    kernel = ScoreKernel((coords > 0).astype(np.uint8), bias, kind)
    scores = kernel.scores(codebook, users)
    order = rank(users, scores)
    hashing = index.params.t * index.params.k
    work = DecodeStats(scores_computed=int(users.size),
                       dot_products_total=hashing + int(users.size),
                       hash_dot_products=hashing)
    return QueryResult(users[order], scores[order], work)


def decode_lsh(codebook: Codebook, y, bias: BiasVector, params: LshParams,
               kind: ScoreKind = ScoreKind.EQUIVALENT, mode: DecodeMode = TopM(1),
               seed: int = 0, index: HyperplaneIndex | None = None) -> AccusationResult:
    """Accuse among hash-table candidates only; reported scores are exact."""
    if len(bias) != codebook.length:
        raise DimensionError("bias vector and codebook lengths differ")
    if index is None:
        index = build_index(codebook, params, seed)
    elif (index.params.t, index.params.k, index.params.sparsity) != (params.t, params.k,
                                                                       params.sparsity):
        raise DomainError("supplied index was built with different parameters")
    result = query(index, embed_pirate(y, bias), codebook, bias, kind, params.probes)
    accused = select(result.users, result.scores, mode)
    z = mode.z if isinstance(mode, Threshold) else None
    return AccusationResult(accused, z, result.work, result.users, result.scores)


def collision_probability(d: float, k: int, t: int = 1) -> float:
    """Chance that a point at normalised dot product ``d`` shares a bucket with the
    query in at least one of ``t`` tables of ``k`` dense hyperplanes."""
    per_plane = 1.0 - math.acos(max(-1.0, min(1.0, d))) / math.pi
    return 1.0 - (1.0 - per_plane**k) ** t


def save_index(index: HyperplaneIndex, path) -> None:
    buf = io.BytesIO()
    p = index.params
    buf.write(_HEADER.pack(INDEX_MAGIC, INDEX_VERSION, p.t, p.k, index.length, index.n,
                           p.sparsity, index.seed & rng.SEED_MASK, index.checksum))
    buf.write(struct.pack("<I", p.probes))
    for table in range(p.t):
        for row in index.planes_dense[table]:
            pos = np.flatnonzero(row)
            buf.write(struct.pack("<I", pos.size))
            buf.write(pos.astype("<u4").tobytes())
            buf.write(row[pos].astype(np.int8).tobytes())
        keys = index.bucket_keys[table]
        buf.write(struct.pack("<I", keys.size))
        buf.write(keys.astype("<u8").tobytes())
        buf.write(index.bucket_offsets[table].astype("<u8").tobytes())
        buf.write(index.members[table].astype("<u4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_index(path, codebook: Codebook | None = None) -> HyperplaneIndex:
    """Read an index file; refuses a ``codebook`` whose checksum differs."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size + 4:
        raise FormatError("truncated index file")
    magic, version, t, k, length, n, sparsity, seed, checksum = _HEADER.unpack_from(data)
    if magic != INDEX_MAGIC:
        raise FormatError("not an index file")
    if version != INDEX_VERSION:
        raise FormatError(f"unsupported index version {version}")
    (probes,) = struct.unpack_from("<I", data, _HEADER.size)
    off = _HEADER.size + 4
    params = LshParams(t=t, k=k, sparsity=sparsity, probes=probes)

    def take(dtype, count):
        nonlocal off
        size = np.dtype(dtype).itemsize * count
        if off + size > len(data):
            raise FormatError("truncated index file")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        off += size
        return arr

    planes = np.zeros((t, k, length), dtype=np.int8)
    bucket_keys, bucket_offsets, members = [], [], []
    for table in range(t):
        for b in range(k):
            (nnz,) = take("<u4", 1)
            pos = take("<u4", int(nnz)).astype(np.int64)
            planes[table, b, pos] = take(np.int8, int(nnz))
        (nb,) = take("<u4", 1)
        bucket_keys.append(take("<u8", int(nb)).astype(np.uint64))
        bucket_offsets.append(take("<u8", int(nb) + 1).astype(np.int64))
        members.append(take("<u4", n).copy())
    if off != len(data):
        raise FormatError("trailing bytes in index file")
    index = HyperplaneIndex(params, n, length, checksum, seed, planes,
                            bucket_keys, bucket_offsets, members)
    if codebook is not None:
        _check_source(index, codebook)
    return index
