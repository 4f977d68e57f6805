"""Binary codebook (TFPC) and pirate-copy (TFPY) files, plus CSV writers.

All integers and reals are little-endian.

TFPC: ``b"TFPC"``, u32 version, u64 n, u64 l, l x f64 bias vector,
      then n rows of ceil(l / 64) u64 words.
TFPY: ``b"TFPY"``, u32 version, u64 l, then ceil(l / 64) u64 words.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .core import (BiasVector, Codebook, DimensionError, FormatError, PirateCopy, n_words,
                   pack_bits, unpack_bits)

CODEBOOK_MAGIC = b"TFPC"
PIRATE_MAGIC = b"TFPY"
FORMAT_VERSION = 1

_CODEBOOK_HEADER = struct.Struct("<4sIQQ")
_PIRATE_HEADER = struct.Struct("<4sIQ")


def codebook_bytes(codebook: Codebook, bias: BiasVector) -> bytes:
    if len(bias) != codebook.length:
        raise DimensionError("bias vector and codebook lengths differ")
    return b"".join((
        _CODEBOOK_HEADER.pack(CODEBOOK_MAGIC, FORMAT_VERSION, codebook.n, codebook.length),
        bias.probs.astype("<f8").tobytes(),
        codebook.words.astype("<u8").tobytes(),
    ))


def write_codebook(path, codebook: Codebook, bias: BiasVector) -> None:
    with open(path, "wb") as fh:
        fh.write(codebook_bytes(codebook, bias))


def parse_codebook(data: bytes) -> tuple[Codebook, BiasVector]:
    if len(data) < _CODEBOOK_HEADER.size:
        raise FormatError("truncated codebook file")
    magic, version, n, length = _CODEBOOK_HEADER.unpack_from(data)
    if magic != CODEBOOK_MAGIC:
        raise FormatError("not a codebook file")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported codebook version {version}")
    words = n_words(length)
    expected = _CODEBOOK_HEADER.size + 8 * length + 8 * n * words
    if len(data) != expected:
        raise FormatError(f"codebook file has {len(data)} bytes, expected {expected}")
    off = _CODEBOOK_HEADER.size
    probs = np.frombuffer(data, "<f8", length, off)
    packed = np.frombuffer(data, "<u8", n * words, off + 8 * length).reshape(n, words)
    return Codebook(n, length, packed), BiasVector(probs)


def read_codebook(path) -> tuple[Codebook, BiasVector]:
    with open(path, "rb") as fh:
        return parse_codebook(fh.read())


def pirate_bytes(y: PirateCopy) -> bytes:
    return (_PIRATE_HEADER.pack(PIRATE_MAGIC, FORMAT_VERSION, len(y))
            + pack_bits(y.bits).astype("<u8").tobytes())


def write_pirate(path, y: PirateCopy) -> None:
    with open(path, "wb") as fh:
        fh.write(pirate_bytes(y))


def parse_pirate(data: bytes) -> PirateCopy:
    if len(data) < _PIRATE_HEADER.size:
        raise FormatError("truncated pirate file")
    magic, version, length = _PIRATE_HEADER.unpack_from(data)
    if magic != PIRATE_MAGIC:
        raise FormatError("not a pirate-copy file")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported pirate-copy version {version}")
    words = n_words(length)
    if len(data) != _PIRATE_HEADER.size + 8 * words:
        raise FormatError("pirate-copy file size does not match its header")
    packed = np.frombuffer(data, "<u8", words, _PIRATE_HEADER.size)
    tail = length % 64
    if tail and packed[-1] >> np.uint64(tail):
        raise FormatError("padding bits must be zero")
    return PirateCopy(unpack_bits(packed, length)[0])


def read_pirate(path) -> PirateCopy:
    with open(path, "rb") as fh:
        return parse_pirate(fh.read())


ACCUSATION_HEADER = ("user", "score", "accused")


def write_accusations(fh, users, scores, accused_users) -> None:
    """CSV rows ``user,score,accused`` in the given (ranked) order."""
    accused = set(int(u) for u in accused_users)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(ACCUSATION_HEADER)
    for u, s in zip(users, scores):
        writer.writerow((int(u), repr(float(s)), int(int(u) in accused)))
