"""Randomized Maurey sparsification and bit-exact message encoding.

A vector w is compressed into s signed coordinate atoms drawn with
probability proportional to |w_i|, rescaled by ||w||_1.  Messages are
serialized MSB-first as

    [1 mode bit][32-bit big-endian s][64-bit IEEE-754 big-endian scale][payload]

where LIST mode stores each atom in ceil(log2(2d)) bits and RANK mode stores
the multiset rank over 2d signed atoms in exactly
ceil(log2 C(2d + s - 1, s)) bits.
"""

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParameterError, MalformedMessageError
from .vecspace import svd

_MAX_S = 2**32 - 1


class EncodeMode(Enum):
    LIST = 0
    RANK = 1


@dataclass
class BitCost:
    header_bits: int
    payload_bits: int

    @property
    def total_bits(self):
        return self.header_bits + self.payload_bits


@dataclass
class MaureyMessage:
    scale: float                 # ||w||_1 of the source vector
    s: int                       # number of sampled atoms
    atoms: list                  # (index, sign) pairs, sign in {+1, -1}

    def __post_init__(self):
        if self.s < 1:
            raise InvalidParameterError("sample count s must be >= 1")
        if self.scale < 0:
            raise InvalidParameterError("scale must be nonnegative")

    def as_multiset(self):
        return sorted(self.atoms)


@dataclass
class SpectralMessage:
    scale: float                 # nuclear norm of the source matrix
    s: int
    factors: list                # (u, v) unit-norm vector pairs


def maurey(w, s, rng):
    """Sample an s-atom sparsified surrogate of w.

    Atoms are drawn i.i.d. with p_i proportional to |w_i| via inverse-CDF
    sampling on the provided generator; decoding gives an unbiased estimate
    of w.
    """
    if s < 1:
        raise InvalidParameterError("sample count s must be >= 1")
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    total = a.sum()
    if total == 0.0:
        return MaureyMessage(scale=0.0, s=s, atoms=[])
    cdf = np.cumsum(a)
    u = rng.random(s) * total
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, w.size - 1)
    signs = np.where(w[idx] >= 0, 1, -1)
    return MaureyMessage(scale=float(total), s=s,
                         atoms=list(zip(idx.tolist(), signs.tolist())))


def decode(msg, d):
    """Rebuild the (scale/s)-weighted signed indicator sum as a dense vector."""
    out = np.zeros(d)
    if msg.scale == 0.0 or not msg.atoms:
        return out
    idx = np.fromiter((i for i, _ in msg.atoms), dtype=np.int64,
                      count=len(msg.atoms))
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise MalformedMessageError("atom index out of range")
    sgn = np.fromiter((sg for _, sg in msg.atoms), dtype=np.int64,
                      count=len(msg.atoms))
    np.add.at(out, idx, sgn * (msg.scale / msg.s))
    return out


def spectral_maurey(mat, s, rng):
    """Spectral analogue: sample rank-one factors proportionally to sigma_i."""
    if s < 1:
        raise InvalidParameterError("sample count s must be >= 1")
    res = svd(mat)
    sigma = res.singular_values
    total = float(sigma.sum())
    if total == 0.0:
        return SpectralMessage(scale=0.0, s=s, factors=[])
    cdf = np.cumsum(sigma)
    u = rng.random(s) * total
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, sigma.size - 1)
    factors = [(res.left_vectors[:, i].copy(), res.right_vectors[:, i].copy())
               for i in idx]
    return SpectralMessage(scale=total, s=s, factors=factors)


def decode_spectral(msg, d):
    out = np.zeros((d, d))
    if msg.scale == 0.0 or not msg.factors:
        return out
    for u, v in msg.factors:
        out += np.outer(u, v)
    return out * (msg.scale / msg.s)


# ---------------------------------------------------------------------------
# bit-level plumbing

class _BitWriter:
    """Accumulates MSB-first writes into one big integer."""

    def __init__(self):
        self._acc = 0
        self._nbits = 0

    def write(self, value, nbits):
        if value < 0 or nbits < value.bit_length():
            raise ValueError("value does not fit in the requested width")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits

    def __len__(self):
        return self._nbits

    def to_bytes(self):
        pad = (-self._nbits) % 8
        return (self._acc << pad).to_bytes((self._nbits + pad) // 8, "big")


class _BitReader:
    def __init__(self, data):
        self._acc = int.from_bytes(data, "big")
        self._nbits = 8 * len(data)
        self._pos = 0

    def read(self, nbits):
        if self._pos + nbits > self._nbits:
            raise MalformedMessageError("truncated bit stream")
        shift = self._nbits - self._pos - nbits
        value = (self._acc >> shift) & ((1 << nbits) - 1)
        self._pos += nbits
        return value


def _atom_code(index, sign):
    # lexicographic order on (index, sign) with -1 < +1
    return 2 * index + (1 if sign > 0 else 0)


def _code_atom(code):
    return code // 2, (1 if code % 2 else -1)


def rank_payload_bits(d, s):
    """Exact stars-and-bars payload width: ceil(log2 C(2d+s-1, s))."""
    return max(math.comb(2 * d + s - 1, s) - 1, 1).bit_length()


def list_payload_bits(d, s):
    return s * max((2 * d - 1).bit_length(), 1)


def _multiset_rank(codes, alphabet):
    """Rank of a sorted multiset over [alphabet] in colex combinadic order."""
    rank = 0
    for j, c in enumerate(codes):
        rank += math.comb(c + j, j + 1)
    return rank


def _multiset_unrank(rank, s, alphabet):
    codes = []
    for j in range(s, 0, -1):
        # largest c with C(c + j - 1, j) <= rank
        lo, hi = 0, alphabet - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if math.comb(mid + j - 1, j) <= rank:
                lo = mid
            else:
                hi = mid - 1
        codes.append(lo)
        rank -= math.comb(lo + j - 1, j)
    codes.reverse()
    return codes


def encode(msg, d, mode=EncodeMode.RANK):
    """Serialize a MaureyMessage; returns (bytes, BitCost)."""
    if msg.s > _MAX_S:
        raise InvalidParameterError("s exceeds the 32-bit wire limit")
    if any(i < 0 or i >= d for i, _ in msg.atoms):
        raise MalformedMessageError("atom index out of range for dimension d")
    writer = _BitWriter()
    writer.write(mode.value, 1)
    writer.write(msg.s, 32)
    writer.write(int.from_bytes(struct.pack(">d", msg.scale), "big"), 64)
    header_bits = len(writer)
    if msg.scale != 0.0:
        codes = sorted(_atom_code(i, sg) for i, sg in msg.atoms)
        if mode is EncodeMode.RANK:
            nbits = rank_payload_bits(d, msg.s)
            writer.write(_multiset_rank(codes, 2 * d), nbits)
        else:
            width = max((2 * d - 1).bit_length(), 1)
            for c in codes:
                writer.write(c, width)
    payload_bits = len(writer) - header_bits
    return writer.to_bytes(), BitCost(header_bits, payload_bits)


def decode_bits(data, d):
    """Exact inverse of encode."""
    reader = _BitReader(data)
    mode = EncodeMode(reader.read(1))
    s = reader.read(32)
    if s < 1:
        raise MalformedMessageError("invalid sample count in header")
    scale = struct.unpack(">d", reader.read(64).to_bytes(8, "big"))[0]
    if not math.isfinite(scale) or scale < 0:
        raise MalformedMessageError("invalid scale in header")
    if scale == 0.0:
        return MaureyMessage(scale=0.0, s=s, atoms=[])
    if mode is EncodeMode.RANK:
        rank = reader.read(rank_payload_bits(d, s))
        if rank >= math.comb(2 * d + s - 1, s):
            raise MalformedMessageError("multiset rank out of range")
        codes = _multiset_unrank(rank, s, 2 * d)
    else:
        width = max((2 * d - 1).bit_length(), 1)
        codes = sorted(reader.read(width) for _ in range(s))
    if codes and codes[-1] >= 2 * d:
        raise MalformedMessageError("atom code out of range")
    atoms = [_code_atom(c) for c in codes]
    return MaureyMessage(scale=scale, s=s, atoms=atoms)


def encode_cost(d, s, mode=EncodeMode.RANK, zero=False):
    """Bit cost of encoding without materializing the stream.

    Matches encode() exactly; used by the protocol ledger for very large
    output messages where producing the rank integer itself is wasteful.
    """
    header = 1 + 32 + 64
    if zero:
        return BitCost(header, 0)
    if mode is EncodeMode.RANK:
        return BitCost(header, rank_payload_bits(d, s))
    return BitCost(header, list_payload_bits(d, s))


def spectral_cost(msg, d):
    """Bit cost of a factor-list spectral message at 64 bits per entry."""
    return BitCost(header_bits=32 + 64,
                   payload_bits=len(msg.factors) * 2 * d * 64)
