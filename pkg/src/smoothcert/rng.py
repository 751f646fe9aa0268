"""Deterministic, schedule-independent random streams.

Every random quantity in the toolkit is a pure function of (global seed,
point identity, slot index), built from the splitmix64 finalizer on a
counter.  Nothing here keeps hidden state beyond a stream position, so the
same tally is produced no matter how work is batched, threaded, or resumed,
and no matter which platform or numpy version is underneath.

Point identities are hashed with blake2b rather than Python's ``hash`` so
results survive interpreter restarts and PYTHONHASHSEED.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

__all__ = [
    "MASK64",
    "mix64",
    "stable_hash64",
    "derive_stream_key",
    "CounterStream",
    "binomial",
    "split_uniform",
]

MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_INV_2_53 = 2.0**-53

# Bernoulli summation block; small enough to stay cache friendly
_BLOCK = 4096
# below this expected count the CDF-inversion walk is cheaper than drawing n bits
_INVERSION_LIMIT = 30.0


def mix64(x: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (Python-int flavor)."""
    x &= MASK64
    x = (x ^ (x >> 30)) * _MIX1 & MASK64
    x = (x ^ (x >> 27)) * _MIX2 & MASK64
    return x ^ (x >> 31)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    # same finalizer, vectorized; constants must be uint64 or numpy promotes
    # the whole computation to float64 and silently destroys low bits
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    return x ^ (x >> np.uint64(31))


def stable_hash64(text: str) -> int:
    """64-bit digest of a string, stable across processes and platforms."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def derive_stream_key(global_seed: int, point_id: str) -> int:
    """Key for the stream owned by one point under one global seed."""
    return mix64(mix64(global_seed & MASK64) ^ stable_hash64(point_id))


class CounterStream:
    """Uniform [0, 1) stream at 53-bit resolution, addressable by slot.

    ``domain`` separates independent streams sharing one key (top-class draws
    vs rival splitting, say).  Slot i of every stream is mix64(key' + (i+1) *
    golden), so arbitrary subranges can be generated in any order or in bulk.
    """

    __slots__ = ("key", "pos")

    def __init__(self, key: int, domain: int = 0) -> None:
        self.key = mix64((key ^ mix64(((domain + 1) * _GOLDEN) & MASK64)) & MASK64)
        self.pos = 0

    def _raw(self, count: int) -> np.ndarray:
        idx = np.arange(self.pos, self.pos + count, dtype=np.uint64)
        self.pos += count
        with np.errstate(over="ignore"):
            counters = np.uint64(self.key) + (idx + np.uint64(1)) * np.uint64(_GOLDEN)
            return _mix64_array(counters)

    def uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` uniforms as a float64 array."""
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count!r}")
        return (self._raw(count) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def next_uniform(self) -> float:
        u = mix64((self.key + ((self.pos + 1) * _GOLDEN)) & MASK64)
        self.pos += 1
        return (u >> 11) * _INV_2_53


def binomial(stream: CounterStream, n: int, p: float) -> int:
    """Draw Binomial(n, p) from the stream, consuming a deterministic slot span.

    Small expected counts use a single uniform and a CDF-inversion walk on the
    rarer side; otherwise successes are counted over Bernoulli blocks.  Both
    paths are exact (no normal or Poisson shortcuts), so tallies match the
    target law at any n.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if n == 0:
        return 0
    if p == 0.0:
        return 0
    if p == 1.0:
        return n
    flip = p > 0.5
    pm = 1.0 - p if flip else p
    if n * pm <= _INVERSION_LIMIT:
        k = _binomial_inversion(stream, n, pm)
    else:
        k = _binomial_blocks(stream, n, pm)
    return n - k if flip else k


def _binomial_inversion(stream: CounterStream, n: int, pm: float) -> int:
    # in the n * pm <= 30 regime the starting pmf is at least e^-60, so plain
    # linear accumulation never underflows before the walk ends
    u = stream.next_uniform()
    ratio = pm / (1.0 - pm)
    pmf = math.exp(n * math.log1p(-pm))
    cum = pmf
    k = 0
    while u >= cum and k < n:
        k += 1
        pmf *= ratio * (n - k + 1) / k
        cum += pmf
        if pmf == 0.0:
            break
    return k


def _binomial_blocks(stream: CounterStream, n: int, pm: float) -> int:
    total = 0
    remaining = n
    while remaining > 0:
        take = min(_BLOCK, remaining)
        total += int((stream.uniforms(take) < pm).sum())
        remaining -= take
    return total


def split_uniform(stream: CounterStream, total: int, parts: int) -> list[int]:
    """Split ``total`` items uniformly at random into ``parts`` bins.

    Sequential conditional binomials, so the joint law is exactly multinomial
    with equal probabilities.  Consumes stream slots only for the first
    ``parts - 1`` bins.
    """
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts!r}")
    if total < 0:
        raise ValueError(f"total must be >= 0, got {total!r}")
    counts: list[int] = []
    remaining = total
    for j in range(parts - 1):
        c = binomial(stream, remaining, 1.0 / (parts - j))
        counts.append(c)
        remaining -= c
    counts.append(remaining)
    return counts
