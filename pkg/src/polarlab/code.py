"""Polar codes on the erasure channel: construction, encoding, SC decoding.

Encoding is ``x = u F^{(x)n}`` in natural order. The SC decoder splits the
block into halves, so the first half of ``u`` sees the minus channel first;
this matches the spectrum leaf indexing in :mod:`polarlab.polarization`
without any bit-reversal permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import check_erasure
from .parallel import map_blocks, ordered_sum
from .polarization import ZSpectrum, binomial_tails
from .scaling import info_size

ERASED = -1


@dataclass(frozen=True)
class PolarCode:
    n: int
    info_set: tuple[int, ...]
    frozen_value: int = 0

    def __post_init__(self):
        info = tuple(sorted(int(i) for i in self.info_set))
        if not info:
            raise ValueError("info_set must not be empty")
        if len(set(info)) != len(info) or info[0] < 0 or info[-1] >= 2**self.n:
            raise ValueError(f"info_set must hold distinct indices in [0, {2**self.n})")
        if self.frozen_value != 0:
            raise ValueError("only all-zero frozen bits are supported")
        object.__setattr__(self, "info_set", info)

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def k(self) -> int:
        return len(self.info_set)

    @property
    def rate(self) -> float:
        return self.k / self.N

    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[list(self.info_set)] = False
        return mask


def construct(spec: ZSpectrum, rate: float) -> PolarCode:
    """Pick the ``ceil(N R)`` leaves with smallest Z (ties: smaller index first)."""
    k = info_size(spec.level, rate)
    order = np.lexsort((np.arange(len(spec)), -spec.log_1mv, spec.log_v))
    return PolarCode(spec.level, tuple(int(i) for i in order[:k]))


def polar_transform(u: np.ndarray) -> np.ndarray:
    """``u F^{(x)n}`` over GF(2) along the last axis, via butterflies."""
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    if N & (N - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < N:
        x = x.reshape(x.shape[:-1] + (N // (2 * h), 2, h))
        x[..., 0, :] ^= x[..., 1, :]
        x = x.reshape(x.shape[:-3] + (N,))
        h *= 2
    return x


def encode(code: PolarCode, info_bits: Sequence[int] | np.ndarray) -> np.ndarray:
    """Codeword(s) for the given information bits (last axis has length k)."""
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape[-1] != code.k:
        raise ValueError(f"expected {code.k} information bits, got {info.shape[-1]}")
    u = np.zeros(info.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., list(code.info_set)] = info
    return polar_transform(u)


@dataclass(frozen=True, eq=False)
class ErasureWord:
    """Received word over {0, 1, ERASED}."""

    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int8)
        if s.ndim != 1 or not np.all((s == 0) | (s == 1) | (s == ERASED)):
            raise ValueError("symbols must be a 1-d sequence over {0, 1, ERASED}")
        object.__setattr__(self, "symbols", s)

    def __len__(self):
        return len(self.symbols)

    @classmethod
    def from_codeword(cls, x: np.ndarray, erased: np.ndarray) -> ErasureWord:
        s = np.asarray(x, dtype=np.int8).copy()
        s[np.asarray(erased, dtype=bool)] = ERASED
        return cls(s)


def _sc_batch(known: np.ndarray, vals: np.ndarray, frozen: np.ndarray, genie: np.ndarray | None):
    """Erasure SC over a batch of words (rows).

    Returns ``(u_hat, erased)``: decisions and whether each decision point
    saw an erasure. Erased information bits are guessed as 0 (the caller
    declares failure); with ``genie`` the true ``u`` is fed back instead.
    """
    T, N = known.shape
    u_hat = np.zeros((T, N), dtype=np.uint8)
    erased = np.zeros((T, N), dtype=bool)

    def rec(K, V, lo):
        size = K.shape[1]
        if size == 1:
            e = ~K[:, 0]
            erased[:, lo] = e
            if frozen[lo]:
                u = np.zeros(T, dtype=np.uint8)
            elif genie is not None:
                u = genie[:, lo]
            else:
                u = np.where(e, 0, V[:, 0]).astype(np.uint8)
            u_hat[:, lo] = u
            return u[:, None]
        h = size // 2
        K1, K2, V1, V2 = K[:, :h], K[:, h:], V[:, :h], V[:, h:]
        x_left = rec(K1 & K2, V1 ^ V2, lo)
        x_right = rec(K1 | K2, np.where(K2, V2, V1 ^ x_left), lo + h)
        return np.concatenate([x_left ^ x_right, x_right], axis=1)

    rec(known, vals, 0)
    return u_hat, erased


def _split(words: np.ndarray):
    words = np.asarray(words, dtype=np.int8)
    known = words != ERASED
    vals = np.where(known, words, 0).astype(np.uint8)
    return known, vals


@dataclass(frozen=True)
class DecodeResult:
    info_bits: np.ndarray | None  # None when decoding failed
    erased: np.ndarray  # per information index: erased at its decision

    @property
    def failed(self) -> bool:
        return self.info_bits is None


def sc_decode_bec(code: PolarCode, received: ErasureWord, genie_u: np.ndarray | None = None) -> DecodeResult:
    """Successive-cancellation decoding of one erasure word.

    Fails iff an information bit is still erased at its decision point. With
    ``genie_u`` the decoder feeds back the true ``u`` and reports which
    decisions would have been erased.
    """
    if len(received) != code.N:
        raise ValueError(f"received word has length {len(received)}, expected {code.N}")
    known, vals = _split(received.symbols[None, :])
    genie = None if genie_u is None else np.asarray(genie_u, dtype=np.uint8)[None, :]
    u_hat, erased = _sc_batch(known, vals, code.frozen_mask(), genie)
    info = list(code.info_set)
    e = erased[0, info]
    if genie is None and e.any():
        return DecodeResult(None, e)
    return DecodeResult(u_hat[0, info], e)


def _erase(rng, x: np.ndarray, eps: float) -> np.ndarray:
    mask = rng.random(x.shape) < eps
    words = x.astype(np.int8)
    words[mask] = ERASED
    return words


def genie_bit_error_rates(n: int, eps: float, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Monte-Carlo genie-aided erasure probability of every synthetic channel."""
    eps = check_erasure(eps)
    if trials < 1:
        raise ValueError("trials must be positive")
    N = 2**n
    frozen = np.zeros(N, dtype=bool)

    def run(rng, size):
        u = rng.integers(0, 2, size=(size, N), dtype=np.uint8)
        words = _erase(rng, polar_transform(u), eps)
        _, erased = _sc_batch(*_split(words), frozen, u)
        return erased.sum(axis=0)

    counts = ordered_sum(map_blocks(run, trials, seed, stream=5, workers=workers, block_size=1024))
    return counts / trials


def simulate_bler(code: PolarCode, eps: float, trials: int, seed: int, workers: int = 1) -> tuple[float, float]:
    """SC block-error rate on BEC(eps) with its binomial standard error.

    A block is in error when decoding fails or returns wrong bits.
    """
    eps = check_erasure(eps)
    if trials < 1:
        raise ValueError("trials must be positive")
    frozen = code.frozen_mask()
    info = list(code.info_set)

    def run(rng, size):
        bits = rng.integers(0, 2, size=(size, code.k), dtype=np.uint8)
        words = _erase(rng, encode(code, bits), eps)
        u_hat, erased = _sc_batch(*_split(words), frozen, None)
        bad = erased[:, info].any(axis=1) | (u_hat[:, info] != bits).any(axis=1)
        return np.array(np.count_nonzero(bad))

    errors = int(ordered_sum(map_blocks(run, trials, seed, stream=6, workers=workers, block_size=1024)))
    p = errors / trials
    return p, math.sqrt(p * (1 - p) / trials)


def row_weight_distance(i: int) -> int:
    """Weight of row ``i`` of ``F^{(x)n}``: ``2**popcount(i)``."""
    if i < 0:
        raise ValueError("index must be non-negative")
    return 1 << bin(i).count("1")


def min_distance(code: PolarCode) -> int:
    return min(row_weight_distance(i) for i in code.info_set)


def md_rate_condition(n: int, rate: float) -> tuple[int, float]:
    """Largest ``d`` with ``P(S_n >= d) >= R`` and ``t_hat = (2 d - n) / sqrt(n)``."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    if n == 0:
        return 0, 0.0
    target = Fraction(rate)
    tails = binomial_tails(n)
    d_max = max(d for d in range(n + 1) if tails[d] >= target)
    return d_max, (2 * d_max - n) / math.sqrt(n)
