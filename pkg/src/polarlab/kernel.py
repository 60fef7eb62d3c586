"""Binary l x l polarization kernels: partial distances, exponent, variance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .parallel import map_blocks

MAX_ELL = 20


class KernelError(ValueError):
    pass


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return count


def gf2_rank(rows: Sequence[int]) -> int:
    """Rank over GF(2) of rows given as int bitmasks."""
    pivots: dict[int, int] = {}
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top not in pivots:
                pivots[top] = r
                break
            r ^= pivots[top]
    return len(pivots)


@dataclass(frozen=True)
class BinaryKernel:
    """Invertible binary matrix; row ``i`` is ``rows[i]`` (tuple of 0/1)."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(b) for b in r) for r in self.rows)
        ell = len(rows)
        if ell == 0 or any(len(r) != ell for r in rows):
            raise KernelError("kernel must be a non-empty square matrix")
        if any(b not in (0, 1) for r in rows for b in r):
            raise KernelError("kernel entries must be 0 or 1")
        if ell > MAX_ELL:
            raise KernelError(f"kernel size {ell} exceeds {MAX_ELL}")
        object.__setattr__(self, "rows", rows)
        if gf2_rank(self.masks()) != ell:
            raise KernelError("kernel is singular over GF(2)")

    @property
    def ell(self) -> int:
        return len(self.rows)

    def masks(self) -> list[int]:
        # column 0 is the most significant bit
        return [int("".join(map(str, r)), 2) for r in self.rows]

    @classmethod
    def from_text(cls, text: str) -> BinaryKernel:
        rows = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].replace(",", " ").split()
            if not line:
                continue
            if len(line) == 1 and len(line[0]) > 1:
                line = list(line[0])
            rows.append(tuple(int(c) for c in line))
        return cls(tuple(rows))

    @classmethod
    def from_file(cls, path: str | Path) -> BinaryKernel:
        return cls.from_text(Path(path).read_text())


ARIKAN = BinaryKernel(((1, 0), (1, 1)))


def identity_kernel(ell: int) -> BinaryKernel:
    return BinaryKernel(tuple(tuple(int(i == j) for j in range(ell)) for i in range(ell)))


def worst_case_kernel(ell: int) -> BinaryKernel:
    """Unit rows, except the last one has weight 2; partial distances (1, ..., 1, 2)."""
    if ell < 2:
        raise KernelError("ell must be at least 2")
    rows = [[int(i == j) for j in range(ell)] for i in range(ell)]
    rows[-1][-2] = 1
    return BinaryKernel(tuple(tuple(r) for r in rows))


def _span(masks: Sequence[int]) -> np.ndarray:
    span = np.zeros(1, dtype=np.uint64)
    for m in masks:
        span = np.concatenate([span, span ^ np.uint64(m)])
    return span


def partial_distances(g: BinaryKernel) -> list[int]:
    """``D_i``: distance from row ``i`` to the span of the rows after it."""
    masks = g.masks()
    out = []
    for i, row in enumerate(masks):
        if bin(row).count("1") == 1:
            out.append(1)
            continue
        span = _span(masks[i + 1 :])
        out.append(int(_popcount(span ^ np.uint64(row)).min()))
    return out


@dataclass(frozen=True)
class KernelProfile:
    partial_distances: tuple[int, ...]
    exponent: float
    variance: float

    @property
    def ell(self) -> int:
        return len(self.partial_distances)


def _log_ell(d: Sequence[int]) -> np.ndarray:
    ell = len(d)
    if ell < 2:
        raise KernelError("log base needs ell >= 2")
    return np.log(np.asarray(d, dtype=float)) / math.log(ell)


def exponent(g: BinaryKernel | Sequence[int]) -> float:
    """Mean of ``log_l D_B`` for ``B`` uniform on the rows."""
    d = partial_distances(g) if isinstance(g, BinaryKernel) else list(g)
    return float(np.mean(_log_ell(d)))


def exponent_variance(g: BinaryKernel | Sequence[int]) -> float:
    """Population variance of ``log_l D_B``."""
    d = partial_distances(g) if isinstance(g, BinaryKernel) else list(g)
    x = _log_ell(d)
    return float(np.mean((x - x.mean()) ** 2))


def profile(g: BinaryKernel) -> KernelProfile:
    d = partial_distances(g)
    return KernelProfile(tuple(d), exponent(d), exponent_variance(d))


def worst_case_profile(ell: int) -> tuple[float, float]:
    """Closed forms for one partial distance 2 and the rest 1."""
    if ell < 2:
        raise KernelError("ell must be at least 2")
    a = math.log(2) / math.log(ell) / ell
    return a, a * a * (ell - 1)


def kernel_threshold_exponent(n: int, t: float, E: float, V: float) -> float:
    """``n E + t sqrt(n V)``; the threshold is ``2**-(ell**exponent)``."""
    if V < 0:
        raise KernelError("variance must be non-negative")
    return n * E + t * math.sqrt(n * V)


def kernel_symbols(ell: int, n: int, count: int, seed: int, workers: int = 1) -> np.ndarray:
    """I.i.d. row indices uniform on ``1 .. ell``, shape ``(count, n)``."""
    if ell < 2:
        raise KernelError("ell must be at least 2")
    parts = map_blocks(
        lambda rng, size: rng.integers(1, ell + 1, size=(size, n)),
        count,
        seed,
        stream=4,
        workers=workers,
    )
    return np.concatenate(parts)


def log_distance_sums(prof: KernelProfile, symbols: np.ndarray) -> np.ndarray:
    """``sum_i log_l D_{B_i}`` per row of ``symbols``: the base-l double-log exponent
    reached when every step multiplies ``-log Z`` by its partial distance."""
    logs = _log_ell(prof.partial_distances)
    return logs[np.asarray(symbols) - 1].sum(axis=1)
