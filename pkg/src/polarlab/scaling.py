"""Gaussian tails and refined-rate experiments on Z spectra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import check_erasure
from .parallel import map_blocks
from .polarization import (
    LN2,
    DualLogValue,
    ZSpectrum,
    _minus,
    _plus,
    binomial_tail,
    log2_neg_log2,
)

DEFAULT_T_GRID = tuple(np.round(np.arange(-2.0, 2.0001, 0.5), 10).tolist())
ZERO_MASS_ZETA = 2.0**-20


class CapacityError(ValueError):
    """Rate outside (0, I(W))."""


def q_function(t: float) -> float:
    """Gaussian upper tail ``Q(t)``."""
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """The ``t`` with ``Q(t) = p``, found by bisection on a monotone bracket.

    ``p > 1/2`` is mapped to ``-q_inverse(1 - p)`` (``1 - p`` is exact there).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse needs 0 < p < 1, got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -q_inverse(1.0 - p)
    lo, hi = 0.0, 40.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if q_function(mid) > p:
            lo = mid
        else:
            hi = mid
    return lo if abs(q_function(lo) - p) <= abs(q_function(hi) - p) else hi


def loglog_statistic(z: DualLogValue) -> float | None:
    """``log2(-log2 z)``; None if ``z`` is 0 or 1 (undefined)."""
    if z.is_zero or z.is_one:
        return None
    if z.log_v == 0.0:
        return -math.inf
    return float(log2_neg_log2(z.log_v))


# --------------------------------------------------------------------------
# anomaly terms f(n)


def parse_f(spec: str | None) -> Callable[[int], float]:
    """``0``, ``log:c`` (c log2 n) or ``pow:c:a`` (c n**a, a < 1/2)."""
    if spec is None or spec.strip() in ("", "0"):
        return lambda n: 0.0
    parts = spec.split(":")
    try:
        if parts[0] == "log" and len(parts) == 2:
            c = float(parts[1])
            return lambda n: c * math.log2(n) if n > 0 else 0.0
        if parts[0] == "pow" and len(parts) == 3:
            c, a = float(parts[1]), float(parts[2])
            if not a < 0.5:
                raise ValueError(f"f exponent must be < 1/2 to stay o(sqrt n), got {a}")
            return lambda n: c * n**a
    except ValueError as exc:
        raise ValueError(f"bad f spec {spec!r}: {exc}") from None
    raise ValueError(f"bad f spec {spec!r}; expected 0, log:c or pow:c:a")


@dataclass(frozen=True)
class ScalingThreshold:
    """The double-exponential threshold ``2**-(2**exponent)``."""

    n: int
    t: float
    f_value: float = 0.0

    @property
    def exponent(self) -> float:
        return 0.5 * (self.n + self.t * math.sqrt(self.n)) + self.f_value

    @property
    def log_threshold(self) -> float:
        """``ln`` of the threshold, clipped at ``1/2``."""
        return -(2.0 ** max(self.exponent, 0.0)) * LN2


@dataclass(frozen=True)
class ScalingCurve:
    n: int
    points: tuple[tuple[float, float, float], ...]  # (t, fraction, target)

    @property
    def deviations(self) -> list[float]:
        return [frac - target for _, frac, target in self.points]


def fraction_below(log_v: np.ndarray, exponent: float) -> float:
    """Share of values with ``v <= 2**-(2**exponent)``.

    Values above 1/2 never count, so exponents below 0 behave like 0.
    """
    log_v = np.asarray(log_v)
    bound = -(2.0 ** max(exponent, 0.0)) * LN2
    return float(np.count_nonzero(log_v <= bound)) / len(log_v)


def empirical_scaling_curve(
    spec: ZSpectrum,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    f: Callable[[int], float] = lambda n: 0.0,
    capacity: float | None = None,
) -> ScalingCurve:
    cap = spec.capacity if capacity is None else capacity
    if cap is None:
        raise ValueError("base-channel capacity unknown; pass capacity=")
    n = spec.level
    ordered = np.sort(spec.log_v)
    points = []
    for t in t_grid:
        thr = ScalingThreshold(n, float(t), f(n))
        hits = np.searchsorted(ordered, thr.log_threshold, side="right")
        points.append((float(t), hits / len(ordered), q_function(t) * cap))
    return ScalingCurve(n, tuple(points))


def kolmogorov_distance(spec: ZSpectrum, capacity: float | None = None) -> float:
    """Sup distance between ``P(T >= t, loglog >= 0)`` and ``Q(t) I(W)``.

    ``T = (loglog - n/2) / (sqrt(n)/2)``, each leaf weighted ``2**-n``.
    """
    cap = spec.capacity if capacity is None else capacity
    n = spec.level
    ll = log2_neg_log2(spec.log_v)
    ll = np.where(spec.log_v == -np.inf, np.inf, ll)
    ll = ll[~np.isnan(ll) & (ll >= 0)]
    if len(ll) == 0:
        return cap
    T = np.sort((ll - n / 2) / (math.sqrt(n) / 2))[::-1]
    weight = 1.0 / len(spec.log_v)
    # the empirical tail jumps at each T; compare both one-sided limits
    upper = np.arange(1, len(T) + 1) * weight
    target = cap * 0.5 * np.array([math.erfc(x / math.sqrt(2)) for x in T])
    return float(max(np.max(np.abs(upper - target)), np.max(np.abs(upper - weight - target))))


def converse_dominance_bound(eps0: float, n: int, exponent: float) -> float:
    """``P(S >= e - log2 log2(1/eps0))`` for ``S ~ Binomial(n, 1/2)``."""
    eps0 = check_erasure(eps0)
    if eps0 in (0.0, 1.0):
        raise ValueError("converse bound needs 0 < eps0 < 1")
    offset = math.log2(-math.log2(eps0))
    return binomial_tail(n, exponent - offset)


def rate_to_t(rate: float, capacity: float) -> float:
    """Largest admissible ``t`` for rate ``R``: ``Q^{-1}(R / I(W))``."""
    if not 0.0 < rate < capacity:
        raise CapacityError(f"rate {rate} must satisfy 0 < R < I(W) = {capacity}")
    return q_inverse(rate / capacity)


def _logsumexp(x: np.ndarray) -> float:
    top = float(np.max(x))
    if top == -math.inf:
        return -math.inf
    return top + math.log(float(np.sum(np.exp(x - top))))


@dataclass(frozen=True)
class UnionBound:
    """Natural-log union bounds on the SC block-error probability."""

    k: int
    log_sum: float
    log_nr_gamma: float

    @property
    def log2_sum(self) -> float:
        return self.log_sum / LN2

    @property
    def log2_nr_gamma(self) -> float:
        return self.log_nr_gamma / LN2


def info_size(n: int, rate: float) -> int:
    """``ceil(2**n R)`` guarded against binary rounding of R."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    k = math.ceil(2**n * rate - 1e-9)
    return max(1, min(2**n, k))


def union_bound_pe(spec: ZSpectrum, rate: float) -> UnionBound:
    k = info_size(spec.level, rate)
    order = np.argsort(spec.log_v, kind="stable")[:k]
    chosen = spec.log_v[order]
    log_sum = _logsumexp(chosen)
    # k = ceil(NR) keeps the k*gamma form an upper bound when NR is fractional
    log_nr_gamma = math.log(k) + float(chosen[-1])
    return UnionBound(k, log_sum, log_nr_gamma)


def estimate_zero_mass(final_log_v: np.ndarray, zeta: float = ZERO_MASS_ZETA) -> float:
    """Fraction of final values below ``zeta``, a proxy for ``P(X_inf = 0)``."""
    final_log_v = np.asarray(final_log_v)
    return float(np.count_nonzero(final_log_v <= math.log(zeta))) / len(final_log_v)


def sampled_final_values(eps: float, n: int, paths: int, seed: int, workers: int = 1) -> np.ndarray:
    """``ln Z_n`` of BEC(eps) along ``paths`` sampled paths (seeded blocks)."""
    z = DualLogValue.from_value(check_erasure(eps))

    def run(rng, size):
        lv = np.full(size, z.log_v)
        l1 = np.full(size, z.log_1mv)
        for _ in range(n):
            minus = rng.integers(0, 2, size=size).astype(bool)
            pv, p1 = _plus(lv, l1)
            mv, m1 = _minus(lv, l1)
            lv, l1 = np.where(minus, mv, pv), np.where(minus, m1, p1)
        return lv

    parts = map_blocks(run, paths, seed, stream=3, workers=workers)
    return np.concatenate(parts)


def sampled_scaling_curve(
    eps: float,
    n: int,
    t_grid: Sequence[float],
    paths: int,
    seed: int,
    workers: int = 1,
    f: Callable[[int], float] = lambda n: 0.0,
) -> ScalingCurve:
    final = sampled_final_values(eps, n, paths, seed, workers)
    points = []
    for t in t_grid:
        thr = ScalingThreshold(n, float(t), f(n))
        points.append((float(t), fraction_below(final, thr.exponent), q_function(t) * (1 - eps)))
    return ScalingCurve(n, tuple(points))
