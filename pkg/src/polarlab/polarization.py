"""The Bhattacharyya process in a double-log representation.

Values in [0, 1] are carried as ``(ln v, ln(1 - v))`` so that numbers like
``2**-(2**20)`` stay representable and both branches of the erasure recursion
are computed without cancellation.

Bit conventions
---------------
* Sample paths use ``B = 1`` for the minus branch (``z -> 2z - z**2``) and
  ``B = 0`` for the plus branch (``z -> z**2``).
* Spectrum leaves are indexed most-significant bit first with index-bit 0
  selecting the minus branch, so the synthetic channel ``i`` is the one seen
  by ``u_i`` in ``x = u F^{(x)n}`` (natural order, no bit reversal). Leaf ``i``
  therefore corresponds to the path ``B_j = 1 - b_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import check_erasure
from .parallel import map_blocks

LN2 = math.log(2.0)
MAX_EXHAUSTIVE_LEVEL = 26
_LOG_HALF = -LN2


def log1mexp(x):
    """``ln(1 - exp(x))`` for ``x <= 0``; scalar or array."""
    if np.ndim(x) == 0:
        x = float(x)
        if x > 0:
            raise ValueError("log1mexp needs x <= 0")
        if x == 0:
            return -math.inf
        if x > _LOG_HALF:
            return math.log(-math.expm1(x))
        return math.log1p(-math.exp(x))
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    near = x > _LOG_HALF
    with np.errstate(divide="ignore"):
        out[near] = np.log(-np.expm1(x[near]))
    out[~near] = np.log1p(-np.exp(x[~near]))
    return out


def log2_neg_log2(log_v):
    """``log2(-log2 v)`` from ``ln v``; nan where v is 0 or 1."""
    log_v = np.asarray(log_v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log2(-log_v / LN2)
    return np.where(np.isfinite(log_v) & (log_v < 0), out, np.nan)


@dataclass(frozen=True)
class DualLogValue:
    """A probability stored as ``(ln v, ln(1 - v))``."""

    log_v: float
    log_1mv: float

    def __post_init__(self):
        a, b = float(self.log_v), float(self.log_1mv)
        if math.isnan(a) or math.isnan(b) or a > 0 or b > 0:
            raise ValueError(f"invalid dual-log pair ({a}, {b})")
        if a == -math.inf and b == -math.inf:
            raise ValueError("log_v and log_1mv cannot both be -inf")
        if a > -30 and b > -30 and abs(math.exp(a) + math.exp(b) - 1.0) > 1e-9:
            raise ValueError(f"inconsistent dual-log pair ({a}, {b})")
        object.__setattr__(self, "log_v", a)
        object.__setattr__(self, "log_1mv", b)

    @classmethod
    def from_value(cls, v: float) -> DualLogValue:
        v = float(v)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"value must lie in [0, 1], got {v}")
        if v <= 0.5:
            lv = math.log(v) if v > 0 else -math.inf
            return cls(lv, math.log1p(-v))
        l1 = math.log1p(-v) if v < 1 else -math.inf
        return cls(math.log(v), l1)

    @classmethod
    def from_log(cls, log_v: float) -> DualLogValue:
        return cls(log_v, log1mexp(log_v))

    @classmethod
    def from_log2(cls, log2_v: float) -> DualLogValue:
        return cls.from_log(log2_v * LN2)

    @property
    def value(self) -> float:
        return math.exp(self.log_v)

    @property
    def log2(self) -> float:
        return self.log_v / LN2

    @property
    def is_zero(self) -> bool:
        return self.log_v == -math.inf

    @property
    def is_one(self) -> bool:
        return self.log_1mv == -math.inf

    def swapped(self) -> DualLogValue:
        """The value ``1 - v``."""
        return DualLogValue(self.log_1mv, self.log_v)


def _double_complement(log_x, log_1mx):
    """``ln(1 - (1 - x)**2) = ln x + ln(2 - x)``, accurate on both ends."""
    if np.ndim(log_x) == 0:
        if log_x <= _LOG_HALF:
            return log_x + LN2 + math.log1p(-0.5 * math.exp(log_x))
        return log1mexp(2 * log_1mx)
    log_x = np.asarray(log_x, dtype=float)
    log_1mx = np.asarray(log_1mx, dtype=float)
    small = log_x <= _LOG_HALF
    out = np.empty_like(log_x)
    out[small] = log_x[small] + LN2 + np.log1p(-0.5 * np.exp(log_x[small]))
    out[~small] = log1mexp(2 * log_1mx[~small])
    return out


# Each branch takes the coordinate that squares exactly (a doubling of a log)
# and rebuilds the other from whichever of (ln v, ln(1 - v)) is accurate; for
# v below ~1e-308 ln(1 - v) rounds to -0 and would send a minus step to 0.


def _plus(log_v, log_1mv):
    return 2 * log_v, _double_complement(log_1mv, log_v)


def _minus(log_v, log_1mv):
    return _double_complement(log_v, log_1mv), 2 * log_1mv


def step_bec(z: DualLogValue, b: int) -> DualLogValue:
    """One step of the erasure recursion: ``b = 1`` minus, ``b = 0`` plus."""
    if z.is_zero or z.is_one:
        return z
    if b:
        return DualLogValue(*_minus(z.log_v, z.log_1mv))
    return DualLogValue(*_plus(z.log_v, z.log_1mv))


def _step_arrays(log_v, log_1mv, bits, mode: str):
    """Vectorized step. ``mode`` is ``exact`` (= ``upper``) or ``lower``."""
    pv, p1 = _plus(log_v, log_1mv)
    if mode == "lower":
        mv, m1 = log_v, log_1mv
    else:
        mv, m1 = _minus(log_v, log_1mv)
    minus = bits.astype(bool)
    return np.where(minus, mv, pv), np.where(minus, m1, p1)


# --------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class SamplePath:
    """Fair bits ``B_1 .. B_n`` (``B = 1`` is the minus branch)."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("path bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)

    def complement(self) -> SamplePath:
        return SamplePath(tuple(1 - b for b in self.bits))

    @classmethod
    def sample(cls, n: int, seed: int, stream: int = 0) -> SamplePath:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))
        return cls(tuple(rng.integers(0, 2, size=n).tolist()))

    @classmethod
    def from_leaf(cls, index: int, n: int) -> SamplePath:
        return cls(tuple(1 - ((index >> (n - j)) & 1) for j in range(1, n + 1)))


def partial_sum(path: SamplePath | Sequence[int], m: int, n: int) -> int:
    """``S_{m,n}``: number of ones among ``B_{m+1} .. B_n``."""
    bits = path.bits if isinstance(path, SamplePath) else tuple(path)
    if not 0 <= m < n <= len(bits):
        raise ValueError(f"need 0 <= m < n <= {len(bits)}, got m={m}, n={n}")
    return int(sum(bits[m:n]))


def sample_paths(n: int, count: int, seed: int, workers: int = 1) -> np.ndarray:
    """``count`` fair paths of length ``n`` as a ``(count, n)`` uint8 array."""
    parts = map_blocks(
        lambda rng, size: rng.integers(0, 2, size=(size, n), dtype=np.uint8),
        count,
        seed,
        stream=1,
        workers=workers,
    )
    return np.concatenate(parts) if parts else np.zeros((0, n), dtype=np.uint8)


def exhaustive_bits(n: int) -> np.ndarray:
    """All ``2**n`` paths; row ``i`` is the path reaching spectrum leaf ``i``."""
    idx = np.arange(2**n, dtype=np.int64)[:, None]
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)[None, :]
    return (1 - ((idx >> shifts) & 1)).astype(np.uint8)


# --------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class ZTrajectory:
    values: tuple[DualLogValue, ...]
    path: SamplePath

    @property
    def log_v(self) -> np.ndarray:
        return np.array([v.log_v for v in self.values])

    @property
    def log2_values(self) -> np.ndarray:
        return self.log_v / LN2


def _as_dual(start) -> DualLogValue:
    return start if isinstance(start, DualLogValue) else DualLogValue.from_value(start)


def trajectories(start, bits: np.ndarray, mode: str = "exact") -> tuple[np.ndarray, np.ndarray]:
    """Evolve ``start`` along each row of ``bits``.

    Returns ``(log_v, log_1mv)`` arrays of shape ``(paths, n + 1)``. ``mode``
    is ``exact`` (erasure recursion, also the upper enclosure for any channel)
    or ``lower`` (minus steps leave z unchanged).
    """
    if mode not in ("exact", "upper", "lower"):
        raise ValueError(f"unknown mode {mode!r}")
    z = _as_dual(start)
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    p, n = bits.shape
    lv = np.empty((p, n + 1))
    l1 = np.empty((p, n + 1))
    lv[:, 0], l1[:, 0] = z.log_v, z.log_1mv
    for j in range(n):
        lv[:, j + 1], l1[:, j + 1] = _step_arrays(lv[:, j], l1[:, j], bits[:, j], mode)
    return lv, l1


def sample_trajectory(start, n: int, mode: str = "exact", seed: int = 0, path: SamplePath | None = None):
    """One trajectory (``exact``) or a ``(lower, upper)`` pair (``interval``)."""
    if path is None:
        path = SamplePath.sample(n, seed)
    if len(path) != n:
        raise ValueError("path length must equal n")
    bits = np.array(path.bits, dtype=np.uint8)[None, :]

    def build(m):
        lv, l1 = trajectories(start, bits, m)
        return ZTrajectory(tuple(DualLogValue(a, b) for a, b in zip(lv[0], l1[0])), path)

    if mode == "exact":
        return build("exact")
    if mode == "interval":
        return build("lower"), build("upper")
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class ZSpectrum:
    """All ``2**level`` synthetic-channel Bhattacharyya values, leaf-indexed.

    ``kind`` is ``bec`` for exact erasure spectra, ``lower`` / ``upper`` for
    the two sides of an interval enclosure. ``capacity`` is I(W) of the base
    channel when known.
    """

    level: int
    log_v: np.ndarray
    log_1mv: np.ndarray
    kind: str = "bec"
    capacity: float | None = None

    def __post_init__(self):
        if len(self.log_v) != 2**self.level or len(self.log_1mv) != 2**self.level:
            raise ValueError("spectrum must hold exactly 2**level values")

    def __len__(self):
        return len(self.log_v)

    def __getitem__(self, i: int) -> DualLogValue:
        return DualLogValue(self.log_v[i], self.log_1mv[i])

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_v)

    @property
    def log2_values(self) -> np.ndarray:
        return self.log_v / LN2


def _enumerate(z: DualLogValue, n: int, minus_mode: str) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= n <= MAX_EXHAUSTIVE_LEVEL:
        raise ValueError(f"exhaustive enumeration needs 0 <= n <= {MAX_EXHAUSTIVE_LEVEL}, got {n}")
    lv = np.array([z.log_v])
    l1 = np.array([z.log_1mv])
    for _ in range(n):
        nv = np.empty(2 * len(lv))
        n1 = np.empty(2 * len(lv))
        if minus_mode == "lower":
            nv[0::2], n1[0::2] = lv, l1
        else:
            nv[0::2], n1[0::2] = _minus(lv, l1)
        nv[1::2], n1[1::2] = _plus(lv, l1)
        lv, l1 = nv, n1
    return lv, l1


def enumerate_bec_spectrum(eps: float, n: int) -> ZSpectrum:
    """Exact erasure probabilities of all synthetic channels of BEC(eps) at level n."""
    eps = check_erasure(eps)
    lv, l1 = _enumerate(DualLogValue.from_value(eps), n, "exact")
    return ZSpectrum(n, lv, l1, "bec", 1.0 - eps)


def enumerate_interval_spectrum(z0: float, n: int, capacity: float | None = None) -> tuple[ZSpectrum, ZSpectrum]:
    """Leafwise enclosures of the Z spectrum of any channel with Z(W) = z0."""
    z = DualLogValue.from_value(z0)
    lo = _enumerate(z, n, "lower")
    hi = _enumerate(z, n, "exact")
    return ZSpectrum(n, *lo, "lower", capacity), ZSpectrum(n, *hi, "upper", capacity)


def trajectories_from_spectrum_levels(eps: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive trajectories (row ``i`` reaches leaf ``i``), shape ``(2**n, n + 1)``."""
    z = DualLogValue.from_value(check_erasure(eps))
    lv_t = np.empty((2**n, n + 1))
    l1_t = np.empty((2**n, n + 1))
    lv, l1 = np.array([z.log_v]), np.array([z.log_1mv])
    leaves = np.arange(2**n)
    for j in range(n + 1):
        lv_t[:, j] = lv[leaves >> (n - j)]
        l1_t[:, j] = l1[leaves >> (n - j)]
        if j < n:
            nv, n1 = np.empty(2 * len(lv)), np.empty(2 * len(lv))
            nv[0::2], n1[0::2] = _minus(lv, l1)
            nv[1::2], n1[1::2] = _plus(lv, l1)
            lv, l1 = nv, n1
    return lv_t, l1_t


# --------------------------------------------------------------------------
# events


def _bits(path) -> tuple[int, ...]:
    return path.bits if isinstance(path, SamplePath) else tuple(int(b) for b in path)


def event_G(path, m: int, n: int, gamma: float) -> bool:
    """``S_{m,n} >= gamma (n - m)``."""
    return partial_sum(_bits(path), m, n) >= gamma * (n - m)


def zero_f(n) -> float:
    return 0.0


def event_H(path, m: int, n: int, t: float, f: Callable[[int], float] = zero_f) -> bool:
    """``S_{m,n} >= (n - m + t sqrt(n - m)) / 2 + f(n - m)``."""
    k = n - m
    return partial_sum(_bits(path), m, n) >= 0.5 * (k + t * math.sqrt(k)) + f(k)


def event_C(z: DualLogValue, n: int, rho: float) -> bool:
    """``X_n <= rho**n``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return z.log_v <= n * math.log(rho)


def d_threshold_log(n: int, beta: float) -> float:
    """``ln`` of ``2**-(2**(n beta))``."""
    return -(2.0 ** (n * beta)) * LN2


def event_D(z: DualLogValue, n: int, beta: float) -> bool:
    """``X_n <= 2**-(2**(n beta))``."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return z.log_v <= d_threshold_log(n, beta)


def event_T(traj: ZTrajectory, n: int, zeta: float) -> bool:
    """``X_i <= zeta`` for every recorded ``i >= n``."""
    if not 0 < zeta < 1:
        raise ValueError("zeta must lie in (0, 1)")
    bound = math.log(zeta)
    return all(v.log_v <= bound for v in traj.values[n:])


# --------------------------------------------------------------------------
# bounding processes
#
# The doubling of L and the squaring of the lower process are tied to the
# plus steps of X (B = 0) so that both dominance relations hold path by path.


def upper_process(path, m: int, L_m: float, q: float = 2.0) -> list[float]:
    """``L_m .. L_n``: double on plus steps, add ``log2 q`` on minus steps."""
    if L_m > 0:
        raise ValueError("L_m must be <= 0")
    bits = _bits(path)
    step = math.log2(q)
    out = [float(L_m)]
    for b in bits[m:]:
        out.append(out[-1] + step if b else 2 * out[-1])
    return out


def upper_process_paths(bits: np.ndarray, m: int, L_m: np.ndarray, q: float = 2.0) -> np.ndarray:
    """Vectorized :func:`upper_process`; returns shape ``(paths, n - m + 1)``."""
    bits = np.asarray(bits)
    step = math.log2(q)
    L = np.empty((bits.shape[0], bits.shape[1] - m + 1))
    L[:, 0] = L_m
    for j in range(m, bits.shape[1]):
        L[:, j - m + 1] = np.where(bits[:, j] == 1, L[:, j - m] + step, 2 * L[:, j - m])
    return L


def ln_upper_bound(L_m: float, s: int, span: int, q: float = 2.0) -> float:
    """``2**s (L_m + (span - s) log2 q)``, with ``s`` the number of doubling steps."""
    if not 0 <= s <= span:
        raise ValueError("need 0 <= s <= span")
    return 2.0**s * (L_m + (span - s) * math.log2(q))


def rho_of_gamma(gamma: float, n: int, m: int, q: float = 2.0, epsilon: float = 1.0) -> float:
    """``rho`` with ``log2 rho = -(1 - gamma)(n - m) log2 q / m - epsilon``."""
    if m <= 0:
        raise ValueError("m must be positive")
    if n <= m:
        raise ValueError("need m < n")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 2.0 ** (-(1 - gamma) * (n - m) * math.log2(q) / m - epsilon)


@dataclass(frozen=True)
class ConverseProcess:
    """Lower process ``X_m .. X_n`` squaring on the plus steps of X only."""

    values: tuple[DualLogValue, ...]
    squarings: tuple[int, ...]

    @property
    def defined(self) -> bool:
        base = self.values[0]
        return not (base.is_zero or base.is_one)

    def loglog(self) -> list[float] | None:
        if not self.defined:
            return None
        return [float(x) for x in log2_neg_log2([v.log_v for v in self.values])]

    def identity_exact(self) -> bool | None:
        """``ln X_{m+k} == 2**s_k ln X_m`` bit for bit; None when undefined."""
        if not self.defined:
            return None
        base = self.values[0].log_v
        return all(v.log_v == math.ldexp(base, s) for v, s in zip(self.values, self.squarings))


def converse_process(traj: ZTrajectory, m: int) -> ConverseProcess:
    bits = traj.path.bits
    n = len(bits)
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    vals = [traj.values[m]]
    sq = [0]
    for b in bits[m:]:
        if b:
            vals.append(vals[-1])
            sq.append(sq[-1])
        else:
            lv = 2 * vals[-1].log_v
            vals.append(DualLogValue(lv, log1mexp(lv)))
            sq.append(sq[-1] + 1)
    return ConverseProcess(tuple(vals), tuple(sq))


def converse_paths(log_v_traj: np.ndarray, bits: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized lower process: ``(ln X_check, squaring counts)`` from index m on."""
    bits = np.asarray(bits)
    p, n = bits.shape
    out = np.empty((p, n - m + 1))
    sq = np.zeros((p, n - m + 1), dtype=np.int64)
    out[:, 0] = log_v_traj[:, m]
    for j in range(m, n):
        plus = bits[:, j] == 0
        out[:, j - m + 1] = np.where(plus, 2 * out[:, j - m], out[:, j - m])
        sq[:, j - m + 1] = sq[:, j - m] + plus
    return out, sq


# --------------------------------------------------------------------------
# binomial tails

def binomial_tail(n: int, d: float) -> float:
    """``P(Binomial(n, 1/2) >= d)``, summed exactly in integers."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if d <= 0:
        return 1.0
    k0 = math.ceil(d)
    if k0 > n:
        return 0.0
    c = math.comb(n, k0)
    acc = 0
    for k in range(k0, n + 1):
        acc += c
        c = c * (n - k) // (k + 1)
    return float(Fraction(acc, 1 << n))


def binomial_tails(n: int) -> list[Fraction]:
    """Exact ``P(S_n >= d)`` for ``d = 0 .. n + 1``."""
    tails = [Fraction(0)] * (n + 2)
    acc = 0
    for d in range(n, -1, -1):
        acc += math.comb(n, d)
        tails[d] = Fraction(acc, 2**n)
    return tails


def is_absorbed_consistently(values: Iterable[DualLogValue]) -> bool:
    """Once a value hits 0 or 1 every later value is identical."""
    hit = None
    for v in values:
        if hit is not None and (v.log_v, v.log_1mv) != hit:
            return False
        if hit is None and (v.is_zero or v.is_one):
            hit = (v.log_v, v.log_1mv)
    return True
