"""Discrete binary-input memoryless channels and the one-step polar transforms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROB_TOL = 1e-12
# Largest output alphabet a generic transform may hand back (after merging).
ALPHABET_CAP = 2**16
# Raw outputs are materialized before merging; refuse anything beyond this.
RAW_ALPHABET_GUARD = 2**24


class ChannelError(ValueError):
    """Malformed channel description."""


class AlphabetCapError(RuntimeError):
    """A transform would exceed the output-alphabet cap."""


@dataclass(frozen=True, eq=False)
class DiscreteBMC:
    """Binary-input channel given as one ``(W(y|0), W(y|1))`` row per output.

    Rows that are exactly ``(0, 0)`` are dropped. Both columns are checked to
    sum to one within ``PROB_TOL`` and renormalized once.
    """

    outputs: np.ndarray

    def __post_init__(self):
        w = np.array(self.outputs, dtype=float)
        if w.ndim != 2 or w.shape[1] != 2:
            raise ChannelError("outputs must be a list of (w0, w1) pairs")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ChannelError("likelihoods must be finite and non-negative")
        w = w[(w[:, 0] != 0) | (w[:, 1] != 0)]
        if len(w) == 0:
            raise ChannelError("channel must have at least one output")
        sums = w.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            raise ChannelError(f"likelihood columns must sum to 1, got {sums[0]!r}, {sums[1]!r}")
        w = w / sums
        w.setflags(write=False)
        object.__setattr__(self, "outputs", w)

    @property
    def num_outputs(self) -> int:
        return len(self.outputs)

    @property
    def z(self) -> float:
        return bhattacharyya(self)

    @property
    def capacity(self) -> float:
        return symmetric_capacity(self)

    def __repr__(self):
        return f"DiscreteBMC(num_outputs={self.num_outputs}, Z={self.z:.6g}, I={self.capacity:.6g})"


def check_erasure(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ChannelError(f"erasure probability must lie in [0, 1], got {eps}")
    return eps


def bec(eps: float) -> DiscreteBMC:
    """Binary erasure channel with outputs ordered (0, erasure, 1)."""
    eps = check_erasure(eps)
    return DiscreteBMC(np.array([[1 - eps, 0.0], [eps, eps], [0.0, 1 - eps]]))


def bsc(p: float) -> DiscreteBMC:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"crossover probability must lie in [0, 1], got {p}")
    return DiscreteBMC(np.array([[1 - p, p], [p, 1 - p]]))


def bhattacharyya(w: DiscreteBMC) -> float:
    """Z(W) = sum over outputs of sqrt(W(y|0) W(y|1))."""
    o = w.outputs
    return float(min(1.0, np.sum(np.sqrt(o[:, 0] * o[:, 1]))))


def symmetric_capacity(w: DiscreteBMC) -> float:
    """Mutual information in bits under a uniform input, with 0 log 0 = 0."""
    o = w.outputs
    mix = 0.5 * (o[:, 0] + o[:, 1])
    total = 0.0
    for x in (0, 1):
        p = o[:, x]
        nz = p > 0
        total += 0.5 * np.sum(p[nz] * np.log2(p[nz] / mix[nz]))
    return float(min(1.0, max(0.0, total)))


def _check_raw(count: int):
    if count > RAW_ALPHABET_GUARD:
        raise AlphabetCapError(
            f"transform would materialize {count} outputs (guard {RAW_ALPHABET_GUARD}); "
            "use erasure or interval mode instead"
        )


def _capped(raw: np.ndarray) -> DiscreteBMC:
    w = DiscreteBMC(raw)
    if w.num_outputs <= ALPHABET_CAP:
        return w
    merged = merge_equivalent_outputs(w)
    if merged.num_outputs > ALPHABET_CAP:
        raise AlphabetCapError(
            f"transform yields {merged.num_outputs} outputs after merging (cap {ALPHABET_CAP}); "
            "use erasure or interval mode instead"
        )
    return merged


def transform_minus(w: DiscreteBMC) -> DiscreteBMC:
    """W^-(y1, y2 | u1) = 1/2 sum_{u2} W(y1 | u1 xor u2) W(y2 | u2).

    Outputs are ordered lexicographically in (y1, y2). If the raw alphabet
    exceeds ``ALPHABET_CAP`` the result is merged; if it is still too large,
    ``AlphabetCapError`` is raised.
    """
    o = w.outputs
    k = len(o)
    _check_raw(k * k)
    a0, a1 = o[:, 0][:, None], o[:, 1][:, None]
    b0, b1 = o[:, 0][None, :], o[:, 1][None, :]
    m0 = 0.5 * (a0 * b0 + a1 * b1)
    m1 = 0.5 * (a1 * b0 + a0 * b1)
    return _capped(np.stack([m0.ravel(), m1.ravel()], axis=1))


def transform_plus(w: DiscreteBMC) -> DiscreteBMC:
    """W^+(y1, y2, u1 | u2) = 1/2 W(y1 | u1 xor u2) W(y2 | u2).

    Outputs are ordered lexicographically in (y1, y2, u1).
    """
    o = w.outputs
    k = len(o)
    _check_raw(2 * k * k)
    raw = np.empty((k, k, 2, 2))  # (y1, y2, u1, u2)
    for u1 in (0, 1):
        for u2 in (0, 1):
            raw[:, :, u1, u2] = 0.5 * np.outer(o[:, u1 ^ u2], o[:, u2])
    return _capped(raw.reshape(-1, 2))


def merge_equivalent_outputs(w: DiscreteBMC, tol: float = 1e-14) -> DiscreteBMC:
    """Merge outputs with proportional likelihood pairs.

    Outputs are keyed by ``W(y|1) / (W(y|0) + W(y|1))``; keys within ``tol`` of a
    group's first member are merged. Result keeps first-occurrence order.
    """
    o = w.outputs
    key = o[:, 1] / (o[:, 0] + o[:, 1])
    order = np.argsort(key, kind="stable")
    group = np.empty(len(o), dtype=np.int64)
    gid, start = -1, -math.inf
    for idx in order:
        if key[idx] - start > tol:
            gid += 1
            start = key[idx]
        group[idx] = gid
    # relabel groups by first occurrence
    _, first = np.unique(group, return_index=True)
    rank = np.empty(gid + 1, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(gid + 1)
    labels = rank[group]
    merged = np.zeros((gid + 1, 2))
    np.add.at(merged, labels, o)
    return DiscreteBMC(merged)


def bec_transform(eps: float) -> tuple[float, float]:
    """Erasure probabilities of (W^-, W^+) for a BEC(eps)."""
    eps = check_erasure(eps)
    return 2 * eps - eps * eps, eps * eps


def as_erasure(w: DiscreteBMC) -> float | None:
    """Return eps if ``w`` is (equivalent to) a BEC(eps), else None."""
    o = merge_equivalent_outputs(w).outputs
    eps = 0.0
    for w0, w1 in o:
        if w0 > 0 and w1 > 0:
            if abs(w0 - w1) > PROB_TOL:
                return None
            eps += 0.5 * (w0 + w1)
    return eps


def parse_channel(obj) -> DiscreteBMC:
    """Build a channel from ``{"outputs": [[w0, w1], ...]}``, ``{"bec": e}`` or ``{"bsc": p}``."""
    if not isinstance(obj, dict):
        raise ChannelError("channel description must be an object")
    if "outputs" in obj:
        return DiscreteBMC(np.asarray(obj["outputs"], dtype=float))
    if "bec" in obj:
        return bec(obj["bec"])
    if "bsc" in obj:
        return bsc(obj["bsc"])
    raise ChannelError("channel object needs one of the keys 'outputs', 'bec', 'bsc'")


def load_channel(spec: str) -> DiscreteBMC:
    """Load ``bec:<eps>``, ``bsc:<p>`` or a JSON channel file."""
    kind, sep, value = spec.partition(":")
    if sep and kind in ("bec", "bsc"):
        try:
            return parse_channel({kind: float(value)})
        except ValueError as exc:
            raise ChannelError(f"bad channel shorthand {spec!r}: {exc}") from None
    try:
        text = Path(spec).read_text()
    except OSError as exc:
        raise ChannelError(f"cannot read channel file {spec!r}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelError(f"channel file {spec!r} is not valid JSON: {exc.msg}") from None
    return parse_channel(obj)
