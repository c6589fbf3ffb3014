"""Conditional distribution and regression estimates built on the ladder.

The fixed-sample estimate for a window of length ``t`` keeps the ``kappa_t``
matched samples as a multiset. Set probabilities, CDF values and the
(optionally clamped) mean are all read off that multiset.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .quantization import PartitionScheme
from .recurrence import RecurrenceLadder, as_past, build_ladder, matched_samples

__all__ = [
    "InsufficientData",
    "QuerySet",
    "RegressionConfig",
    "EmpiricalConditional",
    "estimate_conditional",
    "prob",
    "cdf",
    "regress",
    "online_predict",
]


class InsufficientData(Exception):
    """The window holds no complete recurrence (``kappa_t == 0``)."""


@dataclass(frozen=True)
class QuerySet:
    """Finite union of intervals ``(lo, hi]``; points are stored as ``[v, v]``.

    ``intervals`` holds ``(lo, hi, lo_closed)`` triples, sorted and disjoint
    after normalization.
    """

    intervals: tuple[tuple[float, float, bool], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "QuerySet":
        return cls(((float(lo), float(hi), False),))

    @classmethod
    def points(cls, *values: float) -> "QuerySet":
        return cls(tuple((float(v), float(v), True) for v in values))

    @classmethod
    def real_line(cls) -> "QuerySet":
        return cls.interval(-math.inf, math.inf)

    @classmethod
    def empty(cls) -> "QuerySet":
        return cls(())

    @classmethod
    def parse(cls, text: str) -> "QuerySet":
        """Parse ``"(a,b]"``, ``"a,b]"`` or ``"{v1,v2,...}"``; ``inf`` is allowed.

        Several pieces may be joined with ``|``.
        """
        parts = []
        for piece in text.split("|"):
            piece = piece.strip()
            m = re.fullmatch(r"\{([^}]*)\}", piece)
            if m:
                vals = [v for v in m.group(1).split(",") if v.strip()]
                parts.extend((float(v), float(v), True) for v in vals)
                continue
            m = re.fullmatch(r"\(?\s*([^,\]]+?)\s*,\s*([^,\]]+?)\s*\]", piece)
            if not m:
                raise ValueError(f"cannot parse query set {piece!r}")
            lo, hi = float(m.group(1)), float(m.group(2))
            parts.append((lo, hi, False))
        return cls(tuple(parts))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mask = np.zeros(x.shape, dtype=bool)
        for lo, hi, lo_closed in self.intervals:
            above = x >= lo if lo_closed else x > lo
            mask |= above & (x <= hi)
        return mask

    def union(self, other: "QuerySet") -> "QuerySet":
        return QuerySet(self.intervals + other.intervals)

    def __str__(self):
        if not self.intervals:
            return "{}"
        return "|".join(
            f"{{{lo:g}}}" if lo_closed and lo == hi else f"({lo:g},{hi:g}]"
            for lo, hi, lo_closed in self.intervals
        )


def _normalize(intervals):
    cleaned = []
    for lo, hi, lo_closed in intervals:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if hi < lo or (hi == lo and not lo_closed):
            continue  # empty
        cleaned.append((lo, hi, bool(lo_closed)))
    cleaned.sort(key=lambda iv: (iv[0], not iv[2]))
    merged = []
    for lo, hi, lo_closed in cleaned:
        # every piece is closed on the right, so touching pieces overlap
        if merged and lo <= merged[-1][1]:
            plo, phi, pclosed = merged[-1]
            merged[-1] = (plo, max(phi, hi), pclosed)
        else:
            merged.append((lo, hi, lo_closed))
    return tuple(merged)


@dataclass(frozen=True)
class RegressionConfig:
    bound_D: float
    clip: bool = False

    def __post_init__(self):
        if not self.bound_D > 0:
            raise ValueError("bound_D must be positive")


@dataclass(frozen=True)
class EmpiricalConditional:
    """The estimate as the multiset of matched samples."""

    samples: np.ndarray
    ladder: RecurrenceLadder | None = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return int(self.samples.size)

    def prob(self, query: QuerySet) -> float:
        if self.k == 0:
            raise InsufficientData("no matched samples")
        return int(query.contains(self.samples).sum()) / self.k

    def cdf(self, x: float) -> float:
        if self.k == 0:
            raise InsufficientData("no matched samples")
        return int(np.count_nonzero(self.samples <= x)) / self.k

    def mean(self, cfg: RegressionConfig | None = None) -> float:
        if self.k == 0:
            raise InsufficientData("no matched samples")
        values = self.samples
        if cfg is not None and cfg.clip:
            values = np.clip(values, -cfg.bound_D, cfg.bound_D)
        return float(np.mean(values))


def estimate_conditional(past, scheme: PartitionScheme) -> EmpiricalConditional:
    past = as_past(past)
    ladder = build_ladder(past, scheme)
    if ladder.kappa == 0:
        raise InsufficientData(f"no recurrence within a window of length {past.size}")
    return EmpiricalConditional(matched_samples(ladder, past), ladder)


def prob(ec: EmpiricalConditional, query: QuerySet) -> float:
    return ec.prob(query)


def cdf(ec: EmpiricalConditional, x: float) -> float:
    return ec.cdf(x)


def regress(past, scheme: PartitionScheme, cfg: RegressionConfig | None = None) -> float:
    """Mean of the matched samples, clamped to ``[-D, D]`` first if ``cfg.clip``."""
    return estimate_conditional(past, scheme).mean(cfg)


def online_predict(prefix, scheme: PartitionScheme, cfg: RegressionConfig | None = None) -> float:
    """Predict ``X_t`` from ``(X_0, ..., X_{t-1})``.

    The prefix, read with its last value as the most recent, is exactly a past
    window, so this is ``regress`` on it.
    """
    return regress(prefix, scheme, cfg)
