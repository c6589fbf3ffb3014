"""Refining interval partitions of the real line and their quantizers.

Every partition is made of right semi-closed cells::

    (-inf, b_1], (b_1, b_2], ..., (b_{m-1}, +inf)

so a breakpoint belongs to the cell it closes. Cells are numbered
``0 .. m-1`` from left to right.

Two schemes are provided:

``dyadic``
    Level ``k`` has breakpoints ``-k + i * 2**-k`` for ``i = 0 .. k * 2**(k+1)``,
    i.e. the range ``[-k, k]`` cut into cells of width ``2**-k`` plus two tails.
    Each level refines the previous one and the breakpoints become dense.

``alphabet:<n>``
    Identity quantizer for the symbols ``0 .. n-1`` at every level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "CellId",
    "PartitionScheme",
    "LevelCoder",
    "dyadic_scheme",
    "alphabet_scheme",
    "parse_scheme",
    "quantize",
    "quantize_window",
]

# Above this level the dyadic breakpoint list is too large to materialize.
_MAX_MATERIALIZED_LEVEL = 20
# Up to this level dyadic indices fit in int64 and float scaling is exact.
_MAX_FLOAT_LEVEL = 50


@dataclass(frozen=True, order=True)
class CellId:
    level: int
    index: int


@dataclass(frozen=True)
class PartitionScheme:
    """A sequence of nested partitions indexed by level ``k >= 1``."""

    kind: str
    alphabet_size: int | None = None

    def __post_init__(self):
        if self.kind == "dyadic":
            if self.alphabet_size is not None:
                raise ValueError("dyadic scheme takes no alphabet size")
        elif self.kind == "alphabet":
            if self.alphabet_size is None or self.alphabet_size < 1:
                raise ValueError("alphabet scheme needs a positive alphabet size")
        else:
            raise ValueError(f"unknown scheme kind {self.kind!r}")

    @property
    def is_alphabet(self) -> bool:
        return self.kind == "alphabet"

    def __str__(self):
        return "dyadic" if self.kind == "dyadic" else f"alphabet:{self.alphabet_size}"

    def _check_level(self, k):
        if int(k) != k or k < 1:
            raise ValueError(f"level must be a positive integer, got {k!r}")

    def n_cells(self, k: int) -> int:
        """Number of cells ``m_k`` at level ``k``."""
        self._check_level(k)
        if self.is_alphabet:
            return self.alphabet_size
        return k * 2 ** (k + 1) + 2

    def breakpoints(self, k: int) -> np.ndarray:
        self._check_level(k)
        if self.is_alphabet:
            return np.arange(self.alphabet_size - 1, dtype=float)
        if k > _MAX_MATERIALIZED_LEVEL:
            raise ValueError(f"level {k} has too many breakpoints to list")
        n = k * 2 ** (k + 1)
        return -k + np.arange(n + 1, dtype=float) * 2.0**-k

    def cell_bounds(self, k: int, index: int) -> tuple[float, float]:
        """Return ``(lo, hi)`` of cell ``index``; the cell is ``(lo, hi]``."""
        m = self.n_cells(k)
        if not 0 <= index < m:
            raise IndexError(f"cell index {index} out of range for level {k}")
        if self.is_alphabet:
            lo = -math.inf if index == 0 else index - 1.0
            hi = math.inf if index == m - 1 else float(index)
            return lo, hi
        lo = -math.inf if index == 0 else -k + (index - 1) * 2.0**-k
        hi = math.inf if index == m - 1 else -k + index * 2.0**-k
        return lo, hi

    def _exact_index(self, k: int, x: float) -> int:
        # i = ceil(x * 2**k) + k * 2**k, clipped to the tails; exact rationals
        top = k * 2 ** (k + 1) + 1
        if x == math.inf:
            return top
        if x == -math.inf:
            return 0
        return min(max(math.ceil(Fraction(x) * 2**k) + k * 2**k, 0), top)

    def quantize_array(self, k: int, values) -> np.ndarray:
        """Cell indices of ``values`` at level ``k``, elementwise.

        Returns ``int64`` except for dyadic levels above 50, where indices
        outgrow 64 bits and an object array of Python ints is returned.
        NaN raises ``ValueError``.
        """
        self._check_level(k)
        x = np.asarray(values, dtype=float)
        if np.isnan(x).any():
            raise ValueError("NaN has no cell in an interval partition")
        if self.is_alphabet:
            idx = x.astype(np.int64)
            if (idx != x).any() or (idx < 0).any() or (idx >= self.alphabet_size).any():
                raise ValueError(
                    f"values must be symbols in 0..{self.alphabet_size - 1}"
                )
            return idx
        if k > _MAX_FLOAT_LEVEL:
            flat = [self._exact_index(k, float(v)) for v in x.ravel()]
            return np.array(flat, dtype=object).reshape(x.shape)
        # x <= -k + i*2**-k  <=>  i >= ceil(x * 2**k) + k * 2**k; scaling by a
        # power of two is exact, so boundaries land in the cell they close.
        offset = k * 2**k
        scaled = np.clip(np.ldexp(x, k), -offset - 1.0, offset + 1.0)
        idx = np.ceil(scaled).astype(np.int64) + offset
        return np.clip(idx, 0, 2 * offset + 1)

    def codes(self, k: int, values) -> np.ndarray:
        """``int64`` labels, equal exactly where the level-``k`` cells are equal."""
        return LevelCoder(self, values).codes(k)

    def quantize(self, k: int, x: float) -> CellId:
        return CellId(int(k), int(self.quantize_array(k, x)))


class LevelCoder:
    """Per-level cell labels for one fixed array of values.

    Labels are only meaningful for equality tests. High dyadic levels are
    computed exactly on the distinct values, which are sorted once and reused
    for every level.
    """

    def __init__(self, scheme: PartitionScheme, values):
        self.scheme = scheme
        self.values = np.asarray(values, dtype=float)
        if np.isnan(self.values).any():
            raise ValueError("NaN has no cell in an interval partition")
        self._unique = None

    def codes(self, k: int) -> np.ndarray:
        if self.scheme.is_alphabet or k <= _MAX_FLOAT_LEVEL:
            return self.scheme.quantize_array(k, self.values)
        if self._unique is None:
            self._unique = np.unique(self.values, return_inverse=True)
        uniq, inverse = self._unique
        idx = self.scheme.quantize_array(k, uniq)
        # the quantizer is monotone, so sorted values give sorted cells
        labels = np.zeros(uniq.size, dtype=np.int64)
        if uniq.size > 1:
            labels[1:] = np.cumsum(idx[1:] != idx[:-1])
        return labels[inverse.reshape(self.values.shape)]


def dyadic_scheme() -> PartitionScheme:
    return PartitionScheme("dyadic")


def alphabet_scheme(n: int) -> PartitionScheme:
    return PartitionScheme("alphabet", int(n))


def parse_scheme(text: str) -> PartitionScheme:
    """Parse ``"dyadic"`` or ``"alphabet:<n>"``."""
    text = text.strip()
    if text == "dyadic":
        return dyadic_scheme()
    if text.startswith("alphabet:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad alphabet size in {text!r}") from None
        return alphabet_scheme(n)
    raise ValueError(f"unknown scheme {text!r}; expected 'dyadic' or 'alphabet:<n>'")


def quantize(scheme: PartitionScheme, k: int, x: float) -> CellId:
    return scheme.quantize(k, x)


def quantize_window(scheme: PartitionScheme, k: int, window) -> list[CellId]:
    window = list(window)
    if not window:
        raise ValueError("cannot quantize an empty window")
    return [CellId(int(k), int(i)) for i in scheme.quantize_array(k, window)]
