"""Recurrence times of quantized patterns in a past window.

A past window is a 1-d sequence ``(X_{-t}, ..., X_{-1})`` with the most recent
value last. At stage ``k`` the pattern is the level-``k`` quantization of the
last ``lambda_{k-1}`` values; ``tau_k`` is the smallest positive shift at which
that pattern occurs again, and ``lambda_k = lambda_{k-1} + tau_k`` with
``lambda_0 = 1``. The matched sample of stage ``k`` is ``X_{-tau_k}``, the value
that followed the earlier occurrence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantization import LevelCoder, PartitionScheme

__all__ = [
    "RecurrenceLadder",
    "as_past",
    "smallest_shift",
    "next_recurrence",
    "build_ladder",
    "matched_samples",
]

_FIRST_BLOCK = 64
# positions checked in bulk before whole-window comparison of survivors
_FILTER_DEPTH = 16


@dataclass(frozen=True)
class RecurrenceLadder:
    taus: tuple[int, ...]
    lambdas: tuple[int, ...]

    def __post_init__(self):
        if len(self.lambdas) != len(self.taus) + 1 or self.lambdas[0] != 1:
            raise ValueError("lambdas must be (1, ...) with one more entry than taus")
        for j, tau in enumerate(self.taus, start=1):
            if tau < 1 or self.lambdas[j] != self.lambdas[j - 1] + tau:
                raise ValueError(f"ladder recursion broken at stage {j}")

    @property
    def kappa(self) -> int:
        return len(self.taus)

    @property
    def matched_indices(self) -> tuple[int, ...]:
        """Time indices ``-tau_j`` of the matched samples."""
        return tuple(-tau for tau in self.taus)

    def to_dict(self) -> dict:
        return {"k": self.kappa, "taus": list(self.taus), "lambdas": list(self.lambdas)}


def as_past(values) -> np.ndarray:
    past = np.asarray(values, dtype=float)
    if past.ndim != 1:
        raise ValueError("a past window must be one-dimensional")
    return past


def smallest_shift(channels, max_shift: int) -> int | None:
    """Smallest ``s`` in ``1..max_shift`` at which every channel pattern recurs.

    ``channels`` is a sequence of ``(codes, start, stop)``: the pattern is
    ``codes[start:stop]`` and shift ``s`` compares it with
    ``codes[start - s:stop - s]``. Callers guarantee ``start - max_shift >= 0``.

    Shifts are scanned in blocks of doubling size. Inside a block the candidate
    set is filtered on the most recent positions; survivors are then compared
    whole, smallest shift first, so every reported match is exact.
    """
    lo = 1
    size = _FIRST_BLOCK
    while lo <= max_shift:
        hi = min(lo + size, max_shift + 1)
        cand = np.arange(lo, hi)
        for codes, start, stop in channels:
            for pos in range(stop - 1, max(start, stop - _FILTER_DEPTH) - 1, -1):
                cand = cand[codes[pos - cand] == codes[pos]]
                if cand.size == 0:
                    break
            if cand.size == 0:
                break
        for s in cand.tolist():
            if all(
                np.array_equal(codes[start - s:stop - s], codes[start:stop])
                for codes, start, stop in channels
            ):
                return s
        lo = hi
        size *= 2
    return None


def _next_from_codes(codes: np.ndarray, lambda_prev: int) -> int | None:
    n = codes.shape[0]
    return smallest_shift([(codes, n - lambda_prev, n)], n - lambda_prev)


def next_recurrence(past, scheme: PartitionScheme, k: int, lambda_prev: int) -> int | None:
    """``tau_k`` for a pattern of length ``lambda_prev``, or ``None`` if the
    window is too short to contain a recurrence."""
    past = as_past(past)
    if lambda_prev < 1 or lambda_prev > past.size:
        raise ValueError("need 1 <= lambda_prev <= len(past)")
    return _next_from_codes(LevelCoder(scheme, past).codes(k), lambda_prev)


def build_ladder(past, scheme: PartitionScheme, max_levels: int | None = None) -> RecurrenceLadder:
    """Run the recursion until the window is exhausted.

    The returned ladder has ``kappa = max{k : lambda_k <= len(past)}`` stages
    (capped at ``max_levels`` if given). ``kappa`` may be zero.
    """
    past = as_past(past)
    if past.size == 0:
        raise ValueError("past window is empty")
    taus = []
    lambdas = [1]
    coder = LevelCoder(scheme, past)
    codes = None
    k = 1
    while max_levels is None or k <= max_levels:
        lam = lambdas[-1]
        if lam >= past.size:
            break
        # alphabet mode uses the same quantizer at every level
        if codes is None or not scheme.is_alphabet:
            codes = coder.codes(k)
        tau = _next_from_codes(codes, lam)
        if tau is None:
            break
        taus.append(tau)
        lambdas.append(lam + tau)
        k += 1
    return RecurrenceLadder(tuple(taus), tuple(lambdas))


def matched_samples(ladder: RecurrenceLadder, past) -> np.ndarray:
    """``(X_{-tau_1}, ..., X_{-tau_kappa})`` in ladder order."""
    past = as_past(past)
    assert ladder.lambdas[-1] <= past.size, "ladder was not built from this window"
    return past[[past.size - tau for tau in ladder.taus]] if ladder.taus else past[:0]
