"""Two-class plug-in classification for stationary labeled sequences.

The data are features ``X_{-t}, ..., X_0`` (d-dimensional) and labels
``Y_{-t}, ..., Y_{-1}``. At stage ``k`` the pattern is the quantized features
over the last ``lambda_{k-1} + 1`` positions (time 0 included) together with
the labels over the ``lambda_{k-1}`` strictly past positions. The estimate of
``P(Y_0 = 1 | X_0, past)`` is the average of the labels ``Y_{-tau_j}`` that
followed the earlier occurrences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import InsufficientData
from .quantization import LevelCoder, PartitionScheme
from .recurrence import RecurrenceLadder, smallest_shift

__all__ = [
    "LabeledSeries",
    "EtaEstimate",
    "pr_build_ladder",
    "estimate_eta",
    "excess_risk_bound",
]


@dataclass(frozen=True)
class LabeledSeries:
    """``features`` has shape ``(t + 1, d)``, its last row is the query ``X_0``;
    ``labels`` has length ``t``."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features[:, None]
        labels = np.asarray(self.labels)
        if features.ndim != 2 or labels.ndim != 1:
            raise ValueError("features must be (n, d) and labels one-dimensional")
        if features.shape[0] != labels.shape[0] + 1:
            raise ValueError("need exactly one more feature row than labels")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def t(self) -> int:
        return int(self.labels.size)

    def last(self, t: int) -> "LabeledSeries":
        """The window made of the ``t`` most recent labeled pairs and ``X_0``."""
        if not 0 <= t <= self.t:
            raise ValueError(f"window length {t} out of range")
        return LabeledSeries(self.features[self.t - t:], self.labels[self.t - t:])


@dataclass(frozen=True)
class EtaEstimate:
    eta: float
    k: int
    ladder: RecurrenceLadder | None = None

    @property
    def decision(self) -> int:
        return int(self.eta >= 0.5)


def _feature_codes(coder: LevelCoder, k: int) -> np.ndarray:
    cells = coder.codes(k)
    if cells.shape[1] == 1:
        return cells[:, 0]
    # product cells: equal rows get equal codes
    _, codes = np.unique(cells, axis=0, return_inverse=True)
    return codes.reshape(-1)


def pr_build_ladder(data: LabeledSeries, scheme: PartitionScheme) -> RecurrenceLadder:
    n = data.features.shape[0]
    # pad so labels line up with features; the pad at time 0 is never compared
    labels = np.append(data.labels, -1)
    taus = []
    lambdas = [1]
    coder = LevelCoder(scheme, data.features)
    codes = None
    k = 1
    while True:
        lam = lambdas[-1]
        max_shift = data.t - lam
        if max_shift < 1:
            break
        if codes is None or not scheme.is_alphabet:
            codes = _feature_codes(coder, k)
        start = n - lam - 1
        tau = smallest_shift([(codes, start, n), (labels, start, n - 1)], max_shift)
        if tau is None:
            break
        taus.append(tau)
        lambdas.append(lam + tau)
        k += 1
    return RecurrenceLadder(tuple(taus), tuple(lambdas))


def estimate_eta(data: LabeledSeries, scheme: PartitionScheme) -> EtaEstimate:
    ladder = pr_build_ladder(data, scheme)
    if ladder.kappa == 0:
        raise InsufficientData("no recurrence of the labeled pattern in the data")
    matched = data.labels[[data.t - tau for tau in ladder.taus]]
    return EtaEstimate(float(matched.sum()) / ladder.kappa, ladder.kappa, ladder)


def excess_risk_bound(eta_hat: float, eta_true: float) -> float:
    """Ceiling ``2 |eta_hat - eta_true|`` on the conditional excess error."""
    if not (0 <= eta_hat <= 1 and 0 <= eta_true <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return 2 * abs(eta_hat - eta_true)
