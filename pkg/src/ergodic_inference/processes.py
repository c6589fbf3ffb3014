"""Seedable stationary ergodic processes with conditional-law oracles.

Randomness: every sampler takes a ``seed`` that may be an int, a
``numpy.random.SeedSequence`` or a ``numpy.random.Generator``; ints and seed
sequences are turned into a PCG64 ``Generator``. Experiments derive per-task
streams with :func:`task_rng`, so results depend only on the master seed.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .pattern_recognition import LabeledSeries
from .quantization import PartitionScheme, dyadic_scheme

__all__ = [
    "OracleUnavailable",
    "OracleConditional",
    "LabeledPath",
    "make_rng",
    "task_rng",
    "IIDBernoulli",
    "IIDUniform",
    "MarkovChain",
    "ClippedAR1",
    "RotationProcess",
    "LabeledCellProcess",
    "iid_bernoulli",
    "iid_uniform",
    "markov_chain",
    "clipped_ar1",
    "rotation_process",
    "labeled_cell_process",
    "build_process",
]


class OracleUnavailable(Exception):
    """The process has no analytic conditional law."""


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def task_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for task ``key`` (e.g. ``(experiment_id, seed_index)``)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class OracleConditional:
    """Exact law of ``X_0`` given the past: a finite pmf or a CDF with its mean."""

    pmf: dict | None = None
    cdf_fn: object = field(default=None, compare=False)
    mean: float | None = None

    def __post_init__(self):
        if self.pmf is not None:
            total = math.fsum(self.pmf.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"pmf sums to {total}")
            if self.mean is None:
                object.__setattr__(
                    self, "mean", math.fsum(float(v) * p for v, p in self.pmf.items())
                )

    def prob_of(self, values) -> float:
        if self.pmf is None:
            raise ValueError("point probabilities need a discrete oracle")
        return math.fsum(self.pmf.get(v, 0.0) for v in values)

    def cdf(self, x: float) -> float:
        if self.pmf is not None:
            return math.fsum(p for v, p in self.pmf.items() if v <= x)
        return float(self.cdf_fn(x))


class _Process:
    name = "process"
    oracle_kind = "none"
    labeled = False

    def sample(self, seed, length: int) -> np.ndarray:
        raise NotImplementedError

    def oracle(self, past) -> OracleConditional:
        raise OracleUnavailable(f"{self.name} has no conditional-law oracle")

    def params(self) -> dict:
        return {}


class MarkovChain(_Process):
    """Finite-state chain started from its stationary law.

    ``emission`` maps states to observed values (identity by default). The
    oracle reads the last observed value, so emissions must be distinct.
    """

    name = "markov"
    oracle_kind = "markov1"

    def __init__(self, matrix, emission=None):
        P = np.asarray(matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError("rows must be probability vectors")
        n = P.shape[0]
        # primitive (irreducible and aperiodic) iff P^((n-1)^2+1) > 0
        power = np.linalg.matrix_power((P > 0).astype(float), (n - 1) ** 2 + 1)
        if not (power > 0).all():
            raise ValueError("transition matrix must be irreducible and aperiodic")
        self.P = P
        self.emission = np.arange(n, dtype=float) if emission is None else np.asarray(emission, dtype=float)
        if self.emission.shape != (n,) or len(set(self.emission.tolist())) != n:
            raise ValueError("emission must give one distinct value per state")
        self.pi = stationary_distribution(P)
        self._cum = [np.cumsum(row).tolist() for row in P]
        self._pi_cum = np.cumsum(self.pi).tolist()
        self._state_of = {v: i for i, v in enumerate(self.emission.tolist())}

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    def params(self):
        return {"matrix": self.P.tolist(), "emission": self.emission.tolist()}

    def sample_states(self, seed, length: int, start=None) -> np.ndarray:
        rng = make_rng(seed)
        u = rng.random(length).tolist()
        out = [0] * length
        if length == 0:
            return np.zeros(0, dtype=np.int64)
        cum = self._cum
        last = self.n_states - 1
        s = min(bisect.bisect_right(self._pi_cum, u[0]), last) if start is None else start
        out[0] = s
        for i in range(1, length):
            s = min(bisect.bisect_right(cum[s], u[i]), last)
            out[i] = s
        return np.asarray(out, dtype=np.int64)

    def sample(self, seed, length: int) -> np.ndarray:
        return self.emission[self.sample_states(seed, length)]

    def reversed(self) -> "MarkovChain":
        """The time-reversed chain ``Q[i, j] = pi[j] P[j, i] / pi[i]``."""
        Q = (self.P.T * self.pi[None, :]) / self.pi[:, None]
        Q /= Q.sum(axis=1, keepdims=True)
        return MarkovChain(Q, self.emission)

    def transition_row(self, value) -> dict:
        s = self._state_of[float(value)]
        return {float(v): float(p) for v, p in zip(self.emission, self.P[s])}

    def oracle(self, past) -> OracleConditional:
        return OracleConditional(pmf=self.transition_row(np.asarray(past)[-1]))


def stationary_distribution(P) -> np.ndarray:
    """Solve ``pi P = pi`` with ``sum(pi) = 1``."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


class IIDBernoulli(_Process):
    name = "bernoulli"
    oracle_kind = "full"

    def __init__(self, p: float):
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        self.p = float(p)

    def params(self):
        return {"p": self.p}

    def sample(self, seed, length):
        return (make_rng(seed).random(length) < self.p).astype(float)

    def oracle(self, past=None):
        return OracleConditional(pmf={0.0: 1 - self.p, 1.0: self.p})

    def as_markov_chain(self) -> MarkovChain:
        row = [1 - self.p, self.p]
        return MarkovChain([row, row])


class IIDUniform(_Process):
    name = "uniform"
    oracle_kind = "full"

    def sample(self, seed, length):
        return make_rng(seed).random(length)

    def oracle(self, past=None):
        return OracleConditional(cdf_fn=lambda x: min(max(x, 0.0), 1.0), mean=0.5)


class ClippedAR1(_Process):
    """``X_n = clamp(a X_{n-1} + eps_n, -D, D)`` with Gaussian noise."""

    name = "ar1"
    oracle_kind = "markov1"

    def __init__(self, a: float, noise_sd: float = 1.0, D: float = 5.0, burn_in: int = 10_000):
        if not abs(a) < 1:
            raise ValueError("need |a| < 1")
        if not (noise_sd > 0 and D > 0):
            raise ValueError("noise_sd and D must be positive")
        self.a, self.noise_sd, self.D, self.burn_in = float(a), float(noise_sd), float(D), int(burn_in)

    def params(self):
        return {"a": self.a, "sd": self.noise_sd, "D": self.D, "burn_in": self.burn_in}

    def sample(self, seed, length):
        rng = make_rng(seed)
        eps = (rng.standard_normal(self.burn_in + length) * self.noise_sd).tolist()
        a, D = self.a, self.D
        x = 0.0
        out = []
        for i, e in enumerate(eps):
            x = a * x + e
            x = D if x > D else (-D if x < -D else x)
            if i >= self.burn_in:
                out.append(x)
        return np.asarray(out)

    def conditional_cdf(self, x_prev: float, y: float) -> float:
        if y < -self.D:
            return 0.0
        if y >= self.D:
            return 1.0
        return float(norm.cdf((y - self.a * x_prev) / self.noise_sd))

    def conditional_mean(self, x_prev: float) -> float:
        """``E[clamp(mu + sd Z, -D, D)]`` with ``mu = a x_prev``."""
        mu, sd, D = self.a * x_prev, self.noise_sd, self.D
        lo, hi = (-D - mu) / sd, (D - mu) / sd
        inside = norm.cdf(hi) - norm.cdf(lo)
        return float(-D * norm.cdf(lo) + D * norm.sf(hi) + mu * inside + sd * (norm.pdf(lo) - norm.pdf(hi)))

    def oracle(self, past):
        x_prev = float(np.asarray(past)[-1])
        return OracleConditional(
            cdf_fn=lambda y: self.conditional_cdf(x_prev, y), mean=self.conditional_mean(x_prev)
        )


class RotationProcess(_Process):
    """``X_n = 1{frac(U + n alpha) < threshold}`` with ``U`` uniform."""

    name = "rotation"

    def __init__(self, alpha: float = (math.sqrt(5) - 1) / 2, threshold: float = 0.5):
        self.alpha, self.threshold = float(alpha), float(threshold)

    def params(self):
        return {"alpha": self.alpha, "threshold": self.threshold}

    def sample(self, seed, length):
        u = make_rng(seed).random()
        phase = np.mod(u + np.arange(length) * self.alpha, 1.0)
        return (phase < self.threshold).astype(float)


@dataclass(frozen=True)
class LabeledPath:
    """Labeled sample path including the hidden label ``Y_0`` of the last row."""

    features: np.ndarray
    labels: np.ndarray

    def series(self, t: int | None = None) -> LabeledSeries:
        n = self.labels.size - 1
        t = n if t is None else t
        return LabeledSeries(self.features[n - t:], self.labels[n - t:n])

    @property
    def y0(self) -> int:
        return int(self.labels[-1])


class LabeledCellProcess(_Process):
    """i.i.d. uniform features on ``(low, high]`` with cell-dependent labels.

    ``breakpoints`` split ``(low, high]`` into cells; ``probs[i]`` is
    ``P(Y = 1)`` in cell ``i``. Labels are independent of everything else
    given the feature, so the exact a posteriori probability is
    ``probs[cell(X_0)]``.
    """

    name = "labeled"
    oracle_kind = "full"
    labeled = True

    def __init__(self, probs, breakpoints=None, low: float = 0.0, high: float = 1.0):
        probs = [float(p) for p in probs]
        if not all(0 <= p <= 1 for p in probs):
            raise ValueError("label probabilities must lie in [0, 1]")
        if breakpoints is None:
            breakpoints = [low + (high - low) * i / len(probs) for i in range(1, len(probs))]
        breakpoints = [float(b) for b in breakpoints]
        if len(breakpoints) != len(probs) - 1 or sorted(breakpoints) != breakpoints:
            raise ValueError("need sorted breakpoints, one fewer than probabilities")
        if not high > low:
            raise ValueError("need low < high")
        self.probs, self.breakpoints, self.low, self.high = probs, breakpoints, float(low), float(high)

    def params(self):
        return {"probs": self.probs, "breakpoints": self.breakpoints, "low": self.low, "high": self.high}

    def eta(self, x: float) -> float:
        return self.probs[bisect.bisect_left(self.breakpoints, float(x))]

    def sample_labeled(self, seed, length: int) -> LabeledPath:
        """Pairs ``(X_{-length}, Y_{-length}), ..., (X_0, Y_0)``."""
        rng = make_rng(seed)
        x = self.high - (self.high - self.low) * rng.random(length + 1)
        p = np.asarray(self.probs)[np.searchsorted(self.breakpoints, x, side="left")]
        y = (rng.random(length + 1) < p).astype(np.int64)
        return LabeledPath(x[:, None], y)

    def sample(self, seed, length):
        return self.sample_labeled(seed, length).features[1:, 0]

    def oracle(self, past=None):
        raise OracleUnavailable("use eta(x) for the labeled process")

    def bayes_risk(self, x: float) -> float:
        e = self.eta(x)
        return min(e, 1 - e)


def iid_bernoulli(p: float) -> IIDBernoulli:
    return IIDBernoulli(p)


def iid_uniform() -> IIDUniform:
    return IIDUniform()


def markov_chain(P, emission=None) -> MarkovChain:
    return MarkovChain(P, emission)


def clipped_ar1(a: float, noise_sd: float = 1.0, D: float = 5.0, burn_in: int = 10_000) -> ClippedAR1:
    return ClippedAR1(a, noise_sd, D, burn_in)


def rotation_process(alpha: float = (math.sqrt(5) - 1) / 2, threshold: float = 0.5) -> RotationProcess:
    return RotationProcess(alpha, threshold)


def labeled_cell_process(probs, breakpoints=None, low: float = 0.0, high: float = 1.0) -> LabeledCellProcess:
    return LabeledCellProcess(probs, breakpoints, low, high)


_BUILDERS = {
    "bernoulli": (iid_bernoulli, {"p"}),
    "uniform": (iid_uniform, set()),
    "markov": (markov_chain, {"P", "emission"}),
    "ar1": (clipped_ar1, {"a", "noise_sd", "D", "burn_in"}),
    "rotation": (rotation_process, {"alpha", "threshold"}),
    "labeled": (labeled_cell_process, {"probs", "breakpoints", "low", "high"}),
}


def build_process(config: dict) -> _Process:
    """Build a process from ``{"name": ..., <parameters>}``; unknown keys raise."""
    config = dict(config)
    name = config.pop("name", None)
    if name not in _BUILDERS:
        raise ValueError(f"unknown process {name!r}; choose from {sorted(_BUILDERS)}")
    builder, allowed = _BUILDERS[name]
    extra = set(config) - allowed
    if extra:
        raise ValueError(f"unknown parameters for {name}: {sorted(extra)}")
    return builder(**config)


def default_scheme_for(process: _Process) -> PartitionScheme:
    from .quantization import alphabet_scheme

    if isinstance(process, MarkovChain) and np.array_equal(process.emission, np.arange(process.n_states)):
        return alphabet_scheme(process.n_states)
    if isinstance(process, (IIDBernoulli, RotationProcess)):
        return alphabet_scheme(2)
    return dyadic_scheme()
