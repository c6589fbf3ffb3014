"""Exact and statistical checks of the recurrence estimators.

* :func:`brute_force_ladder` re-derives the ladder with a plain double loop and
  exact rational quantization, as an oracle for :func:`build_ladder`.
* :func:`lemma2_check` compares, on a conditioning event ``B`` measurable with
  respect to the quantized stage-``j-1`` pattern, the frequencies of
  ``B & {X_{-tau_j} in C}`` and ``B & {X_0 in C}`` over independent stationary
  paths; stationarity makes the two probabilities equal.
* The ``*_experiment`` drivers run seeded grids of (window length, seed) and
  record errors against the processes' oracles in long CSV form.

Seeds: the stream of task ``i`` in an experiment of kind ``K`` is
``task_rng(master_seed, K, i)``; see :data:`TASK_KIND`.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numpy as np

from . import __version__
from .estimators import InsufficientData, QuerySet, RegressionConfig, estimate_conditional, online_predict
from .pattern_recognition import estimate_eta, excess_risk_bound
from .processes import (
    IIDBernoulli,
    MarkovChain,
    OracleUnavailable,
    build_process,
    default_scheme_for,
    task_rng,
)
from .quantization import PartitionScheme, parse_scheme
from .recurrence import RecurrenceLadder, build_ladder

__all__ = [
    "TASK_KIND",
    "brute_force_ladder",
    "oracle_equivalence",
    "Atom",
    "Lemma2Report",
    "lemma2_check",
    "ExperimentSpec",
    "Record",
    "ConvergenceReport",
    "consistency_experiment",
    "online_experiment",
    "classification_experiment",
    "run_experiment",
    "excess_risk_summary",
]

TASK_KIND = {"consistency": 1, "online": 2, "classification": 3, "lemma2": 4, "equivalence": 5}


# -- brute-force oracle ------------------------------------------------------


def _exact_cell(scheme: PartitionScheme, k: int, x: float):
    if scheme.is_alphabet:
        if x != int(x) or not 0 <= x < scheme.alphabet_size:
            raise ValueError(f"{x} is not an alphabet symbol")
        return int(x)
    if math.isinf(x):
        return math.inf if x > 0 else -math.inf
    # smallest i with x <= -k + i / 2**k, computed on rationals
    i = math.ceil((Fraction(x) + k) * 2**k)
    top = k * 2 ** (k + 1) + 1
    return min(max(i, 0), top)


def brute_force_ladder(past, scheme: PartitionScheme) -> RecurrenceLadder:
    """Ladder from the definition: try every shift, compare every position."""
    x = [float(v) for v in past]
    t = len(x)
    taus, lambdas = [], [1]
    k = 1
    while True:
        lam = lambdas[-1]
        found = None
        for s in range(1, t - lam + 1):
            if all(
                _exact_cell(scheme, k, x[t - lam + i - s]) == _exact_cell(scheme, k, x[t - lam + i])
                for i in range(lam)
            ):
                found = s
                break
        if found is None:
            break
        taus.append(found)
        lambdas.append(lam + found)
        k += 1
    return RecurrenceLadder(tuple(taus), tuple(lambdas))


def _random_strings(rng, n_binary, n_real, min_length, max_length):
    for _ in range(n_binary):
        n = int(rng.integers(min_length, max_length + 1))
        p = rng.uniform(0.1, 0.9)
        yield "random_binary", alphabet_2, (rng.random(n) < p).astype(float)
    symbols = np.array([-1.3, -0.3, 0.2, 0.7, 1.4, 2.5])
    for i in range(n_real):
        n = int(rng.integers(min_length, max_length + 1))
        if i % 2:
            values = rng.normal(0.0, 1.5, n)
        else:
            # few distinct reals give deep ladders across several levels
            values = rng.choice(symbols[: int(rng.integers(2, symbols.size + 1))], n)
        yield "random_real", dyadic, values


alphabet_2 = parse_scheme("alphabet:2")
dyadic = parse_scheme("dyadic")


def oracle_equivalence(n_binary=1000, n_real=200, min_length=8, max_length=512, master_seed=0):
    """Compare ``build_ladder`` with the brute force on random strings.

    Returns a list of ``(family, length, index, kappa, match)`` tuples.
    """
    rng = task_rng(master_seed, TASK_KIND["equivalence"])
    rows = []
    for i, (family, scheme, values) in enumerate(
        _random_strings(rng, n_binary, n_real, min_length, max_length)
    ):
        fast = build_ladder(values, scheme)
        slow = brute_force_ladder(values, scheme)
        rows.append((family, values.size, i, fast.kappa, fast == slow))
    return rows


# -- recurrence unbiasedness Monte-Carlo ----------------------------------------


@dataclass(frozen=True)
class Atom:
    """Conditioning event built from the stage-``j-1`` quantized pattern.

    With ``lam=None`` the event is "the last ``len(pattern)`` cells equal
    ``pattern``" (requires ``lambda_{j-1} >= len(pattern)``, so it is a union of
    atoms). With ``lam`` set it is the single atom
    ``{lambda_{j-1} = lam, G_{j-1}(X_{-lam}^{-1}) = pattern}``.
    """

    pattern: tuple[int, ...]
    lam: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(int(c) for c in self.pattern))
        if not self.pattern:
            raise ValueError("atom pattern must be nonempty")
        if self.lam is not None and self.lam != len(self.pattern):
            raise ValueError("an exact atom needs a pattern of length lam")

    def holds(self, cells: np.ndarray, lam_prev: int) -> bool:
        m = len(self.pattern)
        if self.lam is not None and lam_prev != self.lam:
            return False
        if lam_prev < m:
            return False
        return tuple(int(c) for c in cells[-m:]) == self.pattern


@dataclass(frozen=True)
class Lemma2Report:
    n_paths: int
    n_atom: int
    n_unresolved: int
    freq_tau: float
    freq_zero: float
    pooled_se: float
    paired_se: float
    se_multiple: float
    verdict: str

    @property
    def diff(self) -> float:
        return self.freq_tau - self.freq_zero


def _backward_chain(process) -> MarkovChain:
    if isinstance(process, IIDBernoulli):
        process = process.as_markov_chain()
    if not isinstance(process, MarkovChain):
        raise ValueError("lemma2_check needs a Markov chain or i.i.d. Bernoulli process")
    return process.reversed()


def _backward_block(chain: MarkovChain, rng, n: int, length: int, first_states=None) -> np.ndarray:
    """``(n, length)`` states; row ``i`` continues from ``first_states[i]``,
    or starts from the stationary law when ``first_states`` is None."""
    cum = np.cumsum(chain.P, axis=1)
    top = chain.n_states - 1
    out = np.empty((n, length), dtype=np.int64)
    u = rng.random((n, length))
    if first_states is None:
        state = np.minimum(np.searchsorted(np.cumsum(chain.pi), u[:, 0], side="right"), top)
        out[:, 0] = state
        begin = 1
    else:
        state = np.asarray(first_states)
        begin = 0
    for i in range(begin, length):
        state = np.minimum((u[:, i, None] >= cum[state]).sum(axis=1), top)
        out[:, i] = state
    return out


def lemma2_check(
    process,
    j: int,
    atom: Atom,
    query: QuerySet,
    n_paths: int,
    seed=0,
    scheme: PartitionScheme | None = None,
    se_multiple: float = 3.0,
    block: int = 64,
    max_depth: int = 2**20,
) -> Lemma2Report:
    """Monte-Carlo comparison of ``P(B, X_{-tau_j} in C)`` and ``P(B, X_0 in C)``.

    Paths are generated backwards from time 0 with the reversed chain and
    extended (doubling) until stage ``j`` completes. Paths still unresolved at
    ``max_depth`` count as misses on both sides; each can move the difference
    by at most ``1 / n_paths``, so that much is added to the tolerance
    ``se_multiple * pooled_se``. ``seed`` is a master seed or a ``Generator``.
    """
    if j < 2:
        raise ValueError("j must be at least 2 (stage j-1 needs a quantizer level)")
    scheme = default_scheme_for(process) if scheme is None else scheme
    if n_paths <= 0:
        return Lemma2Report(0, 0, 0, math.nan, math.nan, math.nan, math.nan, se_multiple, "INCONCLUSIVE")
    rng = seed if isinstance(seed, np.random.Generator) else task_rng(seed, TASK_KIND["lemma2"])
    chain = _backward_chain(process)
    # row i holds the states at times 0, -1, -2, ...
    states = list(_backward_block(chain, rng, n_paths, block))
    hits_tau = np.zeros(n_paths, dtype=bool)
    hits_zero = np.zeros(n_paths, dtype=bool)
    in_atom = np.zeros(n_paths, dtype=bool)
    n_unresolved = 0
    pending = list(range(n_paths))
    while pending:
        unresolved = []
        for i in pending:
            path = chain.emission[states[i]]
            past = path[:0:-1]  # X_{-L}, ..., X_{-1}
            ladder = build_ladder(past, scheme, max_levels=j)
            if ladder.kappa < j:
                unresolved.append(i)
                continue
            lam_prev = ladder.lambdas[j - 1]
            cells = scheme.quantize_array(j - 1, past[-lam_prev:])
            if atom.holds(cells, lam_prev):
                in_atom[i] = True
                hits_tau[i] = bool(query.contains(past[past.size - ladder.taus[j - 1]]))
                hits_zero[i] = bool(query.contains(path[0]))
        if unresolved:
            grown = []
            for i in unresolved:
                depth = states[i].size
                if depth >= max_depth:
                    continue
                extra = min(depth, max_depth - depth)
                more = chain.sample_states(rng, extra + 1, start=int(states[i][-1]))[1:]
                states[i] = np.concatenate([states[i], more])
                grown.append(i)
            stuck = len(unresolved) - len(grown)
            n_unresolved += stuck
            unresolved = grown
        pending = unresolved
    a = hits_tau.astype(float)
    b = hits_zero.astype(float)
    fa, fb = a.mean(), b.mean()
    pooled = (fa + fb) / 2
    pooled_se = math.sqrt(2 * pooled * (1 - pooled) / n_paths)
    paired_se = float(np.std(a - b, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
    n_atom = int(in_atom.sum())
    if n_atom == 0:
        verdict = "INCONCLUSIVE"
    else:
        slack = n_unresolved / n_paths
        verdict = "PASS" if abs(fa - fb) <= se_multiple * pooled_se + slack else "FAIL"
    return Lemma2Report(n_paths, n_atom, n_unresolved, float(fa), float(fb), pooled_se, paired_se, se_multiple, verdict)


# -- experiments --------------------------------------------------------------


@dataclass
class ExperimentSpec:
    kind: str
    process: dict
    sizes: list
    seeds: int = 1
    master_seed: int = 0
    scheme: str | None = None
    queries: list = field(default_factory=list)
    cdf_grid: str | None = None
    clip_D: float | None = None
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.kind not in ("consistency", "online", "classification"):
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        self.sizes = [int(t) for t in self.sizes]
        if not self.sizes or any(t < 1 for t in self.sizes) or self.sizes != sorted(set(self.sizes)):
            raise ValueError("sizes must be positive and strictly increasing")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        if self.clip_D is not None and not self.clip_D > 0:
            raise ValueError("clip_D must be positive")
        # fail early on malformed pieces
        build_process(self.process)
        if self.scheme is not None:
            parse_scheme(self.scheme)
        for q in self.queries:
            QuerySet.parse(q)
        if self.cdf_grid is not None:
            parse_grid(self.cdf_grid)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


def parse_grid(text: str) -> np.ndarray:
    """``"lo:hi:step"`` to the points ``lo, lo + step, ...`` up to ``hi`` inclusive."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like lo:hi:step, got {text!r}") from None
    if not step > 0 or hi < lo:
        raise ValueError("grid needs step > 0 and hi >= lo")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


@dataclass(frozen=True)
class Record:
    process: str
    t: int | None
    seed: int | None
    k: int | None
    metric: str
    value: float | None


def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class ConvergenceReport:
    records: list
    sizes: list
    header: dict = field(default_factory=dict)

    def values(self, metric: str, t: int) -> np.ndarray:
        return np.array(
            [r.value for r in self.records if r.metric == metric and r.t == t and r.value is not None],
            dtype=float,
        )

    def aggregate(self, metric: str) -> dict:
        """Per-``t`` mean, median, 10% and 90% quantiles and count of non-NA values."""
        out = {}
        for t in self.sizes:
            v = self.values(metric, t)
            if v.size == 0:
                out[t] = {"n": 0, "mean": math.nan, "median": math.nan, "q10": math.nan, "q90": math.nan}
                continue
            out[t] = {
                "n": int(v.size),
                "mean": float(v.mean()),
                "median": float(np.median(v)),
                "q10": float(np.quantile(v, 0.1)),
                "q90": float(np.quantile(v, 0.9)),
            }
        return out

    def curve(self, metric: str, stat: str = "median") -> list:
        agg = self.aggregate(metric)
        return [agg[t][stat] for t in self.sizes]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.header.items():
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["process", "t", "seed", "k", "metric_name", "value"])
        for r in self.records:
            writer.writerow([r.process, _fmt(r.t), _fmt(r.seed), _fmt(r.k), r.metric, _fmt(r.value)])
        return buf.getvalue()


def _tv(samples: np.ndarray, pmf: dict) -> float:
    values, counts = np.unique(samples, return_counts=True)
    est = dict(zip(values.tolist(), (counts / samples.size).tolist()))
    support = set(est) | set(pmf)
    return 0.5 * math.fsum(abs(est.get(v, 0.0) - pmf.get(v, 0.0)) for v in support)


def _consistency_task(spec: ExperimentSpec, seed_index: int) -> list:
    process = build_process(spec.process)
    scheme = parse_scheme(spec.scheme) if spec.scheme else default_scheme_for(process)
    queries = [(q, QuerySet.parse(q)) for q in spec.queries]
    grid = parse_grid(spec.cdf_grid) if spec.cdf_grid else None
    cfg = RegressionConfig(spec.clip_D, clip=True) if spec.clip_D else None
    rng = task_rng(spec.master_seed, TASK_KIND["consistency"], seed_index)
    # one path per seed; shorter windows are its most recent stretches
    path = process.sample(rng, spec.sizes[-1])
    rows = []
    for t in spec.sizes:
        window = path[-t:]
        try:
            oracle = process.oracle(window)
        except OracleUnavailable:
            oracle = None
        try:
            ec = estimate_conditional(window, scheme)
        except InsufficientData:
            ec = None
        k = ec.k if ec is not None else 0

        def put(metric, value):
            rows.append(Record(process.name, t, seed_index, k, metric, value))

        mean = ec.mean(cfg) if ec is not None else None
        put("mean", mean)
        for text, q in queries:
            put(f"prob:{text}", ec.prob(q) if ec is not None else None)
            if oracle is not None and oracle.pmf is not None:
                put(f"oracle_prob:{text}", oracle.prob_of(v for v in oracle.pmf if q.contains(v)))
        if oracle is None:
            put("oracle_distance", None)
            continue
        if oracle.pmf is not None:
            put("tv", _tv(ec.samples, oracle.pmf) if ec is not None else None)
        if grid is not None:
            dist = None
            if ec is not None:
                dist = max(abs(ec.cdf(x) - oracle.cdf(x)) for x in grid)
            put("kolmogorov", dist)
        put("oracle_mean", oracle.mean)
        put("abs_mean_error", abs(mean - oracle.mean) if mean is not None else None)
    return rows


def _online_task(spec: ExperimentSpec, seed_index: int) -> list:
    process = build_process(spec.process)
    scheme = parse_scheme(spec.scheme) if spec.scheme else default_scheme_for(process)
    cfg = RegressionConfig(spec.clip_D, clip=True) if spec.clip_D else None
    rng = task_rng(spec.master_seed, TASK_KIND["online"], seed_index)
    path = process.sample(rng, spec.sizes[-1])
    rows = []
    for t in spec.sizes:
        prefix = path[:t]
        try:
            pred = online_predict(prefix, scheme, cfg)
            k = build_ladder(prefix, scheme).kappa
        except InsufficientData:
            pred, k = None, 0
        try:
            target = process.oracle(prefix).mean
        except OracleUnavailable:
            target = None
        err = abs(pred - target) if pred is not None and target is not None else None
        for metric, value in (("prediction", pred), ("oracle_mean", target), ("abs_error", err)):
            rows.append(Record(process.name, t, seed_index, k, metric, value))
    return rows


def _classification_task(spec: ExperimentSpec, seed_index: int) -> list:
    process = build_process(spec.process)
    if not process.labeled:
        raise ValueError("classification experiments need a labeled process")
    scheme = parse_scheme(spec.scheme) if spec.scheme else default_scheme_for(process)
    rng = task_rng(spec.master_seed, TASK_KIND["classification"], seed_index)
    lp = process.sample_labeled(rng, spec.sizes[-1])
    x0 = float(lp.features[-1, 0])
    eta = process.eta(x0)
    bayes = int(eta >= 0.5)
    rows = []
    for t in spec.sizes:
        try:
            est = estimate_eta(lp.series(t), scheme)
        except InsufficientData:
            est = None
        k = est.k if est is not None else 0
        vals = [("eta_true", eta), ("bayes_decision", bayes), ("y0", lp.y0), ("bayes_error", int(bayes != lp.y0))]
        if est is None:
            vals += [(m, None) for m in ("eta", "abs_eta_error", "decision", "error", "excess_bound", "cond_excess")]
        else:
            vals += [
                ("eta", est.eta),
                ("abs_eta_error", abs(est.eta - eta)),
                ("decision", est.decision),
                ("error", int(est.decision != lp.y0)),
                ("excess_bound", excess_risk_bound(est.eta, eta)),
                # P(g != Y0 | data) - P(g* != Y0 | data)
                ("cond_excess", abs(2 * eta - 1) * (est.decision != bayes)),
            ]
        for metric, value in vals:
            value = float(value) if value is not None else None
            rows.append(Record(process.name, t, seed_index, k, metric, value))
    return rows


_TASKS = {
    "consistency": _consistency_task,
    "online": _online_task,
    "classification": _classification_task,
}


def run_experiment(spec: ExperimentSpec) -> ConvergenceReport:
    task = _TASKS[spec.kind]
    seeds = range(spec.seeds)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunks = list(pool.map(task, [spec] * spec.seeds, seeds))
    else:
        chunks = [task(spec, i) for i in seeds]
    records = [r for chunk in chunks for r in chunk]
    config = spec.to_dict()
    config.pop("workers")
    config.pop("output")
    header = {"version": __version__, "config": config, "master_seed": spec.master_seed}
    return ConvergenceReport(records, list(spec.sizes), header)


def consistency_experiment(spec: ExperimentSpec) -> ConvergenceReport:
    if spec.kind != "consistency":
        raise ValueError("spec.kind must be 'consistency'")
    return run_experiment(spec)


def online_experiment(spec: ExperimentSpec) -> ConvergenceReport:
    if spec.kind != "online":
        raise ValueError("spec.kind must be 'online'")
    return run_experiment(spec)


def classification_experiment(spec: ExperimentSpec) -> ConvergenceReport:
    if spec.kind != "classification":
        raise ValueError("spec.kind must be 'classification'")
    return run_experiment(spec)


def excess_risk_summary(report: ConvergenceReport) -> dict:
    """Per ``t``: empirical excess misclassification over seeds, its standard
    error, and the mean recorded bound ``2|eta_k - eta|``."""
    out = {}
    for t in report.sizes:
        by_seed = {}
        for r in report.records:
            if r.t == t and r.metric in ("error", "bayes_error", "excess_bound"):
                by_seed.setdefault(r.seed, {})[r.metric] = r.value
        rows = [d for d in by_seed.values() if d.get("error") is not None]
        if not rows:
            out[t] = {"n": 0, "excess": math.nan, "se": math.nan, "bound": math.nan}
            continue
        diff = np.array([d["error"] - d["bayes_error"] for d in rows])
        bound = np.array([d["excess_bound"] for d in rows])
        se = float(diff.std(ddof=1) / math.sqrt(diff.size)) if diff.size > 1 else 0.0
        out[t] = {"n": int(diff.size), "excess": float(diff.mean()), "se": se, "bound": float(bound.mean())}
    return out
