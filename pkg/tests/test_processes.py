import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from ergodic_inference.processes import (
    OracleUnavailable,
    build_process,
    clipped_ar1,
    iid_bernoulli,
    iid_uniform,
    labeled_cell_process,
    markov_chain,
    rotation_process,
    task_rng,
)

P = [[0.9, 0.1], [0.2, 0.8]]


def test_bernoulli_oracle_ignores_past():
    proc = iid_bernoulli(0.3)
    for past in ([0, 0], [1, 1, 1]):
        assert proc.oracle(past).pmf == {0.0: 0.7, 1.0: 0.3}
    with pytest.raises(ValueError):
        iid_bernoulli(1.0)


def test_uniform_oracle():
    assert iid_uniform().oracle().cdf(0.5) == 0.5
    assert iid_uniform().oracle().mean == 0.5


@pytest.mark.parametrize(
    "proc",
    [iid_bernoulli(0.3), iid_uniform(), markov_chain(P), clipped_ar1(0.5, 1.0, 5.0, burn_in=50), rotation_process()],
    ids=lambda p: p.name,
)
def test_seed_determinism(proc):
    assert np.array_equal(proc.sample(7, 200), proc.sample(7, 200))
    assert not np.array_equal(proc.sample(7, 200), proc.sample(8, 200))


def test_stationary_vector():
    # pi P = pi by hand: pi_0 * 0.1 = pi_1 * 0.2
    pi = markov_chain(P).pi
    assert [Fraction(v).limit_denominator(100) for v in pi] == [Fraction(2, 3), Fraction(1, 3)]
    w, v = np.linalg.eig(np.asarray(P).T)
    ref = np.real(v[:, np.argmax(np.real(w))])
    assert np.allclose(pi, ref / ref.sum())


def test_markov_oracle_row():
    proc = markov_chain(P)
    assert proc.oracle([0, 1]).pmf == {0.0: 0.2, 1.0: 0.8}
    assert proc.oracle([1, 0]).mean == pytest.approx(0.1)


def test_markov_values_and_marginal():
    proc = markov_chain(P)
    x = proc.sample(3, 200_000)
    assert set(np.unique(x).tolist()) <= {0.0, 1.0}
    # 3 standard errors; the chain's autocorrelation inflates the variance
    rho = 0.7
    se = math.sqrt((1 / 3) * (2 / 3) / x.size * (1 + rho) / (1 - rho))
    assert abs(x.mean() - 1 / 3) < 3 * se


def test_markov_rejects_bad_matrices():
    with pytest.raises(ValueError):
        markov_chain([[0, 1], [1, 0]])  # periodic
    with pytest.raises(ValueError):
        markov_chain([[1, 0], [0, 1]])  # reducible
    with pytest.raises(ValueError):
        markov_chain([[0.5, 0.6], [0.2, 0.8]])


def test_reversed_chain_is_stationary():
    proc = markov_chain([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.4, 0.1, 0.5]])
    rev = proc.reversed()
    assert np.allclose(rev.pi, proc.pi)
    # detailed flow balance: pi_i Q_ij = pi_j P_ji
    assert np.allclose(proc.pi[:, None] * rev.P, (proc.pi[:, None] * proc.P).T)


def test_ar1_zero_coefficient_mean():
    proc = clipped_ar1(0.0, 1.0, 1e6)
    assert proc.oracle([3.0]).mean == pytest.approx(0.0, abs=1e-12)


def test_ar1_cdf_clamps():
    proc = clipped_ar1(0.5, 1.0, 2.0)
    orc = proc.oracle([1.0])
    assert orc.cdf(2.0) == 1.0 and orc.cdf(5.0) == 1.0
    assert orc.cdf(-2.0001) == 0.0
    assert orc.cdf(-2.0) == pytest.approx(norm.cdf(-2.5))
    with pytest.raises(ValueError):
        clipped_ar1(1.0)


@pytest.mark.parametrize("D, frozen", [(10.0, 0.5000000000000001), (1.0, 0.33151023636129867)])
def test_ar1_conditional_mean_against_quadrature(D, frozen):
    def integrand(y):
        return np.clip(y, -D, D) * norm.pdf(y - 0.5)

    value = quad(integrand, -40, 40, points=[-D, D], limit=200, epsabs=1e-14)[0]
    assert value == pytest.approx(frozen, abs=1e-12)
    assert clipped_ar1(0.5, 1.0, D).conditional_mean(1.0) == pytest.approx(frozen, abs=1e-12)


def test_ar1_bounded():
    x = clipped_ar1(0.9, 3.0, 2.0, burn_in=10).sample(1, 5000)
    assert np.abs(x).max() <= 2.0


def test_rotation_process():
    proc = rotation_process(threshold=0.5)
    x = proc.sample(5, 100_000)
    assert abs(x.mean() - 0.5) < 1e-3
    with pytest.raises(OracleUnavailable):
        proc.oracle(x)


def test_labeled_process():
    ones = labeled_cell_process([1.0])
    path = ones.sample_labeled(1, 50)
    assert path.labels.tolist() == [1] * 51
    assert ones.eta(0.3) == 1.0
    half = labeled_cell_process([0.5, 0.5])
    assert half.eta(0.9) == 0.5 and half.bayes_risk(0.9) == 0.5
    two = labeled_cell_process([0.1, 0.9])
    assert (two.eta(0.25), two.eta(0.5), two.eta(0.75)) == (0.1, 0.1, 0.9)
    series = two.sample_labeled(2, 30).series(10)
    assert series.t == 10 and series.features.shape == (11, 1)


def test_labeled_frequencies():
    proc = labeled_cell_process([0.1, 0.9])
    path = proc.sample_labeled(4, 100_000)
    x, y = path.features[:, 0], path.labels
    for mask, p in ((x <= 0.5, 0.1), (x > 0.5, 0.9)):
        se = math.sqrt(p * (1 - p) / mask.sum())
        assert abs(y[mask].mean() - p) < 4 * se


def test_build_process():
    assert build_process({"name": "markov", "P": P}).pi[0] == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        build_process({"name": "markov", "P": P, "colour": 1})
    with pytest.raises(ValueError):
        build_process({"name": "nope"})


def test_task_rng_streams():
    a = task_rng(1, 2, 3).random(4)
    assert np.array_equal(a, task_rng(1, 2, 3).random(4))
    assert not np.array_equal(a, task_rng(1, 2, 4).random(4))
