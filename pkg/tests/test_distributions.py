import math

import numpy as np
import pytest
from scipy import stats

from oracle import scipy_dist
from raftres import distributions as D
from raftres.distributions import Family, ParamError
from raftres.rng import RngStream


def test_validate_accepts_listed_examples():
    assert D.validate(D.exponential(0.04)) == D.exponential(0.04)
    assert D.validate(D.erlang(3, 9)).family is Family.ERLANG


@pytest.mark.parametrize(
    "pdf, field",
    [
        (D.uniform(5, 5), "b"),
        (D.uniform(-1, 2), "a"),
        (D.exponential(0), "rate"),
        (D.erlang(2.5, 1), "k"),
        (D.erlang(0, 1), "k"),
        (D.rayleigh(-1), "sigma"),
        (D.weibull(0, 1), "k"),
        (D.weibull(1, -2), "rate"),
        (D.normal(1, 0), "sigma"),
        (D.lognormal(math.inf, 1), "mu"),
        (D.dirac(0), "x"),
        (D.Pdf(Family.EXPONENTIAL, (1, 2)), "params"),
    ],
)
def test_validate_rejects_bad_parameters(pdf, field):
    with pytest.raises(ParamError) as exc:
        D.validate(pdf)
    assert exc.value.field == field


def test_dirac_returns_its_point():
    r = RngStream.from_seed(1)
    assert all(D.sample(D.dirac(4.2), r) == 4.2 for _ in range(10))


def test_never_fires_is_infinite():
    assert D.sample(D.NEVER, RngStream.from_seed(0)) == math.inf


def test_exponential_mean_within_one_percent():
    x = D.sample_many(D.exponential(2.5), RngStream.from_seed(7), 1_000_000)
    assert abs(x.mean() - 0.4) < 0.004


KS_CASES = [
    D.exponential(0.07),
    D.erlang(3, 9),
    D.uniform(0.4, 0.95),
    D.rayleigh(1.999),
    D.weibull(4.5, 0.0125),
    D.normal(2.0, 0.7),
    D.normal(150.0, 50.0),
    D.lognormal(4.37, 0.33),
]


@pytest.mark.parametrize("pdf", KS_CASES, ids=str)
def test_kolmogorov_smirnov(pdf):
    x = D.sample_many(pdf, RngStream.from_seed(11), 100_000)
    assert np.all(x > 0)
    p = stats.kstest(x, scipy_dist(pdf).cdf).pvalue
    assert p > 0.001


def test_weibull_is_rate_parameterised():
    # CDF(t) = 1 - exp(-(rate*t)^k); median = ln(2)^(1/k) / rate
    x = D.sample_many(D.weibull(4.5, 0.0125), RngStream.from_seed(3), 200_000)
    med = math.log(2) ** (1 / 4.5) / 0.0125
    assert abs(np.median(x) - med) / med < 0.01


@pytest.mark.parametrize("pdf", KS_CASES, ids=str)
def test_mean_matches_closed_form(pdf):
    assert pdf.mean() == pytest.approx(scipy_dist(pdf).mean(), rel=1e-9)


def test_same_seed_same_sequence():
    a = D.sample_many(D.lognormal(1.0, 0.5), RngStream.from_seed(5), 1000)
    b = D.sample_many(D.lognormal(1.0, 0.5), RngStream.from_seed(5), 1000)
    c = D.sample_many(D.lognormal(1.0, 0.5), RngStream.from_seed(6), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_spawned_streams_are_reproducible_and_distinct():
    root = RngStream.from_seed(9)
    s1, s2, s1b = root.spawn(1), root.spawn(2), root.spawn(1)
    u1 = [s1.uniform() for _ in range(5)]
    assert u1 == [s1b.uniform() for _ in range(5)]
    assert u1 != [s2.uniform() for _ in range(5)]


def test_uniforms_are_in_open_unit_interval():
    r = RngStream.from_seed(0)
    u = np.array([r.uniform() for _ in range(20_000)])
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01


def test_str_uses_galileo_syntax():
    assert str(D.rayleigh(0.06)) == "rayleigh(0.06)"
    assert str(D.erlang(3, 9)) == "erlang(3.0,9.0)"
