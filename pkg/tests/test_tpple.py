import math

import numpy as np
import pytest
import torch
from scipy import integrate

from ctgraph.tpple import (
    IntensityPath,
    event_log_intensity,
    integral,
    integral_mc,
    integral_trapezoid,
    interevent_density,
    tpp_log_likelihood,
)

D = torch.float64


def const(c, K=1):
    return lambda t: torch.full((*t.shape, K), c / K, dtype=D)


def affine(t):
    return (3.0 + 2.0 * t)[..., None]


def smooth(coef):
    a, b, c, d = coef
    return lambda t: (a + b * torch.sin(c * t + d) ** 2)[..., None]


@pytest.mark.parametrize("integrator", ["trapezoid", "mc"])
def test_constant_closed_form(integrator):
    c, K = 1.7, 3
    p = IntensityPath.from_function(const(c, K), [1.0, 2.0], [0, 0], t0=0.0)
    R = tpp_log_likelihood(p, integrator, L=7, seed=4).item()
    assert R == pytest.approx(2 * math.log(c / K) - 2 * c, abs=1e-12)


def test_single_event_at_origin():
    p = IntensityPath.from_function(smooth((1.0, 0.5, 2.0, 0.1)), [0.0], [0], t0=0.0)
    assert tpp_log_likelihood(p).item() == pytest.approx(math.log(1.0 + 0.5 * math.sin(0.1) ** 2), abs=1e-15)


def test_likelihood_against_quadrature(rng):
    for _ in range(5):
        coef = (rng.uniform(0.5, 2), rng.uniform(0, 1), rng.uniform(0.3, 1.0), rng.uniform(0, 3))
        ev = np.sort(rng.uniform(0, 5, size=6))
        fn = smooth(coef)
        p = IntensityPath.from_function(fn, ev, np.zeros(6, np.int64), t0=0.0)
        lam = lambda s: coef[0] + coef[1] * math.sin(coef[2] * s + coef[3]) ** 2  # noqa: E731
        oracle = sum(math.log(lam(t)) for t in ev) - integrate.quad(lam, 0.0, ev[-1], limit=200)[0]
        R = (event_log_intensity(p) - integral_trapezoid(p, refine=10)).item()
        assert abs(R - oracle) <= 1e-3 * abs(oracle)


def test_mc_constant_exact_any_seed():
    p = IntensityPath.from_function(const(2.5), [0.5, 1.5, 4.0], [0, 0, 0], t0=0.0)
    for seed in range(5):
        for L in (1, 3, 10):
            assert integral_mc(p, L, seed).item() == pytest.approx(10.0, abs=1e-12)


def test_mc_unbiased_linear():
    p = IntensityPath.from_function(lambda t: t[..., None], [2.0], [0], t0=0.0)
    vals = np.array([integral_mc(p, 1, seed).item() for seed in range(10_000)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 2.0) <= 3 * se


def test_mc_reproducible():
    p = IntensityPath.from_function(lambda t: (1 + t**2)[..., None], [0.5, 2.0], [0, 0], t0=0.0)
    assert integral_mc(p, 1, 11).item() == integral_mc(p, 1, 11).item()


def test_mc_rejects_zero_samples():
    p = IntensityPath.from_function(const(1.0), [1.0], [0], t0=0.0)
    with pytest.raises(ValueError):
        integral_mc(p, 0)


def test_trapezoid_exact_on_affine():
    p = IntensityPath.from_function(affine, [1.0, 2.0], [0, 0], t0=0.0)
    assert integral_trapezoid(p).item() == 10.0


def test_duplicate_timestamps_contribute_nothing():
    a = IntensityPath.from_function(affine, [1.0, 1.0, 2.0], [0, 0, 0], t0=0.0)
    b = IntensityPath.from_function(affine, [1.0, 2.0], [0, 0], t0=0.0)
    assert integral_trapezoid(a).item() == integral_trapezoid(b).item()


def test_trapezoid_overestimates_convex():
    p = IntensityPath.from_function(lambda t: (t**2)[..., None], [2.0], [0], t0=0.0)
    assert integral_trapezoid(p).item() == 4.0 > 8 / 3


def test_unknown_integrator():
    p = IntensityPath.from_function(const(1.0), [1.0], [0], t0=0.0)
    with pytest.raises(ValueError):
        integral(p, "simpson")


def test_invalid_events_masked():
    fn = const(1.0)
    p = IntensityPath(lambda t, i: fn(t), torch.tensor([0.0, 1.0, 1.0], dtype=D), torch.tensor([0, 0]), torch.tensor([True, False]))
    assert tpp_log_likelihood(p).item() == pytest.approx(-1.0, abs=1e-15)


def test_nonfinite_intensity_names_time():
    p = IntensityPath.from_function(lambda t: torch.where(t > 1.5, math.inf, 1.0)[..., None].to(D), [1.0, 2.0], [0, 0], t0=0.0)
    with pytest.raises(FloatingPointError, match="t=2.0"):
        tpp_log_likelihood(p)


@pytest.mark.parametrize("integrator", ["trapezoid", "mc"])
def test_density_exponential(integrator):
    c = 0.8
    p = IntensityPath.from_function(const(c), [1.0], [0], t0=0.0)
    f = interevent_density(p, 0, torch.tensor([1.0, 2.5, 4.0], dtype=D), integrator).numpy()
    np.testing.assert_allclose(f, c * np.exp(-c * np.array([0.0, 1.5, 3.0])), rtol=1e-12)


def test_density_at_last_event_equals_intensity():
    fn = smooth((1.0, 0.7, 1.3, 0.2))
    p = IntensityPath.from_function(fn, [0.4, 1.1], [0, 0], t0=0.0)
    assert interevent_density(p, 0, 1.1).item() == pytest.approx(fn(torch.tensor(1.1, dtype=D)).item(), rel=1e-14)


def test_density_integrates_to_at_most_one():
    fn = smooth((0.6, 0.5, 1.0, 0.3))
    p = IntensityPath.from_function(fn, [0.5], [0], t0=0.0)
    mass = integrate.quad(lambda t: interevent_density(p, 0, t, n_sub=256).item(), 0.5, 60.0, limit=200)[0]
    assert 0.99 < mass <= 1.0 + 1e-5


def test_density_before_last_event():
    p = IntensityPath.from_function(const(1.0), [1.0], [0], t0=0.0)
    with pytest.raises(ValueError):
        interevent_density(p, 0, 0.5)
