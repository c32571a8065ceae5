import math

import numpy as np
import pytest

from nlbranch.exceptions import ParameterError
from nlbranch.model import make_power_law
from nlbranch.sampler import make_rng
from nlbranch.simulator import Path, SimConfig, Status, simulate_path
from nlbranch.timechange import WeightFunction, lamperti_transform, realized_variance_rate, weighted_population

FELLER = make_power_law(0, 0, 1, 1, 0, 0, 1.5)


def _feller_path(i, t_max=40.0):
    return simulate_path(FELLER, 1.0, SimConfig(dt=1e-3, t_max=t_max), make_rng(31, i))


def test_unit_weight_gives_absorption_time():
    p = _feller_path(0)
    assert p.absorbed
    assert weighted_population(p, WeightFunction.constant(1.0)).value == pytest.approx(p.t_end, rel=1e-12)


def test_constant_path_square_weight():
    n, c = 11, 1.7
    steps = np.arange(n)
    p = Path(steps * 0.5, np.full(n, c), steps, Status.CENSORED, 5.0, c, 0.5)
    s = weighted_population(p, WeightFunction.power(2.0))
    assert s.value == pytest.approx(c * c * 5.0, rel=1e-14) and s.censored


def test_identity_and_doubling_transforms():
    p = _feller_path(1)
    same = lamperti_transform(p, WeightFunction.constant(1.0))
    assert np.allclose(same.times, p.times, rtol=1e-12, atol=1e-12)
    doubled = lamperti_transform(p, WeightFunction.constant(2.0))
    assert np.allclose(doubled.times, 2 * p.times, rtol=1e-12, atol=1e-12)
    assert np.array_equal(doubled.states, p.states) and doubled.status is p.status


def test_weighted_population_equals_transformed_absorption_time():
    w = WeightFunction.power(0.5)
    for i in range(20):
        p = _feller_path(i)
        tol = 2 * p.dt * float(w(p.states).max())
        assert abs(weighted_population(p, w).value - lamperti_transform(p, w).t_end) <= tol


def test_transformed_feller_has_unit_variance_rate():
    # under gamma(x) = x the new clock turns d<X> = X dt into unit rate
    rates = []
    for i in range(40):
        p = simulate_path(FELLER, 5.0, SimConfig(dt=1e-4, t_max=1.0), make_rng(41, i))
        rates.append(realized_variance_rate(lamperti_transform(p, WeightFunction.power(1.0))))
    assert abs(np.mean(rates) - 1.0) < 0.05


def test_weight_must_be_positive():
    p = _feller_path(2)
    with pytest.raises(ParameterError):
        weighted_population(p, lambda x: -np.ones_like(x))


def test_weight_may_vanish_at_absorbed_zero():
    w = WeightFunction.power(0.5)
    assert w(np.array([0.0, 1.0]))[0] == 0.0
