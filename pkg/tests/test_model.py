import math

import numpy as np
import pytest

from nlbranch.exceptions import ConfigError, ParameterError
from nlbranch.model import (
    BranchingModel,
    GeneralRates,
    PowerLawRates,
    StableJumpMeasure,
    TabulatedJumpMeasure,
    eval_rates,
    make_power_law,
    model_from_dict,
    model_to_dict,
)


def test_feller_rates_are_identity_on_gamma1():
    m = make_power_law(0, 0, 1, 1, 0, 0, 1.5)
    for x in (0.1, 1.0, 7.5):
        assert eval_rates(m, x) == (0.0, x, 0.0)


def test_stable_csbp_rates():
    m = make_power_law(0, 0, 0, 0, 1, 1, 1.5)
    assert eval_rates(m, 3.0) == (0.0, 0.0, 3.0)
    assert m.is_power_law and m.is_stable and m.alpha == 1.5


def test_noise_free_model_rejected():
    with pytest.raises(ParameterError):
        make_power_law(1, 1, 0, 0, 0, 0, 1.5)


@pytest.mark.parametrize("bad", [
    dict(b1=-1.0), dict(r0=-0.5), dict(b2=-1.0), dict(r2=math.nan), dict(b0=math.inf),
])
def test_invalid_rate_parameters_rejected(bad):
    params = dict(b0=0.0, r0=0.0, b1=1.0, r1=1.0, b2=1.0, r2=1.0) | bad
    with pytest.raises(ParameterError):
        PowerLawRates(**params)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5, math.nan])
def test_alpha_outside_open_interval_rejected(alpha):
    with pytest.raises(ParameterError):
        StableJumpMeasure(alpha)


def test_eval_rates_examples():
    assert eval_rates(make_power_law(1, 2, 1, 1, 0, 0, 1.5), 2.0) == (4.0, 2.0, 0.0)
    assert eval_rates(make_power_law(-1, 1, 0.5, 2, 1, 1.5, 1.5), 4.0) == (-4.0, 8.0, 8.0)
    assert eval_rates(make_power_law(1, 0.5, 2, 1, 3, 1.2, 1.5), 0.0) == (0.0, 0.0, 0.0)


def test_zero_exponent_uses_continuous_extension_at_zero():
    assert eval_rates(make_power_law(2, 0, 1, 1, 0, 0, 1.5), 0.0) == (2.0, 0.0, 0.0)


def test_general_rates_reject_negative_diffusion():
    m = BranchingModel(GeneralRates(lambda x: 0.0, lambda x: -x, lambda x: 0.0), StableJumpMeasure(1.5))
    with pytest.raises(ParameterError):
        eval_rates(m, 1.0)


def test_stable_measure_moments_match_closed_forms():
    mu = StableJumpMeasure(1.5)
    c = 1.5 * 0.5 / math.gamma(0.5)
    assert mu.constant == pytest.approx(c, rel=1e-15)
    assert mu.tail_mass(0.1) == pytest.approx(c / 1.5 * 0.1 ** -1.5, rel=1e-14)
    assert mu.first_moment_above(0.1) == pytest.approx(c / 0.5 * 0.1 ** -0.5, rel=1e-14)
    assert mu.second_moment_below(0.1) == pytest.approx(c / 0.5 * 0.1 ** 0.5, rel=1e-14)
    assert mu.small_first_moment_infinite


def test_tabulated_measure_moments_by_quadrature():
    stable = StableJumpMeasure(1.5)
    tab = TabulatedJumpMeasure(stable.density, z_min=0.0, z_max=1e6)
    assert tab.small_second_moment == pytest.approx(stable.second_moment_below(1.0), rel=1e-8)
    assert tab.tail_mass(0.5) == pytest.approx(stable.tail_mass(0.5) - stable.tail_mass(1e6), rel=1e-8)
    assert tab.small_first_moment_infinite


def test_tabulated_measure_with_finite_small_first_moment():
    tab = TabulatedJumpMeasure(lambda z: math.exp(-z), z_min=0.0, z_max=math.inf)
    assert not tab.small_first_moment_infinite
    assert tab.large_first_moment == pytest.approx(2 * math.exp(-1), rel=1e-9)


def test_tabulated_measure_rejects_non_integrable_density():
    with pytest.raises(ParameterError):
        TabulatedJumpMeasure(lambda z: z ** -3.5, z_min=0.0, z_max=1.0)


def test_from_table_interpolates_power_law_exactly():
    z = np.logspace(-3, 3, 50)
    tab = TabulatedJumpMeasure.from_table(z, z ** -2.5)
    assert tab.density(0.37) == pytest.approx(0.37 ** -2.5, rel=1e-12)
    assert tab.density(1e4) == 0.0


def test_model_dict_round_trip():
    m = make_power_law(-1, 1, 0.5, 2, 1, 1.5, 1.3)
    assert model_from_dict(model_to_dict(m)) == m


def test_model_dict_rejects_unknown_and_missing_keys():
    d = model_to_dict(make_power_law(0, 0, 1, 1, 0, 0, 1.5))
    with pytest.raises(ConfigError):
        model_from_dict(d | {"b3": 1.0})
    d.pop("alpha")
    with pytest.raises(ConfigError):
        model_from_dict(d)
