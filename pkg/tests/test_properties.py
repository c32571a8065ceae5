"""Property-based checks of invariants across modules."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nlbranch.analytics import c_alpha_a, g_a, h_a
from nlbranch.classifier import Verdict, classify_all, classify_extinction
from nlbranch.exceptions import ConfigError
from nlbranch.io import parse_config
from nlbranch.model import PowerLawRates, make_power_law, model_from_dict, model_to_dict
from nlbranch.montecarlo import run_paths
from nlbranch.sampler import make_rng
from nlbranch.simulator import SimConfig, simulate_coupled, simulate_path
from nlbranch.timechange import WeightFunction, lamperti_transform, weighted_population

alphas = st.floats(1.05, 1.95)
exps = st.floats(0.0, 4.0)
coefs = st.floats(0.05, 3.0)
signed = st.floats(-3.0, 3.0)


@st.composite
def rates(draw):
    b1 = draw(st.sampled_from([0.0, 1.0])) * draw(coefs)
    b2 = draw(coefs) if b1 == 0 else draw(st.sampled_from([0.0, 1.0])) * draw(coefs)
    return PowerLawRates(draw(signed), draw(exps), b1, draw(exps), b2, draw(exps))


@given(alphas, st.floats(0.2, 4.0).filter(lambda a: abs(a - 1) > 1e-3), st.floats(1e-3, 1e3), st.floats(1e-2, 1e2))
@settings(max_examples=40)
def test_h_a_scaling(alpha, a, u, c):
    m = make_power_law(0, 0, 0, 0, 1, 1, alpha)
    assert math.isclose(h_a(m, c * u, a), c ** -alpha * h_a(m, u, a), rel_tol=1e-12)


@given(alphas, st.floats(0.2, 4.0).filter(lambda a: abs(a - 1) > 1e-3))
@settings(max_examples=25)
def test_c_alpha_a_gamma_ratio(alpha, a):
    assert math.isclose(c_alpha_a(alpha, a), math.gamma(a + alpha - 1) / math.gamma(a + 1), rel_tol=1e-7)


@given(rates(), alphas, st.floats(0.2, 4.0).filter(lambda a: abs(a - 1) > 1e-3), st.floats(1e-2, 1e2))
@settings(max_examples=40)
def test_g_a_parts_sum(r, alpha, a, u):
    v = g_a(make_power_law(*r.as_tuple(), alpha), u, a)
    d, q, j = v.parts
    assert math.isclose(v.value, d - q - j, rel_tol=1e-14, abs_tol=1e-300)


@given(rates(), alphas)
def test_classifier_single_verdict_and_citations(r, alpha):
    rep = classify_all(r, alpha)
    for v in (rep.extinction, rep.explosion, rep.comes_down):
        assert isinstance(v, Verdict)
    if rep.extinction is Verdict.ALMOST_SURE:
        assert any(c.startswith("ext-(i)") for c in rep.citations)
    if rep.extinction is Verdict.INDETERMINATE:
        assert not any(c.startswith(("ext-", "nonext-")) for c in rep.citations)
    # explosion is only possible with b0 > 0; coming down needs b0 <= 0 when r0 large
    if r.b0 <= 0:
        assert rep.explosion is Verdict.NEVER
    if rep.explosion is Verdict.POSITIVE_PROBABILITY:
        assert rep.comes_down is not Verdict.ALMOST_SURE


@given(alphas, st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(1e-9, 1e-2))
def test_extinction_boundary_is_indeterminate_and_nudges_decide(alpha, r0, b2, eps):
    r2 = r0 + alpha - 1.0
    edge = math.gamma(alpha) * b2
    at = classify_extinction(PowerLawRates(edge, r0, 0.0, 0.0, b2, r2), alpha)[0]
    above = classify_extinction(PowerLawRates(edge * (1 + eps), r0, 0.0, 0.0, b2, r2), alpha)[0]
    below = classify_extinction(PowerLawRates(edge * (1 - eps), r0, 0.0, 0.0, b2, r2), alpha)[0]
    assert at is Verdict.INDETERMINATE
    assert above is Verdict.NEVER
    assert below is Verdict.POSITIVE_PROBABILITY


@given(rates(), alphas)
def test_model_round_trip(r, alpha):
    m = make_power_law(*r.as_tuple(), alpha)
    assert model_from_dict(model_to_dict(m)) == m


@given(st.text(min_size=1, max_size=8).filter(lambda k: k not in {"schema_version", "model", "sim", "seed",
                                                                      "analytics", "simulate", "estimate", "validate"}))
def test_unknown_top_level_keys_rejected(key):
    try:
        parse_config({"schema_version": 1, key: 1})
    except ConfigError:
        return
    raise AssertionError("unknown key accepted")


models = st.sampled_from([
    make_power_law(0, 0, 1, 1, 0, 0, 1.5),
    make_power_law(0, 0, 0, 0, 1, 1, 1.5),
    make_power_law(0.5, 1.5, 0.5, 1.2, 0.8, 1.3, 1.7),
    make_power_law(-1, 0.5, 0, 0, 1, 2, 1.3),
])


@given(models, st.integers(0, 2 ** 32), st.floats(0.1, 5.0))
@settings(max_examples=25)
def test_paths_nonnegative_and_routes_agree(model, seed, x0):
    cfg = SimConfig(dt=1e-2, t_max=2.0)
    a = simulate_path(model, x0, cfg, make_rng(seed))
    b = simulate_path(model, x0, cfg, make_rng(seed), compiled=False)
    assert np.all(a.states >= 0)
    assert np.array_equal(a.states, b.states)


@given(st.integers(0, 2 ** 32), st.integers(1, 5), st.integers(1, 60))
@settings(max_examples=20)
def test_run_paths_worker_invariance(seed, workers, n):
    task = lambda i, rng: float(rng.random())
    assert run_paths(task, n, seed, workers=1) == run_paths(task, n, seed, workers=workers)


@given(st.sampled_from([
    make_power_law(0, 0, 1, 1, 0, 0, 1.5),
    make_power_law(0, 0, 0, 0, 1, 1, 1.5),
    make_power_law(0.3, 0.5, 0.5, 1.0, 1.0, 1.2, 1.6),
]), st.integers(0, 2 ** 32), st.floats(0.1, 2.0), st.floats(0.0, 2.0))
@settings(max_examples=25)
def test_coupled_paths_ordered(model, seed, x0, gap):
    px, py = simulate_coupled(model, x0, x0 + gap, SimConfig(dt=1e-2, t_max=2.0), make_rng(seed))
    assert np.all(py.states >= px.states)


@given(st.integers(0, 2 ** 32), st.floats(0.0, 2.0), st.floats(0.1, 3.0))
@settings(max_examples=25)
def test_time_change_round_trip(seed, p, c):
    path = simulate_path(make_power_law(0, 0, 1, 1, 0, 0, 1.5), 1.0, SimConfig(dt=1e-2, t_max=3.0), make_rng(seed))
    w = WeightFunction(lambda x: c * (np.maximum(x, 0.0) ** p + 0.1))
    moved = lamperti_transform(path, w)
    assert np.all(np.diff(moved.times) >= 0)
    assert math.isclose(moved.t_end, weighted_population(path, w).value, rel_tol=1e-9, abs_tol=1e-12)
    back = lamperti_transform(moved, WeightFunction.constant(1.0))
    assert np.allclose(back.times, moved.times, rtol=1e-12, atol=1e-12)
