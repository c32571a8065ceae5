import math

import numpy as np
import pytest

from nlbranch.exceptions import NonFiniteStateError, ParameterError
from nlbranch.model import BranchingModel, GeneralRates, PowerLawRates, StableJumpMeasure, TabulatedJumpMeasure, make_power_law
from nlbranch.montecarlo import ExtinctBy, estimate_event_prob, run_paths
from nlbranch.sampler import make_rng
from nlbranch.simulator import Path, SimConfig, Status, hitting_time, simulate_coupled, simulate_path

FELLER = make_power_law(0, 0, 1, 1, 0, 0, 1.5)
STABLE = make_power_law(0, 0, 0, 0, 1, 1, 1.5)
MIXED = make_power_law(0.3, 0.8, 0.5, 1.2, 0.7, 1.1, 1.6)


def _manual_path(states, status=Status.CENSORED, dt=1.0):
    states = np.asarray(states, dtype=float)
    steps = np.arange(states.size)
    return Path(steps * dt, states, steps, status, (states.size - 1) * dt, float(states[0]), dt)


def test_deterministic_limit_is_exponential_decay():
    m = make_power_law(-1, 1, 1e-12, 1, 0, 0, 1.5)
    cfg = SimConfig(dt=1e-3, t_max=2.0)
    p = simulate_path(m, 1.0, cfg, make_rng(1))
    assert p.status is Status.CENSORED
    assert np.max(np.abs(p.states - np.exp(-p.times))) < 2 * cfg.dt


@pytest.mark.slow
def test_feller_extinction_probability():
    est = estimate_event_prob(FELLER, 1.0, SimConfig(dt=1e-3, seed=11), ExtinctBy(4.0), 10_000)
    assert abs(est.mean - math.exp(-0.5)) <= 0.03


@pytest.mark.slow
def test_superlinear_drift_explodes_with_positive_probability():
    m = make_power_law(1, 2, 1, 2, 0, 0, 1.5)
    cfg = SimConfig(dt=1e-3, t_max=10.0)
    status = run_paths(lambda i, rng: simulate_path(m, 10.0, cfg, rng).status, 10_000, 12)
    assert sum(s is Status.EXPLODED for s in status) > 0


@pytest.mark.parametrize("model", [FELLER, STABLE, MIXED])
def test_compiled_and_python_routes_are_bitwise_equal(model):
    cfg = SimConfig(dt=1e-3, t_max=3.0)
    for i in range(5):
        a = simulate_path(model, 1.0, cfg, make_rng(21, i), levels=(0.5, 2.0), compiled=True)
        b = simulate_path(model, 1.0, cfg, make_rng(21, i), levels=(0.5, 2.0), compiled=False)
        assert np.array_equal(a.states, b.states) and a.status is b.status and a.t_end == b.t_end
        assert a.crossings == b.crossings


def test_replay_is_bitwise():
    cfg = SimConfig(dt=1e-3, t_max=2.0)
    a = simulate_path(MIXED, 1.0, cfg, make_rng(5, 7))
    b = simulate_path(MIXED, 1.0, cfg, make_rng(5, 7))
    assert np.array_equal(a.states, b.states)


def test_states_stay_nonnegative_and_absorb():
    cfg = SimConfig(dt=1e-3, t_max=5.0)
    for i in range(20):
        p = simulate_path(STABLE, 1.0, cfg, make_rng(8, i))
        assert np.all(p.states >= 0)
        if p.status is Status.EXTINCT:
            assert p.states[-1] <= cfg.eps_zero and p.t_end == p.times[-1]


def test_record_stride_keeps_crossings_and_final_state():
    cfg_full = SimConfig(dt=1e-3, t_max=2.0)
    cfg_thin = SimConfig(dt=1e-3, t_max=2.0, record_stride=100)
    full = simulate_path(FELLER, 1.0, cfg_full, make_rng(3), levels=(0.5,))
    thin = simulate_path(FELLER, 1.0, cfg_thin, make_rng(3), levels=(0.5,))
    assert thin.states[-1] == full.states[-1] and thin.t_end == full.t_end
    assert thin.crossings == full.crossings
    assert np.array_equal(full.states[thin.steps], thin.states)


def test_effective_step_lands_on_horizon():
    cfg = SimConfig(dt=0.3, t_max=1.0)
    assert cfg.n_steps == 3 and cfg.step == pytest.approx(1 / 3)


def test_coupled_equal_starts_are_identical():
    px, py = simulate_coupled(STABLE, 1.0, 1.0, SimConfig(t_max=1.0), make_rng(4))
    assert np.array_equal(px.states, py.states)


@pytest.mark.parametrize("model, y0", [(FELLER, 2.0), (STABLE, 1.5)])
def test_coupled_ordering(model, y0):
    cfg = SimConfig(dt=1e-3, t_max=1.0)
    for i in range(200):
        px, py = simulate_coupled(model, 1.0, y0, cfg, make_rng(17, i))
        assert np.all(py.states >= px.states)


def test_coupled_rejects_reversed_starts():
    with pytest.raises(ParameterError):
        simulate_coupled(FELLER, 2.0, 1.0, SimConfig(), make_rng(1))


def test_hitting_time_examples():
    assert hitting_time(_manual_path([1.0, 1.0, 1.0]), 0.5, "down") is None
    assert hitting_time(_manual_path([2.0, 3.0, 1.0]), 1.5, "down") == 2.0
    exploded = _manual_path([1.0, 50.0, 1e9], status=Status.EXPLODED)
    assert hitting_time(exploded, 1e9, "up") == exploded.t_end


def test_general_rates_with_tabulated_jumps_run():
    stable = StableJumpMeasure(1.5)
    m = BranchingModel(GeneralRates(lambda x: 0.0, lambda x: x, lambda x: x),
                       TabulatedJumpMeasure(stable.density, 0.0, math.inf))
    p = simulate_path(m, 1.0, SimConfig(dt=1e-2, t_max=0.5), make_rng(2))
    assert np.all(np.isfinite(p.states)) and np.all(p.states >= 0)


def test_non_finite_state_raises():
    m = BranchingModel(GeneralRates(lambda x: math.inf, lambda x: x, lambda x: 0.0), StableJumpMeasure(1.5))
    with pytest.raises(NonFiniteStateError):
        simulate_path(m, 1.0, SimConfig(dt=1e-2, t_max=0.5), make_rng(1))


@pytest.mark.parametrize("kwargs", [dict(dt=0), dict(dt=2, t_max=1), dict(eps_zero=2), dict(cap_explosion=0.5),
                                    dict(record_stride=0), dict(jump_delta=0)])
def test_sim_config_validation(kwargs):
    with pytest.raises(ParameterError):
        SimConfig(**kwargs)
