import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from stochlwr import closedform as cf
from stochlwr._io import fmt
from stochlwr.characteristics import integrate_fan
from stochlwr.model import named_scenario
from stochlwr.process import TimeGrid, bridge_refine, sample_brownian, to_geometric

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@given(st.floats(allow_nan=False))
def test_fmt_round_trips(v):
    assert float(fmt(v)) == v


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=6), st.integers(min_value=1, max_value=20))
def test_bridge_keeps_coarse_nodes(seed, factor, n):
    w = sample_brownian(seed, TimeGrid.uniform(1.0, 1.0 / n))
    fine = bridge_refine(w, factor)
    np.testing.assert_array_equal(fine.values[::factor], w.values)
    assert fine.grid.is_uniform


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=50))
def test_sampling_deterministic(seed, index):
    g = TimeGrid.uniform(1.0, 0.05)
    np.testing.assert_array_equal(sample_brownian(seed, g, index).values, sample_brownian(seed, g, index).values)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(cf.IDS), seeds)
def test_residual_vanishes(id, seed):
    from stochlwr.verify import sweep_residuals

    assert sweep_residuals(id, n_probes=20, seed=seed).passed


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-1.0, 1.0))
def test_s1_inverse_is_consistent(x, t, w):
    entry = cf.lookup("S1")
    if not entry.validity(x, t, w, den_min=1e-3):
        return
    x0 = entry.inverse(x, t, w, 0.0)
    assert abs(x0 + (2.0 * x0 - 1.0) * (t + w) - x) <= 1e-9 * (1 + abs(x0) * 1e3)
    assert abs(entry.evaluate(x, t, w) - (1.0 - x0)) <= 1e-9 * (1 + abs(x0))


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["s1", "s2", "b3", "g3", "b1", "g1"]), seeds)
def test_value_carried_unchanged(name, seed):
    scenario = named_scenario(name)
    w = sample_brownian(seed, TimeGrid.uniform(1.0, 0.01))
    path = to_geometric(w) if scenario.noise_kind == "geometric-brownian" else w
    x0 = np.linspace(0.01, 0.99, 21)
    fan = integrate_fan(scenario, path, x0)
    g = scenario.ic.eval(x0)[:, None]
    assert np.all(np.where(fan.alive, fan.eta == g, True))


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_alive_is_sticky(seed):
    fan = integrate_fan(named_scenario("b2"), sample_brownian(seed, TimeGrid.uniform(1.0, 0.01)),
                        np.linspace(0, 1, 11))
    assert np.all(np.diff(fan.alive.astype(int), axis=1) <= 0)
