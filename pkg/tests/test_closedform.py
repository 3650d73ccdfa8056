import math

import numpy as np
import pytest

from stochlwr import closedform as cf
from stochlwr.exceptions import ArgumentError, DomainError, UnknownIdError
from stochlwr.model import perturbation
from stochlwr.process import TimeGrid, path_integral_exp, sample_brownian, to_geometric, zero_path

from .oracles import carried_value, fd_residual

CARRIED = ("D1", "D2", "D3", "D4", "S1", "S2", "B1", "B3", "G1", "G3")


def _start_state(entry):
    return 1.0 if entry.noise_kind == "geometric-brownian" else 0.0


class TestFrozenValues:
    def test_d1(self):
        assert cf.lookup("D1").evaluate(0.3, 0.5) == pytest.approx(0.6, abs=1e-15)

    def test_d2_golden_ratio(self):
        assert cf.lookup("D2").evaluate(0.5, 0.5) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)

    def test_d3(self):
        assert cf.lookup("D3").evaluate(0.2, 0.1) == pytest.approx(0.125, abs=1e-15)

    def test_s1(self):
        assert cf.lookup("S1").evaluate(0.2, 0.3, 0.1) == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_b2_linear_path(self):
        a, t, x = 0.7, 0.3, 0.6
        i = (math.exp(a * t) - 1.0) / a
        expected = math.exp(a * t) * (x - t) / (1.0 - 2.0 * i)
        assert cf.lookup("B2").evaluate(x, t, a * t, i) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("id", cf.IDS)
def test_initial_data_recovered(id):
    entry = cf.lookup(id)
    x = np.linspace(0.0, 1.0, 41)
    u = entry.evaluate(x, 0.0, _start_state(entry), 0.0)
    np.testing.assert_allclose(u, entry.ic.eval(x), atol=1e-14)


@pytest.mark.parametrize("id", CARRIED)
def test_matches_characteristic_root(id):
    entry = cf.lookup(id)
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 25:
        x, t = rng.uniform(0.02, 0.98), rng.uniform(0.01, 0.45)
        m = rng.uniform(-0.3, 0.3) + _start_state(entry) if entry.noise_kind != "zero" else 0.0
        if not entry.validity(x, t, m, 0.0, den_min=0.1):
            continue
        ref = carried_value(entry.scenario, x, t, m)
        if np.isnan(ref):
            continue
        assert entry.evaluate(x, t, m, 0.0) == pytest.approx(ref, abs=1e-9)
        checked += 1


@pytest.mark.parametrize("id", cf.IDS)
def test_finite_difference_residual(id):
    entry = cf.lookup(id)
    h = perturbation(entry.perturbation_id).h
    rng = np.random.default_rng(3)
    x, t, m, i = 0.4, 0.2, _start_state(entry) + (0.1 if entry.noise_kind != "zero" else 0.0), 0.25
    if not entry.needs_functional:
        i = 0.0
    assert entry.validity(x, t, m, i, den_min=0.1)
    for m_dot in rng.uniform(-3, 3, 5):
        assert abs(fd_residual(entry, h, x, t, m, i, m_dot)) < 1e-6


class TestVariants:
    @pytest.mark.parametrize("id", ["B2", "G2", "G3"])
    def test_near_misses_violate_equation(self, id):
        entry = cf.lookup(id)
        near_miss = entry.__class__(**{**entry.__dict__, "formula": entry.variant, "branch": None})
        h = perturbation(entry.perturbation_id).h
        m = 1.3 if entry.noise_kind == "geometric-brownian" else 0.4
        worst = max(abs(fd_residual(near_miss, h, 0.4, 0.2, m, 0.25, m_dot)) for m_dot in (-2.0, 0.5, 2.0))
        assert worst > 1e-2
        assert abs(entry.variant(0.4, 0.2, m, 0.25) - entry.formula(0.4, 0.2, m, 0.25)) > 1e-3

    @pytest.mark.parametrize("id", ["D2", "D4", "S2", "B1", "B3"])
    def test_rationalized_forms_agree(self, id):
        entry = cf.lookup(id)
        m = 1.1 if entry.noise_kind == "geometric-brownian" else (0.1 if entry.noise_kind == "brownian" else 0.0)
        for x, t in ((0.3, 0.2), (0.7, 0.35), (0.5, 0.1)):
            if entry.validity(x, t, m):
                assert entry.variant(x, t, m, 0.0) == pytest.approx(entry.formula(x, t, m, 0.0), abs=1e-10)


class TestLookupAndInputs:
    def test_case_insensitive(self):
        assert cf.lookup("s1") is cf.lookup("S1")

    def test_unknown(self):
        with pytest.raises(UnknownIdError):
            cf.lookup("Q7")

    def test_functional_rejected_for_s1(self):
        path = sample_brownian(1, TimeGrid.uniform(1.0, 0.01))
        with pytest.raises(ArgumentError):
            cf.evaluate("S1", 0.5, 0.1, path, path_integral_exp(path))

    def test_kind_mismatch(self):
        path = to_geometric(sample_brownian(1, TimeGrid.uniform(1.0, 0.01)))
        with pytest.raises(ArgumentError):
            cf.evaluate("B1", 0.5, 0.1, path)

    def test_b2_needs_functional(self):
        path = sample_brownian(1, TimeGrid.uniform(1.0, 0.01))
        with pytest.raises(ArgumentError):
            cf.evaluate("B2", 0.5, 0.1, path)

    def test_invalid_point(self):
        with pytest.raises(DomainError):
            cf.evaluate("D3", 0.2, 0.5, zero_path(TimeGrid.uniform(1.0, 0.01)))

    def test_zero_branch_exact(self):
        x = np.linspace(0, 1, 11)
        path = zero_path(TimeGrid.uniform(1.0, 0.01))
        assert np.array_equal(cf.evaluate("D2", x, 0.0, path), 1.0 - x * x)


class TestSigma:
    def test_d3_common_crossing(self):
        path = zero_path(TimeGrid.uniform(1.0, 1e-3))
        x = np.linspace(0.0, 1.0, 101)
        sig = cf.closed_form_sigma("D3", x, path)
        assert np.all(sig <= 0.5 + 1e-12)
        assert cf.closed_form_sigma("D3", 0.5, path) == pytest.approx(0.5)

    def test_d1_never_stops(self):
        path = zero_path(TimeGrid.uniform(1.0, 1e-2))
        assert np.all(np.isinf(cf.closed_form_sigma("D1", np.linspace(0, 1, 11), path)))

    def test_grid_mask_matches_sigma(self):
        path = sample_brownian(4, TimeGrid.uniform(1.0, 1e-2))
        x = np.linspace(0, 1, 21)
        surf = cf.evaluate_grid("B1", x, path)
        sig = cf.closed_form_sigma("B1", x, path)
        for j in range(x.size):
            assert np.all(surf.valid[j] == (path.t < sig[j]))
        assert np.all(np.isnan(surf.u[~surf.valid]))
