import numpy as np
import pytest

from stochlwr.exceptions import ConfigError, ExplosionError, UnknownIdError
from stochlwr.model import (
    NAMED_SCENARIOS,
    PERTURBATION_IDS,
    InitialCondition,
    Scenario,
    f_drift,
    initial_condition,
    named_scenario,
    parse_config,
    perturbation,
    scenario_from_config,
    sce_rhs,
    validate_scenario,
)


@pytest.mark.parametrize("name", sorted(NAMED_SCENARIOS))
def test_named_scenarios_validate(name):
    assert validate_scenario(named_scenario(name)).ok


def test_out_of_range_initial_data_flagged():
    bad = InitialCondition("two-x", lambda x: 2.0 * x, lambda x: 2.0 * np.ones_like(x))
    s = Scenario(bad, perturbation("none"))
    report = validate_scenario(s)
    assert not report and any("range" in v for v in report.violations)


def test_wrong_derivative_flagged():
    bad = InitialCondition("x", lambda x: x, lambda x: np.zeros_like(x))
    report = validate_scenario(Scenario(bad, perturbation("none")))
    assert any("partials" in v for v in report.violations)


@pytest.mark.parametrize("id", PERTURBATION_IDS)
def test_eta_coefficient_is_h_minus_p_hp(id):
    spec = perturbation(id)
    x, u, p = 0.3, 0.4, np.array([-1.5, 0.0, 2.0])
    literal = spec.h(x, u, p) - p * spec.h_p(x, u, p)
    np.testing.assert_allclose(spec.eta_coefficient(x, u, p, 0.0), literal, atol=1e-15)


def test_infinite_slope_does_not_poison_eta():
    spec = perturbation("conservation-lwr")
    assert spec.eta_coefficient(0.3, 0.4, np.inf, 0.0) == 0.0


def test_sce_rhs_values():
    spec = perturbation("conservation-lwr")
    dxi, deta, dchi = sce_rhs(spec, (0.2, 0.7, -1.0), 0.01, 0.05)
    assert dxi == pytest.approx((1 - 1.4) * 0.01 + (1 - 1.4) * 0.05)
    assert deta == 0.0
    assert dchi == pytest.approx(2 * 0.01 + 2 * -1.0 * -1.0 * 0.05)


def test_sce_rhs_explosion():
    with pytest.raises(ExplosionError):
        sce_rhs(perturbation("none"), (0.2, np.nan, 1.0), 0.01, 0.0)


def test_f_drift():
    assert f_drift(0.25, 2.0) == pytest.approx(-1.0)


def test_lookups():
    with pytest.raises(UnknownIdError):
        initial_condition("sine")
    with pytest.raises(UnknownIdError):
        perturbation("quadratic")
    with pytest.raises(UnknownIdError):
        named_scenario("z9")
    assert named_scenario("G2").noise_kind == "geometric-brownian"
    with pytest.raises(ConfigError):
        Scenario(initial_condition("x"), perturbation("none"), T=0.0)


class TestConfig:
    def test_parse(self):
        cfg = parse_config("# comment\nic = x\nperturbation=multiplicative\nnoise=gbm\nT=0.5\nseed=3\n")
        assert cfg == {"ic": "x", "perturbation": "multiplicative", "noise": "geometric-brownian",
                       "T": 0.5, "seed": 3}
        s = scenario_from_config(cfg)
        assert s.T == 0.5 and s.noise_kind == "geometric-brownian"

    @pytest.mark.parametrize("text", ["colour=red", "dt=abc", "justtext", "noise=levy"])
    def test_bad(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_ic(self):
        with pytest.raises(ConfigError):
            scenario_from_config({"perturbation": "none"})

    def test_unknown_ic(self):
        with pytest.raises(ConfigError):
            scenario_from_config({"ic": "sine"})
