import json

import numpy as np
import pytest

from covert_ncs.attack import (
    AttackInstabilityError, AttackPlan, DegenerateDesignError, UnreachableTargetError, design_ess_gain,
    design_overshoot_gain, ess_attack_function, ess_gain, evaluate_attack, predict_metrics,
)
from covert_ncs.lti import TransferFunction, closed_loop, dc_gain, series, simulate
from covert_ncs.netsim import NcsModel, run_loop

# Published mean estimates at 0% and 20% loss: g1, g2, g3, g4, c1, c2
MEANS_0 = (0.32793, 0.29652, -1.54121, 0.55983, 0.16991, -0.16712)
MEANS_20 = (0.26963, 0.33352, -1.53119, 0.54916, 0.16989, -0.16716)


def models_from(row):
    g1, g2, g3, g4, c1, c2 = row
    return TransferFunction([c1, c2], [1.0, -1.0]), TransferFunction([g1, g2], [1.0, g3, g4])


class TestEssDesign:
    def test_closed_form_on_truth(self, controller, plant):
        expected = 9 * 0.06 / ((0.1701 - 0.1673) * (0.6172 / 0.0184))
        assert ess_gain(controller, plant, -10.0) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(5.7495, abs=1e-3)

    def test_plan_structure(self, controller, plant):
        plan = design_ess_gain(controller, plant, -10.0)
        m = plan.designed_M
        assert m.den == (1.0, -0.94)
        assert np.polyval(m.num, 1.0) == 0.0
        assert plan.predicted_metrics.steady_state_error_pct == pytest.approx(-10.0, abs=0.1)

    def test_from_published_means(self):
        plan = design_ess_gain(*models_from(MEANS_0), -10.0)
        # the published means are rounded to 5 decimals, which moves c1 + c2 by up to ~0.4%
        assert plan.gain == pytest.approx(5.7471, rel=0.01)

    def test_reference_gain_on_truth(self, model):
        plan = AttackPlan("steady_state_error", -10.0, 5.7471, ess_attack_function(5.7471), {})
        assert evaluate_attack(plan, model).steady_state_error_pct == pytest.approx(-10.0, abs=0.2)

    def test_twenty_percent_plan_on_truth(self, model):
        plan = design_ess_gain(*models_from(MEANS_20), -10.0)
        assert evaluate_attack(plan, model).steady_state_error_pct == pytest.approx(-9.8, abs=0.2)

    def test_target_near_zero_unreachable(self, controller, plant):
        with pytest.raises(UnreachableTargetError):
            ess_gain(controller, plant, -0.005)

    def test_target_out_of_range(self, controller, plant):
        with pytest.raises(ValueError):
            ess_gain(controller, plant, 5.0)

    def test_needs_integrator(self, plant):
        with pytest.raises(DegenerateDesignError):
            design_ess_gain(TransferFunction([0.2, -0.1], [1.0, -0.5]), plant, -10.0)

    def test_unstable_design_reported(self, controller, plant):
        with pytest.raises(AttackInstabilityError) as info:
            design_ess_gain(controller, plant, -1.0)
        assert any(abs(p) > 1 for p in info.value.poles)

    @pytest.mark.parametrize("target", [-10.0, -20.0, -50.0, -90.0])
    def test_final_value_matches_simulation(self, target):
        C, G = models_from(MEANS_20)
        k = ess_gain(C, G, target)
        cl = closed_loop(series(series(ess_attack_function(k), C), G))
        fv = dc_gain(cl)
        assert all(abs(p) < 1 for p in np.roots(cl.den))
        y = simulate(cl, np.ones(5000))
        assert y[-1] == pytest.approx(fv, abs=1e-4)
        assert fv == pytest.approx(1 + target / 100, abs=1e-9)


class TestOvershootDesign:
    def test_reference_gain_on_truth(self, model):
        plan = AttackPlan("overshoot", 50.0, 4.0451, TransferFunction.gain(4.0451), {})
        assert evaluate_attack(plan, model).overshoot_pct == pytest.approx(48.90, abs=1.0)

    def test_design_on_truth(self, controller, plant, model):
        plan = design_overshoot_gain(controller, plant, 50.0)
        assert plan.gain == pytest.approx(4.05, rel=0.02)
        assert evaluate_attack(plan, model).overshoot_pct == pytest.approx(50.0, abs=0.1)

    @pytest.mark.parametrize("row, gain, achieved", [
        (MEANS_0, 4.0451, 48.90),
        (MEANS_20, 3.796, 45.94),
    ])
    def test_reference_columns(self, model, row, gain, achieved):
        plan = design_overshoot_gain(*models_from(row), 50.0)
        assert plan.gain == pytest.approx(gain, rel=1e-3)
        assert evaluate_attack(plan, model).overshoot_pct == pytest.approx(achieved, abs=0.05)

    def test_self_consistency_on_estimated_model(self):
        C, G = models_from(MEANS_20)
        plan = design_overshoot_gain(C, G, 30.0)
        got = evaluate_attack(plan, NcsModel(C, G))
        assert got.overshoot_pct == pytest.approx(30.0, abs=0.1)

    def test_unattacked_overshoot_target_gives_unit_gain(self, plant):
        hot = TransferFunction([0.3402, -0.3346], [1.0, -1.0])
        base = predict_metrics(hot, plant, TransferFunction.identity()).overshoot_pct
        plan = design_overshoot_gain(hot, plant, base)
        assert plan.gain == pytest.approx(1.0, abs=1e-3)

    def test_unreachable_target(self, controller, plant):
        with pytest.raises(UnreachableTargetError) as info:
            design_overshoot_gain(controller, plant, 100.0)
        assert 90.0 < info.value.best_overshoot < 100.0

    def test_target_range(self, controller, plant):
        with pytest.raises(ValueError):
            design_overshoot_gain(controller, plant, 0.0)

    def test_gain_attack_still_reaches_setpoint(self, model):
        y = run_loop(model, 20.0, TransferFunction.gain(4.0451)).y.values
        assert abs(y[-1] - 1.0) < 1e-3


def test_identity_plan_matches_unattacked(model):
    plan = AttackPlan("overshoot", 0.0, 1.0, TransferFunction.identity(), {})
    m = evaluate_attack(plan, model)
    assert m.overshoot_pct < 1e-3
    assert abs(m.steady_state_error_pct) < 1e-3


def test_plan_json_roundtrip(controller, plant, model):
    plan = design_ess_gain(controller, plant, -10.0)
    evaluate_attack(plan, model)
    again = AttackPlan.from_dict(json.loads(plan.to_json()))
    assert again.designed_M == plan.designed_M
    assert again.gain == plan.gain
    assert again.achieved_metrics == plan.achieved_metrics
    assert set(plan.to_dict()) >= {"kind", "target", "gain", "M", "designed_on", "predicted", "achieved"}
