"""Design and evaluation of covert service-degradation injection attacks.

Two attack functions are supported on the forward stream:

* a pure gain ``M(z) = K`` tuned so the step response overshoots by a
  target percentage;
* ``M(z) = K (z - 1) / (z - 0.94)``, whose zero cancels the PI integrator
  and leaves a prescribed steady-state error.

Designs use the attacker's estimated models; :func:`evaluate_attack`
replays the plan against the real loop.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .lti import (
    DivergenceError, NotSettledError, StepMetrics, TransferFunction, closed_loop, dc_gain, poles,
    series, simulate, step_metrics,
)
from .netsim import NcsModel, run_loop

#: Fixed pole of the steady-state-error attack function.
ESS_POLE = 0.94
DESIGN_TOL_PP = 0.1
HORIZON_SECONDS = 20.0
COARSE_POINTS = 201


class AttackDesignError(RuntimeError):
    pass


class UnreachableTargetError(AttackDesignError):
    def __init__(self, message: str, best_overshoot: Optional[float] = None):
        super().__init__(message)
        self.best_overshoot = best_overshoot


class DegenerateDesignError(AttackDesignError):
    pass


class AttackInstabilityError(AttackDesignError):
    def __init__(self, message: str, poles_: list):
        super().__init__(f"{message}; closed-loop poles {[complex(p) for p in poles_]}")
        self.poles = poles_


@dataclass
class AttackPlan:
    kind: str  # "overshoot" | "steady_state_error"
    target: float
    gain: float
    designed_M: TransferFunction
    designed_on: dict
    predicted_metrics: Optional[StepMetrics] = None
    achieved_metrics: Optional[StepMetrics] = field(default=None)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target": self.target,
            "gain": self.gain,
            "M": {"num": list(self.designed_M.num), "den": list(self.designed_M.den)},
            "designed_on": self.designed_on,
            "predicted": asdict(self.predicted_metrics) if self.predicted_metrics else None,
            "achieved": asdict(self.achieved_metrics) if self.achieved_metrics else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttackPlan":
        pred = d.get("predicted")
        ach = d.get("achieved")
        return cls(
            kind=d["kind"], target=float(d["target"]), gain=float(d["gain"]),
            designed_M=TransferFunction(d["M"]["num"], d["M"]["den"]),
            designed_on=d.get("designed_on", {}),
            predicted_metrics=StepMetrics(**pred) if pred else None,
            achieved_metrics=StepMetrics(**ach) if ach else None,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def ess_attack_function(gain: float) -> TransferFunction:
    return TransferFunction([gain, -gain], [1.0, -ESS_POLE])


def attacked_loop(C: TransferFunction, G: TransferFunction, M: TransferFunction) -> TransferFunction:
    return closed_loop(series(series(M, C), G))


def _basis(C: TransferFunction, G: TransferFunction) -> dict:
    return {"controller": {"num": list(C.num), "den": list(C.den)},
            "plant": {"num": list(G.num), "den": list(G.den)}}


def predict_metrics(C: TransferFunction, G: TransferFunction, M: TransferFunction,
                    horizon: float = HORIZON_SECONDS, sample_rate: float = 50.0,
                    setpoint: float = 1.0) -> StepMetrics:
    """Step metrics of the loop ``M C G`` under unity feedback.

    Raises ``AttackInstabilityError`` if the closed loop has a pole on or
    outside the unit circle.
    """
    cl = attacked_loop(C, G, M)
    if cl.order:
        p = poles(cl)
        if any(abs(z) >= 1.0 for z in p):
            raise AttackInstabilityError("attacked loop is unstable", p)
    n = int(round(horizon * sample_rate))
    y = simulate(cl, np.full(n, float(setpoint)))
    return step_metrics(y, setpoint)


def design_overshoot_gain(est_C: TransferFunction, est_G: TransferFunction, target_overshoot_pct: float,
                          horizon: float = HORIZON_SECONDS, sample_rate: float = 50.0,
                          max_iter: int = 60) -> AttackPlan:
    """Find the forward-stream gain giving ``target_overshoot_pct`` on the estimated loop.

    The gain is bracketed geometrically from ``K = 1`` and refined by
    bisection on the simulated overshoot. Unstable or unsettled gains count
    as overshooting. If the overshoot-vs-gain map turns out non-monotone the
    bracket is rescanned coarsely, and the cell holding the first crossing is
    refined (by bisection, or on a 1e-3 grid if that cell is non-monotone too).
    """
    target = float(target_overshoot_pct)
    if not 0.0 < target <= 100.0:
        raise ValueError("target overshoot must lie in (0, 100]")

    cache: dict[float, float] = {}

    def overshoot(k: float) -> float:
        if k not in cache:
            try:
                cache[k] = predict_metrics(est_C, est_G, TransferFunction.gain(k), horizon,
                                           sample_rate).overshoot_pct
            except (AttackInstabilityError, NotSettledError, DivergenceError):
                cache[k] = math.inf
        return cache[k]

    lo = hi = 1.0
    if overshoot(1.0) > target:
        while overshoot(lo) > target:
            lo /= 2.0
            if lo < 1e-6:
                raise UnreachableTargetError("target below the overshoot of any positive gain")
    else:
        while overshoot(hi) <= target:
            hi *= 2.0
            if hi > 1e6:
                best = max((v for v in cache.values() if math.isfinite(v)), default=None)
                raise UnreachableTargetError("target not reached before 1e6 gain", best)

    def bisect(lo: float, hi: float) -> tuple[float, float, bool]:
        for _ in range(max_iter):
            if hi - lo < 1e-9:
                break
            mid = 0.5 * (lo + hi)
            ov = overshoot(mid)
            if ov < overshoot(lo) - 1e-9 or (math.isfinite(overshoot(hi)) and ov > overshoot(hi) + 1e-9):
                return lo, hi, False
            if ov > target:
                hi = mid
            else:
                lo = mid
        return lo, hi, True

    lo0, hi0 = lo, hi
    lo, hi, monotone = bisect(lo, hi)
    if not monotone:
        # Locate the first crossing on a coarse grid, then retry bisection
        # there; only a still-misbehaving cell is scanned at 1e-3.
        coarse = np.linspace(lo0, hi0, COARSE_POINTS)
        ov = [overshoot(float(k)) for k in coarse]
        cell = next((i for i in range(len(coarse) - 1) if ov[i] <= target < ov[i + 1]), None)
        if cell is None:
            i = int(np.argmin([abs(v - target) for v in ov]))
            cell = min(i, len(coarse) - 2)
        lo, hi = float(coarse[cell]), float(coarse[cell + 1])
        lo, hi, monotone = bisect(lo, hi)
        if not monotone:
            grid = np.arange(float(coarse[cell]), float(coarse[cell + 1]) + 1e-3, 1e-3)
            lo = hi = min((abs(overshoot(float(k)) - target), float(k)) for k in grid)[1]
    gain = min((lo, hi), key=lambda k: abs(overshoot(k) - target))

    achieved = overshoot(gain)
    if not abs(achieved - target) <= DESIGN_TOL_PP:
        best = max((v for v in cache.values() if math.isfinite(v)), default=None)
        raise UnreachableTargetError(
            f"closest overshoot {achieved:.3f}% misses target {target}% (max stable overshoot {best})", best)
    M = TransferFunction.gain(gain)
    return AttackPlan("overshoot", target, gain, M, _basis(est_C, est_G),
                      predict_metrics(est_C, est_G, M, horizon, sample_rate))


def ess_gain(est_C: TransferFunction, est_G: TransferFunction, target_error_pct: float) -> float:
    """Closed-form gain of ``K (z-1)/(z-0.94)`` for a steady-state error of ``target_error_pct``.

    With the integrator cancelled, the loop's DC gain must be ``(1 + e)/(-e)``
    for relative error ``e``.
    """
    e = float(target_error_pct) / 100.0
    if not -1.0 < e < 0.0:
        raise ValueError("target error must lie in (-100, 0) percent")
    if abs(target_error_pct) < 0.01:
        raise UnreachableTargetError("target error too close to zero; gain unbounded")
    if abs(float(np.sum(est_C.den))) > 1e-12:
        raise DegenerateDesignError("controller has no integrator pole at z = 1 to cancel")
    loop_dc = (1.0 + e) / (-e)
    try:
        plant_dc = dc_gain(est_G)
    except ZeroDivisionError as exc:
        raise DegenerateDesignError("plant has a pole at z = 1") from exc
    denom = float(np.sum(est_C.num)) * plant_dc
    if denom == 0.0:
        raise DegenerateDesignError("controller numerator or plant vanishes at z = 1")
    return loop_dc * (1.0 - ESS_POLE) / denom


def design_ess_gain(est_C: TransferFunction, est_G: TransferFunction, target_error_pct: float,
                    horizon: float = HORIZON_SECONDS, sample_rate: float = 50.0) -> AttackPlan:
    """Design ``M(z) = K (z-1)/(z-0.94)`` and verify it on the estimated loop."""
    gain = ess_gain(est_C, est_G, target_error_pct)
    M = ess_attack_function(gain)
    predicted = predict_metrics(est_C, est_G, M, horizon, sample_rate)
    if abs(predicted.steady_state_error_pct - target_error_pct) > DESIGN_TOL_PP:
        raise AttackDesignError(
            f"simulated error {predicted.steady_state_error_pct:.4f}% misses target {target_error_pct}%")
    return AttackPlan("steady_state_error", float(target_error_pct), gain, M, _basis(est_C, est_G), predicted)


def evaluate_attack(plan: AttackPlan, true_model: NcsModel, horizon: float = HORIZON_SECONDS) -> StepMetrics:
    """Run the plan against the real loop and measure what it actually does."""
    run = run_loop(true_model, horizon, plan.designed_M)
    metrics = step_metrics(run.y.values, true_model.setpoint)
    plan.achieved_metrics = metrics
    return metrics
