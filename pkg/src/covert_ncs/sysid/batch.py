"""Repeated capture-and-identify runs across sample-loss rates."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..bsa import BsaConfig
from ..netsim import LossModel, NcsModel, SignalTrace, eavesdrop, run_loop
from .estimator import ModelTemplate, TransferFunctionEstimator
from .stats import CoefficientStats, describe, histogram

log = logging.getLogger(__name__)

PLANT_NAMES = ("g1", "g2", "g3", "g4")
CONTROLLER_NAMES = ("c1", "c2")
NAMES = PLANT_NAMES + CONTROLLER_NAMES

CAPTURE_SECONDS = 2.0
MAX_FAILURE_FRACTION = 0.10


class BatchError(RuntimeError):
    pass


def _estimator(template: ModelTemplate, config: BsaConfig, rng) -> TransferFunctionEstimator:
    return TransferFunctionEstimator(template, config.population_size, config.iterations,
                                     config.eta, config.mixrate, random_state=rng)


def identify_plant(i_trace: SignalTrace, o_trace: SignalTrace, template: Optional[ModelTemplate] = None,
                   config: Optional[BsaConfig] = None, rng=None) -> np.ndarray:
    """Estimate ``(g1, g2, g3, g4)`` with the forward stream as input and feedback as output."""
    config = config or BsaConfig(iterations=800)
    template = template or ModelTemplate.plant(config.bounds)
    rng = config.seed if rng is None else rng
    est = _estimator(template, config, rng).fit(i_trace.values, o_trace.values)
    return est.coef_


def identify_controller(i_trace: SignalTrace, o_trace: SignalTrace, template: Optional[ModelTemplate] = None,
                        config: Optional[BsaConfig] = None, setpoint: float = 1.0, rng=None) -> np.ndarray:
    """Estimate ``(c1, c2)`` from the feedback stream (input) and forward stream (output).

    The controller acts on the tracking error, so the candidate is driven
    by ``setpoint - feedback``.
    """
    config = config or BsaConfig(iterations=600)
    template = template or ModelTemplate.pi_controller(config.bounds)
    rng = config.seed if rng is None else rng
    est = _estimator(template, config, rng).fit(setpoint - i_trace.values, o_trace.values)
    return est.coef_


def true_coefficients(model: NcsModel) -> np.ndarray:
    g = ModelTemplate.plant().from_tf(model.plant)
    c = ModelTemplate.pi_controller().from_tf(model.controller)
    return np.concatenate([g, c])


def run_seeds(master_seed: int, rate: float, run: int) -> list[np.random.SeedSequence]:
    """Loss, plant-BSA and controller-BSA seeds for one run."""
    key = int(round(rate * 1_000_000))
    return np.random.SeedSequence([int(master_seed), key, int(run)]).spawn(3)


@dataclass
class IdentificationResult:
    loss_rate: float
    estimates: np.ndarray  # (runs, 6) in NAMES order
    truth: Optional[np.ndarray] = None
    failures: int = 0
    stats: dict = field(init=False)
    error_norms_plant: Optional[np.ndarray] = field(init=False)
    error_norms_controller: Optional[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=float).reshape(-1, len(NAMES))
        self.stats = {name: describe(self.estimates[:, j]) for j, name in enumerate(NAMES)}
        if self.truth is None:
            self.error_norms_plant = self.error_norms_controller = None
        else:
            self.truth = np.asarray(self.truth, dtype=float)
            err = self.truth - self.estimates
            self.error_norms_plant = np.linalg.norm(err[:, :4], axis=1)
            self.error_norms_controller = np.linalg.norm(err[:, 4:], axis=1)

    @property
    def runs(self) -> int:
        return self.estimates.shape[0]

    def mean(self, which: str = "all") -> np.ndarray:
        m = self.estimates.mean(axis=0)
        return {"all": m, "plant": m[:4], "controller": m[4:]}[which]

    def std(self) -> np.ndarray:
        return np.array([self.stats[n].std for n in NAMES], dtype=float)

    def to_dict(self) -> dict:
        d = {
            "loss_rate": self.loss_rate,
            "runs": self.runs,
            "failures": self.failures,
            "statistics": {n: self.stats[n].to_dict() for n in NAMES},
            "estimates": self.estimates.tolist(),
        }
        if self.truth is not None:
            d["error_norms"] = {
                "plant": self.error_norms_plant.tolist(),
                "controller": self.error_norms_controller.tolist(),
            }
            d["mean_error_norm"] = {
                "plant": float(np.mean(self.error_norms_plant)),
                "controller": float(np.mean(self.error_norms_controller)),
            }
        return d

    @classmethod
    def from_dict(cls, d: dict, truth: Optional[Sequence[float]] = None) -> "IdentificationResult":
        """Rebuild (and re-aggregate) from a stored report entry."""
        return cls(float(d["loss_rate"]), np.asarray(d["estimates"], dtype=float),
                   None if truth is None else np.asarray(truth, dtype=float), int(d.get("failures", 0)))


def _one_run(args):
    model, rate, seed, run, duration, plant_cfg, ctrl_cfg, loop = args
    loss_seq, plant_seq, ctrl_seq = run_seeds(seed, rate, run)
    loss_seed = int(loss_seq.generate_state(1)[0])
    i_trace, o_trace = eavesdrop(loop, LossModel(rate, loss_seed))
    g = identify_plant(i_trace, o_trace, config=plant_cfg, rng=np.random.default_rng(plant_seq))
    c = identify_controller(o_trace, i_trace, config=ctrl_cfg, setpoint=model.setpoint,
                            rng=np.random.default_rng(ctrl_seq))
    return np.concatenate([g, c])


def batch_identify(model: NcsModel, loss_rates: Iterable[float], runs_per_rate: int,
                   plant_config: Optional[BsaConfig] = None, controller_config: Optional[BsaConfig] = None,
                   *, seed: int = 0, jobs: int = 1, duration: float = CAPTURE_SECONDS
                   ) -> dict[float, IdentificationResult]:
    """Capture, identify both devices, and aggregate, for every loss rate.

    Every run gets its own capture losses and BSA streams, derived from
    ``(seed, rate, run)``, so results do not depend on ``jobs``. With a
    single run per rate the dispersion statistics are reported as ``None``.
    """
    if runs_per_rate < 1:
        raise ValueError("runs_per_rate must be >= 1")
    plant_config = plant_config or BsaConfig(iterations=800)
    controller_config = controller_config or BsaConfig(iterations=600)
    loop = run_loop(model, duration)
    truth = true_coefficients(model)
    rates = [float(r) for r in loss_rates]
    tasks = [(model, rate, seed, run, duration, plant_config, controller_config, loop)
             for rate in rates for run in range(runs_per_rate)]

    outcomes: list = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_one_run, t) for t in tasks]
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - a failed run is data
                    log.warning("identification run failed: %s", exc)
                    outcomes.append(None)
    else:
        for t in tasks:
            try:
                outcomes.append(_one_run(t))
            except Exception as exc:  # noqa: BLE001
                log.warning("identification run failed: %s", exc)
                outcomes.append(None)

    results = {}
    for idx, rate in enumerate(rates):
        chunk = outcomes[idx * runs_per_rate:(idx + 1) * runs_per_rate]
        good = [o for o in chunk if o is not None]
        failures = len(chunk) - len(good)
        if failures > MAX_FAILURE_FRACTION * runs_per_rate:
            raise BatchError(f"{failures}/{runs_per_rate} runs failed at loss rate {rate}")
        results[rate] = IdentificationResult(rate, np.array(good), truth, failures)
    return results


def report(results: dict[float, IdentificationResult], truth: Optional[Sequence[float]] = None) -> dict:
    """Table-shaped JSON document: statistics per rate and coefficient plus raw estimates."""
    doc = {"coefficients": list(NAMES), "rates": [results[r].to_dict() for r in sorted(results)]}
    if truth is not None:
        doc["truth"] = dict(zip(NAMES, map(float, truth)))
    return doc


def results_from_report(doc: dict) -> dict[float, IdentificationResult]:
    truth = None
    if "truth" in doc:
        truth = [doc["truth"][n] for n in NAMES]
    return {float(e["loss_rate"]): IdentificationResult.from_dict(e, truth) for e in doc["rates"]}


def write_histogram_csv(path, values: Sequence[float], width: float = 0.02, upper: float = 1.0) -> int:
    """Write ``bin_low,bin_high,count`` rows; returns the overflow count."""
    rows, overflow = histogram(values, width, upper)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in rows:
            w.writerow([f"{lo:.2f}", f"{hi:.2f}", c])
    return overflow


__all__ = [
    "BatchError", "CoefficientStats", "IdentificationResult", "NAMES", "batch_identify",
    "identify_controller", "identify_plant", "report", "results_from_report", "true_coefficients",
    "write_histogram_csv",
]
