"""Command-line harness: ``simulate``, ``identify``, ``attack`` and ``pipeline``.

Exit codes: 0 success, 1 runtime failure (divergence, batch failure), 2
usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import sklearn

from . import __version__
from .attack import (
    AttackDesignError, AttackPlan, design_ess_gain, ess_attack_function, design_overshoot_gain, evaluate_attack,
)
from .config import ConfigError, ExperimentConfig
from .lti import DivergenceError, NotSettledError, TransferFunction, step_metrics
from .netsim import LossModel, eavesdrop, run_loop, write_trace_csv
from .sysid import (
    BatchError, IdentificationResult, batch_identify, report, results_from_report,
    true_coefficients, write_histogram_csv,
)

log = logging.getLogger("covert_ncs")


class UsageError(Exception):
    pass


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def _metrics_dict(m) -> dict:
    return {"final_value": m.final_value, "peak_value": m.peak_value, "peak_index": m.peak_index,
            "overshoot_pct": m.overshoot_pct, "steady_state_error_pct": m.steady_state_error_pct}


def cmd_simulate(cfg: ExperimentConfig, out: Path, plan: Optional[AttackPlan] = None,
                 mitm_side: str = "forward", loss_rate: float = 0.0) -> dict:
    """Write ``trace.csv`` and ``metrics.json`` for one closed-loop run."""
    model = cfg.model()
    mitm = plan.designed_M if plan else None
    run = run_loop(model, cfg.horizon, mitm, mitm_side)
    lost_fwd = lost_fb = None
    if loss_rate > 0:
        i_trace, o_trace = eavesdrop(run, LossModel(loss_rate, cfg.seed))
        lost_fwd, lost_fb = i_trace.lost, o_trace.lost
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", run, lost_fwd, lost_fb)
    doc = {"attack": plan.to_dict() if plan else None, "mitm_side": mitm_side}
    try:
        doc["metrics"] = _metrics_dict(step_metrics(run.y.values, model.setpoint))
    except NotSettledError as exc:
        doc["metrics"] = None
        doc["error"] = str(exc)
    _write_json(out / "metrics.json", doc)
    return doc


def cmd_identify(cfg: ExperimentConfig, out: Path) -> dict[float, IdentificationResult]:
    """Batch identification; writes ``identification.json`` and histogram CSVs."""
    model = cfg.model()
    results = batch_identify(model, cfg.loss_rates, cfg.runs_per_rate, cfg.plant_bsa(), cfg.controller_bsa(),
                             seed=cfg.seed, jobs=cfg.jobs, duration=cfg.capture_duration)
    truth = true_coefficients(model)
    doc = report(results, truth)
    hist_dir = out / "histograms"
    hist_dir.mkdir(parents=True, exist_ok=True)
    overflow = {}
    for rate, res in sorted(results.items()):
        tag = f"{rate:g}"
        overflow[tag] = {
            "plant": write_histogram_csv(hist_dir / f"error_plant_loss{tag}.csv", res.error_norms_plant),
            "controller": write_histogram_csv(hist_dir / f"error_controller_loss{tag}.csv",
                                              res.error_norms_controller),
        }
    doc["histogram_overflow"] = overflow
    _write_json(out / "identification.json", doc)
    return results


def design_table(cfg: ExperimentConfig, results: dict[float, IdentificationResult]) -> dict:
    """Design both attacks from each rate's mean estimates and evaluate them on the real loop."""
    model = cfg.model()
    rows = []
    for rate in sorted(results):
        mean = results[rate].mean()
        est_G = TransferFunction([mean[0], mean[1]], [1.0, mean[2], mean[3]])
        est_C = TransferFunction([mean[4], mean[5]], [1.0, -1.0])
        row = {"loss_rate": rate}
        for kind, design, target in (("overshoot", design_overshoot_gain, cfg.overshoot_pct),
                                     ("steady_state_error", design_ess_gain, cfg.ess_pct)):
            cell = {"plan": None, "error": None}
            try:
                plan = design(est_C, est_G, target, horizon=cfg.horizon, sample_rate=cfg.sample_rate)
                evaluate_attack(plan, model, cfg.horizon)
                cell["plan"] = plan.to_dict()
            except (AttackDesignError, DivergenceError, NotSettledError, ValueError) as exc:
                cell["error"] = f"{type(exc).__name__}: {exc}"
            row[kind] = cell
        rows.append(row)
    return {"targets": {"overshoot_pct": cfg.overshoot_pct, "ess_pct": cfg.ess_pct}, "rates": rows}


def cmd_attack(cfg: ExperimentConfig, report_path: Path, out: Path) -> dict:
    try:
        doc = json.loads(Path(report_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read identification report {report_path}: {exc}") from exc
    table = design_table(cfg, results_from_report(doc))
    _write_json(out / "attacks.json", table)
    return table


def cmd_pipeline(cfg: ExperimentConfig, out: Path) -> dict:
    stage = "identify"
    try:
        results = cmd_identify(cfg, out)
        stage = "attack"
        table = design_table(cfg, results)
        _write_json(out / "attacks.json", table)
        stage = "simulate"
        cmd_simulate(cfg, out / "baseline")
        for row in table["rates"]:
            for kind in ("overshoot", "steady_state_error"):
                if row[kind]["plan"]:
                    plan = AttackPlan.from_dict(row[kind]["plan"])
                    cmd_simulate(cfg, out / f"attack_{kind}_loss{row['loss_rate']:g}", plan)
    except Exception as exc:
        raise RuntimeError(f"pipeline failed in stage '{stage}': {exc}") from exc
    manifest = {
        "config_sha256": cfg.digest(),
        "config": cfg.to_flat(),
        "seed": cfg.seed,
        "created": datetime.now(timezone.utc).isoformat(),
        "versions": {"covert_ncs": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scikit-learn": sklearn.__version__},
    }
    _write_json(out / "manifest.json", manifest)
    return manifest


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config with dotted keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--out", type=Path)
    common.add_argument("--runs", type=int, help="override identify.runs_per_rate")
    common.add_argument("--loss-rates", help="comma-separated loss rates, e.g. 0,0.2")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="covert-ncs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="simulate the loop, optionally under attack")
    grp = sim.add_mutually_exclusive_group()
    grp.add_argument("--gain", type=float, help="pure-gain attack M(z)=K")
    grp.add_argument("--ess-gain", type=float, help="M(z)=K(z-1)/(z-0.94)")
    grp.add_argument("--plan", type=Path, help="attack plan JSON")
    sim.add_argument("--mitm-side", choices=("forward", "feedback"), default="forward")
    sim.add_argument("--loss-rate", type=float, default=0.0, help="record eavesdropper loss masks")
    sub.add_parser("identify", parents=[common], help="batch System Identification attack")
    att = sub.add_parser("attack", parents=[common], help="design and evaluate attacks from a report")
    att.add_argument("--report", type=Path, required=True, help="identification.json")
    sub.add_parser("pipeline", parents=[common], help="identify, design, evaluate, simulate")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    flat = cfg.to_flat()
    if args.seed is not None:
        flat["experiment.seed"] = args.seed
    if args.jobs is not None:
        flat["experiment.jobs"] = args.jobs
    if args.out is not None:
        flat["experiment.out_dir"] = str(args.out)
    if args.runs is not None:
        flat["identify.runs_per_rate"] = args.runs
    if args.loss_rates:
        try:
            flat["identify.loss_rates"] = [float(x) for x in args.loss_rates.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --loss-rates: {exc}") from exc
    return ExperimentConfig.from_flat(flat)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        out = Path(cfg.out_dir)
        if args.command == "simulate":
            plan = None
            if args.plan:
                try:
                    plan = AttackPlan.from_dict(json.loads(args.plan.read_text()))
                except (OSError, ValueError, KeyError) as exc:
                    raise UsageError(f"cannot read plan {args.plan}: {exc}") from exc
            elif args.gain is not None:
                plan = AttackPlan("overshoot", float("nan"), args.gain, TransferFunction.gain(args.gain), {})
            elif args.ess_gain is not None:
                plan = AttackPlan("steady_state_error", float("nan"), args.ess_gain,
                                  ess_attack_function(args.ess_gain), {})
            doc = cmd_simulate(cfg, out, plan, args.mitm_side, args.loss_rate)
            print(json.dumps(doc["metrics"]))
        elif args.command == "identify":
            cmd_identify(cfg, out)
            print(out / "identification.json")
        elif args.command == "attack":
            cmd_attack(cfg, args.report, out)
            print(out / "attacks.json")
        elif args.command == "pipeline":
            cmd_pipeline(cfg, out)
            print(out / "manifest.json")
    except (ConfigError, UsageError) as exc:
        print(f"covert-ncs: error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, BatchError, RuntimeError, ArithmeticError) as exc:
        print(f"covert-ncs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
