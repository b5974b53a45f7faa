"""Command-line entry point: ``run``, ``figures`` and ``dump-group``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import figures
from .clifford import ORDERINGS, clifford_group, n_bar
from .config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, load_config
from .rb import DeviceModel, target_agf, true_objective
from .reuse import LipschitzBudget
from .rng import RngStreams
from .smc import PriorSpec
from .spsa import SpsaConfig, Tuner, TuneResult, overrotation_factory

logger = logging.getLogger("rbtune")

EXIT_CONVERGED, EXIT_CONFIG_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def make_oracle(depolarizing_strength: float):
    def oracle(theta):
        dev = DeviceModel.overrotated(float(np.atleast_1d(theta)[0]), depolarizing_strength)
        return true_objective(dev), target_agf(dev)
    return oracle


def build_tuner(cfg: ExperimentConfig) -> Tuner:
    sp, inf, reuse = cfg.spsa, cfg.inference, cfg.reuse
    spsa_cfg = SpsaConfig(a=sp.a, b=sp.b, s=sp.s, t=sp.t, max_step=sp.max_step,
                          sigma_req=sp.sigma_req, F_target=sp.F_target,
                          max_iters=sp.max_iters, shots_cap_per_point=sp.shots_cap,
                          gate=sp.gate, gradient=sp.gradient, refresh=sp.refresh,
                          carry_mean=sp.carry_mean)
    table = clifford_group()
    if reuse.lipschitz_mode == "channel-derived":
        budget = LipschitzBudget.channel_derived(reuse.L_value, n_bar(table))
    else:
        budget = LipschitzBudget.objective_direct(reuse.L_value)
    return Tuner(
        cfg=spsa_cfg,
        budget=budget,
        device_factory=overrotation_factory(cfg.device.depolarizing_strength),
        streams=RngStreams(cfg.rng_seed),
        prior=PriorSpec(),
        n_particles=inf.N_p,
        lw_a=inf.lw_a,
        resample_threshold=inf.resample_threshold,
        diffusion_mode=reuse.diffusion_mode,
        convention=inf.fidelity_convention,
        table=table,
        oracle=make_oracle(cfg.device.depolarizing_strength),
    )


def run_tuning(cfg: ExperimentConfig) -> tuple:
    tuner = build_tuner(cfg)
    result = tuner.tune(cfg.device.theta0)
    return tuner, result


def summarize(cfg: ExperimentConfig, tuner: Tuner, result: TuneResult) -> dict:
    true_F, true_agf = tuner.oracle(result.theta)
    start_F, start_agf = tuner.oracle(cfg.device.theta0)
    return {
        "theta_final": [float(x) for x in result.theta],
        "F_hat": float(result.F_hat),
        "F_std": float(np.sqrt(result.F_var)),
        "true_F": float(true_F),
        "true_target_agf": float(true_agf),
        "initial_true_F": float(start_F),
        "initial_true_target_agf": float(start_agf),
        "total_bits": int(result.total_shots),
        "initial_bits": int(result.initial_shots),
        "iterations": len(result.trace),
        "converged": bool(result.converged),
        "events": tuner.events,
        "rng_seed": cfg.rng_seed,
    }


def write_run(cfg: ExperimentConfig, out: Path, tuner: Tuner, result: TuneResult) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-echo.json").write_text(cfg.to_json())
    result.trace.to_csv(out / "trace.csv")
    result.trace.to_json(out / "trace.json")
    snaps = out / "ensembles"
    snaps.mkdir(exist_ok=True)
    result.initial_ensemble.to_csv(snaps / "initial.csv")
    result.ensemble.to_csv(snaps / "final.csv")
    summary = summarize(cfg, tuner, result)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def run_experiment(config_path) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out = output_dir(cfg)
    tuner, result = run_tuning(cfg)
    summary = write_run(cfg, out, tuner, result)
    logger.info("theta=%s F_hat=%.4f+-%.4f bits=%d iterations=%d -> %s",
                summary["theta_final"], summary["F_hat"], summary["F_std"],
                summary["total_bits"], summary["iterations"], out)
    return EXIT_CONVERGED if result.converged else EXIT_NOT_CONVERGED


def emit_figure_data(cfg: ExperimentConfig, which: str, out: Path) -> Path:
    if which not in figures.FIGURES:
        raise ValueError(f"unknown figure {which!r}; expected one of {figures.FIGURES}")
    strength = cfg.device.depolarizing_strength
    if which == "objective-curve":
        rows = figures.objective_curve(depolarizing_strength=strength)
    elif which == "rb-params-curve":
        rows = figures.rb_params_curve(depolarizing_strength=strength)
    elif which == "survival-decay":
        rng = RngStreams(cfg.rng_seed)["device-shots"]
        rows = figures.survival_decay(rng, depolarizing_strength=strength)
    else:
        _, result = run_tuning(cfg)
        rows = figures.tuning_trace_rows(result.trace)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{which}.csv"
    figures.write_rows(path, figures.HEADERS[which], rows)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbtune",
                                     description="Bayesian RB-driven gate tuning simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one tuning experiment")
    run.add_argument("config")
    fig = sub.add_parser("figures", help="write CSV data for one figure")
    fig.add_argument("config")
    fig.add_argument("--which", required=True, choices=figures.FIGURES)
    dump = sub.add_parser("dump-group", help="print the generator-word table as JSON")
    dump.add_argument("--ordering", default="shortest", choices=ORDERINGS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run_experiment(args.config)
    if args.command == "figures":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        print(emit_figure_data(cfg, args.which, output_dir(cfg)))
        return 0
    table = clifford_group(args.ordering)
    print(table.to_json(indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
