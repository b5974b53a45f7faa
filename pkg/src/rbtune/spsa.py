"""SPSA gate tuning driven by Bayesian RB estimates with prior reuse.

Each iteration perturbs the controls along a random +-1 direction, estimates
the objective there starting from the current posterior diffused by the
Lipschitz corner mixture, and moves the controls either by a clipped SPSA
step or, when the estimated difference is not resolved, by one perturbation
step toward the better point.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .clifford import GroupTable, clifford_group
from .reuse import LipschitzBudget, corner_set, diffuse
from .rb import DeviceModel, LengthSchedule, run_shot, sample_sequence
from .rng import RngStreams
from .smc import (
    InferenceFailure,
    ParticleEnsemble,
    ParticleFilter,
    PriorSpec,
    credible_interval_F,
    posterior_F,
)

logger = logging.getLogger(__name__)

BRANCHES = ("spsa-step", "fallback-forward", "fallback-backward")
GATES = ("variance", "std")
GRADIENTS = ("normalized", "literal")
CARRY_MEANS = ("diffused", "preserved")


@dataclass(frozen=True)
class SpsaConfig:
    """Optimizer settings.

    ``step = a / (1 + i^s)`` is the perturbation size and ``gain = b / (1 + i^t)``
    the learning rate at iteration ``i``. ``gate`` chooses whether the
    estimated difference is compared against the posterior variance or
    standard deviation of F at the perturbed point. ``gradient="normalized"``
    divides the difference by the perturbation size (the usual SPSA gradient);
    ``"literal"`` uses the raw difference. After a move the objective at the
    new point is the perturbed-point estimate (``carry_mean="preserved"``) or
    the mean of the re-diffused ensemble (``"diffused"``); ``refresh`` measures
    again at the new point whenever the carried std exceeds ``sigma_req``.
    """

    a: float = 0.05
    b: float = 0.05
    s: float = 0.602
    t: float = 0.602
    max_step: float = 0.1
    sigma_req: float = 0.005
    F_target: float = 0.999
    max_iters: int = 50
    shots_cap_per_point: int = 500
    gate: str = "variance"
    gradient: str = "normalized"
    refresh: bool = False
    carry_mean: str = "preserved"

    def __post_init__(self):
        for name in ("a", "b", "s", "t", "max_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.sigma_req < 0.5:
            raise ValueError("sigma_req must be in (0, 0.5)")
        if not 0 < self.F_target <= 1:
            raise ValueError("F_target must be in (0, 1]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.shots_cap_per_point < 1:
            raise ValueError("shots_cap_per_point must be >= 1")
        if self.gate not in GATES:
            raise ValueError(f"gate must be one of {GATES}")
        if self.gradient not in GRADIENTS:
            raise ValueError(f"gradient must be one of {GRADIENTS}")
        if self.carry_mean not in CARRY_MEANS:
            raise ValueError(f"carry_mean must be one of {CARRY_MEANS}")

    def step(self, i: int) -> float:
        return self.a / (1.0 + i**self.s)

    def gain(self, i: int) -> float:
        return self.b / (1.0 + i**self.t)


@dataclass
class IterationRecord:
    iteration: int
    theta: list
    perturbation: list
    F_hat_theta: float
    F_hat_plus: float
    var_plus: float
    branch: str
    theta_new: list
    F_hat_new: float
    var_new: float
    ci_low: float
    ci_high: float
    shots: int
    sequences: int
    true_F: float = float("nan")
    true_target_agf: float = float("nan")


@dataclass
class TuneTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_rows(self) -> list:
        rows = []
        for r in self.records:
            row = asdict(r)
            for key in ("theta", "perturbation", "theta_new"):
                vals = row.pop(key)
                for k, v in enumerate(vals):
                    row[f"{key}_{k}"] = v
            rows.append(row)
        return rows

    def to_csv(self, path) -> None:
        rows = self.to_rows()
        header = list(rows[0]) if rows else [f.name for f in IterationRecord.__dataclass_fields__.values()]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row.values()])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump([asdict(r) for r in self.records], fh, indent=1)


@dataclass
class Estimate:
    ensemble: ParticleEnsemble
    F_mean: float
    F_var: float
    shots: int
    reinitialized: int = 0


@dataclass
class TuneResult:
    theta: np.ndarray
    F_hat: float
    F_var: float
    trace: TuneTrace
    converged: bool
    total_shots: int
    initial_shots: int
    ensemble: ParticleEnsemble
    initial_ensemble: ParticleEnsemble


def overrotation_factory(depolarizing_strength: float = 0.005) -> Callable:
    def factory(theta) -> DeviceModel:
        return DeviceModel.overrotated(float(np.atleast_1d(theta)[0]), depolarizing_strength)
    return factory


@dataclass
class Tuner:
    """Holds everything one tuning run needs; all randomness comes from ``streams``."""

    cfg: SpsaConfig
    budget: LipschitzBudget
    device_factory: Callable
    streams: RngStreams
    prior: PriorSpec = field(default_factory=PriorSpec)
    n_particles: int = 10_000
    lw_a: float = 0.98
    resample_threshold: float = 1.0 / 256.0
    diffusion_mode: str = "sample"
    interleaved: bool = True
    convention: str = "decay"
    table: GroupTable = field(default_factory=clifford_group)
    schedule: LengthSchedule = field(default_factory=LengthSchedule)
    shot_log: list | None = None
    oracle: Callable | None = None
    total_shots: int = 0
    events: list = field(default_factory=list)

    def fresh_prior(self) -> ParticleEnsemble:
        return self.prior.sample(self.n_particles, self.streams["prior"])

    def estimate_at(self, theta, prior: ParticleEnsemble) -> Estimate:
        """Collect single shots at ``theta`` until std(F) <= sigma_req or the cap is hit."""
        device = self.device_factory(theta)
        pf = ParticleFilter(prior, self.streams["resampling"], self.lw_a,
                            self.resample_threshold, convention=self.convention)
        shots_rng = self.streams["device-shots"]
        target_var = self.cfg.sigma_req**2
        mean, var = pf.posterior_F()
        shots = reinit = 0
        while var > target_var and shots < self.cfg.shots_cap_per_point:
            m = self.schedule.next(pf.ensemble)
            seq = sample_sequence(self.table, m, self.interleaved, shots_rng)
            rec = run_shot(device, seq, shots_rng, self.table, "device-shots",
                           self.total_shots)
            shots += 1
            self.total_shots += 1
            if self.shot_log is not None:
                self.shot_log.append(rec)
            try:
                pf.update(m, rec.outcome)
            except InferenceFailure:
                reinit += 1
                self.events.append({"event": "reinitialized", "shot": self.total_shots})
                logger.warning("zero total weight at shot %d; restarting from the prior",
                               self.total_shots)
                pf.ensemble = self.fresh_prior()
            mean, var = pf.posterior_F()
        return Estimate(pf.ensemble, mean, var, shots, reinit)

    def _diffuse(self, ensemble: ParticleEnsemble, displacement) -> ParticleEnsemble:
        corners = corner_set(self.budget, displacement)
        return diffuse(ensemble, corners, self.diffusion_mode, self.streams["diffusion"]).ensemble

    def spsa_iteration(self, state: dict) -> dict:
        cfg = self.cfg
        i = state["iteration"] + 1
        theta = state["theta"]
        delta = self.streams["spsa-perturbations"].choice([-1.0, 1.0], size=theta.size)
        step, gain = cfg.step(i), cfg.gain(i)
        dtheta = step * delta
        plus = self.estimate_at(theta + dtheta, self._diffuse(state["ensemble"], dtheta))
        diff = plus.F_mean - state["F_hat"]
        grad = diff / step if cfg.gradient == "normalized" else diff
        u = gain * delta * grad
        if np.max(np.abs(u)) > cfg.max_step:
            u = u * (cfg.max_step / np.max(np.abs(u)))
        threshold = plus.F_var if cfg.gate == "variance" else np.sqrt(plus.F_var)
        if abs(diff) >= threshold:
            branch, theta_new = "spsa-step", theta + u
        elif plus.F_mean < state["F_hat"]:
            branch, theta_new = "fallback-backward", theta - dtheta
        else:
            branch, theta_new = "fallback-forward", theta + dtheta

        ensemble = self._diffuse(plus.ensemble, theta_new - (theta + dtheta))
        F_new, var_new = posterior_F(ensemble, convention=self.convention)
        if cfg.carry_mean == "preserved":
            F_new = plus.F_mean
        if cfg.refresh and np.sqrt(var_new) > cfg.sigma_req:
            refreshed = self.estimate_at(theta_new, ensemble)
            ensemble, F_new, var_new = refreshed.ensemble, refreshed.F_mean, refreshed.F_var

        lo, hi = credible_interval_F(ensemble, 0.7, convention=self.convention)
        true_F = true_agf = float("nan")
        if self.oracle is not None:
            true_F, true_agf = self.oracle(theta_new)
        record = IterationRecord(
            iteration=i,
            theta=[float(x) for x in theta],
            perturbation=[float(x) for x in delta],
            F_hat_theta=float(state["F_hat"]),
            F_hat_plus=float(plus.F_mean),
            var_plus=float(plus.F_var),
            branch=branch,
            theta_new=[float(x) for x in theta_new],
            F_hat_new=float(F_new),
            var_new=float(var_new),
            ci_low=lo,
            ci_high=hi,
            shots=self.total_shots,
            sequences=self.total_shots,
            true_F=float(true_F),
            true_target_agf=float(true_agf),
        )
        state["trace"].records.append(record)
        return {**state, "iteration": i, "theta": theta_new, "ensemble": ensemble,
                "F_hat": F_new, "F_var": var_new}

    def tune(self, theta0) -> TuneResult:
        theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
        init = self.estimate_at(theta0, self.fresh_prior())
        initial_shots = self.total_shots
        state = {"iteration": 0, "theta": theta0, "ensemble": init.ensemble,
                 "F_hat": init.F_mean, "F_var": init.F_var, "trace": TuneTrace()}
        while state["F_hat"] <= self.cfg.F_target and state["iteration"] < self.cfg.max_iters:
            state = self.spsa_iteration(state)
        converged = bool(state["F_hat"] > self.cfg.F_target)
        return TuneResult(state["theta"], state["F_hat"], state["F_var"], state["trace"],
                          converged, self.total_shots, initial_shots, state["ensemble"],
                          init.ensemble)
