"""Tabular data behind the standard plots (CSV only, no rendering)."""

from __future__ import annotations

import csv

import numpy as np

from .clifford import GroupTable, clifford_group
from .rb import (
    DEFAULT_DEPOLARIZING,
    DeviceModel,
    exact_average_survival,
    run_shot,
    sample_sequence,
    target_agf,
    true_rb_params,
)
from .smc import fidelity_from_p

FIGURES = ("objective-curve", "rb-params-curve", "survival-decay", "tuning-trace")
THETA_GRID = np.round(np.arange(-0.5, 0.5 + 1e-9, 0.01), 10)
DECAY_LENGTHS = (1, 2, 4, 8, 16, 32, 64, 128)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def objective_curve(thetas=THETA_GRID, depolarizing_strength=DEFAULT_DEPOLARIZING,
                    table: GroupTable | None = None) -> list:
    """Rows of (theta, F, target AGF)."""
    table = table or clifford_group()
    rows = []
    for th in thetas:
        dev = DeviceModel.overrotated(float(th), depolarizing_strength)
        F = float(fidelity_from_p(true_rb_params(dev, table).p))
        rows.append((float(th), F, target_agf(dev)))
    return rows


def rb_params_curve(thetas=THETA_GRID, depolarizing_strength=DEFAULT_DEPOLARIZING,
                    table: GroupTable | None = None) -> list:
    """Rows of (theta, p, A, B) for interleaved RB."""
    table = table or clifford_group()
    rows = []
    for th in thetas:
        prm = true_rb_params(DeviceModel.overrotated(float(th), depolarizing_strength), table)
        rows.append((float(th), prm.p, prm.A, prm.B))
    return rows


def survival_decay(rng: np.random.Generator, theta: float = 0.04, shots_per_length: int = 20,
                   lengths=DECAY_LENGTHS, depolarizing_strength=DEFAULT_DEPOLARIZING,
                   table: GroupTable | None = None) -> list:
    """Rows of (m, shots, successes, empirical mean, exact mean, A p^m + B).

    Each shot uses a freshly drawn interleaved sequence. The exact mean
    averages over every sequence of length m.
    """
    table = table or clifford_group()
    dev = DeviceModel.overrotated(theta, depolarizing_strength)
    prm = true_rb_params(dev, table)
    rows = []
    for m in lengths:
        hits = sum(run_shot(dev, sample_sequence(table, m, True, rng), rng, table).outcome
                   for _ in range(shots_per_length))
        rows.append((m, shots_per_length, hits, hits / shots_per_length,
                     exact_average_survival(dev, m, True, table), float(prm.survival(m))))
    return rows


def tuning_trace_rows(trace) -> list:
    """Rows of (iteration, theta_0, F_hat, infidelity, 70% interval of the infidelity, true infidelity, bits)."""
    rows = []
    for r in trace.records:
        rows.append((r.iteration, r.theta_new[0], r.F_hat_new, 1.0 - r.F_hat_new,
                     1.0 - r.ci_high, 1.0 - r.ci_low, 1.0 - r.true_F, r.shots))
    return rows


HEADERS = {
    "objective-curve": ("theta", "F", "target_agf"),
    "rb-params-curve": ("theta", "p", "A", "B"),
    "survival-decay": ("m", "shots", "successes", "empirical_mean", "exact_mean", "model_mean"),
    "tuning-trace": ("iteration", "theta", "F_hat", "infidelity_hat", "infidelity_ci70_low",
                     "infidelity_ci70_high", "true_infidelity", "bits"),
}
