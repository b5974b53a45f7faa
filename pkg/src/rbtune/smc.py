"""Particle-filter inference of randomized benchmarking parameters (p, A, B).

Single-shot outcomes are modelled as Bernoulli draws with success probability
``clip(A p^m + B, 0, 1)`` for sequence length ``m``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

PARAM_NAMES = ("p", "A", "B")
LOWER = np.array([0.0, -1.0, 0.0])
UPPER = np.array([1.0, 1.0, 1.0])

FIDELITY_CONVENTIONS = ("decay", "alt")


class InferenceFailure(RuntimeError):
    """All particles assigned zero likelihood to an observation."""


@dataclass(frozen=True)
class RBParams:
    p: float
    A: float
    B: float

    def __post_init__(self):
        for name, lo, hi in zip(PARAM_NAMES, LOWER, UPPER):
            v = getattr(self, name)
            if not lo - 1e-12 <= v <= hi + 1e-12:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.A, self.B])

    def survival(self, m) -> np.ndarray:
        return np.clip(self.A * self.p ** np.asarray(m) + self.B, 0.0, 1.0)


def fidelity_from_p(p, d: int = 2, convention: str = "decay"):
    """Invert the decay parameter to an average gate fidelity.

    ``"decay"`` uses F = ((d - 1) p + 1) / d. ``"alt"`` uses F = (d p + 1) / (d + 1),
    kept only for comparison runs.
    """
    p = np.asarray(p)
    if convention == "decay":
        return ((d - 1) * p + 1) / d
    if convention == "alt":
        return (d * p + 1) / (d + 1)
    raise ValueError(f"unknown fidelity convention {convention!r}")


def p_from_fidelity(F, d: int = 2):
    return (d * np.asarray(F) - 1) / (d - 1)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Weighted point-mass approximation; rows of ``particles`` are (p, A, B)."""

    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.array(self.particles, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 2 or x.shape[1] != 3:
            raise ValueError(f"particles must have shape (N, 3), got {x.shape}")
        if x.shape[0] < 2:
            raise ValueError("ensemble needs at least 2 particles")
        if w.shape != (x.shape[0],):
            raise ValueError("weights must have one entry per particle")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "particles", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, particles) -> ParticleEnsemble:
        n = len(particles)
        return cls(particles, np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.particles.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def cov(self) -> np.ndarray:
        mu = self.mean()
        dx = self.particles - mu
        c = (self.weights[:, None] * dx).T @ dx
        return (c + c.T) / 2

    def in_bounds(self) -> bool:
        return bool(np.all(self.particles >= LOWER) and np.all(self.particles <= UPPER))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([*PARAM_NAMES, "weight"])
            for row, w in zip(self.particles, self.weights):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])


def read_ensemble_csv(path) -> ParticleEnsemble:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    w = data[:, 3]
    return ParticleEnsemble(data[:, :3], w / w.sum())


@dataclass(frozen=True)
class PriorSpec:
    """p, A ~ U[low, high]; B ~ N(b_mean, b_std^2) truncated to [0, 1]."""

    p_low: float = 0.0
    p_high: float = 1.0
    A_low: float = 0.0
    A_high: float = 1.0
    b_mean: float = 0.5
    b_std: float = 0.05

    def sample(self, n: int, rng: np.random.Generator) -> ParticleEnsemble:
        p = rng.uniform(self.p_low, self.p_high, n)
        A = rng.uniform(self.A_low, self.A_high, n)
        lo, hi = (0.0 - self.b_mean) / self.b_std, (1.0 - self.b_mean) / self.b_std
        B = stats.truncnorm.rvs(lo, hi, loc=self.b_mean, scale=self.b_std, size=n,
                                random_state=rng)
        return ParticleEnsemble.uniform(np.column_stack([p, A, B]))


def survival_model(particles: np.ndarray, m) -> np.ndarray:
    p, A, B = particles[:, 0], particles[:, 1], particles[:, 2]
    return np.clip(A * p**m + B, 0.0, 1.0)


def likelihood(params: RBParams, m: int, outcome: int) -> float:
    """Pr(outcome | params, m) for a single shot."""
    if m < 1:
        raise ValueError("sequence length must be >= 1")
    q = float(params.survival(m))
    return q if outcome == 1 else 1.0 - q


def likelihoods(particles: np.ndarray, m: int, outcome: int) -> np.ndarray:
    q = survival_model(particles, m)
    return q if outcome == 1 else 1.0 - q


def bayes_update(ensemble: ParticleEnsemble, m: int, outcome: int) -> ParticleEnsemble:
    """Reweight by the single-shot likelihood and renormalise.

    Raises
    ------
    InferenceFailure
        If every particle has zero likelihood for the observation.
    """
    w = ensemble.weights * likelihoods(ensemble.particles, m, outcome)
    total = w.sum()
    if not total > 0.0 or not np.isfinite(total):
        raise InferenceFailure(f"total weight vanished after outcome {outcome} at m={m}")
    return ParticleEnsemble(ensemble.particles, w / total)


def effective_sample_size(ensemble: ParticleEnsemble) -> float:
    return 1.0 / float(np.sum(ensemble.weights**2))


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    # eigh tolerates singular covariances, e.g. after the posterior collapses
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def liu_west_resample(
    ensemble: ParticleEnsemble,
    a: float,
    rng: np.random.Generator,
    max_retries: int = 100,
) -> ParticleEnsemble:
    """Liu-West resampling.

    Ancestors are chosen in proportion to their weight and moved to
    ``a x + (1 - a) mu + N(0, (1 - a^2) Sigma)``, which keeps the first two
    moments of the ensemble in expectation. Draws outside the parameter box
    are redrawn up to ``max_retries`` times and clipped afterwards.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError(f"Liu-West a must be in (0, 1], got {a}")
    n = len(ensemble)
    x = ensemble.particles
    mu = ensemble.mean()
    root = _psd_sqrt((1.0 - a * a) * ensemble.cov())
    idx = rng.choice(n, size=n, p=ensemble.weights)
    centers = mu + a * (x[idx] - mu)
    new = centers + rng.standard_normal((n, 3)) @ root.T
    bad = np.flatnonzero(np.any((new < LOWER) | (new > UPPER), axis=1))
    for _ in range(max_retries):
        if bad.size == 0:
            break
        new[bad] = centers[bad] + rng.standard_normal((bad.size, 3)) @ root.T
        bad = bad[np.any((new[bad] < LOWER) | (new[bad] > UPPER), axis=1)]
    if bad.size:
        logger.debug("clipping %d Liu-West draws after %d retries", bad.size, max_retries)
        new = np.clip(new, LOWER, UPPER)
    return ParticleEnsemble.uniform(new)


def posterior_F(ensemble: ParticleEnsemble, d: int = 2, convention: str = "decay"):
    """Weighted mean and variance of the fidelity implied by each particle's p."""
    F = fidelity_from_p(ensemble.particles[:, 0], d, convention)
    mean = float(ensemble.weights @ F)
    var = float(ensemble.weights @ (F - mean) ** 2)
    return mean, max(var, 0.0)


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q) -> np.ndarray:
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cdf = np.cumsum(w) - 0.5 * w
    return np.interp(q, cdf, v)


def credible_interval_F(
    ensemble: ParticleEnsemble, level: float = 0.7, d: int = 2, convention: str = "decay"
) -> tuple:
    """Equal-tailed credible interval for F."""
    F = fidelity_from_p(ensemble.particles[:, 0], d, convention)
    lo, hi = weighted_quantile(F, ensemble.weights, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


@dataclass
class ParticleFilter:
    """Stateful wrapper running update / threshold-triggered Liu-West resampling."""

    ensemble: ParticleEnsemble
    rng: np.random.Generator
    lw_a: float = 0.98
    resample_threshold: float = 1.0 / 256.0
    d: int = 2
    convention: str = "decay"
    n_updates: int = 0
    n_resamples: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.ensemble)

    def update(self, m: int, outcome: int) -> None:
        self.ensemble = bayes_update(self.ensemble, m, outcome)
        self.n_updates += 1
        if effective_sample_size(self.ensemble) < self.resample_threshold * self.n_particles:
            self.ensemble = liu_west_resample(self.ensemble, self.lw_a, self.rng)
            self.n_resamples += 1

    def posterior_F(self):
        return posterior_F(self.ensemble, self.d, self.convention)
