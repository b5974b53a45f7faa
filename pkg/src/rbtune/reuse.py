"""Turning a posterior at controls theta into a prior at theta + dtheta.

If the target channel is L-Lipschitz in the trace distance, each RB parameter
moves by at most a known amount when the controls move by ``|dtheta|``. The
prior at the new point is the equal mixture of the old posterior shifted to
the 8 corners of that box, which keeps the mean and widens the support.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rb import DEFAULT_DEPOLARIZING, DeviceModel, true_objective
from .smc import LOWER, UPPER, ParticleEnsemble

logger = logging.getLogger(__name__)

LIPSCHITZ_MODES = ("channel-derived", "objective-direct")
DIFFUSION_MODES = ("replicate", "sample", "box")
DEFAULT_OBJECTIVE_LIPSCHITZ = 1.48
CLAMP_WARN_FRACTION = 0.01

_SIGNS = np.array([[sp, sa, sb] for sp in (1, -1) for sa in (1, -1) for sb in (1, -1)],
                  dtype=float)


@dataclass(frozen=True)
class LipschitzBudget:
    """Lipschitz constants for F, p and (A, B).

    ``channel-derived``: ``L`` bounds the target channel in trace distance,
    so F moves at rate (1 + n_bar) L. ``objective-direct``: ``L`` already bounds
    F (e.g. a numerically estimated constant) and n_bar is unused.
    In both modes p = (d F - 1)/(d - 1) moves at d/(d - 1) times the rate of F,
    and A, B use the same rate as F.
    """

    L: float
    n_bar: Fraction = Fraction(0)
    d: int = 2
    mode: str = "objective-direct"

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("Lipschitz constant must be >= 0")
        if self.mode not in LIPSCHITZ_MODES:
            raise ValueError(f"unknown Lipschitz mode {self.mode!r}")
        if self.d < 2:
            raise ValueError("dimension must be >= 2")

    @classmethod
    def channel_derived(cls, L: float, n_bar, d: int = 2) -> LipschitzBudget:
        return cls(L=L, n_bar=Fraction(n_bar), d=d, mode="channel-derived")

    @classmethod
    def objective_direct(cls, L_F: float = DEFAULT_OBJECTIVE_LIPSCHITZ, d: int = 2) -> LipschitzBudget:
        return cls(L=L_F, d=d, mode="objective-direct")

    @property
    def L_F(self) -> float:
        if self.mode == "channel-derived":
            return float((1 + self.n_bar) * Fraction(self.L))
        return float(self.L)

    @property
    def L_p(self) -> float:
        return self.d * self.L_F / (self.d - 1)

    @property
    def L_AB(self) -> float:
        return self.L_F

    @property
    def L_ref(self) -> float:
        """Rate for the reference channel alone (and hence A, B by the Hoelder bound)."""
        if self.mode == "channel-derived":
            return float(self.n_bar * Fraction(self.L))
        return self.L_F


@dataclass(frozen=True, eq=False)
class CornerSet:
    delta: float
    corners: np.ndarray

    @property
    def half_widths(self) -> np.ndarray:
        return np.abs(self.corners[0])


def corner_set(budget: LipschitzBudget, delta_theta) -> CornerSet:
    """The 8 sign combinations of (Delta L_p, Delta L_AB, Delta L_AB), Delta = |dtheta|."""
    delta = float(np.linalg.norm(np.atleast_1d(np.asarray(delta_theta, dtype=float))))
    half = delta * np.array([budget.L_p, budget.L_AB, budget.L_AB])
    corners = _SIGNS * half
    corners.setflags(write=False)
    return CornerSet(delta, corners)


@dataclass(frozen=True)
class DiffusionResult:
    ensemble: ParticleEnsemble
    clamped_fraction: float
    clamped_mass: float


def _clamp(particles: np.ndarray, weights: np.ndarray):
    out_of_box = np.any((particles < LOWER) | (particles > UPPER), axis=1)
    return (np.clip(particles, LOWER, UPPER), float(out_of_box.mean()),
            float(weights[out_of_box].sum()))


def diffuse(
    ensemble: ParticleEnsemble,
    corners: CornerSet,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
    *,
    downsample: bool = True,
    clamp: bool = True,
) -> DiffusionResult:
    """Mix the ensemble over the corner shifts.

    ``replicate`` forms the exact 8-component mixture (8N particles at weight
    w/8) and, unless ``downsample`` is False, draws N of them back
    multinomially. ``sample`` shifts each particle by one uniformly chosen
    corner. ``box`` shifts each particle uniformly inside the convex hull of
    the corners. Shifted particles leaving the parameter box are clipped back
    and counted.
    """
    if mode not in DIFFUSION_MODES:
        raise ValueError(f"unknown diffusion mode {mode!r}; expected one of {DIFFUSION_MODES}")
    x, w = ensemble.particles, ensemble.weights
    n = len(ensemble)
    if not np.any(corners.corners):
        return DiffusionResult(ensemble, 0.0, 0.0)
    if mode != "replicate" or downsample:
        if rng is None:
            raise ValueError(f"{mode} diffusion needs an rng")

    if mode == "replicate":
        new_x = (x[:, None, :] + corners.corners[None, :, :]).reshape(-1, 3)
        new_w = np.repeat(w / 8.0, 8)
    elif mode == "sample":
        pick = rng.integers(0, 8, size=n)
        new_x = x + corners.corners[pick]
        new_w = w
    else:
        new_x = x + rng.uniform(-1.0, 1.0, size=(n, 3)) * corners.half_widths
        new_w = w

    frac = mass = 0.0
    if clamp:
        new_x, frac, mass = _clamp(new_x, new_w)
        if mass > CLAMP_WARN_FRACTION:
            warnings.warn(f"prior diffusion clamped {mass:.1%} of the posterior mass "
                          "to the parameter box", RuntimeWarning, stacklevel=2)

    if mode == "replicate" and downsample:
        idx = rng.choice(new_x.shape[0], size=n, p=new_w / new_w.sum())
        return DiffusionResult(ParticleEnsemble.uniform(new_x[idx]), frac, mass)
    return DiffusionResult(ParticleEnsemble(new_x, new_w / new_w.sum()), frac, mass)


def variance_inflation_bound(var_before: float, L: float, delta: float) -> float:
    """Upper bound on Var[f(theta')] given Var[f(theta)] for an L-Lipschitz f.

    Valid only while ``L * delta < sqrt(var_before)``.
    """
    if var_before <= 0:
        raise ValueError("var_before must be > 0")
    if L < 0 or delta < 0:
        raise ValueError("L and delta must be >= 0")
    sd = np.sqrt(var_before)
    if L * delta >= sd:
        raise ValueError(
            f"step too large for the variance bound: L*delta={L * delta:.3g} >= "
            f"posterior std {sd:.3g}; shrink the step or measure more before moving")
    return float(var_before * (1.0 + 2.0 * L * delta / sd))


def verify_lipschitz_F(thetas, objective=None, table=None,
                       depolarizing_strength: float = DEFAULT_DEPOLARIZING) -> float:
    """Largest finite-difference slope of F between adjacent grid points.

    ``objective`` maps a control value to the exact F. By default it is the
    interleaved objective of the over-rotated device. The result is a lower
    estimate of the Lipschitz constant.
    """
    if objective is None:
        def objective(theta):
            return true_objective(DeviceModel.overrotated(theta, depolarizing_strength), table)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size < 2:
        raise ValueError("need at least 2 grid points")
    F = np.array([objective(t) for t in thetas])
    return float(np.max(np.abs(np.diff(F)) / np.abs(np.diff(thetas))))
