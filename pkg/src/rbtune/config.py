"""Experiment configuration: a nested JSON document with four sections.

Every field has a default, so ``{}`` is a valid config. Unknown keys and
out-of-range values raise :class:`ConfigError` naming the dotted field path,
e.g. ``spsa.sigma_req``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .reuse import DIFFUSION_MODES, LIPSCHITZ_MODES, DEFAULT_OBJECTIVE_LIPSCHITZ
from .smc import FIDELITY_CONVENTIONS
from .spsa import CARRY_MEANS, GATES, GRADIENTS

OUTPUT_DIR_ENV = "RBTUNE_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class DeviceSection:
    theta0: float = 0.35
    depolarizing_strength: float = 0.005


@dataclass(frozen=True)
class SpsaSection:
    a: float = 0.05
    b: float = 0.05
    s: float = 0.602
    t: float = 0.602
    max_step: float = 0.1
    sigma_req: float = 0.005
    F_target: float = 0.999
    max_iters: int = 50
    shots_cap: int = 500
    gate: str = "variance"
    gradient: str = "normalized"
    refresh: bool = False
    carry_mean: str = "preserved"


@dataclass(frozen=True)
class InferenceSection:
    N_p: int = 10_000
    lw_a: float = 0.98
    resample_threshold: float = 1.0 / 256.0
    fidelity_convention: str = "decay"


@dataclass(frozen=True)
class ReuseSection:
    lipschitz_mode: str = "objective-direct"
    L_value: float = DEFAULT_OBJECTIVE_LIPSCHITZ
    diffusion_mode: str = "sample"


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    spsa: SpsaSection = field(default_factory=SpsaSection)
    inference: InferenceSection = field(default_factory=InferenceSection)
    reuse: ReuseSection = field(default_factory=ReuseSection)
    rng_seed: int = 7
    output_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


SECTIONS = {"device": DeviceSection, "spsa": SpsaSection,
            "inference": InferenceSection, "reuse": ReuseSection}


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# (predicate, description) per dotted field; types are checked separately
_CHECKS = {
    "device.theta0": (lambda x: math.isfinite(x), "must be finite"),
    "device.depolarizing_strength": (lambda x: 0 <= x <= 1, "must be in [0, 1]"),
    "spsa.a": (_positive, "must be > 0"),
    "spsa.b": (_positive, "must be > 0"),
    "spsa.s": (_positive, "must be > 0"),
    "spsa.t": (_positive, "must be > 0"),
    "spsa.max_step": (_positive, "must be > 0"),
    "spsa.sigma_req": (lambda x: 0 < x < 0.5, "must be in (0, 0.5)"),
    "spsa.F_target": (lambda x: 0 < x <= 1, "must be in (0, 1]"),
    "spsa.max_iters": (_positive, "must be a positive integer"),
    "spsa.shots_cap": (_positive, "must be a positive integer"),
    "spsa.gate": (lambda x: x in GATES, f"must be one of {GATES}"),
    "spsa.gradient": (lambda x: x in GRADIENTS, f"must be one of {GRADIENTS}"),
    "spsa.carry_mean": (lambda x: x in CARRY_MEANS, f"must be one of {CARRY_MEANS}"),
    "inference.N_p": (lambda x: x >= 2, "must be an integer >= 2"),
    "inference.lw_a": (lambda x: 0 < x <= 1, "must be in (0, 1]"),
    "inference.resample_threshold": (lambda x: 0 <= x <= 1, "must be in [0, 1]"),
    "inference.fidelity_convention": (lambda x: x in FIDELITY_CONVENTIONS,
                                      f"must be one of {FIDELITY_CONVENTIONS}"),
    "reuse.lipschitz_mode": (lambda x: x in LIPSCHITZ_MODES, f"must be one of {LIPSCHITZ_MODES}"),
    "reuse.L_value": (_nonneg, "must be >= 0"),
    "reuse.diffusion_mode": (lambda x: x in DIFFUSION_MODES, f"must be one of {DIFFUSION_MODES}"),
    "rng_seed": (_nonneg, "must be a non-negative integer"),
}


def _coerce(path: str, value, default):
    """Check ``value`` has the type of ``default`` (ints accepted for floats)."""
    kind = type(default)
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(path, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _build(cls, raw, prefix: str):
    if not isinstance(raw, dict):
        raise ConfigError(prefix, "expected a JSON object")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown field")
    defaults = cls()
    kwargs = {}
    for f in fields(cls):
        path = f"{prefix}.{f.name}"
        if f.name not in raw:
            continue
        value = _coerce(path, raw[f.name], getattr(defaults, f.name))
        check = _CHECKS.get(path)
        if check and not check[0](value):
            raise ConfigError(path, f"{check[1]}, got {value!r}")
        kwargs[f.name] = value
    return cls(**kwargs)


def config_from_dict(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    top = {"rng_seed", "output_dir", *SECTIONS}
    for key in raw:
        if key not in top:
            raise ConfigError(key, "unknown field")
    kwargs = {name: _build(cls, raw.get(name, {}), name) for name, cls in SECTIONS.items()}
    defaults = ExperimentConfig()
    for name in ("rng_seed", "output_dir"):
        if name in raw:
            value = _coerce(name, raw[name], getattr(defaults, name))
            check = _CHECKS.get(name)
            if check and not check[0](value):
                raise ConfigError(name, f"{check[1]}, got {value!r}")
            kwargs[name] = value
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(raw)
