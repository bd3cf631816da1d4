"""Flat experiment configuration with a key=value text round-trip.

One dataclass holds every knob of the tracking experiment.  The file format
is one `key = value` pair per line (comments start with #); floats are
written with 17 significant digits so parse -> serialize -> parse is exact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .control import VARIANTS, GainSpec
from .dynamics import ManipulatorModel, ScaledIdentityNominal, TrueModelNominal
from .gpr import RHO_SCALINGS, BoundParams

NOMINAL_KINDS = ("scaled_identity", "true_model")


@dataclass
class ExperimentConfig:
    """Every parameter of the tracking experiment, flat for easy (de)serialization."""

    # robot (two uniform 3 kg, 1 m rods by default)
    m1: float = 3.0
    m2: float = 3.0
    l1: float = 1.0
    l2: float = 1.0
    r1: float = 0.5
    r2: float = 0.5
    i1: float = 0.25
    i2: float = 0.25
    gravity: float = 9.81
    # nominal model
    nominal_kind: str = "scaled_identity"
    nominal_scale: float = 0.5
    # gains and robust term
    kp: float = 50.0
    kd: float = 2.0 * np.sqrt(50.0)
    epsilon: float = 0.5
    beta: float = 3.0
    delta: float = 0.1
    rho_scaling: str = "sigma"
    # GP training
    noise_std: float = 0.0
    gp_init_lam: float = 0.0          # 0 = data-scaled default
    gp_init_lengthscale: float = 0.0  # 0 = data-scaled default
    gp_n_starts: int = 4
    gp_max_iter: int = 60
    gp_fit_seed: int = 0
    # reference trajectories
    n_sinusoids: int = 5
    omega_min: float = 0.1 * np.pi
    omega_max: float = 0.3 * np.pi
    duration: float = 50.0
    control_rate: float = 100.0
    # training trajectory
    training_seed: int = 1000
    downsample: int = 50
    # evaluation protocol
    eval_seeds: tuple = tuple(range(10))
    controllers: tuple = ("true", "nominal", "gp", "robust_gp")
    integrator_substeps: int = 10
    initial_offset_q: float = 0.0
    initial_offset_dq: float = 0.0
    out_dir: str = "results"

    def __post_init__(self):
        self.eval_seeds = tuple(int(s) for s in self.eval_seeds)
        self.controllers = tuple(str(c) for c in self.controllers)
        if self.nominal_kind not in NOMINAL_KINDS:
            raise ValueError(f"nominal_kind must be one of {NOMINAL_KINDS}")
        if self.rho_scaling not in RHO_SCALINGS:
            raise ValueError(f"rho_scaling must be one of {RHO_SCALINGS}")
        unknown = [c for c in self.controllers if c not in VARIANTS]
        if unknown:
            raise ValueError(f"unknown controllers {unknown}; valid: {VARIANTS}")
        if not self.controllers:
            raise ValueError("controller list must be non-empty")
        if not self.eval_seeds:
            raise ValueError("need at least one evaluation seed")
        if self.training_seed in self.eval_seeds:
            raise ValueError("training seed must be disjoint from evaluation seeds")
        if self.duration <= 0 or self.control_rate <= 0:
            raise ValueError("duration and control_rate must be positive")
        if self.integrator_substeps < 1:
            raise ValueError("integrator_substeps must be >= 1")
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be strictly below omega_max")
        if self.n_sinusoids < 1:
            raise ValueError("n_sinusoids must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")

    def make_model(self) -> ManipulatorModel:
        return ManipulatorModel(masses=(self.m1, self.m2),
                                lengths=(self.l1, self.l2),
                                com_offsets=(self.r1, self.r2),
                                inertias=(self.i1, self.i2),
                                gravity=self.gravity)

    def make_nominal(self, model: ManipulatorModel):
        if self.nominal_kind == "true_model":
            return TrueModelNominal(model)
        return ScaledIdentityNominal(n_joints=model.n_joints, scale=self.nominal_scale)

    def make_gains(self) -> GainSpec:
        return GainSpec(kp=self.kp, kd=self.kd)

    def make_bounds(self) -> BoundParams:
        return BoundParams(beta=self.beta, delta=self.delta, scaling=self.rho_scaling)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def save_config(config: ExperimentConfig, path) -> None:
    lines = [f"{f.name} = {_format_value(getattr(config, f.name))}"
             for f in dataclasses.fields(config)]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_value(name: str, field_type, raw: str):
    raw = raw.strip()
    # np.float64 defaults (e.g. kd, omega bounds) must still parse as float
    if issubclass(field_type, float):
        return float(raw)
    if issubclass(field_type, int):
        return int(raw)
    if issubclass(field_type, tuple):
        items = [v.strip() for v in raw.split(",") if v.strip()]
        if name == "eval_seeds":
            return tuple(int(v) for v in items)
        return tuple(items)
    return raw


def load_config(path) -> ExperimentConfig:
    """Parse a key=value config file; unknown keys are an error."""
    field_map = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    type_map = {f.name: type(f.default) for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in field_map:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, type_map[key], raw)
    return ExperimentConfig(**values)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()
