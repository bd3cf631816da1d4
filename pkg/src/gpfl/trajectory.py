"""Random-sinusoid reference trajectories with analytic derivatives.

Each joint's reference is a sum of N_s sinusoids of common amplitude
2*pi/N_s, with angular frequencies drawn i.i.d. uniform from a configured
band.  Frequencies are sampled joint-major from numpy's PCG64 generator so a
seed fully determines the trajectory on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ManipulatorModel, inverse_dynamics
from .gpr import GpDataset, mismatch_target


@dataclass(frozen=True)
class SinusoidSpec:
    """Frequencies (rad/s, shape n_joints x N_s), amplitude (rad) and seed."""

    frequencies: np.ndarray
    amplitude: float
    seed: int

    def __post_init__(self):
        freqs = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "frequencies", freqs)
        if freqs.shape[1] < 1:
            raise ValueError("need at least one sinusoid per joint")

    @property
    def n_joints(self) -> int:
        return self.frequencies.shape[0]

    @property
    def n_sinusoids(self) -> int:
        return self.frequencies.shape[1]


@dataclass
class ReferenceTrajectory:
    """Reference samples (q_d, dq_d, ddq_d) on a uniform time grid."""

    times: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def sample_spec(seed: int, n_joints: int = 2, n_sinusoids: int = 5,
                omega_min: float = 0.1 * np.pi,
                omega_max: float = 0.3 * np.pi) -> SinusoidSpec:
    """Draw a reference spec; each joint gets its own independent frequencies."""
    if not omega_min < omega_max:
        raise ValueError("omega_min must be strictly below omega_max")
    if n_sinusoids < 1:
        raise ValueError("n_sinusoids must be >= 1")
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(omega_min, omega_max, size=(n_joints, n_sinusoids))
    return SinusoidSpec(frequencies=freqs, amplitude=2.0 * np.pi / n_sinusoids, seed=seed)


def evaluate(spec: SinusoidSpec, t: float):
    """Reference position, velocity and acceleration at time t."""
    w = spec.frequencies
    wt = w * t
    s = np.sin(wt)
    c = np.cos(wt)
    q = spec.amplitude * s.sum(axis=1)
    dq = spec.amplitude * (w * c).sum(axis=1)
    ddq = -spec.amplitude * (w * w * s).sum(axis=1)
    return q, dq, ddq


def sample_reference(spec: SinusoidSpec, duration: float, rate: float) -> ReferenceTrajectory:
    """Evaluate the reference on the control-tick grid t_k = k / rate."""
    if duration <= 0 or rate <= 0:
        raise ValueError("duration and rate must be positive")
    n = int(round(duration * rate))
    times = np.arange(n) / rate
    w = spec.frequencies  # (J, S)
    wt = w[None, :, :] * times[:, None, None]  # (n, J, S)
    s = np.sin(wt)
    c = np.cos(wt)
    q = spec.amplitude * s.sum(axis=2)
    dq = spec.amplitude * (w[None] * c).sum(axis=2)
    ddq = -spec.amplitude * (w[None] ** 2 * s).sum(axis=2)
    return ReferenceTrajectory(times=times, q=q, dq=dq, ddq=ddq)


def build_training_set(model: ManipulatorModel, nominal, spec: SinusoidSpec,
                       duration: float = 50.0, control_rate: float = 100.0,
                       downsample: int = 50, noise_std: float = 0.0,
                       noise_seed: int | None = None) -> GpDataset:
    """Mismatch-torque dataset from open-loop evaluation of the reference.

    The reference is sampled at the control rate, every `downsample`-th
    sample is kept, the required torque is computed by the true inverse
    dynamics at the reference state, and the target is the mismatch between
    that torque and the nominal model's prediction, optionally corrupted by
    i.i.d. Gaussian noise of standard deviation `noise_std`.
    """
    if downsample < 1:
        raise ValueError("downsample must be >= 1")
    ref = sample_reference(spec, duration, control_rate)
    idx = np.arange(0, len(ref), downsample)
    if len(idx) == 0:
        raise ValueError("training trajectory produced no samples")

    n_j = spec.n_joints
    inputs = np.empty((len(idx), 3 * n_j))
    targets = np.empty((len(idx), n_j))
    for row, k in enumerate(idx):
        q, dq, ddq = ref.q[k], ref.dq[k], ref.ddq[k]
        tau = inverse_dynamics(model, q, dq, ddq)
        inputs[row] = np.concatenate([q, dq, ddq])
        targets[row] = mismatch_target(nominal, q, dq, ddq, tau)
    if noise_std > 0.0:
        rng = np.random.default_rng(spec.seed if noise_seed is None else noise_seed)
        targets = targets + rng.normal(0.0, noise_std, size=targets.shape)
    return GpDataset(inputs=inputs, targets=targets, noise_std=noise_std)


def save_reference_csv(ref: ReferenceTrajectory, path) -> None:
    """Write the sampled reference as CSV: t, q_d*, dq_d*, ddq_d*."""
    n_j = ref.q.shape[1]
    header = (["t"]
              + [f"qd{j + 1}" for j in range(n_j)]
              + [f"dqd{j + 1}" for j in range(n_j)]
              + [f"ddqd{j + 1}" for j in range(n_j)])
    data = np.column_stack([ref.times, ref.q, ref.dq, ref.ddq])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
