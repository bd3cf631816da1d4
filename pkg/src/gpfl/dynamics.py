"""Rigid-body dynamics of a planar two-link revolute arm.

The arm moves in a vertical plane.  Joint angles are measured from the
positive x axis: q[0] is the absolute angle of link 1 and q[1] is the angle
of link 2 relative to link 1.  Gravity acts along -y, so q = [-pi/2, 0] is
the arm hanging straight down and q = [0, 0] is fully horizontal.

The equations of motion are

    M(q) ddq + C(q, dq) dq + g(q) = tau

with C built from the Christoffel symbols of M, which makes dM/dt - 2C
skew-symmetric.  All functions here are pure; `simulate` advances the
continuous dynamics with fixed-step RK4 under zero-order-hold torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np


class NotPositiveDefiniteError(RuntimeError):
    """An inertia-style matrix failed its SPD factorization."""


class SimulationAborted(RuntimeError):
    """A control run produced a non-finite torque or state.

    Carries the zero-based index of the control tick at which the run died.
    """

    def __init__(self, tick: int, reason: str):
        super().__init__(f"simulation aborted at tick {tick}: {reason}")
        self.tick = tick
        self.reason = reason


@dataclass(frozen=True)
class ManipulatorModel:
    """Physical parameters of the two-link arm.

    masses, lengths, com_offsets and inertias are per-link; com_offsets are
    measured from the proximal joint along the link, inertias are about the
    link's center of mass.  gravity is the gravitational acceleration (m/s^2).
    """

    masses: tuple[float, float] = (3.0, 3.0)
    lengths: tuple[float, float] = (1.0, 1.0)
    com_offsets: tuple[float, float] = (0.5, 0.5)
    inertias: tuple[float, float] = (0.25, 0.25)
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("masses", "lengths", "com_offsets", "inertias"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "gravity", float(self.gravity))
        n = len(self.masses)
        if not (len(self.lengths) == len(self.com_offsets) == len(self.inertias) == n):
            raise ValueError("per-link parameter lists must have equal length")
        if n != 2:
            raise ValueError("closed-form dynamics are implemented for 2 joints")
        if min(self.masses) <= 0 or min(self.lengths) <= 0 or min(self.com_offsets) <= 0:
            raise ValueError("masses, lengths and COM offsets must be positive")
        if min(self.inertias) < 0:
            raise ValueError("rotational inertias must be nonnegative")

    @property
    def n_joints(self) -> int:
        return len(self.masses)

    @classmethod
    def default_rod_links(cls, gravity: float = 9.81) -> "ManipulatorModel":
        """Two uniform rods (3 kg, 1 m, COM at midpoint, I = m l^2 / 12)."""
        return cls(gravity=gravity)

    @cached_property
    def _coeffs(self) -> tuple[float, ...]:
        # Constant pieces of M, C and g; only cos/sin of q2 vary at runtime.
        m1, m2 = self.masses
        l1, _ = self.lengths
        r1, r2 = self.com_offsets
        i1, i2 = self.inertias
        a = m1 * r1 * r1 + i1 + m2 * (l1 * l1 + r2 * r2) + i2  # M11 constant
        b = m2 * l1 * r2                                        # cos/sin coupling
        c = m2 * r2 * r2 + i2                                   # M22 and M12 constant
        g1 = (m1 * r1 + m2 * l1) * self.gravity
        g2 = m2 * r2 * self.gravity
        return a, b, c, g1, g2


@dataclass
class RobotState:
    """Joint positions (rad) and velocities (rad/s)."""

    q: np.ndarray
    dq: np.ndarray

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.dq = np.atleast_1d(np.asarray(self.dq, dtype=float))
        if self.q.shape != self.dq.shape:
            raise ValueError("q and dq must have the same length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.dq))):
            raise ValueError("state entries must be finite")

    def copy(self) -> "RobotState":
        return RobotState(self.q.copy(), self.dq.copy())


@dataclass(frozen=True)
class ScaledIdentityNominal:
    """Deliberately crude nominal model: M_hat = scale * I, n_hat = 0."""

    n_joints: int = 2
    scale: float = 0.5

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("nominal inertia scale must be positive")

    def inertia(self, q) -> np.ndarray:
        return self.scale * np.eye(self.n_joints)

    def bias(self, q, dq) -> np.ndarray:
        return np.zeros(self.n_joints)

    def apply_inverse(self, q, v) -> np.ndarray:
        return np.asarray(v, dtype=float) / self.scale


@dataclass(frozen=True)
class TrueModelNominal:
    """Nominal model that coincides with the true dynamics (zero mismatch)."""

    model: ManipulatorModel

    @property
    def n_joints(self) -> int:
        return self.model.n_joints

    def inertia(self, q) -> np.ndarray:
        return inertia(self.model, q)

    def bias(self, q, dq) -> np.ndarray:
        dq = np.asarray(dq, dtype=float)
        return coriolis(self.model, q, dq) @ dq + gravity(self.model, q)

    def apply_inverse(self, q, v) -> np.ndarray:
        return np.linalg.solve(inertia(self.model, q), np.asarray(v, dtype=float))


def inertia(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    """Symmetric positive-definite inertia matrix M(q)."""
    q = np.asarray(q, dtype=float)
    _check_dim(model, q)
    a, b, c, _, _ = model._coeffs
    c2 = math.cos(q[1])
    m11 = a + 2.0 * b * c2
    m12 = c + b * c2
    return np.array([[m11, m12], [m12, c]])


def coriolis(model: ManipulatorModel, q: np.ndarray, dq: np.ndarray) -> np.ndarray:
    """Coriolis/centrifugal matrix C(q, dq) in Christoffel form."""
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    _check_dim(model, q)
    _check_dim(model, dq)
    _, b, _, _, _ = model._coeffs
    h = b * math.sin(q[1])
    return np.array([[-h * dq[1], -h * (dq[0] + dq[1])],
                     [h * dq[0], 0.0]])


def gravity(model: ManipulatorModel, q: np.ndarray) -> np.ndarray:
    """Gravity torque g(q), the gradient of the potential energy."""
    q = np.asarray(q, dtype=float)
    _check_dim(model, q)
    _, _, _, g1, g2 = model._coeffs
    c12 = math.cos(q[0] + q[1])
    return np.array([g1 * math.cos(q[0]) + g2 * c12, g2 * c12])


def inverse_dynamics(model: ManipulatorModel, q, dq, ddq) -> np.ndarray:
    """Torque realizing the motion (q, dq, ddq): M ddq + C dq + g."""
    ddq = np.asarray(ddq, dtype=float)
    return inertia(model, q) @ ddq + coriolis(model, q, dq) @ np.asarray(dq, dtype=float) + gravity(model, q)


def forward_dynamics(model: ManipulatorModel, state: RobotState, tau: np.ndarray) -> np.ndarray:
    """Joint accelerations from applied torque, via an SPD (Cholesky) solve."""
    tau = np.asarray(tau, dtype=float)
    _check_dim(model, tau)
    if not np.all(np.isfinite(tau)):
        raise ValueError("torque entries must be finite")
    return _accel(model, state.q, state.dq, tau)


def potential_energy(model: ManipulatorModel, q) -> float:
    m1, m2 = model.masses
    l1, _ = model.lengths
    r1, r2 = model.com_offsets
    y1 = r1 * math.sin(q[0])
    y2 = l1 * math.sin(q[0]) + r2 * math.sin(q[0] + q[1])
    return model.gravity * (m1 * y1 + m2 * y2)


def kinetic_energy(model: ManipulatorModel, q, dq) -> float:
    dq = np.asarray(dq, dtype=float)
    return 0.5 * dq @ inertia(model, q) @ dq


def total_energy(model: ManipulatorModel, state: RobotState) -> float:
    return kinetic_energy(model, state.q, state.dq) + potential_energy(model, state.q)


def _check_dim(model: ManipulatorModel, v: np.ndarray) -> None:
    if v.shape != (model.n_joints,):
        raise ValueError(f"expected vector of length {model.n_joints}, got shape {v.shape}")


def _accel(model: ManipulatorModel, q, dq, tau) -> np.ndarray:
    # Scalarized hot path: simulate calls this tens of thousands of times.
    a, b, c, g1c, g2c = model._coeffs
    q1, q2 = q[0], q[1]
    dq1, dq2 = dq[0], dq[1]
    c2 = math.cos(q2)
    h = b * math.sin(q2)

    m11 = a + 2.0 * b * c2
    m12 = c + b * c2
    g12 = g2c * math.cos(q1 + q2)
    r1 = tau[0] + h * (2.0 * dq1 * dq2 + dq2 * dq2) - g1c * math.cos(q1) - g12
    r2 = tau[1] - h * dq1 * dq1 - g12

    # 2x2 Cholesky solve; failure means M(q) is not positive definite.
    if m11 <= 0.0:
        raise NotPositiveDefiniteError("inertia matrix is not positive definite")
    l11 = math.sqrt(m11)
    l21 = m12 / l11
    d = c - l21 * l21
    if d <= 0.0:
        raise NotPositiveDefiniteError("inertia matrix is not positive definite")
    l22 = math.sqrt(d)
    y1 = r1 / l11
    y2 = (r2 - l21 * y1) / l22
    x2 = y2 / l22
    x1 = (y1 - l21 * x2) / l11
    return np.array([x1, x2])


@dataclass
class RunTrace:
    """Per-tick record of a simulated control run.

    `times[k]` is the start of tick k; `q`, `dq` are the state at that instant
    and `tau` the torque held over [times[k], times[k] + 1/rate).
    `final_state` is the state after the last tick's integration.
    """

    times: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    tau: np.ndarray
    final_state: RobotState

    @property
    def n_ticks(self) -> int:
        return len(self.times)


def simulate(model: ManipulatorModel,
             controller: Callable[[float, RobotState], np.ndarray],
             initial: RobotState,
             duration: float,
             control_rate: float,
             integrator_substeps: int = 10) -> RunTrace:
    """Run a zero-order-hold control loop over fixed-step RK4 dynamics.

    The controller is invoked once per tick at `control_rate` Hz and its
    torque is held constant while the continuous dynamics are advanced with
    `integrator_substeps` RK4 steps per tick.  Raises SimulationAborted with
    the offending tick index if the controller returns a non-finite torque or
    the state leaves the finite range.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if control_rate <= 0:
        raise ValueError("control_rate must be positive")
    if integrator_substeps < 1:
        raise ValueError("integrator_substeps must be >= 1")

    n = model.n_joints
    n_ticks = int(round(duration * control_rate))
    dt = 1.0 / control_rate
    h = dt / integrator_substeps

    q = initial.q.astype(float).copy()
    dq = initial.dq.astype(float).copy()
    times = np.arange(n_ticks) * dt
    qs = np.empty((n_ticks, n))
    dqs = np.empty((n_ticks, n))
    taus = np.empty((n_ticks, n))

    for k in range(n_ticks):
        tau = np.asarray(controller(times[k], RobotState(q.copy(), dq.copy())), dtype=float)
        if tau.shape != (n,) or not np.all(np.isfinite(tau)):
            raise SimulationAborted(k, "controller returned a non-finite torque")
        qs[k] = q
        dqs[k] = dq
        taus[k] = tau
        try:
            for _ in range(integrator_substeps):
                q, dq = _rk4_step(model, q, dq, tau, h)
        except (ValueError, OverflowError, FloatingPointError):
            # trig/arithmetic on an overflowed state; report as divergence
            raise SimulationAborted(k, "state became non-finite") from None
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq))):
            raise SimulationAborted(k, "state became non-finite")

    return RunTrace(times, qs, dqs, taus, RobotState(q, dq))


def _rk4_step(model, q, dq, tau, h):
    k1q = dq
    k1v = _accel(model, q, dq, tau)
    k2q = dq + 0.5 * h * k1v
    k2v = _accel(model, q + 0.5 * h * k1q, k2q, tau)
    k3q = dq + 0.5 * h * k2v
    k3v = _accel(model, q + 0.5 * h * k2q, k3q, tau)
    k4q = dq + h * k3v
    k4v = _accel(model, q + h * k3q, k4q, tau)
    q_next = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    dq_next = dq + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, dq_next
