"""Feedback-linearization control laws and the robust term.

Four variants are compared: exact computed torque from the true model, the
same law on a deliberately crude nominal model, the nominal law plus the GP
mismatch compensation, and the full robust law that adds a confidence-bound
sliding action w with a boundary layer.  All controllers are pure functions;
per-tick state lives in the simulation loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import gpr
from .dynamics import ManipulatorModel, RobotState, coriolis, gravity, inertia

VARIANTS = ("true", "nominal", "gp", "robust_gp")

LYAPUNOV_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class GainSpec:
    """Scalar PD gains, expanded to K_P = kp*I and K_D = kd*I."""

    kp: float = 50.0
    kd: float = 2.0 * np.sqrt(50.0)

    def __post_init__(self):
        if not (self.kp > 0 and self.kd > 0):
            raise ValueError("kp and kd must be positive")


@dataclass(frozen=True)
class LyapunovDesign:
    """Q solving H^T Q + Q H = -P for the error-dynamics matrix H."""

    Q: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "P", P)
        for name, m in (("Q", Q), ("P", P)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise ValueError(f"{name} must be positive definite")

    @property
    def n_joints(self) -> int:
        return self.Q.shape[0] // 2


@dataclass(frozen=True)
class ControllerSpec:
    """Controller variant plus everything the variant needs."""

    variant: str
    gains: GainSpec
    lyapunov: LyapunovDesign | None = None
    epsilon: float = 0.5
    gp: gpr.GpModel | None = None
    bounds: gpr.BoundParams | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.epsilon < 0:
            raise ValueError("boundary layer epsilon must be >= 0")
        if self.variant in ("gp", "robust_gp") and self.gp is None:
            raise ValueError(f"variant {self.variant!r} needs a trained GP")
        if self.variant == "robust_gp":
            if self.lyapunov is None:
                raise ValueError("robust_gp needs a LyapunovDesign")
            if self.bounds is None:
                raise ValueError("robust_gp needs BoundParams")


@dataclass
class ControlTickLog:
    """Per-tick record emitted by the robust controller, filled by the harness."""

    time: float
    q: np.ndarray
    dq: np.ndarray
    q_err: np.ndarray
    dq_err: np.ndarray
    tau: np.ndarray
    rho: float | None = None
    e_hat_mean: np.ndarray | None = None
    e_hat_var: np.ndarray | None = None
    v_lyap: float | None = None
    z_norm: float | None = None
    e_true: np.ndarray | None = None


def design_lyapunov(gains: GainSpec, n_joints: int,
                    P: np.ndarray | None = None) -> LyapunovDesign:
    """Solve H^T Q + Q H = -P for the closed-loop error dynamics.

    H = [[0, I], [-K_P, -K_D]] is Hurwitz for positive gains, so a unique
    symmetric positive-definite Q exists for any positive-definite P
    (default identity).
    """
    if n_joints < 1:
        raise ValueError("n_joints must be >= 1")
    n = n_joints
    H = np.zeros((2 * n, 2 * n))
    H[:n, n:] = np.eye(n)
    H[n:, :n] = -gains.kp * np.eye(n)
    H[n:, n:] = -gains.kd * np.eye(n)
    if P is None:
        P = np.eye(2 * n)
    else:
        P = np.asarray(P, dtype=float)
    Q = scipy.linalg.solve_continuous_lyapunov(H.T, -P)
    Q = 0.5 * (Q + Q.T)
    residual = np.linalg.norm(H.T @ Q + Q @ H + P)
    if residual > LYAPUNOV_RESIDUAL_TOL:
        raise ArithmeticError(f"Lyapunov solve residual {residual:.3e} too large")
    return LyapunovDesign(Q=Q, P=P)


def error_matrix(gains: GainSpec, n_joints: int) -> np.ndarray:
    """The closed-loop error-dynamics matrix H = [[0, I], [-K_P, -K_D]]."""
    n = n_joints
    H = np.zeros((2 * n, 2 * n))
    H[:n, n:] = np.eye(n)
    H[n:, :n] = -gains.kp * np.eye(n)
    H[n:, n:] = -gains.kd * np.eye(n)
    return H


def _errors_and_aux(gains: GainSpec, state: RobotState, desired):
    qd, dqd, ddqd = desired
    q_err = np.asarray(qd, dtype=float) - state.q
    dq_err = np.asarray(dqd, dtype=float) - state.dq
    aux = np.asarray(ddqd, dtype=float) + gains.kp * q_err + gains.kd * dq_err
    return q_err, dq_err, aux


def gp_query_acceleration(ddq_d, q_err, dq_err, gains: GainSpec) -> np.ndarray:
    """Commanded auxiliary acceleration a = ddq_d + K_P q_err + K_D dq_err.

    Used as the acceleration slot of the GP query, since the realized
    acceleration depends on the torque still being computed.
    """
    return (np.asarray(ddq_d, dtype=float)
            + gains.kp * np.asarray(q_err, dtype=float)
            + gains.kd * np.asarray(dq_err, dtype=float))


def control_true(model: ManipulatorModel, gains: GainSpec,
                 state: RobotState, desired) -> np.ndarray:
    """Exact computed torque: tau = M(q) a + C(q, dq) dq + g(q)."""
    _, _, aux = _errors_and_aux(gains, state, desired)
    return (inertia(model, state.q) @ aux
            + coriolis(model, state.q, state.dq) @ state.dq
            + gravity(model, state.q))


def control_nominal(nominal, gains: GainSpec, state: RobotState,
                    desired) -> np.ndarray:
    """Computed torque on the nominal model: tau = M_hat a + n_hat."""
    _, _, aux = _errors_and_aux(gains, state, desired)
    return nominal.inertia(state.q) @ aux + nominal.bias(state.q, state.dq)


def control_gp(nominal, gp: gpr.GpModel, gains: GainSpec, state: RobotState,
               desired, ddq_for_gp) -> np.ndarray:
    """Nominal law plus the GP posterior-mean mismatch compensation."""
    x = np.concatenate([state.q, state.dq, np.asarray(ddq_for_gp, dtype=float)])
    mean, _ = gpr.predict(gp, x)
    return control_nominal(nominal, gains, state, desired) + mean


def control_robust_gp(nominal, gp: gpr.GpModel, gains: GainSpec,
                      lyapunov: LyapunovDesign, bounds: gpr.BoundParams,
                      epsilon: float, state: RobotState, desired,
                      ddq_for_gp):
    """Full robust law: tau = M_hat a + n_hat + e_hat + w.

    w = rho * z / ||z|| outside the boundary layer ||z|| >= epsilon and
    rho * z / epsilon inside it, with z = M_hat(q)^{-1} D^T Q xi.
    """
    if epsilon < 0:
        raise ValueError("boundary layer epsilon must be >= 0")
    q_err, dq_err, aux = _errors_and_aux(gains, state, desired)
    n = len(q_err)

    x = np.concatenate([state.q, state.dq, np.asarray(ddq_for_gp, dtype=float)])
    mean, variance = gpr.predict(gp, x)
    rho, _ = gpr.rho_from_mean_var(mean, variance, bounds)
    if not np.isfinite(rho):
        raise FloatingPointError("rho bound is non-finite")

    xi = np.concatenate([q_err, dq_err])
    z = nominal.apply_inverse(state.q, lyapunov.Q[n:, :] @ xi)
    z_norm = float(np.linalg.norm(z))
    if z_norm >= epsilon and z_norm > 0.0:
        w = rho * z / z_norm
    elif epsilon > 0.0:
        w = rho * z / epsilon
    else:
        w = np.zeros(n)

    tau = (nominal.inertia(state.q) @ aux + nominal.bias(state.q, state.dq)
           + mean + w)
    log = ControlTickLog(time=0.0, q=state.q.copy(), dq=state.dq.copy(),
                         q_err=q_err, dq_err=dq_err, tau=tau, rho=rho,
                         e_hat_mean=mean, e_hat_var=variance,
                         v_lyap=float(xi @ lyapunov.Q @ xi), z_norm=z_norm)
    return tau, log
