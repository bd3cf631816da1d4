"""Experiment orchestration: training, tracking runs, RMSE tables, artifacts.

Reproduces the tracking comparison: train the mismatch GP once on the
training-seed trajectory, run every (evaluation seed, controller) pair for
the configured duration, and emit trace CSVs, plot-ready series and a
summary table.  All writers use 17-significant-digit floats so identical
configs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import gpr
from .config import ExperimentConfig
from .control import (GainSpec, LyapunovDesign, control_gp, control_nominal,
                      control_robust_gp, control_true, design_lyapunov,
                      error_matrix, gp_query_acceleration)
from .dynamics import (ManipulatorModel, RobotState, RunTrace,
                       SimulationAborted, coriolis, forward_dynamics, inertia,
                       inverse_dynamics, simulate, total_energy)
from .gpr import (GpDataset, SeKernelParams, default_init_params, fit,
                  mismatch_target, model_from_params, predict)
from .trajectory import (ReferenceTrajectory, build_training_set, evaluate,
                         sample_reference, sample_spec)


@dataclass
class RunResult:
    """One (controller, seed) tracking run with its trace and RMSE."""

    controller: str
    seed: int
    trace: RunTrace | None
    reference: ReferenceTrajectory
    logs: list | None
    rmse_joints_deg: np.ndarray | None
    rmse_avg_deg: float | None
    status: str


@dataclass
class ControllerStats:
    mean_rmse_deg: float
    std_rmse_deg: float
    n_ok: int
    n_failed: int


@dataclass
class RunSummary:
    """All per-run rows plus per-controller mean/std aggregates."""

    results: list
    stats: dict


def train_gp(config: ExperimentConfig, model: ManipulatorModel | None = None,
             nominal=None):
    """Build the mismatch dataset from the training trajectory and fit the GP."""
    model = config.make_model() if model is None else model
    nominal = config.make_nominal(model) if nominal is None else nominal
    spec = sample_spec(config.training_seed, model.n_joints, config.n_sinusoids,
                       config.omega_min, config.omega_max)
    dataset = build_training_set(model, nominal, spec, config.duration,
                                 config.control_rate, config.downsample,
                                 config.noise_std)
    init = default_init_params(dataset)
    lam = config.gp_init_lam if config.gp_init_lam > 0 else init.lam
    if config.gp_init_lengthscale > 0:
        lengthscales = np.full(dataset.input_dim, config.gp_init_lengthscale)
    else:
        lengthscales = init.lengthscales
    init = SeKernelParams(lam=lam, lengthscales=lengthscales)
    gp = fit(dataset, init, n_starts=config.gp_n_starts,
             max_iter=config.gp_max_iter, seed=config.gp_fit_seed)
    return gp, dataset, spec


def build_tick_controller(variant: str, model: ManipulatorModel, nominal,
                          gains: GainSpec, spec, gp=None,
                          lyapunov: LyapunovDesign | None = None, bounds=None,
                          epsilon: float = 0.5, logs: list | None = None):
    """Wrap a control law into the (t, state) -> torque callable simulate expects."""
    if variant == "true":
        def tick(t, state):
            return control_true(model, gains, state, evaluate(spec, t))
        return tick
    if variant == "nominal":
        def tick(t, state):
            return control_nominal(nominal, gains, state, evaluate(spec, t))
        return tick
    if variant == "gp":
        def tick(t, state):
            desired = evaluate(spec, t)
            q_err = desired[0] - state.q
            dq_err = desired[1] - state.dq
            a = gp_query_acceleration(desired[2], q_err, dq_err, gains)
            return control_gp(nominal, gp, gains, state, desired, a)
        return tick
    if variant == "robust_gp":
        def tick(t, state):
            desired = evaluate(spec, t)
            q_err = desired[0] - state.q
            dq_err = desired[1] - state.dq
            a = gp_query_acceleration(desired[2], q_err, dq_err, gains)
            tau, log = control_robust_gp(nominal, gp, gains, lyapunov, bounds,
                                         epsilon, state, desired, a)
            log.time = t
            # true mismatch at the same query point, for bound-validity checks
            tau_needed = inverse_dynamics(model, state.q, state.dq, a)
            log.e_true = mismatch_target(nominal, state.q, state.dq, a, tau_needed)
            if logs is not None:
                logs.append(log)
            return tau
        return tick
    raise ValueError(f"unknown controller variant {variant!r}")


def run_tracking(config: ExperimentConfig, controller: str, seed: int,
                 model: ManipulatorModel | None = None, nominal=None,
                 gp=None, lyapunov: LyapunovDesign | None = None) -> RunResult:
    """Simulate one (controller, seed) pair from the on-reference initial state."""
    model = config.make_model() if model is None else model
    nominal = config.make_nominal(model) if nominal is None else nominal
    gains = config.make_gains()
    if controller in ("gp", "robust_gp") and gp is None:
        gp, _, _ = train_gp(config, model, nominal)
    if controller == "robust_gp" and lyapunov is None:
        lyapunov = design_lyapunov(gains, model.n_joints)
    spec = sample_spec(seed, model.n_joints, config.n_sinusoids,
                       config.omega_min, config.omega_max)
    ref = sample_reference(spec, config.duration, config.control_rate)
    logs: list | None = [] if controller == "robust_gp" else None
    tick = build_tick_controller(controller, model, nominal, gains, spec,
                                 gp=gp, lyapunov=lyapunov,
                                 bounds=config.make_bounds(),
                                 epsilon=config.epsilon, logs=logs)
    initial = RobotState(ref.q[0] + config.initial_offset_q,
                         ref.dq[0] + config.initial_offset_dq)
    try:
        trace = simulate(model, tick, initial, config.duration,
                         config.control_rate, config.integrator_substeps)
    except SimulationAborted as exc:
        return RunResult(controller, seed, None, ref, logs, None, None,
                         f"aborted@{exc.tick}: {exc.reason}")
    rmse_joints, rmse_avg = compute_rmse(trace, ref)
    return RunResult(controller, seed, trace, ref, logs, rmse_joints,
                     rmse_avg, "ok")


def compute_rmse(trace: RunTrace, reference: ReferenceTrajectory):
    """Per-joint and joint-averaged RMS tracking error in degrees."""
    if trace.q.shape != reference.q.shape:
        raise ValueError("trace and reference are not on the same tick grid")
    err_deg = np.degrees(reference.q - trace.q)
    per_joint = np.sqrt(np.mean(err_deg ** 2, axis=0))
    return per_joint, float(per_joint.mean())


def summarize(results: list, controllers) -> RunSummary:
    stats = {}
    for name in controllers:
        vals = [r.rmse_avg_deg for r in results
                if r.controller == name and r.status == "ok"]
        n_failed = sum(1 for r in results
                       if r.controller == name and r.status != "ok")
        if vals:
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        else:
            mean = float("nan")
            std = float("nan")
        stats[name] = ControllerStats(mean, std, len(vals), n_failed)
    return RunSummary(results=results, stats=stats)


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunSummary:
    """Full sweep: train once, run every seed x controller, write artifacts."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = config.make_model()
    nominal = config.make_nominal(model)
    gains = config.make_gains()

    gp = None
    if any(c in ("gp", "robust_gp") for c in config.controllers):
        gp, dataset, _ = train_gp(config, model, nominal)
        gpr.save_dataset_csv(dataset, out / "gp_dataset.csv")
        gpr.save_model_txt(gp, out / "gp_model.txt", dataset_ref="gp_dataset.csv")
    lyapunov = (design_lyapunov(gains, model.n_joints)
                if "robust_gp" in config.controllers else None)

    results = []
    for seed in config.eval_seeds:
        for controller in config.controllers:
            result = run_tracking(config, controller, seed, model=model,
                                  nominal=nominal, gp=gp, lyapunov=lyapunov)
            results.append(result)
            if result.trace is not None:
                write_trace_csv(out / f"trace_{controller}_{seed}.csv", result)
                write_plotdata(out, result)
    summary = summarize(results, config.controllers)
    write_summary_csv(out / "summary.csv", summary)
    write_summary_txt(out / "summary.txt", summary)
    return summary


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def write_trace_csv(path, result: RunResult) -> None:
    """Per-tick trace; GP/robust columns are nan for the other variants."""
    trace, ref = result.trace, result.reference
    n, n_j = trace.q.shape
    columns = [("t", trace.times)]
    for j in range(n_j):
        columns.append((f"q{j + 1}", trace.q[:, j]))
    for j in range(n_j):
        columns.append((f"dq{j + 1}", trace.dq[:, j]))
    for j in range(n_j):
        columns.append((f"qd{j + 1}", ref.q[:, j]))
    for j in range(n_j):
        columns.append((f"qe{j + 1}", ref.q[:, j] - trace.q[:, j]))
    for j in range(n_j):
        columns.append((f"dqe{j + 1}", ref.dq[:, j] - trace.dq[:, j]))
    for j in range(n_j):
        columns.append((f"tau{j + 1}", trace.tau[:, j]))

    nan = np.full(n, np.nan)
    if result.logs:
        logs = result.logs
        columns.append(("rho", np.array([lg.rho for lg in logs])))
        for j in range(n_j):
            columns.append((f"ehat{j + 1}",
                            np.array([lg.e_hat_mean[j] for lg in logs])))
        for j in range(n_j):
            columns.append((f"evar{j + 1}",
                            np.array([lg.e_hat_var[j] for lg in logs])))
        for j in range(n_j):
            columns.append((f"etrue{j + 1}",
                            np.array([lg.e_true[j] for lg in logs])))
        columns.append(("V", np.array([lg.v_lyap for lg in logs])))
        columns.append(("z_norm", np.array([lg.z_norm for lg in logs])))
    else:
        columns.append(("rho", nan))
        for prefix in ("ehat", "evar", "etrue"):
            for j in range(n_j):
                columns.append((f"{prefix}{j + 1}", nan))
        columns.append(("V", nan))
        columns.append(("z_norm", nan))

    with open(path, "w", newline="") as fh:
        fh.write(",".join(name for name, _ in columns) + "\n")
        data = np.column_stack([arr for _, arr in columns])
        for row in data:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_plotdata(out_dir, result: RunResult) -> None:
    """Per-joint position/error/torque series (one file per joint)."""
    plot_dir = Path(out_dir) / f"plotdata_{result.seed}"
    plot_dir.mkdir(parents=True, exist_ok=True)
    trace, ref = result.trace, result.reference
    for j in range(trace.q.shape[1]):
        path = plot_dir / f"{result.controller}_joint{j + 1}.csv"
        abs_err_deg = np.degrees(np.abs(ref.q[:, j] - trace.q[:, j]))
        with open(path, "w", newline="") as fh:
            fh.write("t,q_rad,qd_rad,abs_err_deg,tau_Nm\n")
            for k in range(trace.n_ticks):
                fh.write(",".join(_fmt(v) for v in
                                  (trace.times[k], trace.q[k, j], ref.q[k, j],
                                   abs_err_deg[k], trace.tau[k, j])) + "\n")


def write_summary_csv(path, summary: RunSummary) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("controller,seed,rmse_j1_deg,rmse_j2_deg,rmse_avg_deg,status\n")
        for r in summary.results:
            if r.status == "ok":
                fields = [r.controller, str(r.seed), _fmt(r.rmse_joints_deg[0]),
                          _fmt(r.rmse_joints_deg[1]), _fmt(r.rmse_avg_deg), "ok"]
            else:
                fields = [r.controller, str(r.seed), "nan", "nan", "nan",
                          r.status.replace(",", ";")]
            fh.write(",".join(fields) + "\n")


def write_summary_txt(path, summary: RunSummary) -> None:
    """Human-readable mean +/- std table over the evaluation seeds."""
    lines = [f"{'controller':<12}{'rmse_deg (mean +/- std)':>28}{'runs':>10}"]
    for name, st in summary.stats.items():
        runs = f"{st.n_ok}/{st.n_ok + st.n_failed}"
        lines.append(f"{name:<12}{st.mean_rmse_deg:>16.3f} +/- {st.std_rmse_deg:<8.3f}{runs:>9}")
    failed = [r for r in summary.results if r.status != "ok"]
    for r in failed:
        lines.append(f"FAILED {r.controller} seed {r.seed}: {r.status}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def validate(config: ExperimentConfig | None = None, seed: int = 0,
             n_states: int = 100) -> list:
    """Self-contained invariant suites; returns (name, passed, detail) tuples.

    Covers the dynamics consistency oracles, the GP posterior against a dense
    numpy inversion, the Lyapunov design residual, and trajectory derivative
    consistency.
    """
    config = config if config is not None else ExperimentConfig()
    model = config.make_model()
    rng = np.random.default_rng(seed)
    checks = []

    # dynamics: inertia symmetric positive definite
    worst_asym = 0.0
    min_eig = np.inf
    for _ in range(n_states):
        q = rng.uniform(-np.pi, np.pi, size=2)
        M = inertia(model, q)
        worst_asym = max(worst_asym, float(np.abs(M - M.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(M).min()))
    checks.append(("inertia_spd", worst_asym < 1e-12 and min_eig > 0,
                   f"max asymmetry {worst_asym:.2e}, min eig {min_eig:.3e}"))

    # dynamics: forward then inverse dynamics round trip
    worst = 0.0
    for _ in range(n_states):
        q = rng.uniform(-np.pi, np.pi, size=2)
        dq = rng.uniform(-2, 2, size=2)
        ddq = rng.uniform(-5, 5, size=2)
        tau = inverse_dynamics(model, q, dq, ddq)
        ddq_back = forward_dynamics(model, RobotState(q, dq), tau)
        worst = max(worst, float(np.abs(ddq_back - ddq).max()))
    checks.append(("forward_inverse_roundtrip", worst < 1e-9,
                   f"max residual {worst:.2e}"))

    # dynamics: skew-symmetry of dM/dt - 2C via finite differences
    worst = 0.0
    h = 1e-6
    for _ in range(n_states):
        q = rng.uniform(-np.pi, np.pi, size=2)
        dq = rng.uniform(-2, 2, size=2)
        m_dot = (inertia(model, q + h * dq) - inertia(model, q - h * dq)) / (2 * h)
        S = m_dot - 2.0 * coriolis(model, q, dq)
        worst = max(worst, float(np.abs(S + S.T).max()))
    checks.append(("skew_symmetry", worst < 1e-6, f"max residual {worst:.2e}"))

    # dynamics: torque-free energy conservation
    state = RobotState(np.array([0.4, 0.9]), np.array([1.0, -0.5]))
    e0 = total_energy(model, state)
    trace = simulate(model, lambda t, s: np.zeros(2), state, 10.0,
                     config.control_rate, config.integrator_substeps)
    e1 = total_energy(model, trace.final_state)
    drift = abs(e1 - e0) / max(abs(e0), 1e-9)
    checks.append(("energy_drift", drift < 1e-4, f"relative drift {drift:.2e}"))

    # GPR: posterior against a dense numpy inversion
    worst = 0.0
    for _ in range(5):
        n = int(rng.integers(5, 30))
        X = rng.uniform(-2, 2, size=(n, 6))
        y = rng.normal(size=(n, 2))
        ds = GpDataset(inputs=X, targets=y, noise_std=0.3)
        params = [SeKernelParams(lam=float(rng.uniform(0.5, 2.0)),
                                 lengthscales=rng.uniform(0.8, 2.5, size=6))
                  for _ in range(2)]
        gp_model = model_from_params(ds, params)
        for _ in range(4):
            x_star = rng.uniform(-2, 2, size=6)
            mean, var = predict(gp_model, x_star)
            for i, p in enumerate(params):
                K = gpr.kernel_matrix(X, p)
                A = K + (ds.noise_std ** 2 + gp_model.jitters[i]) * np.eye(n)
                k_star = np.array([gpr.se_kernel(x_star, xr, p) for xr in X])
                mean_ref = k_star @ np.linalg.solve(A, y[:, i])
                var_ref = p.lam - k_star @ np.linalg.solve(A, k_star)
                worst = max(worst, abs(mean[i] - mean_ref), abs(var[i] - var_ref))
    checks.append(("gp_dense_oracle", worst < 1e-8, f"max deviation {worst:.2e}"))

    # Lyapunov design residual and positive definiteness
    worst = 0.0
    min_eig = np.inf
    for kp, kd in ((config.kp, config.kd), (10.0, 5.0), (1.0, 1.0)):
        gains = GainSpec(kp=kp, kd=kd)
        design = design_lyapunov(gains, 2)
        H = error_matrix(gains, 2)
        worst = max(worst, float(np.linalg.norm(
            H.T @ design.Q + design.Q @ H + design.P)))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(design.Q).min()))
    checks.append(("lyapunov_residual", worst < 1e-8 and min_eig > 0,
                   f"max residual {worst:.2e}, min eig {min_eig:.3e}"))

    # trajectory: analytic derivatives against central differences
    spec = sample_spec(config.training_seed, 2, config.n_sinusoids,
                       config.omega_min, config.omega_max)
    worst = 0.0
    h = 1e-5
    for _ in range(100):
        t = float(rng.uniform(0.0, config.duration))
        qm, _, _ = evaluate(spec, t - h)
        qp, _, _ = evaluate(spec, t + h)
        _, dq_ref, _ = evaluate(spec, t)
        worst = max(worst, float(np.abs((qp - qm) / (2 * h) - dq_ref).max()))
    checks.append(("trajectory_derivatives", worst < 1e-6,
                   f"max residual {worst:.2e}"))

    return checks
