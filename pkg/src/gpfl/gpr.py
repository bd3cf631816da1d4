"""Exact Gaussian process regression with a squared-exponential ARD kernel.

Learns the N-output model-mismatch torque as N independent GPs over the
3N-dimensional location (q, dq, ddq).  Hyperparameters are fitted by
multi-start maximization of the log marginal likelihood over log-parameters
with analytic gradients.  Also provides the confidence-interval machinery
the robust controller consumes: the rho bound, a greedy information-gain
estimate and the lemma-style beta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

BASE_JITTER_FACTOR = 1e-10
MAX_JITTER_FACTOR = 1e-4
VARIANCE_CLAMP = -1e-9
RHO_SCALINGS = ("sigma", "variance")

_LOG_LAM_BOUNDS = (np.log(1e-8), np.log(1e10))
_LOG_LEN_BOUNDS = (np.log(1e-3), np.log(1e4))


class IllConditionedDatasetError(RuntimeError):
    """Kernel matrix stayed non positive definite through the jitter ladder."""


@dataclass(frozen=True)
class GpInput:
    """One regression input: joint position, velocity and acceleration."""

    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        dq = np.asarray(self.dq, dtype=float)
        ddq = np.asarray(self.ddq, dtype=float)
        if not (q.ndim == 1 and q.shape == dq.shape == ddq.shape):
            raise ValueError("q, dq, ddq must be 1-D vectors of equal length")
        if not np.isfinite(np.concatenate([q, dq, ddq])).all():
            raise ValueError("GP input must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "ddq", ddq)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.dq, self.ddq])


def as_vector(x) -> np.ndarray:
    """Accept a GpInput or a raw 1-D array as a query location."""
    if isinstance(x, GpInput):
        return x.vector
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError("GP query must be a single 1-D location")
    return v


@dataclass(frozen=True)
class SeKernelParams:
    """Signal variance lam and per-dimension ARD lengthscales."""

    lam: float
    lengthscales: np.ndarray

    def __post_init__(self):
        lam = float(self.lam)
        ls = np.asarray(self.lengthscales, dtype=float)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "lengthscales", ls)
        if not (np.isfinite(lam) and lam > 0):
            raise ValueError("lam must be positive and finite")
        if ls.ndim != 1 or not (np.isfinite(ls).all() and (ls > 0).all()):
            raise ValueError("lengthscales must be positive finite scalars")


@dataclass(frozen=True)
class BoundParams:
    """Confidence multiplier beta, failure probability delta, scaling rule.

    scaling selects the half-width: "sigma" uses beta*sqrt(variance),
    "variance" uses beta*variance.
    """

    beta: float | np.ndarray = 3.0
    delta: float = 0.1
    scaling: str = "sigma"

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if not (np.isfinite(beta).all() and (beta > 0).all()):
            raise ValueError("beta must be positive and finite")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.scaling not in RHO_SCALINGS:
            raise ValueError(f"scaling must be one of {RHO_SCALINGS}")
        object.__setattr__(self, "beta", beta)

    def beta_vector(self, n_outputs: int) -> np.ndarray:
        if self.beta.ndim == 0:
            return np.full(n_outputs, float(self.beta))
        if self.beta.shape != (n_outputs,):
            raise ValueError("beta must be scalar or one value per output")
        return self.beta


@dataclass
class GpDataset:
    """Training inputs (n x 3N), mismatch targets (n x N) and noise level."""

    inputs: np.ndarray
    targets: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have one row per sample")
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        if not (np.isfinite(self.inputs).all() and np.isfinite(self.targets).all()):
            raise ValueError("dataset must be finite")
        self.noise_std = float(self.noise_std)
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be nonnegative")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]


@dataclass(frozen=True)
class GpModel:
    """Per-output kernel params with cached Cholesky factors and weights.

    Immutable after fit; predict and rho_bound only read from it.
    """

    dataset: GpDataset
    params: tuple
    alphas: tuple
    chols: tuple
    jitters: tuple
    x_scaled: tuple
    noise_var: float

    @property
    def n_outputs(self) -> int:
        return len(self.params)

    @property
    def n_samples(self) -> int:
        return self.dataset.n_samples

    @property
    def input_dim(self) -> int:
        return self.dataset.input_dim


def se_kernel(x, y, params: SeKernelParams) -> float:
    """k(x, y) = lam * exp(-sum_d (x_d - y_d)^2 / l_d^2)."""
    xv = as_vector(x)
    yv = as_vector(y)
    if xv.shape != yv.shape or xv.shape != params.lengthscales.shape:
        raise ValueError("kernel arguments must match the lengthscale dimension")
    d = (xv - yv) / params.lengthscales
    return params.lam * float(np.exp(-np.dot(d, d)))


def kernel_matrix(X: np.ndarray, params: SeKernelParams) -> np.ndarray:
    Z = np.asarray(X, dtype=float) / params.lengthscales
    sq = np.sum((Z[:, None, :] - Z[None, :, :]) ** 2, axis=2)
    return params.lam * np.exp(-sq)


def mismatch_target(nominal, q, dq, ddq, tau) -> np.ndarray:
    """Mismatch torque e = tau - M_hat(q) ddq - n_hat(q, dq)."""
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    ddq = np.asarray(ddq, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return tau - nominal.inertia(q) @ ddq - nominal.bias(q, dq)


def compute_mismatch_target(nominal, x: GpInput, tau) -> np.ndarray:
    return mismatch_target(nominal, x.q, x.dq, x.ddq, tau)


def stable_cholesky(K: np.ndarray, lam: float, noise_var: float):
    """Lower Cholesky of K + (noise_var + jitter) I.

    Jitter starts at 1e-10*lam and escalates tenfold on failure, capped at
    1e-4*lam so silent degradation is impossible.
    """
    n = K.shape[0]
    eye = np.eye(n)
    jitter = BASE_JITTER_FACTOR * lam
    while jitter <= MAX_JITTER_FACTOR * lam * (1.0 + 1e-9):
        try:
            L = scipy.linalg.cholesky(K + (noise_var + jitter) * eye, lower=True)
            return L, jitter
        except scipy.linalg.LinAlgError:
            jitter *= 10.0
    raise IllConditionedDatasetError(
        f"kernel matrix not positive definite even with jitter {MAX_JITTER_FACTOR:g}*lam")


def _pairwise_sq_diffs(X: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (n, n, d)."""
    return (X[:, None, :] - X[None, :, :]) ** 2


def _lml_and_grad(sq_diffs: np.ndarray, y: np.ndarray, noise_var: float,
                  theta: np.ndarray):
    """Log marginal likelihood and gradient w.r.t. log(lam), log(lengthscales).

    The diagonal jitter scales with lam, so d(jitter)/d(log lam) = jitter is
    included to keep the gradient exact for the objective as implemented.
    """
    n = sq_diffs.shape[0]
    lam = np.exp(theta[0])
    ls = np.exp(theta[1:])
    sq = sq_diffs @ (1.0 / ls ** 2)
    K = lam * np.exp(-sq)
    L, jitter = stable_cholesky(K, lam, noise_var)
    alpha = scipy.linalg.cho_solve((L, True), y)
    lml = (-0.5 * float(y @ alpha)
           - float(np.log(np.diag(L)).sum())
           - 0.5 * n * np.log(2.0 * np.pi))
    a_inv = scipy.linalg.cho_solve((L, True), np.eye(n))
    w = np.outer(alpha, alpha) - a_inv
    grad = np.empty_like(theta)
    grad[0] = 0.5 * (np.sum(w * K) + jitter * np.trace(w))
    for d in range(len(ls)):
        dk = K * (2.0 * sq_diffs[:, :, d] / ls[d] ** 2)
        grad[1 + d] = 0.5 * np.sum(w * dk)
    return lml, grad


def log_marginal_likelihood(dataset: GpDataset, params: SeKernelParams,
                            output_index: int = 0) -> float:
    """LML of one output under fixed hyperparameters (jitter included)."""
    sq_diffs = _pairwise_sq_diffs(dataset.inputs)
    theta = np.concatenate([[np.log(params.lam)], np.log(params.lengthscales)])
    lml, _ = _lml_and_grad(sq_diffs, dataset.targets[:, output_index],
                           dataset.noise_std ** 2, theta)
    return lml


def default_init_params(dataset: GpDataset) -> SeKernelParams:
    """Data-scaled initialization: lam from target spread, lengthscales from input spread."""
    lam = max(float(np.var(dataset.targets)), 1e-2)
    span = np.std(dataset.inputs, axis=0)
    ls = np.where(span > 1e-6, span, 1.0)
    return SeKernelParams(lam=lam, lengthscales=ls)


def fit(dataset: GpDataset, init: SeKernelParams, n_starts: int = 4,
        max_iter: int = 60, seed: int = 0) -> GpModel:
    """Fit per-output hyperparameters by multi-start L-BFGS on the LML.

    The initialization is always evaluated and kept as the fallback, so the
    returned parameters never have a lower LML than `init`.
    """
    if dataset.n_samples < 2:
        raise ValueError("need at least two samples to fit")
    if init.lengthscales.shape != (dataset.input_dim,):
        raise ValueError("init lengthscales must match the input dimension")
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    sq_diffs = _pairwise_sq_diffs(dataset.inputs)
    noise_var = dataset.noise_std ** 2
    rng = np.random.default_rng(seed)
    theta0 = np.concatenate([[np.log(init.lam)], np.log(init.lengthscales)])
    lo = np.array([_LOG_LAM_BOUNDS[0]] + [_LOG_LEN_BOUNDS[0]] * dataset.input_dim)
    hi = np.array([_LOG_LAM_BOUNDS[1]] + [_LOG_LEN_BOUNDS[1]] * dataset.input_dim)
    theta0 = np.clip(theta0, lo, hi)
    bounds = list(zip(lo, hi))

    params_out = []
    for i in range(dataset.n_outputs):
        y = dataset.targets[:, i]

        def objective(theta):
            try:
                lml, grad = _lml_and_grad(sq_diffs, y, noise_var, theta)
            except IllConditionedDatasetError:
                return 1e25, np.zeros_like(theta)
            return -lml, -grad

        best_theta = theta0
        best_val = objective(theta0)[0]
        starts = [theta0]
        starts += [np.clip(theta0 + rng.normal(0.0, 1.0, size=theta0.size), lo, hi)
                   for _ in range(n_starts - 1)]
        for start in starts:
            res = scipy.optimize.minimize(objective, start, jac=True,
                                          method="L-BFGS-B", bounds=bounds,
                                          options={"maxiter": max_iter})
            if np.isfinite(res.fun) and res.fun < best_val:
                best_val = res.fun
                best_theta = res.x
        params_out.append(SeKernelParams(lam=float(np.exp(best_theta[0])),
                                         lengthscales=np.exp(best_theta[1:])))
    return model_from_params(dataset, params_out)


def model_from_params(dataset: GpDataset, params_per_output) -> GpModel:
    """Build the cached factorizations for fixed hyperparameters."""
    params = tuple(params_per_output)
    if len(params) != dataset.n_outputs:
        raise ValueError("need one SeKernelParams per output")
    noise_var = dataset.noise_std ** 2
    alphas, chols, jitters, x_scaled = [], [], [], []
    for i, p in enumerate(params):
        if p.lengthscales.shape != (dataset.input_dim,):
            raise ValueError("lengthscales must match the input dimension")
        K = kernel_matrix(dataset.inputs, p)
        L, jitter = stable_cholesky(K, p.lam, noise_var)
        alphas.append(scipy.linalg.cho_solve((L, True), dataset.targets[:, i]))
        chols.append(L)
        jitters.append(jitter)
        x_scaled.append(dataset.inputs / p.lengthscales)
    return GpModel(dataset=dataset, params=params, alphas=tuple(alphas),
                   chols=tuple(chols), jitters=tuple(jitters),
                   x_scaled=tuple(x_scaled), noise_var=noise_var)


def predict(model: GpModel, x):
    """Posterior mean and variance per output at a single query location."""
    v = as_vector(x)
    if v.shape != (model.input_dim,):
        raise ValueError("query dimension does not match the training inputs")
    means = np.empty(model.n_outputs)
    variances = np.empty(model.n_outputs)
    for i, p in enumerate(model.params):
        d = model.x_scaled[i] - v / p.lengthscales
        k_star = p.lam * np.exp(-np.einsum("nd,nd->n", d, d))
        means[i] = float(k_star @ model.alphas[i])
        w = scipy.linalg.solve_triangular(model.chols[i], k_star, lower=True)
        var = p.lam - float(w @ w)
        if var < VARIANCE_CLAMP:
            raise FloatingPointError(
                f"posterior variance {var:.3e} below clamp threshold; "
                "kernel matrix likely ill-conditioned")
        variances[i] = max(var, 0.0)
    return means, variances


def rho_from_mean_var(mean: np.ndarray, variance: np.ndarray,
                      bounds: BoundParams):
    """rho_i = max{|mu_i - h_i|, |mu_i + h_i|}; rho = sqrt(sum rho_i^2)."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    beta = bounds.beta_vector(len(mean))
    if bounds.scaling == "sigma":
        half = beta * np.sqrt(variance)
    else:
        half = beta * variance
    components = np.maximum(np.abs(mean - half), np.abs(mean + half))
    return float(np.sqrt(np.sum(components ** 2))), components


def rho_bound(model: GpModel, x, bounds: BoundParams):
    """Residual-mismatch bound at x from the posterior confidence interval."""
    mean, variance = predict(model, x)
    return rho_from_mean_var(mean, variance, bounds)


def _candidate_matrix(candidates) -> np.ndarray:
    if isinstance(candidates, np.ndarray):
        X = np.atleast_2d(np.asarray(candidates, dtype=float))
    else:
        rows = [as_vector(c) for c in candidates]
        if not rows:
            raise ValueError("candidate pool must be non-empty")
        X = np.vstack(rows)
    if X.shape[0] == 0:
        raise ValueError("candidate pool must be non-empty")
    return X


def max_information_gain(candidates, params: SeKernelParams,
                         noise_bound: float, budget: int) -> float:
    """Greedy lower bound on max_S 0.5 log det(I + K_S / noise_bound^2).

    Iteratively adds the candidate with the largest posterior variance given
    the points selected so far; the greedy value is within (1 - 1/e) of the
    exhaustive optimum by submodularity.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if noise_bound <= 0:
        raise ValueError("noise_bound must be positive")
    X = _candidate_matrix(candidates)
    K = kernel_matrix(X, params)
    s2 = noise_bound ** 2
    selected: list[int] = []
    remaining = list(range(X.shape[0]))
    for _ in range(min(budget, X.shape[0])):
        rem = np.array(remaining)
        if selected:
            sel = np.array(selected)
            kss = K[np.ix_(sel, sel)] + s2 * np.eye(len(sel))
            ksr = K[np.ix_(sel, rem)]
            post = K[rem, rem] - np.einsum("ij,ij->j", ksr, np.linalg.solve(kss, ksr))
        else:
            post = K[rem, rem].copy()
        selected.append(remaining.pop(int(np.argmax(post))))
    sel = np.array(selected)
    _, logdet = np.linalg.slogdet(np.eye(len(sel)) + K[np.ix_(sel, sel)] / s2)
    return 0.5 * float(logdet)


def beta_from_lemma(rkhs_norm_bound, gamma: float, n: int, delta: float):
    """beta_i = 2 ||e_i||_k^2 + 300 gamma ln^3((n + 1) / delta)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    if n < 0:
        raise ValueError("n must be nonnegative")
    b = np.asarray(rkhs_norm_bound, dtype=float)
    if (b < 0).any():
        raise ValueError("RKHS norm bounds must be nonnegative")
    beta = 2.0 * b ** 2 + 300.0 * gamma * np.log((n + 1) / delta) ** 3
    return float(beta) if beta.ndim == 0 else beta


def save_dataset_csv(dataset: GpDataset, path) -> None:
    """CSV export: noise level comment, named columns, one row per sample."""
    n_j = dataset.input_dim // 3
    names = ([f"q{j + 1}" for j in range(n_j)]
             + [f"dq{j + 1}" for j in range(n_j)]
             + [f"ddq{j + 1}" for j in range(n_j)]
             + [f"e{i + 1}" for i in range(dataset.n_outputs)])
    data = np.column_stack([dataset.inputs, dataset.targets])
    with open(path, "w", newline="") as fh:
        fh.write(f"# noise_std={dataset.noise_std:.17g}\n")
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_dataset_csv(path) -> GpDataset:
    noise_std = 0.0
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                if key.strip() == "noise_std":
                    noise_std = float(value)
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ValueError(f"no data rows in {path}")
    data = np.array(rows)
    target_cols = [i for i, name in enumerate(header) if name.startswith("e")]
    input_cols = [i for i in range(len(header)) if i not in target_cols]
    if not target_cols:
        raise ValueError(f"no target columns (e*) in {path}")
    return GpDataset(inputs=data[:, input_cols], targets=data[:, target_cols],
                     noise_std=noise_std)


def save_model_txt(model: GpModel, path, dataset_ref: str = "") -> None:
    """Flat key-value export of the fitted hyperparameters."""
    lines = []
    if dataset_ref:
        lines.append(f"dataset={dataset_ref}")
    lines.append(f"n_outputs={model.n_outputs}")
    lines.append(f"n_samples={model.n_samples}")
    lines.append(f"input_dim={model.input_dim}")
    lines.append(f"noise_std={model.dataset.noise_std:.17g}")
    for i, p in enumerate(model.params, start=1):
        lines.append(f"output{i}.lambda={p.lam:.17g}")
        for d, ell in enumerate(p.lengthscales, start=1):
            lines.append(f"output{i}.lengthscale{d}={ell:.17g}")
        lines.append(f"output{i}.jitter={model.jitters[i - 1]:.17g}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model_txt(path):
    """Parse a key-value export; returns (params_per_output, metadata dict)."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    n_outputs = int(meta["n_outputs"])
    input_dim = int(meta["input_dim"])
    params = []
    for i in range(1, n_outputs + 1):
        lam = float(meta[f"output{i}.lambda"])
        ls = np.array([float(meta[f"output{i}.lengthscale{d}"])
                       for d in range(1, input_dim + 1)])
        params.append(SeKernelParams(lam=lam, lengthscales=ls))
    return params, meta
