"""Censored log-normal AFT likelihood: evaluation, derivatives, and MLE.

The observed data are triples (y_i, delta_i, x_i) with y_i > 0 and
delta_i = 1 for an observed event, 0 for right censoring.  A model is a
subset of covariate columns; its parameters are an intercept ``mu``, a
coefficient vector ``beta`` and a scale ``sigma``.  log(y) is modeled as
N(mu + x @ beta, sigma^2); censored rows contribute the log survival
probability of the standardized residual.

All optimization happens in (mu, beta, log sigma) so the scale stays
positive without projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

from .errors import ConvergenceError

_LOG_2PI = math.log(2.0 * math.pi)

# Safeguarded-Newton defaults, shared by every fit in the package.
GRAD_TOL = 1e-6
MAX_ITER = 100
MAX_HALVINGS = 30


@dataclass(frozen=True)
class SurvivalDataset:
    """Immutable right-censored survival sample.

    Parameters
    ----------
    design : ndarray, shape (n, p)
        Covariate matrix; column j is covariate j.
    times : ndarray, shape (n,)
        Observed follow-up times, strictly positive.
    status : ndarray, shape (n,)
        Event indicators in {0, 1}; 1 means the event was observed.
    """

    design: np.ndarray
    times: np.ndarray
    status: np.ndarray

    def __post_init__(self):
        design = np.ascontiguousarray(np.asarray(self.design, dtype=float))
        times = np.asarray(self.times, dtype=float).ravel()
        status = np.asarray(self.status).ravel()
        if design.ndim != 2:
            raise ValueError("design must be a 2-d array")
        n = design.shape[0]
        if times.shape[0] != n or status.shape[0] != n:
            raise ValueError(
                f"length mismatch: design has {n} rows, times has "
                f"{times.shape[0]}, status has {status.shape[0]}"
            )
        if not np.all(np.isfinite(design)):
            raise ValueError("design contains non-finite entries")
        if not np.all(np.isfinite(times)) or np.any(times <= 0.0):
            raise ValueError("times must be finite and strictly positive")
        if not np.all(np.isin(status, (0, 1))):
            raise ValueError("status entries must be 0 or 1")
        status = status.astype(np.int8)
        if not np.any(status == 1):
            raise ValueError("at least one event (status == 1) is required")
        design.setflags(write=False)
        times.setflags(write=False)
        status.setflags(write=False)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    @property
    def log_times(self) -> np.ndarray:
        log_t = np.log(self.times)
        log_t.setflags(write=False)
        return log_t

    def standardized(self) -> "SurvivalDataset":
        """Return a copy whose columns have mean 0 and standard deviation 1."""
        mean = self.design.mean(axis=0)
        sd = self.design.std(axis=0)
        zero = sd == 0.0
        if np.any(zero):
            cols = np.flatnonzero(zero)
            raise ValueError(
                f"cannot standardize constant column(s): {cols.tolist()}"
            )
        return SurvivalDataset(
            design=(self.design - mean) / sd,
            times=self.times.copy(),
            status=self.status.copy(),
        )


@dataclass(frozen=True)
class ModelSpec:
    """A submodel: the strictly increasing covariate indices it includes."""

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise ValueError("covariate indices must be nonnegative")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AftParams:
    """Parameters of one fitted AFT model: (mu, beta, sigma)."""

    mu: float
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma: float = 1.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not (self.sigma > 0.0) or not math.isfinite(self.sigma):
            raise ValueError("sigma must be positive and finite")
        if not math.isfinite(self.mu) or not np.all(np.isfinite(beta)):
            raise ValueError("parameters must be finite")


def log_survival_std(z: float) -> float:
    """Stable log(1 - Phi(z)) for the standard normal.

    Delegates to the complementary-CDF path log(Phi(-z)), which switches
    to an asymptotic tail expansion internally; never forms 1 - Phi(z) by
    subtraction.
    """
    z = float(z)
    if not math.isfinite(z):
        raise ValueError("z must be finite")
    return float(log_ndtr(-z))


def _log_sf(z: np.ndarray) -> np.ndarray:
    """Vectorized log(1 - Phi(z))."""
    return log_ndtr(-z)


def _mills(z: np.ndarray) -> np.ndarray:
    """Inverse Mills ratio phi(z) / (1 - Phi(z)), the standard normal hazard."""
    # extreme z (tiny trial sigma) overflows the exp; callers check
    # finiteness, so the warning is just noise
    with np.errstate(over="ignore"):
        return np.exp(-0.5 * z * z - 0.5 * _LOG_2PI - log_ndtr(-z))


def _check_model_params(data, model, params):
    if model.size and model.indices[-1] >= data.p:
        raise ValueError(
            f"model index {model.indices[-1]} out of range for p={data.p}"
        )
    if params.beta.shape[0] != model.size:
        raise ValueError(
            f"params.beta has length {params.beta.shape[0]} but model has "
            f"{model.size} covariates"
        )


def _loglik_arrays(ylog, status, eta, sigma):
    """Log-likelihood from raw arrays; eta is the full linear predictor.

    Degenerate inputs (sigma near 0, huge residuals) yield non-finite
    values without warnings; callers treat non-finite as "reject".
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        z = (ylog - eta) / sigma
        event = status == 1
        out = np.where(
            event,
            -math.log(sigma) - 0.5 * _LOG_2PI - 0.5 * z * z,
            0.0,
        )
        if not np.all(event):
            cens = ~event
            out[cens] = _log_sf(z[cens])
        return float(out.sum())


def aft_loglik(data: SurvivalDataset, model: ModelSpec, params: AftParams) -> float:
    """Censored log-normal AFT log-likelihood.

    Event rows contribute the Gaussian log-density of log(y) at the linear
    predictor (keeping every sigma-dependent term); censored rows contribute
    log(1 - Phi(z)) of the standardized residual.
    """
    _check_model_params(data, model, params)
    eta = params.mu + (
        data.design[:, model.indices] @ params.beta if model.size else 0.0
    )
    return _loglik_arrays(data.log_times, data.status, eta, params.sigma)


def _derivs_arrays(ylog, status, X, mu, beta, s):
    """Gradient and Hessian of the log-likelihood in theta = (mu, beta, log sigma).

    Censored rows enter through the inverse Mills ratio lam(z) and its
    derivative lam' = lam * (lam - z).  Non-finite output (extreme z from
    degenerate trial parameters) is the caller's signal to back off; the
    arithmetic warnings along the way carry no extra information.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        sigma = math.exp(s)
        k = X.shape[1]
        eta = mu + (X @ beta if k else 0.0)
        z = (ylog - eta) / sigma
        event = status == 1

        lam = np.zeros_like(z)
        dlam = np.zeros_like(z)
        if not np.all(event):
            cens = ~event
            lam_c = _mills(z[cens])
            lam[cens] = lam_c
            dlam[cens] = lam_c * (lam_c - z[cens])

        ev = event.astype(float)
        ce = 1.0 - ev
        # Per-row pieces: u drives the (mu, beta) gradient, w / v / q the
        # curvature blocks (eta-eta, eta-s, s-s).
        u = ev * z + ce * lam
        w = ev + ce * dlam
        v = ev * 2.0 * z + ce * (z * dlam + lam)
        q = ev * 2.0 * z * z + ce * (z * lam + z * z * dlam)

        dim = k + 2
        grad = np.empty(dim)
        grad[0] = u.sum() / sigma
        if k:
            grad[1 : k + 1] = (X.T @ u) / sigma
        grad[k + 1] = float((ev * (z * z - 1.0) + ce * z * lam).sum())

        hess = np.empty((dim, dim))
        hess[0, 0] = -w.sum() / sigma**2
        if k:
            Xw = X * w[:, None]
            hess[0, 1 : k + 1] = -(Xw.sum(axis=0)) / sigma**2
            hess[1 : k + 1, 0] = hess[0, 1 : k + 1]
            hess[1 : k + 1, 1 : k + 1] = -(X.T @ Xw) / sigma**2
            hess[1 : k + 1, k + 1] = -(X.T @ v) / sigma
            hess[k + 1, 1 : k + 1] = hess[1 : k + 1, k + 1]
        hess[0, k + 1] = -v.sum() / sigma
        hess[k + 1, 0] = hess[0, k + 1]
        hess[k + 1, k + 1] = -q.sum()
        return grad, hess


def aft_loglik_derivs(data: SurvivalDataset, model: ModelSpec, params: AftParams):
    """Analytic gradient and Hessian of ``aft_loglik`` in (mu, beta, log sigma).

    Returns
    -------
    gradient : ndarray, shape (n_k + 2,)
        Order: mu, beta_1 .. beta_{n_k}, log sigma.
    hessian : ndarray, shape (n_k + 2, n_k + 2)
        Symmetric.
    """
    _check_model_params(data, model, params)
    X = data.design[:, model.indices]
    return _derivs_arrays(
        data.log_times,
        data.status,
        X,
        params.mu,
        params.beta,
        math.log(params.sigma),
    )


def _ols_init(ylog, X):
    """Least-squares start treating every row as an event."""
    n, k = X.shape[0], X.shape[1]
    A = np.column_stack([np.ones(n), X]) if k else np.ones((n, 1))
    coefs, *_ = np.linalg.lstsq(A, ylog, rcond=None)
    resid = ylog - A @ coefs
    msr = float(resid @ resid) / n
    msr = max(msr, 1e-12)
    return float(coefs[0]), coefs[1:].copy(), 0.5 * math.log(msr)


def _newton_maximize(value_fn, derivs_fn, theta0, max_iter=MAX_ITER,
                     grad_tol=GRAD_TOL, max_halvings=MAX_HALVINGS):
    """Maximize a smooth objective by safeguarded Newton with step halving.

    Falls back to a gradient step whenever the Hessian is not negative
    definite.  Returns (theta, value, grad, hess).
    """

    # line-search trial points can overflow exp()/divide by ~0 sigma; the
    # isfinite checks below own that failure mode, so keep numpy quiet here
    def _quiet(fn):
        def call(x):
            with np.errstate(over="ignore", invalid="ignore",
                             divide="ignore"):
                return fn(x)

        return call

    value_fn = _quiet(value_fn)
    derivs_fn = _quiet(derivs_fn)
    theta = np.asarray(theta0, dtype=float).copy()
    val = value_fn(theta)
    if not math.isfinite(val):
        raise ValueError("objective is not finite at the starting point")
    grad = hess = None
    for _ in range(max_iter):
        grad, hess = derivs_fn(theta)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < grad_tol:
            return theta, val, grad, hess
        try:
            np.linalg.cholesky(-hess)
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = grad / max(1.0, gnorm)
        slope = float(grad @ step)
        if slope <= 0.0:
            step = grad / max(1.0, gnorm)
            slope = float(grad @ step)
        t = 1.0
        improved = False
        for _ in range(max_halvings):
            cand = theta + t * step
            cand_val = value_fn(cand)
            if math.isfinite(cand_val) and cand_val >= val + 1e-4 * t * slope:
                theta, val = cand, cand_val
                improved = True
                break
            if t == 1.0 and math.isfinite(cand_val):
                # Near the maximum the predicted Armijo gain drops below the
                # float resolution of the objective and the test turns into a
                # coin flip; a full step that clearly shrinks the gradient is
                # still real progress (Newton's terminal phase), and the 1/2
                # factor bounds how often this branch can fire.
                cand_grad, _ = derivs_fn(cand)
                if float(np.linalg.norm(cand_grad)) <= 0.5 * gnorm:
                    theta, val = cand, cand_val
                    improved = True
                    break
            t *= 0.5
        if not improved:
            break
    grad, hess = derivs_fn(theta)
    gnorm = float(np.linalg.norm(grad))
    if gnorm < grad_tol:
        return theta, val, grad, hess
    raise ConvergenceError(
        f"Newton did not converge: gradient norm {gnorm:.3e} after cap",
        last_params=theta,
        grad_norm=gnorm,
    )


def _fit_arrays(ylog, status, X, init_theta=None):
    """Fit (mu, beta, log sigma) on raw arrays; returns (theta, loglik)."""
    if init_theta is None:
        mu0, beta0, s0 = _ols_init(ylog, X)
        theta0 = np.concatenate([[mu0], beta0, [s0]])
    else:
        theta0 = np.asarray(init_theta, dtype=float)
    k = X.shape[1]

    def value(th):
        eta = th[0] + (X @ th[1 : k + 1] if k else 0.0)
        return _loglik_arrays(ylog, status, eta, math.exp(th[k + 1]))

    def derivs(th):
        return _derivs_arrays(ylog, status, X, th[0], th[1 : k + 1], th[k + 1])

    theta, val, _, _ = _newton_maximize(value, derivs, theta0)
    return theta, val


def fit_aft_mle(data: SurvivalDataset, model: ModelSpec, init: AftParams | None = None):
    """Maximize the AFT log-likelihood over (mu, beta, log sigma).

    Initializes from the least-squares fit of log(y) on the model columns
    (censored rows treated as events) unless ``init`` is given.

    Returns
    -------
    params : AftParams
    maximized_loglik : float

    Raises
    ------
    ConvergenceError
        If the iteration cap is hit with the gradient still above tolerance.
    """
    if data.n < model.size + 2:
        raise ValueError(
            f"need n >= n_k + 2 (got n={data.n}, n_k={model.size})"
        )
    if model.size and model.indices[-1] >= data.p:
        raise ValueError(
            f"model index {model.indices[-1]} out of range for p={data.p}"
        )
    init_theta = None
    if init is not None:
        if init.beta.shape[0] != model.size:
            raise ValueError("init does not match the model dimension")
        init_theta = np.concatenate(
            [[init.mu], init.beta, [math.log(init.sigma)]]
        )
    X = data.design[:, model.indices]
    theta, val = _fit_arrays(data.log_times, data.status, X, init_theta)
    k = model.size
    params = AftParams(
        mu=theta[0], beta=theta[1 : k + 1], sigma=math.exp(theta[k + 1])
    )
    return params, val
