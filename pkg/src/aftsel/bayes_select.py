"""Posterior model scoring and search.

A model's unnormalized log posterior is a Laplace-approximated marginal
likelihood plus a beta-binomial model prior.  The marginal integrates the
censored AFT likelihood times the non-local coefficient prior over
(mu, beta, log sigma), with flat (improper) priors on the nuisance pair
(mu, log sigma):

    log m(k) ~= g(theta*) + ((n_k + 2)/2) log 2pi - 1/2 log det(-H(theta*))

where g = loglik + log prior(beta), theta* is g's mode, and H its Hessian
there.  ``select_best_model`` scores every submodel of a candidate set when
the set is small enough to enumerate and falls back to greedy stepwise
search otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from scipy.special import betaln

from .aft_core import (
    AftParams,
    ModelSpec,
    SurvivalDataset,
    _newton_maximize,
    aft_loglik,
    aft_loglik_derivs,
    fit_aft_mle,
)
from .errors import ConvergenceError, NumericalError
from .nlp_priors import (
    PriorConfig,
    log_nlp_density,
    log_nlp_grad,
    log_nlp_hess_diag,
)

_LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_SEARCH_CAP = 10


@dataclass(frozen=True)
class ModelScore:
    """Posterior score of one model.

    ``log_posterior_unnorm`` is always ``log_marginal + log_prior``;
    ``map_params`` holds the (mu, beta, sigma) mode the Laplace
    approximation was taken at.
    """

    model: ModelSpec
    log_marginal: float
    log_prior: float
    log_posterior_unnorm: float
    map_params: AftParams

    def __post_init__(self):
        if abs(self.log_posterior_unnorm - (self.log_marginal + self.log_prior)) > 1e-12:
            raise ValueError(
                "log_posterior_unnorm must equal log_marginal + log_prior"
            )

    def with_log_prior(self, log_prior: float) -> "ModelScore":
        """Return a copy with the model-prior term (re)applied."""
        return replace(
            self,
            log_prior=log_prior,
            log_posterior_unnorm=self.log_marginal + log_prior,
        )


def log_model_prior(n_k: int, p_s: int) -> float:
    """Beta-binomial model prior: log B(n_k + 1, p_s - n_k + 1).

    Arises from a uniform prior on the inclusion probability, integrated
    out; the probabilities of all 2**p_s models sum to 1.
    """
    n_k = int(n_k)
    p_s = int(p_s)
    if p_s < 1:
        raise ValueError("p_s must be a positive integer")
    if n_k < 0 or n_k > p_s:
        raise ValueError(f"need 0 <= n_k <= p_s, got n_k={n_k}, p_s={p_s}")
    return float(betaln(n_k + 1, p_s - n_k + 1))


def _nudged_start(mle: AftParams, data, model, config) -> np.ndarray:
    """Mode-search start: the MLE, with exact-zero coefficients pushed off
    the prior's pole at 0 (sign from the likelihood gradient; ties -> +)."""
    theta = np.concatenate([[mle.mu], mle.beta, [math.log(mle.sigma)]])
    zero = np.flatnonzero(mle.beta == 0.0)
    if zero.size:
        grad, _ = aft_loglik_derivs(data, model, mle)
        eps = 0.01 * math.sqrt(config.scale)
        for j in zero:
            s = math.copysign(1.0, grad[1 + j]) if grad[1 + j] != 0.0 else 1.0
            theta[1 + j] = s * eps
    return theta


def log_marginal_laplace(data: SurvivalDataset, model: ModelSpec,
                         config: PriorConfig) -> ModelScore:
    """Laplace-approximated log marginal likelihood of one model.

    The returned score carries ``log_prior = 0``; the caller composes the
    model prior via :meth:`ModelScore.with_log_prior` (the prior depends on
    the candidate-pool size, which this function does not know).

    Raises
    ------
    ConvergenceError
        If the posterior-mode search fails; the offending model is attached
        as the exception's ``model`` attribute.
    NumericalError
        If ``-H`` is not positive definite at the reported mode.
    """
    k = model.size
    try:
        mle, _ = fit_aft_mle(data, model)

        if k == 0:
            theta = np.array([mle.mu, math.log(mle.sigma)])
            g_val = aft_loglik(data, model, mle)
            _, hess = aft_loglik_derivs(data, model, mle)
            mode_params = mle
        else:
            def value(th):
                params = AftParams(th[0], th[1 : k + 1], math.exp(th[k + 1]))
                lp = log_nlp_density(th[1 : k + 1], config)
                if lp == -math.inf:
                    return -math.inf
                return aft_loglik(data, model, params) + lp

            def derivs(th):
                params = AftParams(th[0], th[1 : k + 1], math.exp(th[k + 1]))
                grad, hess = aft_loglik_derivs(data, model, params)
                grad = grad.copy()
                hess = hess.copy()
                grad[1 : k + 1] += log_nlp_grad(th[1 : k + 1], config)
                hess[np.arange(1, k + 1), np.arange(1, k + 1)] += (
                    log_nlp_hess_diag(th[1 : k + 1], config)
                )
                return grad, hess

            theta0 = _nudged_start(mle, data, model, config)
            theta, g_val, _, hess = _newton_maximize(value, derivs, theta0)
            mode_params = AftParams(
                theta[0], theta[1 : k + 1], math.exp(theta[k + 1])
            )
    except (ConvergenceError, NumericalError) as err:
        err.model = model
        raise

    try:
        chol = np.linalg.cholesky(-hess)
    except np.linalg.LinAlgError:
        err = NumericalError(
            f"-Hessian not positive definite at the mode of model "
            f"{model.indices}"
        )
        err.model = model
        raise err from None
    log_det = 2.0 * float(np.log(np.diag(chol)).sum())
    log_marginal = g_val + 0.5 * (k + 2) * _LOG_2PI - 0.5 * log_det
    return ModelScore(
        model=model,
        log_marginal=log_marginal,
        log_prior=0.0,
        log_posterior_unnorm=log_marginal,
        map_params=mode_params,
    )


def _score(data, model, config, p_s, cache):
    if model.indices not in cache:
        raw = log_marginal_laplace(data, model, config)
        cache[model.indices] = raw.with_log_prior(
            log_model_prior(model.size, p_s)
        )
    return cache[model.indices]


def _argmax(scores):
    """Highest log_posterior_unnorm; ties prefer fewer variables, then the
    lexicographically smallest index tuple."""
    ordered = sorted(scores, key=lambda s: (s.model.size, s.model.indices))
    best = ordered[0]
    for sc in ordered[1:]:
        if sc.log_posterior_unnorm > best.log_posterior_unnorm:
            best = sc
    return best


def select_best_model(data: SurvivalDataset, candidates: ModelSpec,
                      config: PriorConfig,
                      search_cap: int = DEFAULT_SEARCH_CAP,
                      *, base: ModelSpec | None = None,
                      prior_pool: int | None = None):
    """Pick the highest-posterior submodel of a candidate index set.

    When the set has at most ``search_cap`` members every one of its
    2**p_s submodels is scored; larger sets get a greedy stepwise search
    (single add/drop moves from the empty model up to a local maximum).
    The empty model is always scored, so "select nothing" is a possible
    outcome.

    ``base`` forces a group of variables into every scored model (they are
    refit jointly with each candidate subset), so the search decides only
    which candidates to add on top of it.  ``prior_pool`` widens the
    beta-binomial model prior to range over that many variables instead of
    just the candidates at hand; when a small candidate set was screened
    out of a much larger pool, the multiplicity penalty has to count the
    pool or the prior does nothing.  Defaults preserve the standalone
    behavior: no base, prior over base-plus-candidates.

    Returns
    -------
    best : ModelScore
    all_scored : list of ModelScore
        Every model scored during the search, sorted by (size, indices).
    """
    if candidates.size == 0:
        raise ValueError("candidate set must be non-empty")
    if search_cap < 1:
        raise ValueError("search_cap must be >= 1")
    pool = candidates.indices
    base_idx = base.indices if base is not None else ()
    if set(base_idx) & set(pool):
        raise ValueError("base and candidate sets must be disjoint")
    p_s = prior_pool if prior_pool is not None else len(base_idx) + len(pool)
    if p_s < len(base_idx) + len(pool):
        raise ValueError(
            "prior_pool must be at least base size plus candidate count"
        )
    cache: dict = {}

    def merged(subset):
        return ModelSpec(tuple(sorted(base_idx + tuple(subset))))

    if len(pool) <= search_cap:
        for size in range(len(pool) + 1):
            for subset in combinations(pool, size):
                _score(data, merged(subset), config, p_s, cache)
    else:
        current = _score(data, merged(()), config, p_s, cache)
        while True:
            cur_set = set(current.model.indices) - set(base_idx)
            moves = [cur_set - {j} for j in sorted(cur_set)]
            moves += [cur_set | {j} for j in pool if j not in cur_set]
            specs = sorted(
                (merged(mv) for mv in moves),
                key=lambda m: (m.size, m.indices),
            )
            best_move = None
            for spec in specs:
                sc = _score(data, spec, config, p_s, cache)
                if best_move is None or sc.log_posterior_unnorm > best_move.log_posterior_unnorm:
                    best_move = sc
            if best_move is None or best_move.log_posterior_unnorm <= current.log_posterior_unnorm:
                break
            current = best_move

    all_scored = sorted(
        cache.values(), key=lambda s: (s.model.size, s.model.indices)
    )
    return _argmax(all_scored), all_scored
