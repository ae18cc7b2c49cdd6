"""Candidate screening: marginal/conditional utilities, leaders, leading sets.

A candidate's *marginal utility* is the maximized log-likelihood of the
single-covariate AFT model containing it.  Its *conditional utility* given
an already-selected set is the same quantity with the selected variables'
fitted linear predictor frozen in as an offset (the selected coefficients
are not refit per candidate).  Leaders are the top-scoring candidates;
each leader's *leading set* collects the not-yet-taken candidates whose
absolute Pearson correlation with it clears a threshold.

``marginal_utility`` / ``conditional_utility`` are the one-at-a-time
reference routes; ``utility_table`` scores a whole pool at once by running
the same safeguarded Newton across all columns in vectorized blocks, which
is what makes p in the thousands workable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .aft_core import (
    GRAD_TOL,
    MAX_HALVINGS,
    MAX_ITER,
    AftParams,
    ModelSpec,
    SurvivalDataset,
    _fit_arrays,
    _mills,
)
from .errors import ConvergenceError

_LOG_2PI = math.log(2.0 * math.pi)

MARGINAL = "marginal"
CONDITIONAL = "conditional"

# Column-block budget for the vectorized fitter: ~2M matrix cells per block
# keeps transient arrays around 50 MB.
_BLOCK_CELLS = 2_000_000


@dataclass(frozen=True)
class UtilityTable:
    """Scores for every candidate in one screening pass."""

    scores: dict
    kind: str

    def __post_init__(self):
        if self.kind not in (MARGINAL, CONDITIONAL):
            raise ValueError(f"kind must be {MARGINAL!r} or {CONDITIONAL!r}")
        scores = {int(j): float(v) for j, v in self.scores.items()}
        if any(not math.isfinite(v) for v in scores.values()):
            raise ValueError("utility scores must be finite")
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class LeadingSet:
    """A leader index and every pool member correlated enough with it."""

    leader: int
    members: tuple

    def __post_init__(self):
        members = tuple(sorted(int(j) for j in self.members))
        if len(set(members)) != len(members):
            raise ValueError("members must be unique")
        if not members:
            raise ValueError("members must be non-empty")
        object.__setattr__(self, "leader", int(self.leader))
        object.__setattr__(self, "members", members)
        if self.leader not in members:
            raise ValueError("leader must be one of the members")

    @property
    def size(self) -> int:
        return len(self.members)


def _selection_offset(data, selected, selected_fit):
    """Frozen linear predictor of the selected set (without the intercept)."""
    if selected.size == 0:
        return np.zeros(data.n)
    if selected_fit is None:
        raise ValueError("selected_fit is required when selection is non-empty")
    if selected_fit.beta.shape[0] != selected.size:
        raise ValueError("selected_fit does not match the selected model")
    return data.design[:, selected.indices] @ selected_fit.beta


def _single_utility(ylog, status, column, j):
    X = column[:, None]
    try:
        _, value = _fit_arrays(ylog, status, X)
    except ConvergenceError as err:
        wrapped = ConvergenceError(
            f"single-covariate fit failed for candidate {j}: {err}",
            last_params=err.last_params,
            grad_norm=err.grad_norm,
        )
        wrapped.covariate = j
        raise wrapped from err
    return value


def marginal_utility(data: SurvivalDataset, j: int) -> float:
    """Maximized log-likelihood of the single-covariate model {j}."""
    if not 0 <= j < data.p:
        raise ValueError(f"covariate index {j} out of range for p={data.p}")
    return _single_utility(data.log_times, data.status, data.design[:, j], j)


def conditional_utility(data: SurvivalDataset, j: int, selected: ModelSpec,
                        selected_fit: AftParams | None) -> float:
    """Maximized log-likelihood of {j} on top of the selected set's frozen
    linear predictor.

    Exactly equals ``marginal_utility`` when the selection is empty: the
    offset is then identically zero and both routes run the same fit.
    """
    if not 0 <= j < data.p:
        raise ValueError(f"covariate index {j} out of range for p={data.p}")
    if j in selected.indices:
        raise ValueError(f"candidate {j} is already selected")
    offset = _selection_offset(data, selected, selected_fit)
    return _single_utility(
        data.log_times - offset, data.status, data.design[:, j], j
    )


def utility_table(data: SurvivalDataset, pool, selected: ModelSpec = ModelSpec(()),
                  selected_fit: AftParams | None = None) -> UtilityTable:
    """Score every pool candidate in one pass.

    Equivalent to calling ``conditional_utility`` (or ``marginal_utility``
    when the selection is empty) per candidate, but fits all single-covariate
    models simultaneously in vectorized blocks.  Any column the block solver
    fails to converge on is retried through the one-at-a-time route before
    an error is raised.
    """
    pool = [int(j) for j in pool]
    if len(set(pool)) != len(pool):
        raise ValueError("pool contains duplicate indices")
    for j in pool:
        if not 0 <= j < data.p:
            raise ValueError(f"covariate index {j} out of range for p={data.p}")
        if j in selected.indices:
            raise ValueError(f"pool member {j} is already selected")
    kind = MARGINAL if selected.size == 0 else CONDITIONAL
    if not pool:
        return UtilityTable(scores={}, kind=kind)

    offset = _selection_offset(data, selected, selected_fit)
    yadj = data.log_times - offset
    status = data.status
    scores = {}
    block = max(1, _BLOCK_CELLS // data.n)
    for start in range(0, len(pool), block):
        cols = pool[start : start + block]
        values, unconverged = _fit_value_block(
            yadj, status, data.design[:, cols]
        )
        for local, j in enumerate(cols):
            if local in unconverged:
                values[local] = _single_utility(
                    yadj, status, data.design[:, j], j
                )
            scores[j] = float(values[local])
    return UtilityTable(scores=scores, kind=kind)


def _fit_value_block(yadj, status, X):
    """Maximized (mu, b_j, log sigma) log-likelihood for every column of X.

    Runs the same safeguarded Newton as the scalar fitter, but with all
    columns advanced in lock step; converged columns freeze so their values
    do not depend on which other columns share the block.

    Returns (values, set of column positions that never converged).
    """
    n, q = X.shape
    ev_rows = np.flatnonzero(status == 1)
    ce_rows = np.flatnonzero(status == 0)
    ye, yc = yadj[ev_rows], yadj[ce_rows]
    Xe, Xc = X[ev_rows], X[ce_rows]
    Xe2_sum = (Xe * Xe).sum(axis=0)
    Xe_sum = Xe.sum(axis=0)
    n_e = float(ev_rows.size)

    # Per-column least-squares start (censored rows treated as events).
    ym = yadj.mean()
    var_y = float(np.var(yadj))
    xm = X.mean(axis=0)
    Xcen = X - xm
    vx = (Xcen * Xcen).mean(axis=0)
    cxy = (Xcen.T @ (yadj - ym)) / n
    b0 = np.divide(cxy, vx, out=np.zeros(q), where=vx > 0)
    theta = np.empty((q, 3))
    theta[:, 1] = b0
    theta[:, 0] = ym - b0 * xm
    theta[:, 2] = 0.5 * np.log(np.maximum(var_y - b0 * b0 * vx, 1e-12))
    del Xcen

    def values(cols, th):
        sig = np.exp(th[:, 2])
        vals = np.zeros(len(cols))
        if ev_rows.size:
            ze = (ye[:, None] - th[:, 0] - Xe[:, cols] * th[:, 1]) / sig
            vals += (-th[:, 2] - 0.5 * _LOG_2PI) * n_e - 0.5 * (ze * ze).sum(axis=0)
        if ce_rows.size:
            zc = (yc[:, None] - th[:, 0] - Xc[:, cols] * th[:, 1]) / sig
            vals += log_ndtr(-zc).sum(axis=0)
        return vals

    def derivs(cols, th):
        sig = np.exp(th[:, 2])
        k = len(cols)
        g = np.zeros((k, 3))
        H = np.zeros((k, 3, 3))
        h00 = np.zeros(k)
        h01 = np.zeros(k)
        h11 = np.zeros(k)
        h02 = np.zeros(k)
        h12 = np.zeros(k)
        h22 = np.zeros(k)
        if ev_rows.size:
            Xa = Xe[:, cols]
            ze = (ye[:, None] - th[:, 0] - Xa * th[:, 1]) / sig
            su = ze.sum(axis=0)
            sxu = (Xa * ze).sum(axis=0)
            g[:, 0] += su
            g[:, 1] += sxu
            g[:, 2] += (ze * ze).sum(axis=0) - n_e
            h00 += n_e
            h01 += Xe_sum[cols]
            h11 += Xe2_sum[cols]
            h02 += 2.0 * su
            h12 += 2.0 * sxu
            h22 += 2.0 * (ze * ze).sum(axis=0)
        if ce_rows.size:
            Xa = Xc[:, cols]
            zc = (yc[:, None] - th[:, 0] - Xa * th[:, 1]) / sig
            lam = _mills(zc)
            dlam = lam * (lam - zc)
            g[:, 0] += lam.sum(axis=0)
            g[:, 1] += (Xa * lam).sum(axis=0)
            g[:, 2] += (zc * lam).sum(axis=0)
            vcol = zc * dlam + lam
            h00 += dlam.sum(axis=0)
            h01 += (Xa * dlam).sum(axis=0)
            h11 += (Xa * Xa * dlam).sum(axis=0)
            h02 += vcol.sum(axis=0)
            h12 += (Xa * vcol).sum(axis=0)
            h22 += (zc * lam + zc * zc * dlam).sum(axis=0)
        g[:, 0] /= sig
        g[:, 1] /= sig
        H[:, 0, 0] = -h00 / sig**2
        H[:, 0, 1] = H[:, 1, 0] = -h01 / sig**2
        H[:, 1, 1] = -h11 / sig**2
        H[:, 0, 2] = H[:, 2, 0] = -h02 / sig
        H[:, 1, 2] = H[:, 2, 1] = -h12 / sig
        H[:, 2, 2] = -h22
        return g, H

    final_vals = np.empty(q)
    active = np.arange(q)
    # non-finite intermediates (sigma underflow on near-degenerate columns)
    # are caught by the finiteness checks below and routed to the scalar
    # fallback, so the vector arithmetic may produce inf/nan warning-free
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(MAX_ITER):
            if active.size == 0:
                break
            th = theta[active]
            g, H = derivs(active, th)
            gnorm = np.linalg.norm(g, axis=1)
            done = gnorm < GRAD_TOL
            if done.any():
                done_cols = active[done]
                final_vals[done_cols] = values(done_cols, theta[done_cols])
                active = active[~done]
                if active.size == 0:
                    break
                th, g, H, gnorm = th[~done], g[~done], H[~done], gnorm[~done]

            # Newton direction where -H passes the 3x3 positive-definite test
            # (leading principal minors), gradient direction elsewhere.
            A = -H
            m1 = A[:, 0, 0]
            m2 = m1 * A[:, 1, 1] - A[:, 0, 1] ** 2
            m3 = (
                m1 * (A[:, 1, 1] * A[:, 2, 2] - A[:, 1, 2] ** 2)
                - A[:, 0, 1] * (A[:, 0, 1] * A[:, 2, 2] - A[:, 1, 2] * A[:, 0, 2])
                + A[:, 0, 2] * (A[:, 0, 1] * A[:, 1, 2] - A[:, 1, 1] * A[:, 0, 2])
            )
            posdef = (m1 > 0) & (m2 > 0) & (m3 > 0)
            step = np.empty_like(g)
            if posdef.any():
                step[posdef] = np.linalg.solve(A[posdef], g[posdef, :, None])[:, :, 0]
            fallback = ~posdef
            slope = (g * step).sum(axis=1)
            fallback |= ~np.isfinite(slope) | (slope <= 0.0)
            if fallback.any():
                step[fallback] = g[fallback] / np.maximum(1.0, gnorm[fallback])[:, None]
                slope = (g * step).sum(axis=1)

            val0 = values(active, th)
            tstep = np.ones(active.size)
            need = np.ones(active.size, dtype=bool)
            new_th = th.copy()
            for _ in range(MAX_HALVINGS):
                if not need.any():
                    break
                trial = th[need] + tstep[need, None] * step[need]
                tv = values(active[need], trial)
                ok = np.isfinite(tv) & (
                    tv >= val0[need] + 1e-4 * tstep[need] * slope[need]
                )
                pos = np.flatnonzero(need)
                new_th[pos[ok]] = trial[ok]
                need[pos[ok]] = False
                tstep[need] *= 0.5
            theta[active] = new_th

    unconverged = set(int(c) for c in active)
    return final_vals, unconverged


def pick_leading_variables(table: UtilityTable, k0: int) -> list:
    """Top-``k0`` candidate indices by score, descending; ties take the
    smaller index.  Returns fewer than k0 only when the table is smaller."""
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    if not table.scores:
        raise ValueError("utility table is empty")
    ranked = sorted(table.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [j for j, _ in ranked[: min(k0, len(ranked))]]


def build_leading_sets(data: SurvivalDataset, leaders, candidate_pool,
                       corr_threshold: float) -> list:
    """Partition correlated pool members around each leader, in rank order.

    Members already claimed by an earlier leader never reappear, so the
    sets are pairwise disjoint.  A leader swallowed by an earlier set
    produces no set of its own.
    """
    if not (0.0 < corr_threshold <= 1.0):
        raise ValueError("corr_threshold must lie in (0, 1]")
    pool = sorted(int(j) for j in candidate_pool)
    pool_set = set(pool)
    leaders = [int(j) for j in leaders]
    for lead in leaders:
        if lead not in pool_set:
            raise ValueError(f"leader {lead} is not in the candidate pool")
    if not pool:
        return []

    cols = data.design[:, pool]
    centered = cols - cols.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    pos = {j: i for i, j in enumerate(pool)}

    sets = []
    taken = set()
    for lead in leaders:
        if lead in taken:
            continue
        lead_col = centered[:, pos[lead]]
        lead_norm = norms[pos[lead]]
        denom = lead_norm * norms
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.abs(centered.T @ lead_col) / denom
        corr[denom == 0.0] = 0.0  # constant columns correlate with nothing
        members = [
            j for j in pool
            if j not in taken and (j == lead or corr[pos[j]] >= corr_threshold)
        ]
        taken.update(members)
        sets.append(LeadingSet(leader=lead, members=tuple(members)))
    return sets
