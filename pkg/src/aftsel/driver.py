"""The iterative screen-and-select loop.

Each iteration ranks the remaining candidate pool by marginal utility
(iteration 1) or conditional utility given the current selection
(iteration 2 onward, with the selection refit jointly first), takes the
top k0 as leaders, groups correlated candidates into leading sets, and
lets the posterior model search pick winners inside every set — scored
jointly with the variables already selected, under a model-size prior
ranging over the full design so screening out of p candidates pays a
multiplicity penalty.  Winning variables join the selection; every
leading-set member — winner or not — leaves the pool for good.

Stopping, checked after each iteration in this order: the selection
reached the target size m (REACHED_M), maxno consecutive iterations
selected nothing (MAXNO_EMPTY), or the pool ran dry (POOL_EXHAUSTED).
"""

from __future__ import annotations

from dataclasses import dataclass

from .aft_core import AftParams, ModelSpec, SurvivalDataset, fit_aft_mle
from .bayes_select import DEFAULT_SEARCH_CAP, select_best_model
from .errors import ConvergenceError, NumericalError
from .nlp_priors import PriorConfig
from .screening import (
    build_leading_sets,
    pick_leading_variables,
    utility_table,
)

REACHED_M = "REACHED_M"
MAXNO_EMPTY = "MAXNO_EMPTY"
POOL_EXHAUSTED = "POOL_EXHAUSTED"

STOP_REASONS = (REACHED_M, MAXNO_EMPTY, POOL_EXHAUSTED)


@dataclass(frozen=True)
class TuningParams:
    """The loop's four tuning knobs plus the enumeration cap.

    m counts "at least": the loop stops after the iteration whose winners
    push the selection to m or beyond, keeping all of that iteration's
    winners.
    """

    k0: int = 1
    corr_threshold: float = 0.2
    m: int = 50
    maxno: int = 3
    search_cap: int = DEFAULT_SEARCH_CAP

    def __post_init__(self):
        if not (isinstance(self.k0, int) and self.k0 >= 1):
            raise ValueError("k0 must be an integer >= 1")
        if not (0.0 < self.corr_threshold <= 1.0):
            raise ValueError("corr_threshold must lie in (0, 1]")
        if not (isinstance(self.m, int) and self.m >= 0):
            raise ValueError("m must be an integer >= 0")
        if not (isinstance(self.maxno, int) and self.maxno >= 1):
            raise ValueError("maxno must be an integer >= 1")
        if not (isinstance(self.search_cap, int) and self.search_cap >= 1):
            raise ValueError("search_cap must be an integer >= 1")


@dataclass(frozen=True)
class IterationRecord:
    """Audit trail of one iteration."""

    index: int                      # 1-based iteration number
    utility_kind: str               # "marginal" or "conditional"
    leaders: tuple
    leading_sets: tuple             # of LeadingSet
    winners: tuple                  # winning ModelSpec per leading set
    winner_scores: tuple            # log posterior (unnormalized) per winner
    selected_vars: tuple            # variables newly selected this iteration
    consumed: tuple                 # pool members removed this iteration


@dataclass(frozen=True)
class SelectionResult:
    """Final selection plus the per-iteration audit trail.

    ``selected`` lists indices in the order they entered the selection;
    ``coefficients`` aligns with it and comes from one joint refit of the
    full selected model at the end (``final_params`` holds that fit).
    """

    selected: tuple
    coefficients: tuple
    final_params: AftParams | None
    iterations: tuple
    stop_reason: str

    def __post_init__(self):
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"stop_reason must be one of {STOP_REASONS}")
        if len(self.selected) != len(self.coefficients):
            raise ValueError("selected and coefficients must align")
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected indices must be unique")

    def to_dict(self) -> dict:
        """JSON-ready form: selection, audit trail, stop reason."""
        out = {
            "selected": [
                {"index": int(j), "coefficient": float(c)}
                for j, c in zip(self.selected, self.coefficients)
            ],
            "stop_reason": self.stop_reason,
            "iterations": [
                {
                    "index": rec.index,
                    "utility": rec.utility_kind,
                    "leaders": [int(j) for j in rec.leaders],
                    "leading_sets": [
                        {
                            "leader": int(ls.leader),
                            "members": [int(j) for j in ls.members],
                        }
                        for ls in rec.leading_sets
                    ],
                    "winners": [
                        [int(j) for j in w.indices] for w in rec.winners
                    ],
                    "winner_scores": [float(s) for s in rec.winner_scores],
                    "selected": [int(j) for j in rec.selected_vars],
                    "consumed": [int(j) for j in rec.consumed],
                }
                for rec in self.iterations
            ],
        }
        if self.final_params is not None:
            out["final_fit"] = {
                "intercept": float(self.final_params.mu),
                "sigma": float(self.final_params.sigma),
            }
        return out


def run_selection(data: SurvivalDataset, tuning: TuningParams,
                  prior: PriorConfig) -> SelectionResult:
    """Run the full iterative selection loop on one dataset.

    Deterministic: no randomness anywhere in the loop, so identical inputs
    reproduce the result exactly.  Fit or scoring failures abort the run
    with the iteration number attached to the exception.
    """
    if tuning.m == 0:
        return SelectionResult(
            selected=(),
            coefficients=(),
            final_params=None,
            iterations=(),
            stop_reason=REACHED_M,
        )

    pool = list(range(data.p))
    selected: list = []
    records: list = []
    empty_streak = 0
    stop = None
    iteration = 0
    while stop is None:
        iteration += 1
        try:
            if iteration == 1 or not selected:
                table = utility_table(data, pool)
            else:
                sel_model = ModelSpec(tuple(sorted(selected)))
                sel_fit, _ = fit_aft_mle(data, sel_model)
                table = utility_table(data, pool, sel_model, sel_fit)
            leaders = pick_leading_variables(table, tuning.k0)
            sets = build_leading_sets(
                data, leaders, pool, tuning.corr_threshold
            )
            base = ModelSpec(tuple(sorted(selected))) if selected else None
            already = set(selected)
            winners = []
            scores = []
            newly: list = []
            consumed: list = []
            for ls in sets:
                # candidates are judged on top of the current selection,
                # and the size prior ranges over the whole design: a
                # leading set holds one or two survivors of a p-wide
                # screen, so a set-local prior would charge no
                # multiplicity penalty at all
                best, _ = select_best_model(
                    data, ModelSpec(ls.members), prior, tuning.search_cap,
                    base=base, prior_pool=data.p,
                )
                added = tuple(
                    j for j in best.model.indices if j not in already
                )
                winners.append(ModelSpec(added))
                scores.append(best.log_posterior_unnorm)
                newly.extend(added)
                consumed.extend(ls.members)
        except (ConvergenceError, NumericalError) as err:
            err.iteration = iteration
            raise
        gone = set(consumed)
        pool = [j for j in pool if j not in gone]
        selected.extend(newly)
        empty_streak = 0 if newly else empty_streak + 1
        records.append(
            IterationRecord(
                index=iteration,
                utility_kind=table.kind,
                leaders=tuple(leaders),
                leading_sets=tuple(sets),
                winners=tuple(winners),
                winner_scores=tuple(scores),
                selected_vars=tuple(newly),
                consumed=tuple(consumed),
            )
        )
        if len(selected) >= tuning.m:
            stop = REACHED_M
        elif empty_streak >= tuning.maxno:
            stop = MAXNO_EMPTY
        elif not pool:
            stop = POOL_EXHAUSTED

    final_params = None
    coefficients: tuple = ()
    if selected:
        final_model = ModelSpec(tuple(sorted(selected)))
        final_params, _ = fit_aft_mle(data, final_model)
        coef = dict(zip(final_model.indices, final_params.beta))
        coefficients = tuple(float(coef[j]) for j in selected)
    return SelectionResult(
        selected=tuple(selected),
        coefficients=coefficients,
        final_params=final_params,
        iterations=tuple(records),
        stop_reason=stop,
    )
