"""TPR/FDR scoring and multi-replication benchmark campaigns.

A campaign simulates ``replications`` datasets (child seeds derived from
the campaign seed), runs the full selection loop once per prior on each
dataset — every prior sees the *same* data, so the comparison is paired —
and aggregates true-positive and false-discovery rates against the
generator's true support.  A replication whose selection run fails is
recorded with its error and excluded from the means.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .driver import TuningParams, run_selection
from .errors import ConvergenceError, NumericalError
from .nlp_priors import PriorConfig
from .simgen import SimConfig, simulate


def compute_tpr_fdr(selected, truth):
    """True positive rate and false discovery rate of one selection.

    tpr = |selected ∩ truth| / |truth|;
    fdr = |selected \\ truth| / |selected|, defined as 0 for an empty
    selection.
    """
    truth = set(int(j) for j in truth)
    if not truth:
        raise ValueError("truth must be non-empty")
    selected = set(int(j) for j in selected)
    tpr = len(selected & truth) / len(truth)
    fdr = len(selected - truth) / max(len(selected), 1)
    return tpr, fdr


@dataclass(frozen=True)
class ReplicationRow:
    """Outcome of one (replication, prior) selection run."""

    replication: int
    seed: int
    tpr: float | None
    fdr: float | None
    n_selected: int | None
    selected: tuple
    failed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "replication": self.replication,
            "seed": self.seed,
            "tpr": self.tpr,
            "fdr": self.fdr,
            "n_selected": self.n_selected,
            "selected": [int(j) for j in self.selected],
            "failed": self.failed,
            "error": self.error,
        }


@dataclass(frozen=True)
class MethodSummary:
    """All replications of one prior, with means over the successful rows."""

    label: str
    prior: PriorConfig
    rows: tuple
    n_failed: int
    tpr_mean: float | None
    fdr_mean: float | None
    n_selected_mean: float | None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "prior": _prior_dict(self.prior),
            "replications": len(self.rows),
            "n_failed": self.n_failed,
            "tpr_mean": self.tpr_mean,
            "fdr_mean": self.fdr_mean,
            "n_selected_mean": self.n_selected_mean,
            "rows": [row.to_dict() for row in self.rows],
        }


@dataclass(frozen=True)
class BenchmarkReport:
    """Self-describing campaign result: configs, seeds, rows, summaries."""

    methods: tuple
    generator: SimConfig
    tuning: TuningParams
    replications: int
    seeds: tuple

    def to_dict(self) -> dict:
        return {
            "methods": [m.to_dict() for m in self.methods],
            "generator": self.generator.to_dict(),
            "tuning": {
                "k0": self.tuning.k0,
                "corr_threshold": self.tuning.corr_threshold,
                "m": self.tuning.m,
                "maxno": self.tuning.maxno,
                "search_cap": self.tuning.search_cap,
            },
            "replications": self.replications,
            "seeds": [int(s) for s in self.seeds],
        }


def _prior_dict(prior: PriorConfig) -> dict:
    return {
        "family": prior.family,
        "tau": prior.tau,
        "phi": prior.phi,
        "order_r": prior.order_r,
        "shape_v": prior.shape_v,
    }


def _method_labels(priors):
    """Family name per prior, suffixed only when a family repeats."""
    total = {}
    for pc in priors:
        total[pc.family] = total.get(pc.family, 0) + 1
    seen = {}
    labels = []
    for pc in priors:
        if total[pc.family] == 1:
            labels.append(pc.family)
        else:
            seen[pc.family] = seen.get(pc.family, 0) + 1
            labels.append(f"{pc.family}-{seen[pc.family]}")
    return labels


def _mean(values):
    values = list(values)
    if not values:
        return None
    return sum(values) / len(values)


def run_benchmark(sim: SimConfig, tuning: TuningParams, priors,
                  replications: int) -> BenchmarkReport:
    """Run the full campaign; deterministic given ``sim.seed``."""
    priors = list(priors)
    if not priors:
        raise ValueError("at least one prior is required")
    if not (isinstance(replications, int) and replications >= 1):
        raise ValueError("replications must be a positive integer")
    truth = sim.truth
    if not truth:
        raise ValueError(
            "benchmarking needs a non-empty true support in beta_true"
        )
    labels = _method_labels(priors)
    seeds = [
        int(s)
        for s in np.random.SeedSequence(sim.seed).generate_state(
            replications, dtype=np.uint64
        )
    ]

    rows = {label: [] for label in labels}
    for r in range(replications):
        data = simulate(replace(sim, seed=seeds[r]))
        for label, prior in zip(labels, priors):
            try:
                result = run_selection(data, tuning, prior)
            except (ConvergenceError, NumericalError) as err:
                rows[label].append(
                    ReplicationRow(
                        replication=r,
                        seed=seeds[r],
                        tpr=None,
                        fdr=None,
                        n_selected=None,
                        selected=(),
                        failed=True,
                        error=" ".join(str(err).split()),
                    )
                )
                continue
            tpr, fdr = compute_tpr_fdr(result.selected, truth)
            rows[label].append(
                ReplicationRow(
                    replication=r,
                    seed=seeds[r],
                    tpr=tpr,
                    fdr=fdr,
                    n_selected=len(result.selected),
                    selected=tuple(int(j) for j in result.selected),
                )
            )

    methods = []
    for label, prior in zip(labels, priors):
        good = [row for row in rows[label] if not row.failed]
        methods.append(
            MethodSummary(
                label=label,
                prior=prior,
                rows=tuple(rows[label]),
                n_failed=len(rows[label]) - len(good),
                tpr_mean=_mean(row.tpr for row in good),
                fdr_mean=_mean(row.fdr for row in good),
                n_selected_mean=_mean(float(row.n_selected) for row in good),
            )
        )
    return BenchmarkReport(
        methods=tuple(methods),
        generator=sim,
        tuning=tuning,
        replications=replications,
        seeds=tuple(seeds),
    )
