"""Budget-constrained iterative planning loop and its ground-truth audit."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from cellplan.grid import N_FEATURES, GridMismatchError, SiteConfiguration
from cellplan.predictor import Model, model_evaluator
from cellplan.recommender import (
    STRATEGIES,
    Budget,
    CandidateSite,
    Evaluator,
    candidate_sites,
    cluster_points,
    extract_low_coverage,
    greedy_select,
)
from cellplan.scenario import oracle_coverage

STOP_REASONS = ("target_reached", "budget_exhausted", "no_candidates", "no_positive_gain", "max_iterations")


@dataclass(frozen=True)
class PlanPolicy:
    tau_dbm: float = -100.0
    budget: Budget = field(default_factory=lambda: Budget(5.0, 1.0))
    target_covered_fraction: float = 0.95
    max_iterations: int = 50
    cluster_method: str = "dbscan"
    cluster_params: dict = field(default_factory=lambda: {"eps": 2.5, "min_pts": 4})
    placement_strategy: str = "centroid"
    sites_per_iteration: int = 1

    def __post_init__(self):
        if not 0.0 <= self.target_covered_fraction <= 1.0:
            raise ValueError("target_covered_fraction must lie in [0, 1]")
        if self.max_iterations < 1 or self.sites_per_iteration < 1:
            raise ValueError("max_iterations and sites_per_iteration must be positive")
        if self.placement_strategy not in STRATEGIES:
            raise ValueError(f"unknown placement strategy {self.placement_strategy!r}")
        if self.cluster_method not in ("dbscan", "kmeans"):
            raise ValueError(f"unknown cluster method {self.cluster_method!r}")


@dataclass
class IterationRecord:
    iteration: int
    low_coverage_count: int
    cluster_count: int
    candidates_considered: int
    selected: list[CandidateSite]
    covered_fraction_before: float
    covered_fraction_after: float
    spend_after: float
    oracle_covered_fraction_before: Optional[float] = None
    oracle_covered_fraction_after: Optional[float] = None


@dataclass
class PlanResult:
    initial: SiteConfiguration
    final: SiteConfiguration
    iterations: list[IterationRecord]
    stop_reason: str
    policy: PlanPolicy
    initial_covered_fraction: float = 0.0
    final_covered_fraction: float = 0.0

    @property
    def selected(self) -> list[CandidateSite]:
        return [c for rec in self.iterations for c in rec.selected]

    @property
    def sites_added(self) -> int:
        return len(self.final) - len(self.initial)

    @property
    def spend(self) -> float:
        return self.sites_added * self.policy.budget.cost_per_site


def plan(initial: SiteConfiguration, scenario, model: Model, policy: PlanPolicy,
         oracle: Evaluator | None = None, evaluator: Evaluator | None = None) -> PlanResult:
    """Predict, extract points below tau, cluster, propose, greedily place, repeat.

    Decisions use ``evaluator`` (the model's predicted map by default). The
    optional ``oracle`` is only observed and logged per iteration.
    """
    if initial.grid != scenario.grid:
        raise GridMismatchError("initial configuration and scenario use different grids")
    if model.n_inputs != N_FEATURES:
        raise GridMismatchError(f"model expects {model.n_inputs} features, feature layout has {N_FEATURES}")
    evaluate = evaluator or model_evaluator(model, scenario)
    tau = policy.tau_dbm
    cap = policy.budget.max_sites()
    cost = policy.budget.cost_per_site

    config = initial
    records: list[IterationRecord] = []
    predicted = evaluate(config)
    initial_fraction = predicted.covered_fraction(tau)
    stop = "max_iterations"
    for it in range(1, policy.max_iterations + 1):
        before = predicted.covered_fraction(tau)
        if before >= policy.target_covered_fraction:
            stop = "target_reached"
            break
        remaining = cap - (len(config) - len(initial))
        if remaining <= 0:
            stop = "budget_exhausted"
            break
        low = extract_low_coverage(predicted, tau)
        clusters, _ = cluster_points(low, config.grid, policy.cluster_method, **policy.cluster_params)
        cands = [c for cl in clusters for c in candidate_sites(cl, config, policy.placement_strategy)]
        if not cands:
            stop = "no_candidates"
            break
        chosen = greedy_select(cands, config, policy.budget, evaluate, tau,
                               limit=min(policy.sites_per_iteration, remaining))
        if not chosen:
            stop = "no_positive_gain"
            break
        new_config = config
        for c in chosen:
            new_config = new_config.with_site(c.index)
        predicted = evaluate(new_config)
        rec = IterationRecord(
            iteration=it,
            low_coverage_count=len(low),
            cluster_count=len(clusters),
            candidates_considered=len(cands),
            selected=chosen,
            covered_fraction_before=before,
            covered_fraction_after=predicted.covered_fraction(tau),
            spend_after=(len(new_config) - len(initial)) * cost,
        )
        if oracle is not None:
            rec.oracle_covered_fraction_before = oracle(config).covered_fraction(tau)
            rec.oracle_covered_fraction_after = oracle(new_config).covered_fraction(tau)
        records.append(rec)
        config = new_config
    else:
        # loop ran out of iterations; report a more specific reason if one applies
        if predicted.covered_fraction(tau) >= policy.target_covered_fraction:
            stop = "target_reached"
        elif len(config) - len(initial) >= cap:
            stop = "budget_exhausted"
    return PlanResult(initial, config, records, stop, policy,
                      initial_fraction, predicted.covered_fraction(tau))


def evaluate_plan(result: PlanResult, scenario, radio_params, tau_dbm: float) -> dict:
    """Oracle audit of a plan: covered fractions before/after and the
    per-iteration gap between model and oracle covered fractions."""
    before = oracle_coverage(result.initial, scenario, radio_params).covered_fraction(tau_dbm)
    after = oracle_coverage(result.final, scenario, radio_params).covered_fraction(tau_dbm)
    config = result.initial
    per_iter = []
    for rec in result.iterations:
        for c in rec.selected:
            config = config.with_site(c.index)
        oracle_frac = oracle_coverage(config, scenario, radio_params).covered_fraction(tau_dbm)
        per_iter.append({
            "iteration": rec.iteration,
            "model_covered_fraction": rec.covered_fraction_after,
            "oracle_covered_fraction": oracle_frac,
            "gap": rec.covered_fraction_after - oracle_frac,
        })
    return {
        "oracle_covered_fraction_initial": before,
        "oracle_covered_fraction_final": after,
        "delta": after - before,
        "sites_added": result.sites_added,
        "total_spend": result.spend,
        "stop_reason": result.stop_reason,
        "iterations": per_iter,
    }
