"""
The planning loop under a budget
================================

Train a model, then let the planner add sites until the money runs out,
auditing every step against the oracle.
"""

from cellplan import GridSpec, Site, SiteConfiguration, generate_scenario
from cellplan.data import clean_dataset
from cellplan.planner import PlanPolicy, evaluate_plan, plan
from cellplan.predictor import Hyperparams, train
from cellplan.recommender import Budget
from cellplan.scenario import RadioParams, oracle_evaluator, synthesize_measurements

grid = GridSpec(64, 100.0)
scenario = generate_scenario(7, grid)
radio = RadioParams()
initial = SiteConfiguration(grid, [Site(520), Site(2080, azimuth_deg=135.0, antenna_kind="sector"), Site(3300)])
model = train(clean_dataset(synthesize_measurements(initial, scenario, radio, 5000, seed=8)), Hyperparams())

# 12.5 money units at 2.5 per site buys five towers
policy = PlanPolicy(tau_dbm=-100.0, budget=Budget(12.5, 2.5), target_covered_fraction=0.95)
result = plan(initial, scenario, model, policy, oracle=oracle_evaluator(scenario, radio))

for rec in result.iterations:
    site = rec.selected[0]
    print(f"iter {rec.iteration}: site at {divmod(site.index, grid.n)} "
          f"model {rec.covered_fraction_after:.3f}  oracle {rec.oracle_covered_fraction_after:.3f}  "
          f"spent {rec.spend_after}")
print("stopped:", result.stop_reason)

###############################################################################
# The audit recomputes everything from the oracle.

m = evaluate_plan(result, scenario, radio, policy.tau_dbm)
print(f"oracle coverage {m['oracle_covered_fraction_initial']:.3f} -> {m['oracle_covered_fraction_final']:.3f}")
print("model minus oracle per iteration:", [round(it["gap"], 3) for it in m["iterations"]])
