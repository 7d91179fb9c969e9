"""Budget-aware cell-site placement: coverage prediction, clustered site
recommendation and an iterative planning loop, checked against a synthetic
propagation oracle."""

from cellplan.grid import (
    CoverageMap,
    GridSpec,
    Site,
    SiteConfiguration,
    build_feature_vector,
    distance_to_nearest_site,
    index_to_coords,
    point_index,
)
from cellplan.scenario import (
    RadioParams,
    Scenario,
    TerrainParams,
    generate_scenario,
    oracle_coverage,
    path_loss_db,
    synthesize_measurements,
)
from cellplan.data import clean_dataset, ingest_measurements, split_dataset
from cellplan.predictor import Hyperparams, Model, predict_map, predict_point, train
from cellplan.recommender import Budget, cluster_points, greedy_select
from cellplan.planner import PlanPolicy, evaluate_plan, plan

__version__ = "0.1.0"
