"""
From drive-test style measurements to a coverage model
======================================================

Synthesize noisy measurements with some holes in them, clean them, and fit
the small MLP regressor.
"""

import numpy as np

from cellplan import GridSpec, Site, SiteConfiguration, generate_scenario
from cellplan.data import clean_dataset, split_dataset
from cellplan.predictor import Hyperparams, predict_map, train
from cellplan.scenario import MissingSpec, RadioParams, oracle_coverage, synthesize_measurements

grid = GridSpec(64, 100.0)
scenario = generate_scenario(7, grid)
sites = SiteConfiguration(grid, [Site(520), Site(2080, azimuth_deg=135.0, antenna_kind="sector"), Site(3300)])
radio = RadioParams(noise_sigma_db=2.0)

# 10% of records lose a feature, 10% lose their label
ms = synthesize_measurements(sites, scenario, radio, 5000, seed=8, missing=MissingSpec(0.1, 0.1))
ds = clean_dataset(ms)
for key, value in ds.provenance.items():
    print(f"{key}: {value}")

###############################################################################
# Hold out a fifth of the rows and train with the default hyperparameters.
# Imputed labels are cell-wide means, so held-out rows that carry one are far
# from the true point value and pull the RMSE up.

tr, te = split_dataset(ds, 0.2, seed=0)
model = train(tr, Hyperparams())
print("loss at start / end:", round(model.loss_history[0], 1), round(model.loss_history[-1], 2))

rmse = np.sqrt(np.mean((model.forward(te.features) - te.targets) ** 2))
baseline = np.sqrt(np.mean((tr.targets.mean() - te.targets) ** 2))
print(f"held-out RMSE {rmse:.2f} dB, constant-mean baseline {baseline:.2f} dB")

###############################################################################
# The predicted map against the noiseless oracle, over every grid point.

gap = predict_map(model, sites, scenario).values_dbm - oracle_coverage(sites, scenario, RadioParams()).values_dbm
print(f"map-wide error: mean {gap.mean():+.2f} dB, 95th pct |err| {np.percentile(np.abs(gap), 95):.2f} dB")
