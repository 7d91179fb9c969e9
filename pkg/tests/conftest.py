import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cellplan.grid import FeatureScales, GridSpec  # noqa: E402
from cellplan.scenario import Scenario, generate_scenario  # noqa: E402


def uniform_scenario(n, cell=100.0, clutter="rural", seed=0):
    """Flat scenario with a single clutter class everywhere."""
    code = ("urban", "suburban", "rural", "water").index(clutter)
    grid = GridSpec(n, cell)
    pop = np.zeros(grid.size) if clutter == "water" else np.full(grid.size, 100.0)
    return Scenario(grid, seed, np.zeros(grid.size), np.full(grid.size, code), pop,
                    FeatureScales(cell, (0.0, 0.0), (0.0, 100.0)))


@pytest.fixture(scope="session")
def scenario16():
    return generate_scenario(11, GridSpec(16, 100.0))


@pytest.fixture(scope="session")
def scenario8():
    return generate_scenario(5, GridSpec(8, 100.0))


@pytest.fixture(scope="session")
def trained16(scenario16):
    """Small model trained on synthetic measurements over the 16x16 scenario."""
    from cellplan.data import clean_dataset
    from cellplan.grid import Site, SiteConfiguration
    from cellplan.predictor import Hyperparams, train
    from cellplan.scenario import RadioParams, synthesize_measurements

    cfg = SiteConfiguration(scenario16.grid, [Site(18), Site(200, azimuth_deg=120.0, antenna_kind="sector")])
    ms = synthesize_measurements(cfg, scenario16, RadioParams(), 1500, seed=21)
    return cfg, train(clean_dataset(ms), Hyperparams(epochs=300, seed=1))
