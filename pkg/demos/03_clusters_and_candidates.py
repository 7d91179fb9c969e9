"""
Where are the holes?
====================

Threshold the coverage map, group the weak points with DBSCAN and k-means,
and see what each placement strategy proposes.
"""

from cellplan import GridSpec, Site, SiteConfiguration, generate_scenario
from cellplan.recommender import Budget, candidate_sites, cluster_points, extract_low_coverage, greedy_select
from cellplan.scenario import RadioParams, oracle_coverage, oracle_evaluator

grid = GridSpec(32, 100.0)
scenario = generate_scenario(3, grid)
sites = SiteConfiguration(grid, [Site(200), Site(800)])
tau = -95.0

low = extract_low_coverage(oracle_coverage(sites, scenario, RadioParams()), tau)
print(len(low), "of", grid.size, "points below", tau, "dBm")

clusters, noise = cluster_points(low, grid, "dbscan", eps=2.5, min_pts=4)
print("dbscan:", len(clusters), "clusters,", len(noise), "noise points")
for cl in clusters:
    print(f"  cluster {cl.id}: {len(cl.members):4d} points, centroid ({cl.centroid_rc[0]:.1f}, {cl.centroid_rc[1]:.1f})")

km, _ = cluster_points(low, grid, "kmeans", k=3)
print("kmeans sizes:", [len(c.members) for c in km])

###############################################################################
# Centroid gives one candidate per cluster, boundary gives the farthest pair.

for strategy in ("centroid", "boundary"):
    cands = [c for cl in clusters for c in candidate_sites(cl, sites, strategy)]
    picked = greedy_select(cands, sites, Budget(3, 1), oracle_evaluator(scenario, RadioParams()), tau)
    print(strategy, "candidates", [c.index for c in cands])
    print("   greedy picks", [(c.index, int(c.predicted_gain)) for c in picked])
