"""Low-coverage extraction, spatial clustering, candidate generation and greedy selection."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from cellplan.grid import CoverageMap, GridSpec, SiteConfiguration, point_index

Evaluator = Callable[[SiteConfiguration], CoverageMap]
STRATEGIES = ("centroid", "boundary")


@dataclass(frozen=True)
class Cluster:
    id: int
    members: tuple[int, ...]
    centroid_rc: tuple[float, float]


@dataclass(frozen=True)
class CandidateSite:
    index: int
    cluster_id: int
    strategy: str
    predicted_gain: float = 0.0


@dataclass(frozen=True)
class Budget:
    total: float
    cost_per_site: float

    def __post_init__(self):
        if self.total < 0:
            raise ValueError("budget total must be non-negative")
        if not self.cost_per_site > 0:
            raise ValueError("cost_per_site must be positive")

    def max_sites(self) -> int:
        return int(math.floor(self.total / self.cost_per_site))


def extract_low_coverage(cov: CoverageMap, tau_dbm: float) -> list[int]:
    return [int(i) for i in np.flatnonzero(cov.values_dbm < tau_dbm)]


def _coords(points, grid):
    p = np.asarray(points, dtype=int)
    return np.stack([p // grid.n, p % grid.n], axis=1).astype(float)


def _make_clusters(groups, grid):
    out = []
    for cid, members in enumerate(groups):
        members = tuple(sorted(members))
        rc = _coords(members, grid).mean(axis=0)
        out.append(Cluster(cid, members, (float(rc[0]), float(rc[1]))))
    return out


def dbscan(points: Sequence[int], grid: GridSpec, eps: float = 2.5, min_pts: int = 4):
    """DBSCAN on grid (row, col) coordinates.

    Points are scanned in ascending index order; a point is core when at least
    ``min_pts`` points (itself included) lie within ``eps``. Border points join
    the first cluster that reaches them. Returns ``(clusters, noise)``.
    """
    pts = sorted(set(int(p) for p in points))
    if not pts:
        return [], []
    xy = _coords(pts, grid)
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
    neighbours = [np.flatnonzero(row <= eps * eps) for row in d2]
    core = np.array([len(nb) >= min_pts for nb in neighbours])

    label = np.full(len(pts), -1)
    groups = []
    for i in range(len(pts)):
        if label[i] != -1 or not core[i]:
            continue
        cid = len(groups)
        label[i] = cid
        members = [i]
        queue = deque([i])
        while queue:
            j = queue.popleft()
            if not core[j]:
                continue
            for k in neighbours[j]:
                if label[k] == -1:
                    label[k] = cid
                    members.append(k)
                    queue.append(k)
        groups.append([pts[m] for m in members])
    noise = [pts[i] for i in range(len(pts)) if label[i] == -1]
    return _make_clusters(groups, grid), noise


def kmeans(points: Sequence[int], grid: GridSpec, k: int, max_iter: int = 100):
    """Lloyd's k-means with deterministic farthest-point initialisation.

    The first centre is the lowest-index point; each further centre is the
    point farthest from all chosen centres (ties by lowest index).
    """
    pts = sorted(set(int(p) for p in points))
    if k < 1 or k > len(pts):
        raise ValueError(f"kmeans needs 1 <= k <= number of points ({len(pts)}), got k={k}")
    xy = _coords(pts, grid)
    chosen = [0]
    mind = ((xy - xy[0]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, ((xy - xy[nxt]) ** 2).sum(axis=1))
    centres = xy[chosen].copy()

    assign = None
    for _ in range(max_iter):
        d2 = ((xy[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new == c):
                # reseed an empty cluster with the point farthest from its own centre
                far = int(np.argmax(d2[np.arange(len(pts)), new]))
                new[far] = c
                centres[c] = xy[far]
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        centres = np.array([xy[assign == c].mean(axis=0) for c in range(k)])
    groups = [[pts[i] for i in np.flatnonzero(assign == c)] for c in range(k)]
    return _make_clusters(groups, grid), []


def cluster_points(points: Sequence[int], grid: GridSpec, method: str = "dbscan", **params):
    """Dispatch to :func:`dbscan` (``eps``, ``min_pts``) or :func:`kmeans` (``k``)."""
    if method == "dbscan":
        return dbscan(points, grid, params.get("eps", 2.5), params.get("min_pts", 4))
    if method == "kmeans":
        if not points:
            raise ValueError("kmeans needs at least one point")
        return kmeans(points, grid, params.get("k", 1), params.get("max_iter", 100))
    raise ValueError(f"unknown cluster method {method!r}")


def candidate_sites(cluster: Cluster, config: SiteConfiguration, strategy: str = "centroid") -> list[CandidateSite]:
    grid = config.grid
    occupied = config.occupied
    members = list(cluster.members)
    if strategy == "centroid":
        r = min(max(math.floor(cluster.centroid_rc[0] + 0.5), 0), grid.n - 1)
        c = min(max(math.floor(cluster.centroid_rc[1] + 0.5), 0), grid.n - 1)
        idx = point_index(r, c, grid)
        if idx in occupied:
            free = [m for m in members if m not in occupied]
            if not free:
                return []
            d2 = ((_coords(free, grid) - [r, c]) ** 2).sum(axis=1)
            idx = free[int(np.argmin(d2))]
        return [CandidateSite(idx, cluster.id, "centroid")]
    if strategy == "boundary":
        if len(members) == 1:
            pair = members
        else:
            xy = _coords(members, grid)
            d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
            i, j = np.unravel_index(int(np.argmax(np.triu(d2, 1))), d2.shape)
            pair = [members[i], members[j]]
        return [CandidateSite(p, cluster.id, "boundary") for p in pair if p not in occupied]
    raise ValueError(f"unknown placement strategy {strategy!r}")


def coverage_gain(config: SiteConfiguration, candidate_index: int, evaluator: Evaluator, tau_dbm: float,
                  base_count: int | None = None) -> int:
    """Increase in the number of points at or above ``tau_dbm`` when a default
    site is added at ``candidate_index``. ``base_count`` skips re-evaluating
    the unchanged configuration."""
    if candidate_index in config.occupied:
        raise ValueError(f"point {candidate_index} already hosts a site")
    if base_count is None:
        base_count = evaluator(config).covered_count(tau_dbm)
    after = evaluator(config.with_site(candidate_index)).covered_count(tau_dbm)
    return max(after - base_count, 0)


def greedy_select(candidates: Sequence[CandidateSite], config: SiteConfiguration, budget: Budget,
                  evaluator: Evaluator, tau_dbm: float, limit: int | None = None) -> list[CandidateSite]:
    """Pick candidates one at a time by largest marginal gain (ties: lowest index).

    Stops at ``budget.max_sites()`` (or ``limit`` if smaller), when candidates
    run out, or when the best marginal gain is zero. Selected candidates carry
    their marginal gain in ``predicted_gain``.
    """
    cap = budget.max_sites() if limit is None else min(limit, budget.max_sites())
    pool = {}
    for c in candidates:
        if c.index not in config.occupied and c.index not in pool:
            pool[c.index] = c
    picked = []
    while len(picked) < cap and pool:
        base = evaluator(config).covered_count(tau_dbm)
        best, best_gain = None, 0
        for idx in sorted(pool):
            g = coverage_gain(config, idx, evaluator, tau_dbm, base_count=base)
            if g > best_gain:
                best, best_gain = idx, g
        if best is None:
            break
        chosen = pool.pop(best)
        picked.append(CandidateSite(chosen.index, chosen.cluster_id, chosen.strategy, float(best_gain)))
        config = config.with_site(best)
    return picked
