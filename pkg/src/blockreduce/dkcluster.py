"""Dynamic k-means clustering of blocks, with the delta-compression
ratio (block size over encoded delta size) as the similarity measure.

The procedure alternates a coarse pass -- every unlabeled block joins
the cluster whose medoid it compresses best against if that ratio
clears the threshold, else seeds a new cluster; then singleton clusters
are dropped from the data set -- with a fine pass that re-selects each
cluster's medoid (the member with the highest mean ratio to the rest),
reassigns members to their best medoid, and evicts members that fall
below the threshold back to unlabeled.  Once no unlabeled blocks
remain, each cluster is re-clustered recursively with the threshold
raised by alpha; a split is kept only while it raises the
member-weighted mean ratio-to-medoid.

All tie-breaks are by lowest cluster index or lowest block id, and the
medoid sampling is seeded, so results are reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import codec
from .corpus import BLOCK_SIZE, BlockCorpus


@dataclass(frozen=True)
class ClusterConfig:
    delta0: float = 2.0          # initial DRR threshold
    alpha: float = 0.5           # per-recursion threshold increment
    max_iterations: int = 8      # coarse/fine alternation cap per level
    medoid_sample_cap: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.delta0 <= 1.0:
            raise ValueError("delta0 must exceed 1.0")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class Cluster:
    members: set[int]
    medoid: int
    threshold: float


@dataclass
class ClusterStats:
    coarse_clusters: int = 0   # clusters right after the last top-level coarse pass
    fine_clusters: int = 0     # clusters at top-level convergence
    cluster_count: int = 0     # final cluster count
    iterations: int = 0        # top-level coarse/fine alternations
    distance_evals: int = 0


@dataclass
class Clustering:
    clusters: list[Cluster]
    discarded: set[int]
    stats: ClusterStats = field(default_factory=ClusterStats)

    def assignment(self, block_id: int) -> int:
        for ci, c in enumerate(self.clusters):
            if block_id in c.members:
                return ci
        return -1


def cluster_distance(block: bytes, mean: bytes) -> float:
    """DRR of delta-compressing `block` against `mean`; higher is more
    similar (identical blocks score around 680)."""
    return BLOCK_SIZE / len(codec.delta_encode(block, mean))


class DistanceCache:
    """Memoized directional cluster_distance over one corpus.

    The cache is capped at a per-block constant so clustering memory
    stays O(N) beyond the corpus itself; eviction only costs recompute
    time, never changes results.
    """

    def __init__(self, corpus: BlockCorpus, stats: ClusterStats | None = None):
        self.corpus = corpus
        self.stats = stats or ClusterStats()
        self._cache: dict[tuple[int, int], float] = {}
        self._cap = max(4096, 8 * len(corpus))

    def dist(self, block_id: int, mean_id: int) -> float:
        key = (block_id, mean_id)
        d = self._cache.get(key)
        if d is None:
            d = cluster_distance(self.corpus[block_id], self.corpus[mean_id])
            if len(self._cache) >= self._cap:
                self._cache.clear()
            self._cache[key] = d
            self.stats.distance_evals += 1
        return d


def coarse_pass(unlabeled, clusters: list[Cluster], delta: float,
                dist: DistanceCache) -> tuple[list[Cluster], set[int]]:
    """Assign every unlabeled block to the best-matching cluster medoid
    (if it clears `delta`) or seed a new cluster with it, then drop
    singleton clusters from the data set."""
    for bid in sorted(unlabeled):
        best_ci = None
        best_d = 0.0
        for ci, c in enumerate(clusters):
            d = dist.dist(bid, c.medoid)
            if best_ci is None or d > best_d:
                best_ci, best_d = ci, d
        if best_ci is not None and best_d >= delta:
            clusters[best_ci].members.add(bid)
        else:
            clusters.append(Cluster({bid}, bid, delta))
    discarded = set()
    kept = []
    for c in clusters:
        if len(c.members) == 1:
            discarded |= c.members
        else:
            kept.append(c)
    return kept, discarded


def _update_medoid(c: Cluster, dist: DistanceCache, cfg: ClusterConfig,
                   tag: str) -> None:
    members = sorted(c.members)
    if len(members) > cfg.medoid_sample_cap:
        rng = random.Random(f"{cfg.seed}:medoid:{tag}")
        members = sorted(rng.sample(members, cfg.medoid_sample_cap))
    best_m = c.medoid
    best_score = -1.0
    for m in members:
        others = [o for o in members if o != m]
        if not others:
            continue
        score = sum(dist.dist(o, m) for o in others) / len(others)
        if score > best_score:
            best_m, best_score = m, score
    c.medoid = best_m


def fine_pass(clusters: list[Cluster], delta: float, dist: DistanceCache,
              cfg: ClusterConfig, tag: str = "") -> tuple[list[Cluster], set[int]]:
    """Medoid update, k-means reassignment to the nearest medoid, then
    eviction of members below the threshold (returned as unlabeled)."""
    for ci, c in enumerate(clusters):
        _update_medoid(c, dist, cfg, f"{tag}:{ci}")

    # reassignment; medoids are pinned to their own cluster
    moves = []
    for ci, c in enumerate(clusters):
        for bid in sorted(c.members):
            if bid == c.medoid:
                continue
            best_ci = ci
            best_d = dist.dist(bid, c.medoid)
            for cj, other in enumerate(clusters):
                if cj == ci:
                    continue
                d = dist.dist(bid, other.medoid)
                if d > best_d or (d == best_d and cj < best_ci):
                    best_ci, best_d = cj, d
            if best_ci != ci:
                moves.append((bid, ci, best_ci))
    for bid, src, dst in moves:
        clusters[src].members.discard(bid)
        clusters[dst].members.add(bid)

    unlabeled = set()
    for c in clusters:
        for bid in sorted(c.members):
            if bid == c.medoid:
                continue
            if dist.dist(bid, c.medoid) < delta:
                c.members.discard(bid)
                unlabeled.add(bid)
    return clusters, unlabeled


def _mean_dist_to_medoid(c: Cluster, dist: DistanceCache) -> float:
    others = [b for b in sorted(c.members) if b != c.medoid]
    if not others:
        return 0.0
    return sum(dist.dist(b, c.medoid) for b in others) / len(others)


def _one_level(ids, delta: float, dist: DistanceCache, cfg: ClusterConfig,
               stats: ClusterStats, top: bool,
               tag: str) -> tuple[list[Cluster], set[int]]:
    """One threshold level: alternate coarse/fine until no unlabeled
    blocks remain (or the iteration cap), then drop leftover singletons."""
    unlabeled = set(ids)
    clusters: list[Cluster] = []
    discarded: set[int] = set()
    it = 0
    while unlabeled and it < cfg.max_iterations:
        clusters, disc = coarse_pass(unlabeled, clusters, delta, dist)
        discarded |= disc
        if top:
            stats.coarse_clusters = len(clusters)
        clusters, unlabeled = fine_pass(clusters, delta, dist, cfg,
                                        f"{tag}:{it}")
        it += 1
    if top:
        stats.iterations = it
    if unlabeled:
        # iteration cap hit: a final coarse pass labels the leftovers
        clusters, disc = coarse_pass(unlabeled, clusters, delta, dist)
        discarded |= disc

    kept = []
    for c in clusters:
        if len(c.members) == 1:  # fine pass can strip a cluster to its medoid
            discarded |= c.members
        else:
            kept.append(c)
    if top:
        stats.fine_clusters = len(kept)
    return kept, discarded


def _refine(c: Cluster, delta_next: float, dist: DistanceCache,
            cfg: ClusterConfig, stats: ClusterStats,
            tag: str) -> tuple[list[Cluster], set[int]]:
    """Split one cluster at the raised threshold; keep the split -- and
    only then refine deeper -- if it raises the member-weighted mean
    DRR-to-medoid, else keep the cluster as is."""
    parent_mean = _mean_dist_to_medoid(c, dist)
    sub_clusters, sub_disc = _one_level(
        sorted(c.members), delta_next, dist, cfg, stats, False, tag)
    weight = 0
    total = 0.0
    for sc in sub_clusters:
        n = len(sc.members) - 1
        total += _mean_dist_to_medoid(sc, dist) * n
        weight += n
    child_mean = total / weight if weight else 0.0
    if child_mean <= parent_mean:
        return [c], set()
    out: list[Cluster] = []
    discarded = set(sub_disc)
    for ci, sc in enumerate(sub_clusters):
        refined, disc = _refine(sc, delta_next + cfg.alpha, dist, cfg,
                                stats, f"{tag}.{ci}")
        out.extend(refined)
        discarded |= disc
    return out, discarded


def dk_cluster(corpus: BlockCorpus, cfg: ClusterConfig = ClusterConfig()) -> Clustering:
    """Cluster a whole corpus; every input block ends in exactly one
    cluster or in the discarded set, and every member's DRR to its
    cluster medoid is at least the cluster threshold."""
    stats = ClusterStats()
    if len(corpus) == 0:
        return Clustering([], set(), stats)
    dist = DistanceCache(corpus, stats)
    clusters, discarded = _one_level(
        range(len(corpus)), cfg.delta0, dist, cfg, stats, True, "r")
    final: list[Cluster] = []
    for ci, c in enumerate(clusters):
        refined, disc = _refine(c, cfg.delta0 + cfg.alpha, dist, cfg,
                                stats, f"r.{ci}")
        final.extend(refined)
        discarded |= disc
    stats.cluster_count = len(final)
    return Clustering(final, discarded, stats)


# -- assignment file ----------------------------------------------------------

def save_assignments(clustering: Clustering, n_blocks: int, path: str) -> None:
    """One line per block: `block_index,cluster_id` (-1 for discarded)."""
    mapping = {}
    for ci, c in enumerate(clustering.clusters):
        for bid in c.members:
            mapping[bid] = ci
    with open(path, "w") as f:
        for i in range(n_blocks):
            f.write(f"{i},{mapping.get(i, -1)}\n")


def load_assignments(path: str) -> list[tuple[int, int]]:
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            idx, cid = line.split(",")
            rows.append((int(idx), int(cid)))
    return rows


def clustering_from_assignments(rows: list[tuple[int, int]],
                                corpus: BlockCorpus,
                                cfg: ClusterConfig = ClusterConfig()) -> Clustering:
    """Rebuild Cluster objects (including medoids, re-scored with the
    standard rule) from an assignment file's rows."""
    by_cluster: dict[int, set[int]] = {}
    discarded: set[int] = set()
    for bid, cid in rows:
        if cid < 0:
            discarded.add(bid)
        else:
            by_cluster.setdefault(cid, set()).add(bid)
    dist = DistanceCache(corpus)
    clusters = []
    for cid in sorted(by_cluster):
        c = Cluster(by_cluster[cid], min(by_cluster[cid]), cfg.delta0)
        _update_medoid(c, dist, cfg, f"rebuild:{cid}")
        clusters.append(c)
    stats = ClusterStats(cluster_count=len(clusters))
    return Clustering(clusters, discarded, stats)
