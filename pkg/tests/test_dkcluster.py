import random

import pytest

from blockreduce.corpus import BLOCK_SIZE, BlockCorpus, SynthSpec, \
    generate_labeled_corpus, perturb_block
from blockreduce.dkcluster import (Cluster, ClusterConfig, DistanceCache,
                                   cluster_distance,
                                   clustering_from_assignments, coarse_pass,
                                   dk_cluster, fine_pass, load_assignments,
                                   save_assignments)


def test_distance_identical_blocks():
    b = random.Random(0).randbytes(BLOCK_SIZE)
    assert cluster_distance(b, b) >= 256


def test_distance_unrelated_blocks():
    rng = random.Random(1)
    a, b = rng.randbytes(BLOCK_SIZE), rng.randbytes(BLOCK_SIZE)
    assert cluster_distance(a, b) <= 1.05


def test_distance_small_change():
    rng = random.Random(2)
    b = rng.randbytes(BLOCK_SIZE)
    a = bytearray(b)
    a[100:108] = rng.randbytes(8)
    assert cluster_distance(bytes(a), b) >= 32


def test_coarse_two_identical_blocks_one_cluster():
    b = random.Random(3).randbytes(BLOCK_SIZE)
    corpus = BlockCorpus([b, b])
    dist = DistanceCache(corpus)
    clusters, discarded = coarse_pass([0, 1], [], 2.0, dist)
    assert len(clusters) == 1
    assert clusters[0].members == {0, 1}
    assert not discarded


def test_coarse_random_blocks_all_discarded():
    rng = random.Random(4)
    corpus = BlockCorpus([rng.randbytes(BLOCK_SIZE) for _ in range(5)])
    dist = DistanceCache(corpus)
    # verify the premise: all pairwise distances below the threshold
    for i in range(5):
        for j in range(5):
            if i != j:
                assert dist.dist(i, j) < 2.0
    clusters, discarded = coarse_pass(range(5), [], 2.0, dist)
    assert clusters == []
    assert discarded == set(range(5))


def test_coarse_exact_tie_joins_lower_cluster_index():
    b = random.Random(5).randbytes(BLOCK_SIZE)
    v = perturb_block(b, 8, 1, random.Random(6))
    # two clusters with byte-identical medoid blocks -> exact tie
    corpus = BlockCorpus([b, b, v])
    dist = DistanceCache(corpus)
    clusters = [Cluster({0}, 0, 2.0), Cluster({1}, 1, 2.0)]
    clusters, discarded = coarse_pass([2], clusters, 2.0, dist)
    by_members = [c.members for c in clusters]
    assert {0, 2} in by_members  # joined the lower-index cluster
    assert discarded == {1}      # the other stayed singleton and was dropped


def test_fine_identical_cluster_unchanged():
    b = random.Random(7).randbytes(BLOCK_SIZE)
    corpus = BlockCorpus([b] * 4)
    dist = DistanceCache(corpus)
    clusters = [Cluster({0, 1, 2, 3}, 0, 2.0)]
    clusters, unlabeled = fine_pass(clusters, 2.0, dist, ClusterConfig())
    assert unlabeled == set()
    assert clusters[0].members == {0, 1, 2, 3}


def test_fine_outlier_evicted():
    rng = random.Random(8)
    b = rng.randbytes(BLOCK_SIZE)
    members = [b, perturb_block(b, 8, 1, rng), perturb_block(b, 8, 1, rng),
               rng.randbytes(BLOCK_SIZE)]  # id 3 is the outlier
    corpus = BlockCorpus(members)
    dist = DistanceCache(corpus)
    clusters = [Cluster({0, 1, 2, 3}, 0, 2.0)]
    clusters, unlabeled = fine_pass(clusters, 2.0, dist, ClusterConfig())
    assert unlabeled == {3}
    assert clusters[0].members == {0, 1, 2}


def test_fine_medoid_matches_exhaustive_scoring():
    rng = random.Random(9)
    base = rng.randbytes(BLOCK_SIZE)
    blocks = [perturb_block(base, 64, 4, rng) for _ in range(3)]
    corpus = BlockCorpus(blocks)
    dist = DistanceCache(corpus)
    clusters = [Cluster({0, 1, 2}, 0, 1.5)]
    clusters, _ = fine_pass(clusters, 1.5, dist, ClusterConfig())
    # brute-force argmax of mean distance-to-others
    def score(m):
        others = [o for o in range(3) if o != m]
        return sum(dist.dist(o, m) for o in others) / len(others)
    best = max(range(3), key=lambda m: (score(m), -m))
    assert clusters[0].medoid == best


def test_dk_cluster_two_families_pure():
    spec = SynthSpec(families=2, blocks_per_family=50, perturb_bytes_max=16,
                     perturb_runs_max=4, seed=11)
    corpus, labels = generate_labeled_corpus(spec)
    clustering = dk_cluster(corpus)
    assert len(clustering.clusters) == 2
    for c in clustering.clusters:
        fams = {labels[b] for b in c.members}
        assert len(fams) == 1
    assert clustering.stats.iterations <= 8


def test_dk_cluster_postcondition_and_partition():
    spec = SynthSpec(families=3, blocks_per_family=20, perturb_bytes_max=24,
                     seed=12)
    corpus, _ = generate_labeled_corpus(spec)
    clustering = dk_cluster(corpus)
    seen = set(clustering.discarded)
    for c in clustering.clusters:
        assert c.medoid in c.members
        for b in c.members:
            assert b not in seen
            seen.add(b)
            assert cluster_distance(corpus[b], corpus[c.medoid]) >= c.threshold
    assert seen == set(range(len(corpus)))


def test_dk_cluster_identical_corpus():
    blk = random.Random(13).randbytes(BLOCK_SIZE)
    clustering = dk_cluster(BlockCorpus([blk] * 12))
    assert len(clustering.clusters) == 1
    assert clustering.clusters[0].members == set(range(12))
    assert not clustering.discarded


def test_dk_cluster_empty_corpus():
    clustering = dk_cluster(BlockCorpus([]))
    assert clustering.clusters == [] and clustering.discarded == set()


def test_dk_cluster_deterministic():
    spec = SynthSpec(families=2, blocks_per_family=15, perturb_bytes_max=32,
                     seed=14)
    corpus, _ = generate_labeled_corpus(spec)
    a = dk_cluster(corpus)
    b = dk_cluster(corpus)
    assert [sorted(c.members) for c in a.clusters] == \
        [sorted(c.members) for c in b.clusters]
    assert [c.medoid for c in a.clusters] == [c.medoid for c in b.clusters]
    assert a.discarded == b.discarded


def test_config_validation():
    with pytest.raises(ValueError):
        ClusterConfig(delta0=1.0)
    with pytest.raises(ValueError):
        ClusterConfig(alpha=0)
    with pytest.raises(ValueError):
        ClusterConfig(max_iterations=0)


def test_assignment_file_round_trip(tmp_path):
    spec = SynthSpec(families=2, blocks_per_family=10, perturb_bytes_max=16,
                     seed=15)
    corpus, _ = generate_labeled_corpus(spec)
    clustering = dk_cluster(corpus)
    path = tmp_path / "assign.txt"
    save_assignments(clustering, len(corpus), str(path))
    rows = load_assignments(str(path))
    assert len(rows) == len(corpus)
    rebuilt = clustering_from_assignments(rows, corpus)
    assert len(rebuilt.clusters) == len(clustering.clusters)
    assert [sorted(c.members) for c in rebuilt.clusters] == \
        [sorted(c.members) for c in clustering.clusters]
    assert rebuilt.discarded == clustering.discarded
