import numpy as np
import pytest
import scipy.linalg

import oracles
from sparsepaths import (
    TSALLIS_FE,
    GraphError,
    Partition,
    ari,
    kernel_kmeans,
    load_labels,
    loads_edge_list,
    modularity,
    nmi,
    tune_parameter,
)
from sparsepaths.cluster import _lloyd

TRIANGLE = np.ones((3, 3)) - np.eye(3)


def grouped(assignment, labels):
    return ari(assignment, labels) == 1.0


def test_block_kernel_recovered_exactly():
    K = scipy.linalg.block_diag(np.ones((3, 3)), np.ones((4, 4)),
                                np.ones((3, 3)))
    part = kernel_kmeans(K, 3, restarts=5, rng_seed=1)
    truth = np.array([0] * 3 + [1] * 4 + [2] * 3)
    assert part.k == 3
    assert not part.collapsed
    assert grouped(part.assignment, truth)
    assert part.objective == pytest.approx(0.0, abs=1e-12)


def test_identity_kernel_all_singletons():
    n = 6
    part = kernel_kmeans(np.eye(n), n, restarts=3, rng_seed=0)
    assert sorted(part.assignment.tolist()) == list(range(n))
    assert part.objective == pytest.approx(0.0, abs=1e-12)


def test_lloyd_objective_non_increasing():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 3))
    K = X @ X.T
    diag = np.diag(K).copy()
    assign = rng.integers(0, 4, size=40)
    _, _, history, ok = _lloyd(K, diag, assign, 4)
    assert ok
    assert all(b <= a + 1e-10 for a, b in zip(history, history[1:]))


def test_two_block_walk_dissimilarity_recovers_the_blocks():
    text, blocks = oracles.sbm_two_block_text(seed=5, n=60, p_in=0.3,
                                              p_out=0.02)
    g = loads_edge_list(text, undirected=True)
    truth = np.array([blocks[name] for name in g.node_names])
    from sparsepaths import dissimilarity_matrix, mds_kernel
    from sparsepaths import reference_probabilities

    ref = reference_probabilities(g)
    D = dissimilarity_matrix(g, ref, TSALLIS_FE, theta=1.0)
    part = kernel_kmeans(mds_kernel(D), 2, restarts=10, rng_seed=0)
    assert ari(part, truth) >= 0.9


def test_kernel_kmeans_deterministic():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(25, 2))
    K = X @ X.T
    a = kernel_kmeans(K, 3, restarts=4, rng_seed=7)
    b = kernel_kmeans(K, 3, restarts=4, rng_seed=7)
    assert np.array_equal(a.assignment, b.assignment)
    assert a.objective == b.objective


def test_kernel_kmeans_collapse_flagged():
    # every point identical: no seeding can keep three clusters apart
    part = kernel_kmeans(np.ones((5, 5)), 3, restarts=2, rng_seed=0)
    assert part.collapsed
    assert part.k < 3
    assert part.objective == pytest.approx(0.0, abs=1e-12)


def test_kernel_kmeans_validation():
    with pytest.raises(GraphError):
        kernel_kmeans(np.eye(4), 1)
    with pytest.raises(GraphError):
        kernel_kmeans(np.eye(4), 5)
    with pytest.raises(GraphError):
        kernel_kmeans(np.eye(4), 2, restarts=0)
    bad = np.eye(4)
    bad[0, 1] = 0.5
    with pytest.raises(GraphError):
        kernel_kmeans(bad, 2)


def test_modularity_all_in_one_is_exactly_zero(fig1, karate):
    for g in (fig1, karate):
        assert modularity(np.zeros(g.n, dtype=int), g) == 0.0


def test_modularity_two_disjoint_triangles():
    A = scipy.linalg.block_diag(TRIANGLE, TRIANGLE)
    labels = np.array([0, 0, 0, 1, 1, 1])
    assert modularity(labels, A) == pytest.approx(0.5, abs=1e-12)


def test_modularity_random_partition_of_random_graph_is_near_zero():
    rng = np.random.default_rng(40)
    n = 200
    A = (rng.random((n, n)) < 0.05).astype(float)
    A = np.triu(A, 1)
    A = A + A.T
    labels = rng.integers(0, 4, size=n)
    assert abs(modularity(labels, A)) <= 0.1


def test_modularity_directed_affinities_symmetrized():
    # one-way arc contributes half to each direction after symmetrization
    A = np.array([[0.0, 2.0], [0.0, 0.0]])
    q_split = modularity(np.array([0, 1]), A)
    assert q_split == pytest.approx(-0.5, abs=1e-12)


def test_modularity_validation(fig1):
    with pytest.raises(GraphError):
        modularity(np.zeros(3, dtype=int), fig1)
    with pytest.raises(GraphError):
        modularity(np.zeros(4, dtype=int), np.zeros((4, 4)))


def test_nmi_ari_identical_partitions():
    labels = np.array([0, 0, 1, 1, 2, 2, 2])
    assert nmi(labels, labels) == 1.0
    assert ari(labels, labels) == 1.0


def test_nmi_ari_handcrafted_cross():
    u = np.array([0, 0, 1, 1])
    v = np.array([0, 1, 0, 1])
    assert ari(u, v) == pytest.approx(-0.5, abs=1e-12)
    assert nmi(u, v) == pytest.approx(0.0, abs=1e-12)


def test_nmi_ari_relabeling_invariant():
    rng = np.random.default_rng(3)
    u = rng.integers(0, 4, size=50)
    v = rng.integers(0, 3, size=50)
    remap = np.array([2, 0, 3, 1])
    assert nmi(remap[u], v) == pytest.approx(nmi(u, v), abs=1e-12)
    assert ari(remap[u], v) == pytest.approx(ari(u, v), abs=1e-12)


def test_ari_is_chance_adjusted():
    rng = np.random.default_rng(99)
    u = np.repeat(np.arange(4), 25)
    values = [ari(u, rng.permutation(u)) for _ in range(1000)]
    assert abs(float(np.mean(values))) <= 0.02


def test_degenerate_partition_conventions():
    ones = np.zeros(5, dtype=int)
    singles = np.arange(5)
    assert nmi(ones, ones) == 1.0
    assert ari(ones, ones) == 1.0
    assert ari(singles, singles) == 1.0
    assert nmi(singles, singles) == 1.0
    assert ari(ones, singles) == 0.0
    assert nmi(ones, singles) == 0.0
    with pytest.raises(GraphError):
        nmi(np.zeros(0, dtype=int), np.zeros(0, dtype=int))
    with pytest.raises(GraphError):
        ari(np.zeros(3, dtype=int), np.zeros(4, dtype=int))


def test_partition_argument_accepted_everywhere():
    labels = np.array([0, 0, 1, 1])
    part = Partition(assignment=labels, k=2, objective=0.0)
    assert ari(part, labels) == 1.0
    assert nmi(part, labels) == 1.0


def test_tune_single_theta_degenerates(fig1):
    out = tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[1.0], k=2,
                         restarts=5, seed=0)
    assert out.best_theta == 1.0
    assert len(out.per_theta) == 1
    assert out.warnings == ()
    assert out.scores.nmi is None and out.scores.ari is None


def test_tune_picks_highest_modularity(fig1):
    grid = [0.05, 0.5, 5.0]
    out = tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=grid, k=2,
                         restarts=5, seed=0)
    mods = {e["theta"]: e["modularity"] for e in out.per_theta}
    assert out.best_theta in grid
    assert out.scores.modularity == max(mods.values())
    assert out.scores.modularity == mods[out.best_theta]


def test_tune_parallel_matches_serial(fig1):
    grid = [0.1, 1.0, 10.0]
    a = tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=grid, k=2,
                       restarts=5, seed=3, jobs=1)
    b = tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=grid, k=2,
                       restarts=5, seed=3, jobs=3)
    assert a.best_theta == b.best_theta
    assert np.array_equal(a.partition.assignment, b.partition.assignment)


def test_tune_repetitions_average(fig1):
    out = tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[1.0], k=2,
                         restarts=3, seed=0, repetitions=3)
    assert len(out.per_theta) == 1
    assert np.isfinite(out.scores.modularity)


def test_tune_with_labels_reports_agreement(fig1):
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1])
    out = tune_parameter(fig1, TSALLIS_FE, r=2.0,
                         theta_grid=[0.1, 1.0], k=2, restarts=10, seed=0,
                         labels=labels)
    assert out.scores.ari is not None and out.scores.nmi is not None
    assert set(out.per_theta[0]) >= {"theta", "modularity", "nmi", "ari"}


def test_tune_validation(fig1):
    with pytest.raises(GraphError):
        tune_parameter(fig1, "no-such-kind", r=2.0, theta_grid=[1.0], k=2)
    with pytest.raises(GraphError):
        tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[], k=2)
    with pytest.raises(GraphError):
        tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[-1.0], k=2)
    with pytest.raises(GraphError):
        tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[1.0], k=2,
                       labels=np.zeros(3, dtype=int))
    with pytest.raises(GraphError):
        tune_parameter(fig1, TSALLIS_FE, r=2.0, theta_grid=[1.0], k=2,
                       repetitions=0)


def test_karate_two_factions_recovered(karate, data_dir):
    labels = load_labels(data_dir / "karate_labels.tsv", karate)
    out = tune_parameter(karate, TSALLIS_FE, r=2.0,
                         theta_grid=np.logspace(-2, 2, 5), k=2,
                         restarts=10, seed=0, labels=labels)
    assert out.scores.ari >= 0.5


def test_load_labels(karate, data_dir):
    labels = load_labels(data_dir / "karate_labels.tsv", karate)
    assert labels.shape == (karate.n,)
    assert set(labels.tolist()) == {0, 1}


def test_load_labels_errors(tmp_path, fig1):
    p = tmp_path / "bad.tsv"
    p.write_text("s 0\ns 1\n")
    with pytest.raises(GraphError, match="duplicate"):
        load_labels(p, fig1)
    p.write_text("s 0\n")
    with pytest.raises(GraphError, match="missing"):
        load_labels(p, fig1)
    names = "s a b c d e f g h t".split()
    p.write_text("".join(f"{n} 0\n" for n in names) + "zz 1\n")
    with pytest.raises(GraphError, match="zz"):
        load_labels(p, fig1)
