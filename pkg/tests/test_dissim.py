import numpy as np
import pytest

import oracles
from sparsepaths import (
    KINDS,
    KL_FE,
    KL_RSP,
    TSALLIS_FE,
    TSALLIS_RSP,
    GraphError,
    dissimilarity_matrix,
    load_matrix_csv,
    loads_edge_list,
    mds_kernel,
    reference_probabilities,
    save_matrix_csv,
    triangle_check,
)

TWO_NODE = "x\ty\t1.0\t3.0\ny\tx\t1.0\t3.0"


def commute_cost_oracle(g, ref):
    """theta -> 0 limit: reference-walk expected cost there plus back."""
    P = np.zeros((g.n, g.n))
    P[g.rows, g.indices] = ref.data
    C = np.zeros((g.n, g.n))
    C[g.rows, g.indices] = g.cost
    cols = []
    for t in range(g.n):
        Pt = P.copy()
        Pt[t, :] = 0.0
        cols.append(oracles.absorbing_expected_cost(Pt, C, t))
    phi = np.column_stack(cols)
    return phi + phi.T


def shortest_path_oracle(g):
    arcs = list(zip(g.rows.tolist(), g.indices.tolist(), g.cost.tolist()))
    cols = [oracles.bellman_ford_to_target(g.n, arcs, t) for t in range(g.n)]
    return np.column_stack(cols)


def test_two_node_round_trip_cost():
    g = loads_edge_list(TWO_NODE)
    ref = reference_probabilities(g)
    d = dissimilarity_matrix(g, ref, TSALLIS_RSP, theta=50.0)
    assert np.allclose(d.D, [[0.0, 6.0], [6.0, 0.0]], atol=1e-9)


@pytest.mark.parametrize("kind", [TSALLIS_FE, KL_FE])
def test_sharp_limit_is_symmetrized_shortest_path(kind):
    # theta = 100 sits in the sharp regime once theta * cost is large
    rng = np.random.default_rng(31)
    g = loads_edge_list(oracles.random_strong_graph_text(rng, 12, 20,
                                                         scale=100.0))
    ref = reference_probabilities(g)
    d = dissimilarity_matrix(g, ref, kind, theta=100.0)
    sp = shortest_path_oracle(g)
    want = 0.5 * (sp + sp.T)
    err = np.abs(d.D - want) / np.maximum(want, 1e-12)
    np.fill_diagonal(err, 0.0)
    assert err.max() <= 1e-3


@pytest.mark.parametrize("kind", [TSALLIS_RSP, KL_RSP])
def test_diffuse_limit_is_commute_cost(kind):
    # theta = 1e-4 sits in the diffuse regime once theta * cost is small
    rng = np.random.default_rng(32)
    g = loads_edge_list(oracles.random_strong_graph_text(rng, 12, 20,
                                                         scale=0.01))
    ref = reference_probabilities(g)
    d = dissimilarity_matrix(g, ref, kind, theta=1e-4)
    want = commute_cost_oracle(g, ref)
    err = np.abs(d.D - want) / np.maximum(want, 1e-12)
    np.fill_diagonal(err, 0.0)
    assert err.max() <= 1e-3


@pytest.mark.parametrize("kind", KINDS)
def test_entries_non_increasing_in_theta(fig1, fig1_uniform, kind):
    prev = None
    for theta in (0.01, 0.1, 1.0, 10.0, 100.0):
        D = dissimilarity_matrix(fig1, fig1_uniform, kind, theta=theta).D
        if prev is not None:
            assert np.all(D <= prev + 1e-8)
        prev = D


@pytest.mark.parametrize("kind", KINDS)
def test_matrix_conventions(fig1, fig1_natural, kind):
    d = dissimilarity_matrix(fig1, fig1_natural, kind, theta=1.0)
    assert d.kind == kind
    assert d.node_names == fig1.node_names
    assert np.all(np.diag(d.D) == 0.0)
    assert np.array_equal(d.D, d.D.T)
    assert np.all(d.D[~np.eye(fig1.n, dtype=bool)] > 0.0)


def test_rsp_entries_are_round_trip_expected_costs(fig1, fig1_uniform):
    from sparsepaths import (expected_cost, expected_visits,
                             tsallis_policy_iterate)

    rsp = dissimilarity_matrix(fig1, fig1_uniform, TSALLIS_RSP, theta=2.0).D
    s, t = fig1.index("b"), fig1.index("g")
    to_t = tsallis_policy_iterate(fig1, fig1_uniform, t, r=2.0, T=0.5)
    to_s = tsallis_policy_iterate(fig1, fig1_uniform, s, r=2.0, T=0.5)
    there = expected_cost(expected_visits(to_t, fig1, s), fig1)
    back = expected_cost(expected_visits(to_s, fig1, t), fig1)
    assert rsp[s, t] == pytest.approx(there + back, abs=1e-10)


def test_parallel_and_serial_agree(fig1, fig1_natural):
    a = dissimilarity_matrix(fig1, fig1_natural, KL_FE, theta=1.0, jobs=1)
    b = dissimilarity_matrix(fig1, fig1_natural, KL_FE, theta=1.0, jobs=4)
    assert np.array_equal(a.D, b.D)


def test_kind_validation(fig1, fig1_natural):
    with pytest.raises(GraphError):
        dissimilarity_matrix(fig1, fig1_natural, "euclidean")


def test_mds_zero_matrix():
    out = mds_kernel(np.zeros((4, 4)))
    assert np.all(out.K == 0.0)
    assert out.clipped_eigenvalue_mass == 0.0


def test_mds_collinear_points_reconstruct():
    # three points on a line at 0, 1, 2
    D = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    out = mds_kernel(D)
    K = out.K
    assert out.clipped_eigenvalue_mass <= 1e-12
    d2 = np.diag(K)[:, None] + np.diag(K)[None, :] - 2.0 * K
    assert np.abs(np.sqrt(np.maximum(d2, 0.0)) - D).max() <= 1e-10


def test_mds_equilateral_spectrum():
    D = np.ones((3, 3)) - np.eye(3)
    out = mds_kernel(D)
    eigs = np.sort(np.linalg.eigvalsh(out.K))
    assert np.allclose(eigs, [0.0, 0.5, 0.5], atol=1e-12)
    assert out.clipped_eigenvalue_mass <= 1e-12


def test_mds_kernel_is_psd_and_centered(fig1, fig1_natural):
    d = dissimilarity_matrix(fig1, fig1_natural, TSALLIS_FE, theta=1.0)
    out = mds_kernel(d)
    assert np.linalg.eigvalsh(out.K).min() >= -1e-10
    assert np.abs(out.K.sum(axis=0)).max() <= 1e-9
    assert np.abs(out.K.sum(axis=1)).max() <= 1e-9


def test_mds_clips_non_euclidean_part():
    # four points whose distances violate the Euclidean embedding
    D = np.array([[0.0, 1.0, 1.0, 1.9],
                  [1.0, 0.0, 1.9, 1.0],
                  [1.0, 1.9, 0.0, 1.0],
                  [1.9, 1.0, 1.0, 0.0]])
    out = mds_kernel(D)
    assert out.clipped_eigenvalue_mass > 0.0
    assert np.linalg.eigvalsh(out.K).min() >= -1e-12


def test_triangle_check_metric_is_clean(fig1, fig1_natural):
    sp = shortest_path_oracle(fig1)
    out = triangle_check(0.5 * (sp + sp.T))
    assert out["violations"] == 0


def test_triangle_check_counts_unordered_triples():
    D = np.array([[0.0, 1.0, 10.0], [1.0, 0.0, 1.0], [10.0, 1.0, 0.0]])
    out = triangle_check(D)
    assert out["violations"] == 1
    assert out["worst_slack"] == pytest.approx(8.0, abs=1e-12)


def test_triangle_check_honors_slack():
    D = np.array([[0.0, 1.0, 2.0 + 1e-12], [1.0, 0.0, 1.0],
                  [2.0 + 1e-12, 1.0, 0.0]])
    assert triangle_check(D, slack=1e-9)["violations"] == 0
    assert triangle_check(D, slack=1e-15)["violations"] == 1


def test_csv_round_trip(tmp_path, fig1, fig1_uniform):
    d = dissimilarity_matrix(fig1, fig1_uniform, KL_RSP, theta=0.5)
    path = tmp_path / "d.csv"
    save_matrix_csv(d, path)
    D, names = load_matrix_csv(path)
    assert tuple(names) == fig1.node_names
    assert np.abs(D - d.D).max() <= 1e-9
