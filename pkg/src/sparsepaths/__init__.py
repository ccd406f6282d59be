"""Sparse randomized shortest-path routing on weighted directed graphs.

Routing policies interpolate between the reference random walk and
least-cost paths under a Tsallis-divergence regularizer whose solutions are
sparse, with the classical KL-regularized model as baseline.  Node
dissimilarity matrices derived from either model feed a small clustering
evaluation harness.
"""

from .cluster import (
    ClusterScores,
    Partition,
    TuneResult,
    ari,
    kernel_kmeans,
    load_labels,
    modularity,
    nmi,
    tune_parameter,
)
from .dissim import (
    KINDS,
    KL_FE,
    KL_RSP,
    TSALLIS_FE,
    TSALLIS_RSP,
    DissimilarityMatrix,
    KernelMatrix,
    dissimilarity_matrix,
    load_matrix_csv,
    mds_kernel,
    save_matrix_csv,
    triangle_check,
)
from .dot import render_net_flows
from .errors import ConvergenceError, EdgeListError, GraphError, SparsePathsError
from .graph import (
    Graph,
    ReferenceMatrix,
    dump_edge_list,
    load_edge_list,
    loads_edge_list,
    reference_probabilities,
    save_edge_list,
    shortest_path_cost,
)
from .rsp_kl import (
    Policy,
    kl_lagrange_solve,
    kl_policy_iterate,
    kl_transition_update,
    softmin_recursion,
)
from .rsp_tsallis import (
    FlowField,
    TsallisPolicy,
    convexity_probe,
    expected_cost,
    expected_cost_column,
    expected_visits,
    tsallis_divergence,
    tsallis_lagrange_solve,
    tsallis_policy_iterate,
    tsallis_transition_update,
)
from .simplex import (
    SimplexProblem,
    SimplexSolution,
    kkt_residual,
    spmin,
    spmin_bisection,
    spmin_quadratic,
)

__version__ = "0.1.0"
