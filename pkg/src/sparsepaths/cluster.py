"""Desk-scale clustering evaluation harness.

Kernel k-means over an MDS kernel, modularity as the tuning criterion, and
NMI/ARI against supplied ground-truth labels.  ``tune_parameter`` sweeps an
inverse-temperature grid, picks the value with the largest modularity, and
reports that partition with its scores.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb, log

import numpy as np

from .dissim import KINDS, KernelMatrix, dissimilarity_matrix, mds_kernel
from .errors import ConvergenceError, GraphError
from .graph import Graph, reference_probabilities

LLOYD_MAX_ITER = 300
EMPTY_CLUSTER_RETRIES = 10


@dataclass(frozen=True)
class Partition:
    """Cluster assignment with ids 0..k-1.

    ``collapsed`` marks a run that kept emptying a cluster and was accepted
    with fewer clusters than requested; ``objective`` is the within-cluster
    kernel k-means objective of the assignment.
    """

    assignment: np.ndarray
    k: int
    objective: float
    collapsed: bool = False


@dataclass(frozen=True)
class ClusterScores:
    """Partition quality: modularity always, NMI/ARI when labels exist."""

    modularity: float
    nmi: float | None = None
    ari: float | None = None


def _kernel_of(K) -> np.ndarray:
    if isinstance(K, KernelMatrix):
        K = K.K
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise GraphError("kernel must be a square matrix")
    if not np.allclose(K, K.T, atol=1e-8):
        raise GraphError("kernel must be symmetric")
    return 0.5 * (K + K.T)


def _labels_of(partition) -> np.ndarray:
    if isinstance(partition, Partition):
        return partition.assignment
    labels = np.asarray(partition)
    if labels.ndim != 1:
        raise GraphError("labels must be one-dimensional")
    return labels


def _seed_tuple(rng_seed) -> tuple:
    if isinstance(rng_seed, (tuple, list)):
        return tuple(int(x) for x in rng_seed)
    return (int(rng_seed),)


def _plus_plus_seed(K: np.ndarray, diag: np.ndarray, k: int, rng) -> np.ndarray:
    """k-means++ seeding with kernel feature-space distances."""
    n = K.shape[0]
    centers = np.empty(k, dtype=int)
    centers[0] = rng.integers(n)
    d2 = diag + diag[centers[0]] - 2.0 * K[:, centers[0]]
    d2 = np.maximum(d2, 0.0)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            centers[j] = rng.choice(n, p=d2 / total)
        else:
            # all remaining points coincide with a center: pick any new index
            unchosen = np.setdiff1d(np.arange(n), centers[:j])
            centers[j] = rng.choice(unchosen)
        cand = np.maximum(diag + diag[centers[j]] - 2.0 * K[:, centers[j]], 0.0)
        d2 = np.minimum(d2, cand)
    dist = diag[:, None] + diag[centers][None, :] - 2.0 * K[:, centers]
    return np.argmin(dist, axis=1)


def _lloyd(K: np.ndarray, diag: np.ndarray, assign: np.ndarray,
           k: int) -> tuple[np.ndarray, float, list[float], bool]:
    """Kernel Lloyd iterations; returns (assignment, objective, history, ok).

    ``ok`` is False when some cluster emptied.  The per-iteration objective
    history is non-increasing by construction.
    """
    history = []
    for _ in range(LLOYD_MAX_ITER):
        sizes = np.bincount(assign, minlength=k).astype(float)
        if np.any(sizes == 0):
            return assign, np.inf, history, False
        member = np.zeros((K.shape[0], k))
        member[np.arange(K.shape[0]), assign] = 1.0
        row_mean = (K @ member) / sizes
        within = np.einsum("ic,ic->c", member, row_mean) / sizes
        dist = diag[:, None] - 2.0 * row_mean + within[None, :]
        history.append(float(dist[np.arange(K.shape[0]), assign].sum()))
        new_assign = np.argmin(dist, axis=1)
        if np.array_equal(new_assign, assign):
            return assign, history[-1], history, True
        assign = new_assign
    return assign, history[-1], history, True


def kernel_kmeans(K, k: int, restarts: int = 30, rng_seed=0) -> Partition:
    """Best-of-restarts kernel k-means.

    Each restart seeds centers k-means++ style in feature space (distances
    d2(x, y) = K_xx + K_yy - 2 K_xy) and runs Lloyd updates against
    cluster-mean centroids until the assignment is stable.  A restart that
    empties a cluster is reseeded up to 10 times, then accepted with the
    surviving clusters and flagged via ``collapsed``.  Deterministic given
    ``rng_seed``; the winning restart minimizes the within-cluster
    objective.
    """
    K = _kernel_of(K)
    n = K.shape[0]
    if not 2 <= k <= n:
        raise GraphError(f"k must lie in [2, {n}], got {k}")
    if restarts < 1:
        raise GraphError("restarts must be at least 1")
    diag = np.diag(K).copy()
    best = None
    base = _seed_tuple(rng_seed)
    for restart in range(restarts):
        rng = np.random.default_rng(base + (restart,))
        result = None
        for _ in range(EMPTY_CLUSTER_RETRIES + 1):
            assign = _plus_plus_seed(K, diag, k, rng)
            assign, objective, _, ok = _lloyd(K, diag, assign, k)
            if ok:
                result = (assign, objective, False)
                break
        if result is None:
            # permanent collapse: drop emptied ids until Lloyd stabilizes
            assign = _relabel(assign)
            while True:
                kept = int(assign.max()) + 1
                assign_new, objective, _, ok = _lloyd(K, diag, assign, kept)
                if ok:
                    result = (_relabel(assign_new), objective, True)
                    break
                assign = _relabel(assign_new)
        assign, objective, collapsed = result
        if best is None or objective < best[1]:
            best = (assign, objective, collapsed)
    assign, objective, collapsed = best
    return Partition(assignment=assign, k=int(assign.max()) + 1,
                     objective=objective, collapsed=collapsed)


def _relabel(labels: np.ndarray) -> np.ndarray:
    _, compact = np.unique(labels, return_inverse=True)
    return compact


def modularity(partition, g) -> float:
    """Newman modularity of a partition under the undirected affinities.

    ``g`` is a graph or a raw square affinity matrix (which, unlike a
    graph, may be disconnected).  Uses A' = (A + A^T)/2 and Q = (1/vol)
    sum_{ij in same cluster} (a'_ij - d_i d_j / vol).  The all-in-one
    partition scores exactly 0.
    """
    labels = _labels_of(partition)
    raw = g.affinity_matrix() if isinstance(g, Graph) else np.asarray(
        g, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise GraphError("affinity must be a square matrix")
    if labels.shape[0] != raw.shape[0]:
        raise GraphError(f"partition covers {labels.shape[0]} nodes, "
                         f"graph has {raw.shape[0]}")
    A = 0.5 * (raw + raw.T)
    d = A.sum(axis=1)
    vol = float(d.sum())
    if vol <= 0:
        raise GraphError("graph volume must be positive")
    Q = 0.0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        W = float(A[np.ix_(idx, idx)].sum(axis=1).sum())
        S = float(d[idx].sum())
        Q += W - (S / vol) * S
    return Q / vol


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=int)
    np.add.at(table, (ai, bi), 1)
    return table


def _check_pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    a, b = _labels_of(u), _labels_of(v)
    if a.shape[0] != b.shape[0]:
        raise GraphError("partitions must cover the same node set")
    if a.shape[0] == 0:
        raise GraphError("partitions must be non-empty")
    return a, b


def nmi(u, v) -> float:
    """Normalized mutual information, arithmetic-mean normalization.

    I(U; V) divided by (H(U) + H(V)) / 2.  When both partitions are a
    single cluster the ratio is 0/0; the partitions are then identical and
    the value is defined as 1.
    """
    a, b = _check_pair(u, v)
    table = _contingency(a, b)
    n = table.sum()
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    h_a = -sum(p * log(p) for p in pa if p > 0)
    h_b = -sum(p * log(p) for p in pb if p > 0)
    if h_a + h_b == 0.0:
        return 1.0
    info = 0.0
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            if table[i, j] > 0:
                pij = table[i, j] / n
                info += pij * log(pij / (pa[i] * pb[j]))
    return float(min(max(info / (0.5 * (h_a + h_b)), 0.0), 1.0))


def ari(u, v) -> float:
    """Hubert-Arabie adjusted Rand index (expected value 0 under chance).

    When the index range degenerates (both partitions all-singletons or
    both single-cluster) the value is 1 if the contingency is a perfect
    match, else 0.
    """
    a, b = _check_pair(u, v)
    table = _contingency(a, b)
    n = int(table.sum())
    index = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    pairs = comb(n, 2)
    expected = sum_a * sum_b / pairs if pairs else 0.0
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0 if index == maximum else 0.0
    return float((index - expected) / (maximum - expected))


@dataclass(frozen=True)
class TuneResult:
    """Outcome of a modularity-driven grid sweep."""

    best_theta: float
    partition: Partition
    scores: ClusterScores
    per_theta: tuple[dict, ...]
    warnings: tuple[str, ...]


def _evaluate_theta(g: Graph, ref, kind: str, r: float, theta: float,
                    k: int, restarts: int, seed: int, grid_index: int,
                    labels, repetitions: int, tol: float,
                    max_iter: int) -> tuple[Partition, ClusterScores, list]:
    D = dissimilarity_matrix(g, ref, kind, r=r, theta=theta, tol=tol,
                             max_iter=max_iter, jobs=1)
    kernel = mds_kernel(D)
    runs = []
    for rep in range(repetitions):
        part = kernel_kmeans(kernel, k, restarts=restarts,
                             rng_seed=(seed, grid_index, rep))
        q = modularity(part, g)
        scores = ClusterScores(
            modularity=q,
            nmi=nmi(part, labels) if labels is not None else None,
            ari=ari(part, labels) if labels is not None else None)
        runs.append((part, scores))
    best_part, _ = max(runs, key=lambda pair: pair[1].modularity)
    mean = ClusterScores(
        modularity=float(np.mean([s.modularity for _, s in runs])),
        nmi=(float(np.mean([s.nmi for _, s in runs]))
             if labels is not None else None),
        ari=(float(np.mean([s.ari for _, s in runs]))
             if labels is not None else None))
    return best_part, mean, runs


def tune_parameter(g: Graph, kind: str, r: float, theta_grid, k: int,
                   restarts: int = 30, seed: int = 0, labels=None,
                   ref_kind: str = "natural", jobs: int | None = None,
                   repetitions: int = 1, tol: float = 1e-10,
                   max_iter: int = 10000) -> TuneResult:
    """Sweep theta, cluster at each value, keep the largest modularity.

    Per grid value: dissimilarity matrix -> MDS kernel -> kernel k-means,
    scored by modularity (and NMI/ARI against ``labels`` when given).  Each
    run draws its RNG stream from (seed, grid index, repetition index), so
    results are reproducible and independent of evaluation order.
    ``repetitions`` > 1 enables the outer averaging protocol: scores are
    means over repeated clusterings and the reported partition is the
    repetition with the largest modularity.  Grid values whose solves fail
    are skipped with a warning; if every value fails, the failure is
    raised.
    """
    if kind not in KINDS:
        raise GraphError(f"unknown dissimilarity kind {kind!r}")
    thetas = [float(t) for t in theta_grid]
    if not thetas:
        raise GraphError("theta grid must be non-empty")
    if any(t <= 0 for t in thetas):
        raise GraphError("theta grid values must be positive")
    if repetitions < 1:
        raise GraphError("repetitions must be at least 1")
    if labels is not None:
        labels = _labels_of(labels)
        if labels.shape[0] != g.n:
            raise GraphError(f"labels cover {labels.shape[0]} nodes, "
                             f"graph has {g.n}")
    ref = reference_probabilities(g, ref_kind)

    def run(item):
        gi, theta = item
        try:
            part, scores, _ = _evaluate_theta(
                g, ref, kind, r, theta, k, restarts, seed, gi, labels,
                repetitions, tol, max_iter)
            return gi, theta, part, scores, None
        except ConvergenceError as exc:
            return gi, theta, None, None, str(exc)

    items = list(enumerate(thetas))
    if jobs == 1 or len(items) == 1:
        outcomes = [run(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, items))

    per_theta = []
    warnings = []
    best = None
    for gi, theta, part, scores, err in outcomes:
        if err is not None:
            warnings.append(f"theta={theta:g} skipped: {err}")
            per_theta.append({"theta": theta, "failed": err})
            continue
        entry = {"theta": theta, "modularity": scores.modularity,
                 "k": part.k, "collapsed": part.collapsed}
        if labels is not None:
            entry["nmi"] = scores.nmi
            entry["ari"] = scores.ari
        per_theta.append(entry)
        if best is None or scores.modularity > best[3].modularity:
            best = (gi, theta, part, scores)
    if best is None:
        raise ConvergenceError(
            "every grid value failed: " + "; ".join(warnings))
    _, theta, part, scores = best
    return TuneResult(best_theta=theta, partition=part, scores=scores,
                      per_theta=tuple(per_theta), warnings=tuple(warnings))


def load_labels(path, g: Graph) -> np.ndarray:
    """Read node labels from a two-column text file.

    Each non-comment line is ``node label`` (whitespace-separated); every
    graph node must appear exactly once.  Label strings map to integer ids
    in order of first appearance.
    """
    seen: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(
                    f"line {lineno}: expected 'node label', got {raw!r}")
            node, label = parts
            if node in seen:
                raise GraphError(f"line {lineno}: duplicate node {node!r}")
            seen[node] = label
    missing = [name for name in g.node_names if name not in seen]
    if missing:
        raise GraphError(f"labels missing for nodes: {', '.join(missing)}")
    extra = [name for name in seen if name not in g.node_names]
    if extra:
        raise GraphError(f"labels name unknown nodes: {', '.join(extra)}")
    order: dict[str, int] = {}
    out = np.empty(g.n, dtype=int)
    for i, name in enumerate(g.node_names):
        label = seen[name]
        out[i] = order.setdefault(label, len(order))
    return out
