"""Pairwise dissimilarity matrices and their kernel form.

Four kinds, all symmetric with zero diagonal:

- ``tsallis-fe`` / ``kl-fe``: symmetrized directed free energies,
  (phi_st + phi_ts) / 2;
- ``tsallis-rsp`` / ``kl-rsp``: summed expected costs, <c>_st + <c>_ts.

The free-energy kinds need one policy solve per target node (policies are
source-independent); the expected-cost kinds add one linear solve per
target for the whole column of sources.  A classical-MDS transform turns a
dissimilarity matrix into a positive semi-definite kernel for clustering.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GraphError
from .graph import Graph, ReferenceMatrix
from .rsp_kl import DENSE_THRESHOLD, kl_policy_iterate
from .rsp_tsallis import expected_cost_column, tsallis_policy_iterate

TSALLIS_FE = "tsallis-fe"
TSALLIS_RSP = "tsallis-rsp"
KL_FE = "kl-fe"
KL_RSP = "kl-rsp"
KINDS = (TSALLIS_FE, TSALLIS_RSP, KL_FE, KL_RSP)


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric node dissimilarities with the parameters that made them."""

    D: np.ndarray
    kind: str
    r: float
    theta: float
    node_names: tuple[str, ...]


@dataclass(frozen=True)
class KernelMatrix:
    """PSD kernel from classical MDS, with the clipped spectral mass."""

    K: np.ndarray
    clipped_eigenvalue_mass: float


def _column(g: Graph, ref: ReferenceMatrix, kind: str, r: float, theta: float,
            t: int, tol: float, max_iter: int, dense_threshold: int):
    """Column t of the directed quantity (phi_.t or <c>_.t)."""
    try:
        if kind in (TSALLIS_FE, TSALLIS_RSP):
            pol = tsallis_policy_iterate(g, ref, t, r=r, T=1.0 / theta,
                                         tol=tol, max_iter=max_iter,
                                         dense_threshold=dense_threshold)
            if kind == TSALLIS_FE:
                return pol.lam_ts
            return expected_cost_column(pol, g, dense_threshold)
        pol = kl_policy_iterate(g, ref, t, theta=theta, tol=tol,
                                max_iter=max_iter,
                                dense_threshold=dense_threshold)
        if kind == KL_FE:
            return pol.lam
        return expected_cost_column(pol, g, dense_threshold)
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"policy for target {g.node_names[t]!r} failed: {exc}",
            residual=exc.residual, iterations=exc.iterations, node=t) from exc


def dissimilarity_matrix(g: Graph, ref: ReferenceMatrix, kind: str,
                         r: float = 2.0, theta: float = 1.0,
                         tol: float = 1e-10, max_iter: int = 10000,
                         dense_threshold: int = DENSE_THRESHOLD,
                         jobs: int | None = None) -> DissimilarityMatrix:
    """Assemble the n x n dissimilarity matrix of the requested kind.

    One policy is solved per target node (optionally across ``jobs``
    threads); free-energy kinds average the two directions, expected-cost
    kinds sum them.  The diagonal is 0 by definition (s = t is outside the
    model).
    """
    if kind not in KINDS:
        raise GraphError(f"unknown dissimilarity kind {kind!r}")
    if theta <= 0:
        raise GraphError(f"theta must be positive, got {theta}")
    targets = range(g.n)
    if jobs is None or jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cols = list(pool.map(
                lambda t: _column(g, ref, kind, r, theta, t, tol, max_iter,
                                  dense_threshold), targets))
    else:
        cols = [_column(g, ref, kind, r, theta, t, tol, max_iter,
                        dense_threshold) for t in targets]
    phi = np.column_stack(cols)
    if kind in (TSALLIS_FE, KL_FE):
        D = 0.5 * (phi + phi.T)
    else:
        D = phi + phi.T
    np.fill_diagonal(D, 0.0)
    return DissimilarityMatrix(D=D, kind=kind, r=r, theta=theta,
                               node_names=g.node_names)


def mds_kernel(D) -> KernelMatrix:
    """Classical-MDS kernel of a dissimilarity matrix.

    K = -1/2 H D^(2) H with H = I - ones/n and D^(2) squared elementwise;
    negative eigenvalues are clipped to zero and the removed fraction of
    absolute spectral mass recorded.
    """
    D = _matrix_of(D)
    n = D.shape[0]
    D2 = D * D
    H = np.eye(n) - np.full((n, n), 1.0 / n)
    K = -0.5 * (H @ D2 @ H)
    K = 0.5 * (K + K.T)
    eigvals, eigvecs = np.linalg.eigh(K)
    clipped = np.maximum(eigvals, 0.0)
    total = np.abs(eigvals).sum()
    mass = float((clipped - eigvals).sum() / total) if total > 0 else 0.0
    K = (eigvecs * clipped) @ eigvecs.T
    return KernelMatrix(K=0.5 * (K + K.T), clipped_eigenvalue_mass=mass)


def triangle_check(D, slack: float = 1e-9) -> dict:
    """Audit the triangle inequality over all triples.

    Counts triples {i, k} with middle j (distinct nodes) where
    D_ik > D_ij + D_jk + slack, each unordered endpoint pair counted once
    per middle, and reports the worst margin max(D_ik - D_ij - D_jk); a
    negative worst margin means the inequality holds everywhere with room
    to spare.
    """
    D = _matrix_of(D)
    n = D.shape[0]
    if n < 3:
        return {"violations": 0, "worst_slack": 0.0}
    iu, ku = np.triu_indices(n, k=1)
    violations = 0
    worst = -np.inf
    for j in range(n):
        margin = D - (D[:, j][:, None] + D[j, :][None, :])
        pairs = margin[iu, ku]
        keep = (iu != j) & (ku != j)
        pairs = pairs[keep]
        worst = max(worst, float(pairs.max()))
        violations += int((pairs > slack).sum())
    return {"violations": violations, "worst_slack": worst}


def _matrix_of(D) -> np.ndarray:
    if isinstance(D, DissimilarityMatrix):
        D = D.D
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise GraphError("expected a square matrix")
    if not np.allclose(D, D.T, atol=1e-8):
        raise GraphError("matrix must be symmetric")
    return D


def save_matrix_csv(D, path) -> None:
    """Write a dissimilarity matrix as CSV with a node-name header row."""
    if not isinstance(D, DissimilarityMatrix):
        raise GraphError("save_matrix_csv expects a DissimilarityMatrix")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(D.node_names) + "\n")
        for row in D.D:
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")


def load_matrix_csv(path):
    """Read back a matrix written by :func:`save_matrix_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = tuple(header.split(","))
        rows = [[float(tok) for tok in line.strip().split(",")]
                for line in fh if line.strip()]
    D = np.array(rows)
    if D.shape != (len(names), len(names)):
        raise GraphError(f"matrix shape {D.shape} does not match header "
                         f"of {len(names)} names")
    return D, names
