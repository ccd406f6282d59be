"""KL-regularized randomized shortest-path policies (baseline model).

The routing policy toward an absorbing target t minimizes expected cost
plus T times the KL divergence from the reference walk, accumulated over
node visits.  Its local form couples a Gibbs transition update

    p_ij = p_ref_ij exp[-theta (c_ij + lambda_j)] / sum_k (same)

with the potential system (I - P) lambda = c~ + T h~, where c~ and h~ are
the per-node expected edge cost and KL divergence of the current rows.
The potential lambda_i is the directed free energy of reaching t from i;
lambda_t = 0.  A Bellman-Ford-like softmin recursion provides an
independent route to the same fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConvergenceError, GraphError
from .graph import Graph, ReferenceMatrix

DENSE_THRESHOLD = 2000
SPARSE_DENSITY = 0.25


@dataclass(frozen=True)
class Policy:
    """Converged KL routing policy toward one target.

    ``P`` is the substochastic transition matrix (row ``target`` zero),
    stored sparse when its positive support is below 25% density and dense
    otherwise.  ``lam`` is the directed free energy potential vector.
    """

    P: object
    target: int
    theta: float
    lam: np.ndarray
    iterations: int
    converged: bool

    def dense_matrix(self) -> np.ndarray:
        return _as_dense(self.P)


def _as_dense(P) -> np.ndarray:
    if scipy.sparse.issparse(P):
        return np.asarray(P.todense())
    return np.asarray(P)


def _pack_matrix(g: Graph, pdata: np.ndarray):
    """Store a policy matrix sparse below 25% support density, else dense."""
    pos = pdata > 0
    if pos.sum() < SPARSE_DENSITY * g.n * g.n:
        return scipy.sparse.csr_matrix(
            (pdata[pos], (g.rows[pos], g.indices[pos])), shape=(g.n, g.n))
    P = np.zeros((g.n, g.n))
    P[g.rows, g.indices] = pdata
    return P


def _extract_pdata(P, g: Graph) -> np.ndarray:
    """Arc-aligned transition values from a dense or sparse policy matrix."""
    dense = _as_dense(P)
    if dense.shape != (g.n, g.n):
        raise GraphError("policy matrix shape does not match the graph")
    return np.ascontiguousarray(dense[g.rows, g.indices])


def _row_sums(g: Graph, values: np.ndarray) -> np.ndarray:
    return np.add.reduceat(values, g.indptr[:-1])


def _solve_potentials(g: Graph, pdata: np.ndarray, rhs: np.ndarray,
                      dense_threshold: int = DENSE_THRESHOLD,
                      return_lu: bool = False):
    """Solve (I - P) lam = rhs for an arc-aligned substochastic P.

    Direct dense factorization up to ``dense_threshold`` nodes, fixed-point
    sweeps lam <- P lam + rhs beyond (the spectral radius is below 1 for
    absorbing policies on strongly connected graphs).
    """
    n = g.n
    if n <= dense_threshold:
        M = np.eye(n)
        M[g.rows, g.indices] -= pdata
        lu = scipy.linalg.lu_factor(M)
        lam = scipy.linalg.lu_solve(lu, rhs)
        if not np.all(np.isfinite(lam)):
            raise ConvergenceError("singular potential system "
                                   "(broken absorption structure)")
        return (lam, lu) if return_lu else lam
    lam = rhs.copy()
    for it in range(1000000):
        nxt = _row_sums(g, pdata * lam[g.indices]) + rhs
        if np.abs(nxt - lam).max() <= 1e-13 * (1.0 + np.abs(nxt).max()):
            lam = nxt
            break
        lam = nxt
    else:
        raise ConvergenceError("potential sweep did not converge",
                               iterations=1000000)
    return (lam, None) if return_lu else lam


def _ctilde(g: Graph, pdata: np.ndarray) -> np.ndarray:
    return _row_sums(g, pdata * g.cost)


def _h_kl(g: Graph, pdata: np.ndarray, ref: ReferenceMatrix) -> np.ndarray:
    terms = np.zeros_like(pdata)
    pos = pdata > 0
    terms[pos] = pdata[pos] * np.log(pdata[pos] / ref.data[pos])
    return _row_sums(g, terms)


def kl_lagrange_solve(P, g: Graph, ref: ReferenceMatrix, T: float,
                      dense_threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Potentials of a given policy: (I - P) lam = c~ + T h~_KL, lam_t = 0."""
    pdata = _extract_pdata(P, g)
    rhs = _ctilde(g, pdata) + T * _h_kl(g, pdata, ref)
    return _solve_potentials(g, pdata, rhs, dense_threshold)


def kl_transition_update(lam: np.ndarray, g: Graph, ref: ReferenceMatrix,
                         theta: float, target: int | str) -> np.ndarray:
    """Gibbs rows for given potentials; returns the dense policy matrix."""
    t = g.index(target)
    pdata = _kl_rows(g, ref, np.asarray(lam, dtype=float), theta, t)
    P = np.zeros((g.n, g.n))
    P[g.rows, g.indices] = pdata
    return P


def _kl_rows(g: Graph, ref: ReferenceMatrix, lam: np.ndarray, theta: float,
             t: int) -> np.ndarray:
    deg = np.diff(g.indptr)
    z = theta * (g.cost + lam[g.indices])
    rowmin = np.minimum.reduceat(z, g.indptr[:-1])
    w = ref.data * np.exp(-(z - np.repeat(rowmin, deg)))
    pdata = w / np.repeat(_row_sums(g, w), deg)
    pdata[g.indptr[t]:g.indptr[t + 1]] = 0.0
    return pdata


def kl_policy_iterate(g: Graph, ref: ReferenceMatrix, target: int | str,
                      theta: float, tol: float = 1e-10, max_iter: int = 10000,
                      dense_threshold: int = DENSE_THRESHOLD) -> Policy:
    """Iterate the Gibbs update and the potential solve to their fixed point.

    Starts from P = P_ref with the target row zeroed, so the first
    potentials are the reference-walk expected costs.  Converges when
    max|d lam| <= tol * (1 + max|lam|); the policy is independent of any
    source node.
    """
    if theta <= 0:
        raise GraphError(f"theta must be positive, got {theta}")
    if max_iter < 1:
        raise GraphError("max_iter must be at least 1")
    t = g.index(target)
    T = 1.0 / theta
    pdata = ref.data.copy()
    pdata[g.indptr[t]:g.indptr[t + 1]] = 0.0
    lam = _solve_potentials(g, pdata, _ctilde(g, pdata), dense_threshold)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        pdata = _kl_rows(g, ref, lam, theta, t)
        rhs = _ctilde(g, pdata) + T * _h_kl(g, pdata, ref)
        lam_new = _solve_potentials(g, pdata, rhs, dense_threshold)
        delta = np.abs(lam_new - lam).max()
        lam = lam_new
        if delta <= tol * (1.0 + np.abs(lam).max()):
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"KL policy iteration did not converge in {max_iter} sweeps",
            residual=float(delta), iterations=max_iter)
    lam[t] = 0.0
    return Policy(P=_pack_matrix(g, pdata), target=t, theta=theta, lam=lam,
                  iterations=iterations, converged=converged)


def softmin_recursion(g: Graph, ref: ReferenceMatrix, target: int | str,
                      theta: float, tol: float = 1e-10,
                      max_iter: int = 10000) -> np.ndarray:
    """Independent fixed point for the KL potentials.

    Sweeps lam_i = -(1/theta) log sum_j p_ref_ij exp[-theta (c_ij + lam_j)]
    from lam = 0 with lam_t pinned to 0, log-sum-exp stabilized.
    """
    if theta <= 0:
        raise GraphError(f"theta must be positive, got {theta}")
    t = g.index(target)
    deg = np.diff(g.indptr)
    lam = np.zeros(g.n)
    for _ in range(max_iter):
        z = theta * (g.cost + lam[g.indices])
        rowmin = np.minimum.reduceat(z, g.indptr[:-1])
        expsum = _row_sums(g, ref.data * np.exp(-(z - np.repeat(rowmin, deg))))
        lam_new = (rowmin - np.log(expsum)) / theta
        lam_new[t] = 0.0
        delta = np.abs(lam_new - lam).max()
        lam = lam_new
        if delta <= tol * (1.0 + np.abs(lam).max()):
            return lam
    raise ConvergenceError(
        f"softmin recursion did not converge in {max_iter} sweeps",
        residual=float(delta), iterations=max_iter)
