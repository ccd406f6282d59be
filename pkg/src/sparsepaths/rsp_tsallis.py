"""Sparse routing policies under Tsallis-divergence regularization.

Replacing the KL regularizer with the Tsallis divergence of order r > 1,

    H_r(p | ref) = (1/(r-1)) sum_i p_i ((p_i/ref_i)^(r-1) - 1),

turns each local transition update into a simplex projection with
water-filling structure (see :mod:`sparsepaths.simplex`), so converged
policies place exactly zero probability on unattractive successors.  The
solver alternates the potential system (I - P) lam = c~ + T h~ with
per-node projections of the augmented costs c_ij + lam_j until the
potentials stop moving.  lam_i is the Tsallis directed free energy of
reaching the target from i; as theta grows the policy sharpens toward
least-cost routing, and as theta -> 0 it relaxes to the reference walk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _kernels
from .errors import ConvergenceError, GraphError
from .graph import Graph, ReferenceMatrix
from .rsp_kl import (
    DENSE_THRESHOLD,
    _as_dense,
    _ctilde,
    _extract_pdata,
    _pack_matrix,
    _row_sums,
    _solve_potentials,
)

NET_FLOW_EPS = 1e-12


@dataclass(frozen=True)
class TsallisPolicy:
    """Converged sparse routing policy toward one target.

    ``lam_ts`` is the Tsallis directed free energy potential vector;
    ``duality_gap`` is the largest disagreement, over all source nodes,
    between the primal flow objective and ``lam_ts`` at the fixed point.
    """

    P: object
    target: int
    r: float
    T: float
    lam_ts: np.ndarray
    iterations: int
    converged: bool
    duality_gap: float

    def dense_matrix(self) -> np.ndarray:
        return _as_dense(self.P)


@dataclass(frozen=True)
class FlowField:
    """Expected visit counts and edge flows of a policy from one source."""

    source: int
    node_visits: np.ndarray
    edge_flows: scipy.sparse.csr_matrix
    net_flows: scipy.sparse.csr_matrix


def tsallis_divergence(p, ref, r: float) -> float:
    """Directed r-divergence H_r(p | ref); 0 iff p = ref, -> KL as r -> 1."""
    p = np.asarray(p, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if not r > 1:
        raise GraphError(f"r must exceed 1, got {r}")
    if np.any((p > 0) & (ref == 0)):
        raise GraphError("support of p must lie inside the support of ref")
    pos = p > 0
    return float(np.sum(p[pos] * (np.power(p[pos] / ref[pos], r - 1.0) - 1.0))
                 / (r - 1.0))


def _h_tsallis(g: Graph, pdata: np.ndarray, ref: ReferenceMatrix,
               r: float) -> np.ndarray:
    terms = np.zeros_like(pdata)
    pos = pdata > 0
    terms[pos] = pdata[pos] * (np.power(pdata[pos] / ref.data[pos], r - 1.0)
                               - 1.0)
    return _row_sums(g, terms) / (r - 1.0)


def tsallis_lagrange_solve(P, g: Graph, ref: ReferenceMatrix, r: float,
                           T: float,
                           dense_threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Potentials of a given policy: (I - P) lam = c~ + T h~_TS, lam_t = 0."""
    pdata = _extract_pdata(P, g)
    rhs = _ctilde(g, pdata) + T * _h_tsallis(g, pdata, ref, r)
    return _solve_potentials(g, pdata, rhs, dense_threshold)


def _tsallis_rows(g: Graph, ref: ReferenceMatrix, lam: np.ndarray, r: float,
                  T: float, t: int, out: np.ndarray) -> None:
    aug = g.cost + lam[g.indices]
    bad = _kernels.policy_rows(aug, ref.data, g.indptr, r, T, t, out)
    if bad >= 0:
        raise ConvergenceError(
            f"row projection failed at node {g.node_names[bad]!r}", node=bad)


def tsallis_transition_update(lam: np.ndarray, g: Graph,
                              ref: ReferenceMatrix, r: float, T: float,
                              target: int | str) -> np.ndarray:
    """Project every row onto the simplex at the given potentials."""
    t = g.index(target)
    out = np.empty_like(g.cost)
    _tsallis_rows(g, ref, np.asarray(lam, dtype=float), r, T, t, out)
    P = np.zeros((g.n, g.n))
    P[g.rows, g.indices] = out
    return P


def tsallis_policy_iterate(g: Graph, ref: ReferenceMatrix, target: int | str,
                           r: float = 2.0, T: float = 1.0, tol: float = 1e-10,
                           max_iter: int = 10000, damping: float = 1.0,
                           dense_threshold: int = DENSE_THRESHOLD,
                           gap_sources: int | None = None) -> TsallisPolicy:
    """Alternate potential solves and row projections to the fixed point.

    Starts from P = P_ref (target row zeroed), solves for potentials first,
    and stops when max|d lam| <= tol * (1 + max|lam|).  ``damping`` in
    (0, 1] relaxes the potential update for ill-conditioned instances.

    The recorded duality gap compares, for every source node, the primal
    objective n~ . (c~ + T h~) of the converged flow against lam_s via an
    independent transposed solve (all sources at once on the direct path;
    on the iterative path a fixed sample of ``gap_sources`` nodes,
    default 16).
    """
    if not r > 1:
        raise GraphError(f"r must exceed 1, got {r}")
    if not T > 0:
        raise GraphError(f"T must be positive, got {T}")
    if not 0 < damping <= 1:
        raise GraphError(f"damping must lie in (0, 1], got {damping}")
    if max_iter < 1:
        raise GraphError("max_iter must be at least 1")
    t = g.index(target)
    pdata = ref.data.copy()
    pdata[g.indptr[t]:g.indptr[t + 1]] = 0.0
    lam = _solve_potentials(g, pdata, _ctilde(g, pdata), dense_threshold)
    converged = False
    iterations = 0
    delta = np.inf
    for iterations in range(1, max_iter + 1):
        _tsallis_rows(g, ref, lam, r, T, t, pdata)
        rhs = _ctilde(g, pdata) + T * _h_tsallis(g, pdata, ref, r)
        out = _solve_potentials(g, pdata, rhs, dense_threshold,
                                return_lu=True)
        lam_new, lu = out
        if damping < 1.0:
            lam_new = damping * lam_new + (1.0 - damping) * lam
        delta = np.abs(lam_new - lam).max()
        lam = lam_new
        if delta <= tol * (1.0 + np.abs(lam).max()):
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"policy iteration did not converge in {max_iter} sweeps",
            residual=float(delta), iterations=max_iter)
    lam[t] = 0.0
    gap = _duality_gap(g, pdata, rhs, lam, lu, gap_sources)
    return TsallisPolicy(P=_pack_matrix(g, pdata), target=t, r=r, T=T,
                         lam_ts=lam, iterations=iterations,
                         converged=converged, duality_gap=gap)


def _duality_gap(g: Graph, pdata, rhs, lam, lu, gap_sources) -> float:
    if lu is not None:
        visits = scipy.linalg.lu_solve(lu, np.eye(g.n), trans=1)
        primal = visits.T @ rhs
        return float(np.abs(primal - lam).max())
    # iterative path: transposed sweeps for a fixed sample of sources
    count = 16 if gap_sources is None else gap_sources
    sources = np.linspace(0, g.n - 1, min(count, g.n)).astype(int)
    gap = 0.0
    for s in np.unique(sources):
        nbar = _visits_iterative(g, pdata, int(s))
        gap = max(gap, abs(float(nbar @ rhs) - float(lam[s])))
    return gap


def _visits_iterative(g: Graph, pdata: np.ndarray, s: int) -> np.ndarray:
    e = np.zeros(g.n)
    e[s] = 1.0
    nbar = e.copy()
    for _ in range(1000000):
        acc = np.zeros(g.n)
        np.add.at(acc, g.indices, pdata * nbar[g.rows])
        nxt = acc + e
        if np.abs(nxt - nbar).max() <= 1e-13 * (1.0 + np.abs(nxt).max()):
            return nxt
        nbar = nxt
    raise ConvergenceError("visit sweep did not converge")


def expected_visits(policy, g: Graph, source: int | str,
                    dense_threshold: int = DENSE_THRESHOLD) -> FlowField:
    """Expected visit counts and flows of a policy from one source.

    Solves (I - P)^T n~ = e_s; edge flows are n~_i p_ij, and net flows
    orient each opposite-arc pair by max(n~_ij - n~_ji, 0).
    """
    s = g.index(source)
    if s == policy.target:
        raise GraphError("source must differ from the policy target")
    pdata = _extract_pdata(policy.P, g)
    e = np.zeros(g.n)
    e[s] = 1.0
    if g.n <= dense_threshold:
        M = np.eye(g.n)
        M[g.rows, g.indices] -= pdata
        nbar = scipy.linalg.solve(M.T, e)
    else:
        nbar = _visits_iterative(g, pdata, s)
    flow_data = nbar[g.rows] * pdata
    rev = g.reverse_edge
    opposite = np.where(rev >= 0, flow_data[np.maximum(rev, 0)], 0.0)
    net_data = np.maximum(flow_data - opposite, 0.0)
    net_data[net_data <= NET_FLOW_EPS] = 0.0
    shape = (g.n, g.n)
    edge_flows = scipy.sparse.csr_matrix(
        (flow_data.copy(), g.indices.copy(), g.indptr.copy()), shape=shape)
    net_flows = scipy.sparse.csr_matrix(
        (net_data, g.indices.copy(), g.indptr.copy()), shape=shape)
    net_flows.eliminate_zeros()
    return FlowField(source=s, node_visits=nbar, edge_flows=edge_flows,
                     net_flows=net_flows)


def expected_cost(flow: FlowField, g: Graph) -> float:
    """Total expected cost <c>_st = sum_ij n~_i p_ij c_ij of a flow field."""
    M = flow.edge_flows.tocoo()
    C = g.cost_matrix()
    return float(np.sum(M.data * C[M.row, M.col]))


def expected_cost_column(policy, g: Graph,
                         dense_threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """Expected cost to the target from every source at once.

    <c>_st = e_s . (I - P)^{-1} c~, so a single potential-style solve with
    right-hand side c~ yields the whole column; entry ``target`` is 0.
    """
    pdata = _extract_pdata(policy.P, g)
    return _solve_potentials(g, pdata, _ctilde(g, pdata), dense_threshold)


def convexity_probe(m: int = 20, samples: int = 10000,
                    r_range: tuple[float, float] = (1.1, 4.1),
                    rng_seed: int = 0) -> dict:
    """Sample the quadratic form behind the flow-convexity conjecture.

    Draws random simplex vectors p, ref and orders r, builds the symmetric
    matrix Q with

        q_jl = d_jl ref_j^(1-r) p_j^(r-2)
               - (ref_j^(1-r) p_j^(r-1) + ref_l^(1-r) p_l^(r-1))
               + sum_j' ref_j'^(1-r) p_j'^r,

    and reports the smallest eigenvalue relative to the largest over all
    samples.  The form always vanishes along p itself (flow rescaling), so
    a PSD verdict shows up as a minimum relative eigenvalue of roughly 0.
    """
    if m < 2:
        raise GraphError("m must be at least 2")
    rng = np.random.default_rng(rng_seed)
    worst = None
    min_rel = np.inf
    ones = np.ones(m)
    for _ in range(samples):
        p = rng.dirichlet(ones)
        ref = rng.dirichlet(ones)
        r = rng.uniform(*r_range)
        refpow = np.power(ref, 1.0 - r)
        u = refpow * np.power(p, r - 1.0)
        w = refpow * np.power(p, r - 2.0)
        S = float(refpow @ np.power(p, r))
        Q = np.diag(w) - u[:, None] - u[None, :] + S
        eigs = np.linalg.eigvalsh(Q)
        rel = eigs[0] / eigs[-1]
        if rel < min_rel:
            min_rel = rel
            worst = {"r": float(r), "p": p.tolist(), "ref": ref.tolist(),
                     "min_eigenvalue": float(eigs[0]),
                     "max_eigenvalue": float(eigs[-1])}
    return {"min_relative_eigenvalue": float(min_rel), "m": m,
            "samples": samples, "r_range": list(r_range),
            "worst_instance": worst}
