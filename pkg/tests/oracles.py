"""Independent reference implementations used to derive expected values.

Everything here is written against plain dense arrays with standard
numpy/scipy calls only, deliberately avoiding the package's own code
paths, so tests compare two separately derived answers.
"""

from __future__ import annotations

import itertools

import numpy as np

# Printed net flows of the ten-node benchmark graph (source s, target t,
# r=2, uniform reference), keyed by theta.  Values carry three decimals.
FIG2_NET_FLOWS = {
    0.2: {("s", "a"): 0.529, ("s", "b"): 0.348, ("s", "c"): 0.123,
          ("b", "a"): 0.003, ("a", "d"): 0.532, ("b", "d"): 0.290,
          ("b", "e"): 0.055, ("c", "e"): 0.123, ("d", "f"): 0.418,
          ("d", "g"): 0.284, ("d", "h"): 0.120, ("e", "h"): 0.178,
          ("g", "f"): 0.050, ("f", "t"): 0.468, ("g", "t"): 0.234,
          ("h", "t"): 0.298},
    0.5: {("s", "a"): 0.795, ("s", "b"): 0.205, ("b", "a"): 0.066,
          ("a", "d"): 0.861, ("b", "d"): 0.132, ("b", "e"): 0.007,
          ("d", "f"): 0.628, ("d", "g"): 0.255, ("d", "h"): 0.110,
          ("e", "h"): 0.007, ("g", "f"): 0.138, ("f", "t"): 0.766,
          ("g", "t"): 0.117, ("h", "t"): 0.117},
    1.0: {("s", "a"): 1.0, ("a", "d"): 1.0, ("d", "f"): 0.848,
          ("d", "g"): 0.152, ("g", "f"): 0.139, ("f", "t"): 0.987,
          ("g", "t"): 0.013},
    2.0: {("s", "a"): 1.0, ("a", "d"): 1.0, ("d", "f"): 1.0,
          ("f", "t"): 1.0},
}


def bellman_ford_to_target(n: int, arcs, t: int) -> np.ndarray:
    """Least path cost to t from every node; arcs are (i, j, cost)."""
    dist = np.full(n, np.inf)
    dist[t] = 0.0
    for _ in range(n):
        changed = False
        for i, j, c in arcs:
            cand = c + dist[j]
            if cand < dist[i] - 1e-15:
                dist[i] = cand
                changed = True
        if not changed:
            break
    return dist


def enumerate_min_cost(n: int, arcs, s: int, t: int) -> float:
    """Exhaustive simple-path minimum cost on a tiny graph."""
    out = {}
    for i, j, c in arcs:
        out.setdefault(i, []).append((j, c))
    best = [np.inf]

    def walk(node, visited, acc):
        if node == t:
            best[0] = min(best[0], acc)
            return
        for nxt, c in out.get(node, ()):
            if nxt not in visited:
                walk(nxt, visited | {nxt}, acc + c)

    walk(s, {s}, 0.0)
    return best[0]


def absorbing_expected_cost(P: np.ndarray, C: np.ndarray,
                            t: int) -> np.ndarray:
    """Expected accumulated cost to absorption at t under walk P.

    Row t of P must be zero; off-edge entries of C may be anything where
    P is zero.
    """
    n = P.shape[0]
    Cz = np.where(P > 0, C, 0.0)
    ctil = (P * Cz).sum(axis=1)
    lam = np.linalg.solve(np.eye(n) - P, ctil)
    lam[t] = 0.0
    return lam


def kl_zform_lambda(P_ref: np.ndarray, C: np.ndarray, theta: float,
                    t: int) -> np.ndarray:
    """Closed-form KL-regularized potentials via the partition vector.

    W = P_ref o exp(-theta C) with row t zeroed; z = (I - W)^{-1} e_t;
    lambda = -(1/theta) log z.  Iteration-free, so it cross-checks the
    primal-dual fixed point.
    """
    n = P_ref.shape[0]
    W = np.where(P_ref > 0, P_ref * np.exp(-theta * np.where(
        np.isfinite(C), C, 0.0)), 0.0)
    W[t, :] = 0.0
    e = np.zeros(n)
    e[t] = 1.0
    z = np.linalg.solve(np.eye(n) - W, e)
    lam = -np.log(z) / theta
    lam[t] = 0.0
    return lam


def kl_divergence(p: np.ndarray, ref: np.ndarray) -> float:
    pos = p > 0
    return float(np.sum(p[pos] * np.log(p[pos] / ref[pos])))


def dense_reference(A: np.ndarray, kind: str) -> np.ndarray:
    """Reference walk matrix straight from a dense affinity matrix."""
    n = A.shape[0]
    R = np.zeros_like(A, dtype=float)
    for i in range(n):
        succ = A[i] > 0
        if kind == "uniform":
            R[i, succ] = 1.0 / succ.sum()
        else:
            R[i, succ] = A[i, succ] / A[i, succ].sum()
    return R


def random_strong_graph_text(rng, n: int, extra: int,
                             lo: float = 1.0, hi: float = 10.0,
                             scale: float = 1.0) -> str:
    """Directed cycle plus random extra arcs; strongly connected by the
    cycle.  Costs uniform on [lo, hi], then multiplied by scale."""
    seen = set()
    lines = []
    for i in range(n):
        j = (i + 1) % n
        seen.add((i, j))
        c = rng.uniform(lo, hi) * scale
        lines.append(f"v{i:02d}\tv{j:02d}\t1.0\t{c!r}")
    tries = 0
    while len(seen) < n + extra and tries < 50 * (n + extra):
        tries += 1
        i, j = (int(x) for x in rng.integers(n, size=2))
        if i == j or (i, j) in seen:
            continue
        seen.add((i, j))
        c = rng.uniform(lo, hi) * scale
        lines.append(f"v{i:02d}\tv{j:02d}\t1.0\t{c!r}")
    return "\n".join(lines)


def random_undirected_graph_text(rng, n: int, p: float,
                                 lo: float = 1.0, hi: float = 10.0) -> str:
    """Connected undirected graph: random spanning tree plus p-dense
    extra edges; write one line per undirected edge."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[k])
        b = int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            edges.add((i, j))
    lines = []
    for i, j in sorted(edges):
        c = rng.uniform(lo, hi)
        lines.append(f"u{i:02d}\tu{j:02d}\t{1.0 / c!r}\t{c!r}")
    return "\n".join(lines)


def _connected(n: int, pairs) -> bool:
    adj = {i: [] for i in range(n)}
    for i, j in pairs:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


def sbm_two_block_text(seed: int, n: int, p_in: float,
                       p_out: float) -> tuple[str, dict]:
    """Planted 2-block graph text plus {name: block} labels; the draw is
    retried on a fresh substream until connected."""
    half = n // 2
    for attempt in range(100):
        rng = np.random.default_rng((seed, attempt))
        pairs = []
        for i in range(n):
            for j in range(i + 1, n):
                p = p_in if (i < half) == (j < half) else p_out
                if rng.random() < p:
                    pairs.append((i, j))
        if _connected(n, pairs):
            lines = [f"n{i:03d}\tn{j:03d}\t1.0\t1.0" for i, j in pairs]
            labels = {f"n{i:03d}": int(i >= half) for i in range(n)}
            return "\n".join(lines), labels
    raise RuntimeError("no connected draw")
