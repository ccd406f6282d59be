"""Weighted directed graphs, edge-list I/O, and reference random walks.

A :class:`Graph` couples an affinity matrix A = (a_ij) with a cost matrix
C = (c_ij) over the same directed edge set: a_ij > 0 exactly where an edge
exists, and c_ij is finite exactly there.  Graphs must be strongly connected
and free of self-loops; both conditions are validated at construction.

Reference transition probabilities come in two kinds: the natural random
walk p_ref_ij = a_ij / sum_j' a_ij', and the uniform walk 1/|Succ(i)|.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import EdgeListError, GraphError

NATURAL = "natural"
UNIFORM = "uniform"

FROM_COLUMN = "from-column"
INVERSE_AFFINITY = "inverse-affinity"
INVERSE_COST = "inverse-cost"


@dataclass(frozen=True)
class Graph:
    """Immutable directed graph in CSR form.

    Parameters
    ----------
    n : int
        Node count.
    node_names : tuple of str
        Label for each node, indexed 0..n-1.
    indptr, indices : ndarray
        CSR row pointers and column indices over successors; each row is
        sorted by destination index.
    affinity, cost : ndarray
        Per-edge affinities a_ij > 0 and costs c_ij >= 0, aligned with
        ``indices``.
    directed : bool
        False when the edge set was expanded from an undirected listing
        (provenance only; the arc data is always directed).
    """

    n: int
    node_names: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    affinity: np.ndarray
    cost: np.ndarray
    directed: bool = True
    # arc k = (i, j) -> index of arc (j, i), or -1 when absent
    reverse_edge: np.ndarray = field(init=False, repr=False, compare=False)
    # row index of every arc, aligned with indices
    rows: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _validate_structure(self)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        arc_of = {(int(i), int(j)): k
                  for k, (i, j) in enumerate(zip(rows, self.indices))}
        rev = np.array([arc_of.get((int(j), int(i)), -1)
                        for i, j in zip(rows, self.indices)], dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "reverse_edge", rev)
        for arr in (self.indptr, self.indices, self.affinity, self.cost,
                    self.rows, self.reverse_edge):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size)

    def index(self, node: int | str) -> int:
        """Resolve a node given by name or integer index."""
        if isinstance(node, str):
            try:
                return self.node_names.index(node)
            except ValueError:
                raise GraphError(f"unknown node name {node!r}") from None
        i = int(node)
        if not 0 <= i < self.n:
            raise GraphError(f"node index {i} out of range 0..{self.n - 1}")
        return i

    def successors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def out_degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    def affinity_matrix(self) -> np.ndarray:
        """Dense affinity matrix with zeros off the edge set."""
        A = np.zeros((self.n, self.n))
        A[self.rows, self.indices] = self.affinity
        return A

    def cost_matrix(self) -> np.ndarray:
        """Dense cost matrix with +inf off the edge set."""
        C = np.full((self.n, self.n), np.inf)
        C[self.rows, self.indices] = self.cost
        return C


@dataclass(frozen=True)
class ReferenceMatrix:
    """Row-stochastic reference transitions aligned with a graph's CSR arcs."""

    kind: str
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.data.setflags(write=False)

    def row(self, i: int) -> np.ndarray:
        return self.data[self.indptr[i]:self.indptr[i + 1]]

    def dense(self) -> np.ndarray:
        P = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        P[rows, self.indices] = self.data
        return P


def _validate_structure(g: Graph) -> None:
    if g.n < 2:
        raise GraphError("graph needs at least 2 nodes")
    if len(g.node_names) != g.n:
        raise GraphError("node_names length does not match n")
    if g.indptr[0] != 0 or g.indptr[-1] != g.indices.size:
        raise GraphError("malformed CSR index arrays")
    if g.indices.size == 0:
        raise GraphError("graph has no edges")
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    if np.any(rows == g.indices):
        raise GraphError("self-loops are not allowed")
    if np.any(g.affinity <= 0):
        raise GraphError("affinities must be strictly positive on edges")
    if np.any(g.cost < 0) or not np.all(np.isfinite(g.cost)):
        raise GraphError("costs must be finite and non-negative")
    # strong connectivity: node 0 reaches everyone and everyone reaches node 0
    fwd = _reachable(g.n, g.indptr, g.indices)
    if not fwd.all():
        missing = g.node_names[int(np.flatnonzero(~fwd)[0])]
        raise GraphError(f"graph is not strongly connected: "
                         f"node {missing!r} unreachable from {g.node_names[0]!r}")
    pred_ptr, pred_idx = _transpose_adjacency(g.n, g.indptr, g.indices)
    bwd = _reachable(g.n, pred_ptr, pred_idx)
    if not bwd.all():
        missing = g.node_names[int(np.flatnonzero(~bwd)[0])]
        raise GraphError(f"graph is not strongly connected: "
                         f"node {missing!r} cannot reach {g.node_names[0]!r}")


def _reachable(n, indptr, indices) -> np.ndarray:
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen


def _transpose_adjacency(n, indptr, indices):
    counts = np.bincount(indices, minlength=n)
    tptr = np.zeros(n + 1, dtype=indptr.dtype)
    np.cumsum(counts, out=tptr[1:])
    tidx = np.empty_like(indices)
    fill = tptr[:-1].copy()
    rows = np.repeat(np.arange(n), np.diff(indptr))
    for i, j in zip(rows, indices):
        tidx[fill[j]] = i
        fill[j] += 1
    return tptr, tidx


def _build(named_edges, undirected: bool) -> Graph:
    """Assemble a Graph from (src_name, dst_name, affinity, cost, line) rows."""
    order: dict[str, int] = {}
    for u, v, _, _, _ in named_edges:
        for name in (u, v):
            if name not in order:
                order[name] = len(order)
    n = len(order)
    arcs: dict[tuple[int, int], tuple[float, float]] = {}
    for u, v, a, c, line in named_edges:
        pairs = [(order[u], order[v])]
        if undirected:
            pairs.append((order[v], order[u]))
        for i, j in pairs:
            if (i, j) in arcs:
                raise EdgeListError(f"duplicate edge {u} -> {v}", line)
            arcs[(i, j)] = (a, c)
    keys = sorted(arcs)
    indices = np.array([j for _, j in keys], dtype=np.int64)
    counts = np.bincount([i for i, _ in keys], minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    affinity = np.array([arcs[k][0] for k in keys])
    cost = np.array([arcs[k][1] for k in keys])
    names = tuple(order)
    return Graph(n=n, node_names=names, indptr=indptr, indices=indices,
                 affinity=affinity, cost=cost, directed=not undirected)


def _parse_rows(text: str, cost_convention: str, affinity_convention: str):
    if cost_convention not in (FROM_COLUMN, INVERSE_AFFINITY):
        raise GraphError(f"unknown cost convention {cost_convention!r}")
    if affinity_convention not in (FROM_COLUMN, INVERSE_COST):
        raise GraphError(f"unknown affinity convention {affinity_convention!r}")
    if cost_convention == INVERSE_AFFINITY and affinity_convention == INVERSE_COST:
        raise GraphError("cost and affinity cannot both be derived from each other")
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) not in (3, 4):
            raise EdgeListError(
                f"expected `src dst affinity [cost]`, got {len(tokens)} columns",
                lineno)
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise EdgeListError("inconsistent column count", lineno)
        u, v = tokens[0], tokens[1]
        if u == v:
            raise EdgeListError(f"self-loop on node {u!r}", lineno)
        try:
            values = [float(tok) for tok in tokens[2:]]
        except ValueError:
            raise EdgeListError(f"non-numeric value in {tokens[2:]}", lineno) from None
        if len(values) == 2:
            if cost_convention == INVERSE_AFFINITY:
                raise EdgeListError(
                    "file has a cost column but cost convention derives it "
                    "from the affinity", lineno)
            if affinity_convention == INVERSE_COST:
                raise EdgeListError(
                    "file has an affinity column but affinity convention "
                    "derives it from the cost", lineno)
            a, c = values
        else:
            (w,) = values
            if cost_convention == INVERSE_AFFINITY:
                if w <= 0:
                    raise EdgeListError(f"affinity {w} not invertible", lineno)
                a, c = w, 1.0 / w
            elif affinity_convention == INVERSE_COST:
                if w <= 0:
                    raise EdgeListError(f"cost {w} not invertible", lineno)
                a, c = 1.0 / w, w
            else:
                raise EdgeListError(
                    "missing cost column; pass a cost or affinity convention",
                    lineno)
        if a <= 0:
            raise EdgeListError(f"affinity must be positive, got {a}", lineno)
        if c < 0:
            raise EdgeListError(f"cost must be non-negative, got {c}", lineno)
        rows.append((u, v, a, c, lineno))
    if not rows:
        raise EdgeListError("no edges in input")
    return rows


def loads_edge_list(text: str, *, undirected: bool = False,
                    cost_convention: str = FROM_COLUMN,
                    affinity_convention: str = FROM_COLUMN) -> Graph:
    """Parse an edge list from a string; see :func:`load_edge_list`."""
    rows = _parse_rows(text, cost_convention, affinity_convention)
    return _build(rows, undirected)


def load_edge_list(path, *, undirected: bool = False,
                   cost_convention: str = FROM_COLUMN,
                   affinity_convention: str = FROM_COLUMN) -> Graph:
    """Load a graph from a whitespace-separated edge-list file.

    Rows are ``src dst affinity [cost]``; ``#`` starts a comment.  Node
    identifiers may be arbitrary names; internal indices follow first
    appearance.  With ``undirected=True`` every listed edge adds both
    directed arcs.

    The three-column form needs a convention for the missing quantity:
    ``cost_convention="inverse-affinity"`` reads the column as affinity and
    sets c = 1/a; ``affinity_convention="inverse-cost"`` reads the column as
    cost and sets a = 1/c.  A missing cost with neither convention is an
    error.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads_edge_list(text, undirected=undirected,
                           cost_convention=cost_convention,
                           affinity_convention=affinity_convention)


def dump_edge_list(g: Graph) -> str:
    """Serialize to canonical form: directed arcs, 4 columns, sorted by index.

    ``load(dump(g))`` reproduces the arc data bit-identically, and dumping
    again yields the same bytes.
    """
    lines = []
    for k in range(g.num_edges):
        i, j = g.rows[k], g.indices[k]
        lines.append(f"{g.node_names[i]}\t{g.node_names[j]}\t"
                     f"{float(g.affinity[k])!r}\t{float(g.cost[k])!r}")
    return "\n".join(lines) + "\n"


def save_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_edge_list(g))


def reference_probabilities(g: Graph, kind: str = NATURAL) -> ReferenceMatrix:
    """Reference transition probabilities of the natural or uniform walk.

    Natural rows are affinity-proportional, p_ref_ij = a_ij / sum_j' a_ij';
    uniform rows spread 1/|Succ(i)| over the successors.
    """
    if kind not in (NATURAL, UNIFORM):
        raise GraphError(f"unknown reference kind {kind!r}")
    deg = np.diff(g.indptr)
    if np.any(deg == 0):
        raise GraphError("node with no successor")
    if kind == NATURAL:
        rowsum = np.add.reduceat(g.affinity, g.indptr[:-1])
        data = g.affinity / np.repeat(rowsum, deg)
    else:
        data = 1.0 / np.repeat(deg.astype(float), deg)
    return ReferenceMatrix(kind=kind, n=g.n, indptr=g.indptr,
                           indices=g.indices, data=data)


def shortest_path_cost(g: Graph, s: int | str, t: int | str) -> float:
    """Least cumulative cost over directed paths s -> t (Dijkstra)."""
    s, t = g.index(s), g.index(t)
    if s == t:
        raise GraphError("source and target must differ")
    dist = np.full(g.n, np.inf)
    dist[s] = 0.0
    done = np.zeros(g.n, dtype=bool)
    pq = [(0.0, s)]
    while pq:
        d, u = heapq.heappop(pq)
        if done[u]:
            continue
        done[u] = True
        if u == t:
            return d
        lo, hi = g.indptr[u], g.indptr[u + 1]
        for v, c in zip(g.indices[lo:hi], g.cost[lo:hi]):
            nd = d + c
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(pq, (nd, int(v)))
    raise GraphError("target unreachable")  # impossible when strongly connected
