"""Undirected simple graphs: construction, IO, connectivity, spectra, statistics."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import shortest_path

Edge = tuple[int, int]

_EIG_ZERO_TOL = 1e-9
_SIGN_TOL = 1e-9


class DisconnectedGraphError(ValueError):
    """Raised when an operation requires a connected graph."""


def normalize_edge(u: int, v: int) -> Edge:
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph.

    Edges are stored as unordered (u, v) pairs with u < v. Optional per-node
    data: categorical ``labels``, global-context matrix ``C`` and local-context
    matrix ``Q``; each must have exactly ``n`` rows.
    """

    n: int
    edges: frozenset[Edge]
    labels: np.ndarray | None = None
    C: np.ndarray | None = None
    Q: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"node count must be nonnegative, got {self.n}")
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"invalid edge ({u}, {v}) for graph with n={self.n}")
        for name in ("labels", "C", "Q"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr)
            if arr.shape[0] != self.n:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected n={self.n}")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, n: int, edges, **kw) -> "Graph":
        """Build a graph from an iterable of (u, v), dropping self-loops and duplicates."""
        clean = frozenset(normalize_edge(u, v) for u, v in edges if int(u) != int(v))
        return cls(n=n, edges=clean, **kw)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_list(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        nbr: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbr[u].append(v)
            nbr[v].append(u)
        return tuple(tuple(sorted(a)) for a in nbr)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        deg.flags.writeable = False
        return deg

    def adjacency(self, dtype=np.int8) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        for u, v in self.edges:
            a[u, v] = 1
            a[v, u] = 1
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return normalize_edge(u, v) in self.edges

    def replace(self, **kw) -> "Graph":
        fields = dict(n=self.n, edges=self.edges, labels=self.labels, C=self.C, Q=self.Q)
        fields.update(kw)
        return Graph(**fields)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


@dataclass(frozen=True)
class GraphStats:
    """Summary statistics used for comparing generated vs reference graphs."""

    power_law_exp: float
    triangle_count: int
    transitivity: float
    char_path_length: float
    assortativity: float
    edge_overlap_pct: float | None = None

    def to_dict(self) -> dict:
        return {
            "power_law_exp": self.power_law_exp,
            "triangle_count": self.triangle_count,
            "transitivity": self.transitivity,
            "char_path_length": self.char_path_length,
            "assortativity": self.assortativity,
            "edge_overlap_pct": self.edge_overlap_pct,
        }


# ---------------------------------------------------------------------------
# Edge-list IO
# ---------------------------------------------------------------------------

def load_edge_list(path) -> Graph:
    """Read a graph from a text edge list.

    Format: one "u v" pair per line, 0-based nonnegative integer ids,
    '#' starts a comment line. The result is symmetrized; self-loops and
    duplicate lines are dropped. Node count is max id + 1 (isolated trailing
    ids are representable only through edges, so an empty file yields an
    empty graph).
    """
    path = Path(path)
    edges = set()
    max_id = -1
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line!r}") from exc
            if u < 0 or v < 0:
                raise ValueError(f"{path}:{lineno}: negative node id in {line!r}")
            max_id = max(max_id, u, v)
            if u != v:
                edges.add(normalize_edge(u, v))
    return Graph(n=max_id + 1, edges=frozenset(edges))


def save_edge_list(g: Graph, path, comment: str | None = None) -> None:
    """Write one "u v" line per edge, sorted, atomically (temp file + rename)."""
    from .ioutil import atomic_write_text

    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.extend(f"{u} {v}" for u, v in g.edge_list)
    # record isolated trailing nodes so n round-trips
    body = "\n".join(lines)
    if g.n > 0:
        max_seen = max((v for e in g.edges for v in e), default=-1)
        if max_seen < g.n - 1:
            body = f"# n={g.n}\n" + body
    atomic_write_text(Path(path), body + "\n")


def load_node_labels(path, n: int) -> np.ndarray:
    """Read a "node_id,label" CSV into an int array of length n."""
    labels = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.lower().startswith("node_id"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node_id,label'")
            i, lab = int(parts[0]), int(parts[1])
            if not 0 <= i < n:
                raise ValueError(f"{path}:{lineno}: node id {i} out of range")
            labels[i] = lab
            seen[i] = True
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ValueError(f"label file {path} missing node {missing}")
    return labels


# ---------------------------------------------------------------------------
# Connectivity
# ---------------------------------------------------------------------------

def bfs_component(neighbor_lists, src: int) -> list[int]:
    seen = {src}
    order = [src]
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in neighbor_lists[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    return order


def connected_components(g: Graph) -> list[list[int]]:
    """Components as sorted id lists, ordered by smallest contained id."""
    remaining = np.ones(g.n, dtype=bool)
    comps = []
    nbr = g.neighbor_lists
    for v in range(g.n):
        if remaining[v]:
            comp = bfs_component(nbr, v)
            remaining[comp] = False
            comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    return len(bfs_component(g.neighbor_lists, 0)) == g.n


def induced_subgraph(g: Graph, nodes) -> tuple[Graph, np.ndarray]:
    """Induce on `nodes` (sorted); returns (graph, remap) with remap[new] = old."""
    nodes = sorted(int(v) for v in nodes)
    remap = np.asarray(nodes, dtype=np.int64)
    local = {old: new for new, old in enumerate(nodes)}
    edges = frozenset(
        (local[u], local[v]) for u, v in g.edges if u in local and v in local
    )
    fields = {}
    if g.labels is not None:
        fields["labels"] = g.labels[remap]
    if g.C is not None:
        fields["C"] = g.C[remap]
    if g.Q is not None:
        fields["Q"] = g.Q[remap]
    return Graph(n=len(nodes), edges=edges, **fields), remap


def largest_connected_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Largest component (ties broken by smallest contained original id).

    Returns the induced graph plus the remap table, remap[new_id] = original_id.
    """
    if g.n == 0:
        return g, np.zeros(0, dtype=np.int64)
    comps = connected_components(g)
    best = max(comps, key=lambda c: (len(c), -c[0]))
    return induced_subgraph(g, best)


def permute(g: Graph, perm) -> Graph:
    """Relabel node i as perm[i]."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(g.n)):
        raise ValueError("perm must be a permutation of range(n)")
    edges = frozenset(normalize_edge(perm[u], perm[v]) for u, v in g.edges)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.n)
    fields = {}
    if g.labels is not None:
        fields["labels"] = g.labels[inv]
    if g.C is not None:
        fields["C"] = g.C[inv]
    if g.Q is not None:
        fields["Q"] = g.Q[inv]
    return Graph(n=g.n, edges=edges, **fields)


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def laplacian_eigens(g: Graph, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The k smallest nonzero eigenpairs of L = D - A.

    Eigenvectors are unit-norm with the sign convention that the first entry
    with magnitude above 1e-9 is positive. Repeated eigenvalues are ordered by
    lexicographic comparison of their (sign-fixed) eigenvectors.
    """
    if g.n == 0 or not is_connected(g):
        raise DisconnectedGraphError(
            "graph is disconnected; take the largest connected component first"
        )
    if not 1 <= k < g.n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={g.n}")
    a = g.adjacency(dtype=np.float64)
    lap = np.diag(g.degrees.astype(np.float64)) - a
    vals, vecs = scipy.linalg.eigh(lap, subset_by_index=[0, k])
    if vals[1] <= _EIG_ZERO_TOL * max(1.0, vals[-1]):
        raise DisconnectedGraphError(
            "zero Laplacian eigenvalue has multiplicity > 1; "
            "take the largest connected component first"
        )
    vals, vecs = vals[1:], vecs[:, 1:]
    for j in range(k):
        col = vecs[:, j]
        nz = np.flatnonzero(np.abs(col) > _SIGN_TOL)
        if nz.size and col[nz[0]] < 0:
            vecs[:, j] = -col
    # stable order inside (near-)degenerate eigenvalue groups
    order = list(range(k))
    i = 0
    while i < k:
        j = i
        while j + 1 < k and abs(vals[j + 1] - vals[i]) <= _EIG_ZERO_TOL * max(1.0, abs(vals[i])):
            j += 1
        if j > i:
            group = sorted(order[i : j + 1], key=lambda c: tuple(vecs[:, c]))
            order[i : j + 1] = group
        i = j + 1
    return vals[order], vecs[:, order]


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def count_triangles_per_node(g: Graph) -> np.ndarray:
    """Number of triangles each node participates in."""
    nbr = [set(a) for a in g.neighbor_lists]
    tri = np.zeros(g.n, dtype=np.int64)
    for u, v in g.edges:
        for w in nbr[u] & nbr[v]:
            if w > v:
                tri[u] += 1
                tri[v] += 1
                tri[w] += 1
    return tri


def power_law_exponent(degrees: np.ndarray, d_min: int = 1) -> float:
    """Continuous MLE exponent 1 + n / sum(ln(d_i / (d_min - 0.5))) over d_i >= d_min."""
    d = np.asarray(degrees, dtype=np.float64)
    d = np.sort(d[d >= d_min])  # value-ordered sum is permutation invariant
    if d.size == 0:
        raise ValueError("no degrees at or above d_min")
    return 1.0 + d.size / float(np.sum(np.log(d / (d_min - 0.5))))


def degree_sort_order(g: Graph) -> np.ndarray:
    """Node ids sorted by descending degree, ties by ascending original id."""
    deg = g.degrees
    return np.asarray(sorted(range(g.n), key=lambda v: (-deg[v], v)), dtype=np.int64)


def _degree_aligned_edges(g: Graph) -> frozenset[Edge]:
    order = degree_sort_order(g)
    rank = np.empty(g.n, dtype=np.int64)
    rank[order] = np.arange(g.n)
    return frozenset(normalize_edge(rank[u], rank[v]) for u, v in g.edges)


def edge_overlap_pct(g: Graph, reference: Graph) -> float:
    """Percentage of the reference's edges present in g after degree-sequence alignment."""
    if reference.num_edges == 0:
        raise ValueError("reference graph has no edges")
    ge = _degree_aligned_edges(g)
    re_ = _degree_aligned_edges(reference)
    return 100.0 * len(ge & re_) / len(re_)


def char_path_length(g: Graph) -> float:
    """Mean shortest-path distance over unordered node pairs (exact, BFS-based)."""
    if g.n < 2:
        raise ValueError("need at least 2 nodes")
    rows = np.array([e[0] for e in g.edges], dtype=np.int64)
    cols = np.array([e[1] for e in g.edges], dtype=np.int64)
    data = np.ones(len(rows), dtype=np.int8)
    adj = scipy.sparse.coo_matrix(
        (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(g.n, g.n),
    ).tocsr()
    dist = shortest_path(adj, method="D", directed=False, unweighted=True)
    iu = np.triu_indices(g.n, k=1)
    vals = np.sort(dist[iu])  # value-ordered sum is permutation invariant
    if np.isinf(vals).any():
        raise DisconnectedGraphError("characteristic path length undefined on disconnected graph")
    return float(vals.mean())


def assortativity(g: Graph) -> float:
    """Pearson correlation of endpoint degrees over edges (both orientations).

    Degenerate (zero degree variance across edge endpoints) is reported as 0.0.
    """
    deg = g.degrees.astype(np.float64)
    us = np.array([e[0] for e in g.edges], dtype=np.int64)
    vs = np.array([e[1] for e in g.edges], dtype=np.int64)
    x = np.concatenate([deg[us], deg[vs]])
    y = np.concatenate([deg[vs], deg[us]])
    order = np.lexsort((y, x))  # value-ordered sums are permutation invariant
    x, y = x[order], y[order]
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


def graph_stats(g: Graph, reference: Graph | None = None) -> GraphStats:
    """Statistics bundle for a connected graph with at least 3 nodes.

    transitivity = 3 * triangles / (# length-2 paths); char_path_length is the
    exact mean pairwise BFS distance; the power-law exponent is the continuous
    MLE with d_min = 1.
    """
    if g.n < 3:
        raise ValueError(f"need n >= 3, got {g.n}")
    if not is_connected(g):
        raise DisconnectedGraphError("graph_stats requires a connected graph")
    deg = g.degrees
    paths2 = float(np.sum(deg * (deg - 1) // 2))
    if paths2 == 0:
        raise ValueError("graph has no path of length 2")
    tri_nodes = count_triangles_per_node(g)
    triangles = int(tri_nodes.sum() // 3)
    overlap = edge_overlap_pct(g, reference) if reference is not None else None
    return GraphStats(
        power_law_exp=power_law_exponent(deg),
        triangle_count=triangles,
        transitivity=3.0 * triangles / paths2,
        char_path_length=char_path_length(g),
        assortativity=assortativity(g),
        edge_overlap_pct=overlap,
    )
