"""Subgraph sampling and the global/local context features.

Global context gives every node of the observed graph a unique coordinate
(Laplacian eigenvector rows, plus a degree/id tie-break column when rows
collide). Local context is a per-node structural fingerprint recomputed on
noisy intermediate states during diffusion.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graphs import Edge, Graph, laplacian_eigens

DEFAULT_N_MAX = 50
LOCAL_CONTEXT_DIM = 7


@dataclass(frozen=True, eq=False)
class Subgraph:
    """Induced subgraph with its mapping back to parent node ids.

    ``A`` is the dense symmetric 0/1 adjacency over local ids; ``C`` rows are
    copied from the parent (never recomputed here); ``Q`` is the local-context
    matrix; ``center`` is the original id of the ego center when applicable.
    """

    parent_ids: tuple[int, ...]
    A: np.ndarray
    X: np.ndarray | None = None
    C: np.ndarray | None = None
    Q: np.ndarray | None = None
    center: int | None = None

    def __post_init__(self):
        a = np.asarray(self.A)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        if a.shape[0] != len(self.parent_ids):
            raise ValueError("parent_ids length must match A")
        if not np.array_equal(a, a.T):
            raise ValueError("A must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("A must have a zero diagonal")
        a = a.astype(np.int8).copy()
        a.flags.writeable = False
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "parent_ids", tuple(int(v) for v in self.parent_ids))
        for name in ("X", "C", "Q"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr)
            if arr.shape[0] != a.shape[0]:
                raise ValueError(f"{name} must have one row per node")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def edge_set(self) -> frozenset[Edge]:
        iu = np.triu_indices(self.n, k=1)
        present = self.A[iu] == 1
        return frozenset(
            (int(u), int(v)) for u, v, p in zip(iu[0], iu[1], present) if p
        )

    @property
    def num_edges(self) -> int:
        return int(self.A.sum()) // 2

    @property
    def degrees(self) -> np.ndarray:
        return self.A.sum(axis=1).astype(np.int64)

    def is_connected(self) -> bool:
        return adjacency_is_connected(self.A)

    def with_local_context(self, n_max: int = DEFAULT_N_MAX) -> "Subgraph":
        return Subgraph(self.parent_ids, self.A, self.X, self.C,
                        local_context(self.A, n_max), self.center)

    def to_graph(self) -> Graph:
        return Graph(n=self.n, edges=self.edge_set, labels=self.X, C=self.C, Q=self.Q)

    def __repr__(self) -> str:
        return f"Subgraph(n={self.n}, edges={self.num_edges}, center={self.center})"


@dataclass(frozen=True)
class Histograms:
    """Empirical tables gathered over the training subgraphs.

    context_rows/context_counts form the multiset of per-node global-context
    vectors seen across all subgraphs (rows unique, lexicographically sorted);
    sizes/size_counts is the multiset of subgraph node counts.
    """

    context_rows: np.ndarray
    context_counts: np.ndarray
    sizes: np.ndarray
    size_counts: np.ndarray

    def __post_init__(self):
        for name in ("context_rows", "context_counts", "sizes", "size_counts"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.context_rows.shape[0] != self.context_counts.shape[0]:
            raise ValueError("context_rows and context_counts disagree")
        if self.sizes.shape[0] != self.size_counts.shape[0]:
            raise ValueError("sizes and size_counts disagree")

    @property
    def num_subgraphs(self) -> int:
        return int(self.size_counts.sum())


def adjacency_is_connected(a: np.ndarray) -> bool:
    n = a.shape[0]
    if n == 0:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(a[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(int(v))
    return bool(seen.all())


def extract_subgraph(g: Graph, nodes, center: int | None = None) -> Subgraph:
    """Induce g on `nodes` (kept in sorted original-id order)."""
    nodes = sorted(int(v) for v in nodes)
    idx = np.asarray(nodes, dtype=np.int64)
    local = {old: new for new, old in enumerate(nodes)}
    a = np.zeros((len(nodes), len(nodes)), dtype=np.int8)
    node_set = set(nodes)
    for old in nodes:
        i = local[old]
        for nb in g.neighbor_lists[old]:
            if nb in node_set:
                a[i, local[nb]] = 1
    return Subgraph(
        parent_ids=tuple(nodes),
        A=a,
        X=g.labels[idx] if g.labels is not None else None,
        C=g.C[idx] if g.C is not None else None,
        center=center,
    )


# ---------------------------------------------------------------------------
# Global context
# ---------------------------------------------------------------------------

def global_context(g: Graph, d: int = 2) -> np.ndarray:
    """Per-node context matrix from the d smallest nonzero Laplacian eigenvectors.

    If any two rows coincide to 12 decimal digits (symmetric graphs), a
    tie-break column (degree + id * 2**-32, scaled to [0, 1]) is appended so
    rows are pairwise distinct.
    """
    _, vecs = laplacian_eigens(g, d)
    c = vecs.copy()
    rounded = np.round(c, 12)
    if np.unique(rounded, axis=0).shape[0] < g.n:
        tie = g.degrees.astype(np.float64) + np.arange(g.n, dtype=np.float64) * 2.0**-32
        tie = tie / tie.max()
        c = np.hstack([c, tie[:, None]])
    if np.unique(c, axis=0).shape[0] < g.n:
        raise AssertionError("global context rows are not pairwise distinct")
    return c


def attach_global_context(g: Graph, d: int = 2) -> Graph:
    return g.replace(C=global_context(g, d))


# ---------------------------------------------------------------------------
# Local context
# ---------------------------------------------------------------------------

def cycle_participation(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node participation counts in 3-, 4- and 5-cycles.

    Closed-walk counts from powers of A, with the standard degeneracy
    corrections; exact for simple graphs (verified against brute-force
    enumeration in the tests).
    """
    a = a.astype(np.float64)
    n = a.shape[0]
    if n == 0:
        z = np.zeros(0)
        return z, z.copy(), z.copy()
    d = a.sum(axis=1)
    a2 = a @ a
    diag_a3 = np.einsum("ij,ji->i", a2, a)
    tri = diag_a3 / 2.0
    # 4-cycles: closed 4-walks minus v-x-v-y-v bounces and v-x-y-x-v spurs
    diag_a4 = np.einsum("ij,ji->i", a2, a2)
    spur = a @ (d - 1.0)
    c4 = (diag_a4 - d * d - spur) / 2.0
    # 5-cycles: closed 5-walks minus walks supported on a triangle plus
    # at most one pendant edge
    diag_a5 = np.einsum("ij,jk,ki->i", a2, a2, a)
    cn = a2 * a  # common-neighbor counts along edges
    term_pendant_v = 4.0 * tri * np.maximum(d - 2.0, 0.0)
    term_pendant_ab = 2.0 * (cn @ (d - 2.0))
    term_far_tri = 2.0 * (a @ tri - cn.sum(axis=1))
    c5 = (diag_a5 - 10.0 * tri - term_pendant_v - term_pendant_ab - term_far_tri) / 2.0
    return tri, c4, c5


def local_clustering(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.float64)
    d = a.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    denom = d * (d - 1.0) / 2.0
    out = np.zeros(a.shape[0])
    mask = denom > 0
    out[mask] = tri[mask] / denom[mask]
    return out


def local_context(a: np.ndarray, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Structural feature matrix for a (possibly disconnected) adjacency.

    Columns: degree, triangle-, 4-cycle- and 5-cycle-participation (each
    normalized by its node-count scale), local clustering, then the broadcast
    graph scalars n/n_max and edge density.
    """
    a = np.asarray(a)
    n = a.shape[0]
    q = np.zeros((n, LOCAL_CONTEXT_DIM), dtype=np.float64)
    if n == 0:
        return q
    pair_scale = max((n - 1) * (n - 2) / 2.0, 1.0)
    tri, c4, c5 = cycle_participation(a)
    deg = a.sum(axis=1).astype(np.float64)
    q[:, 0] = deg / max(n - 1, 1)
    q[:, 1] = tri / pair_scale
    q[:, 2] = c4 / pair_scale
    q[:, 3] = c5 / pair_scale
    q[:, 4] = local_clustering(a)
    q[:, 5] = n / float(n_max)
    q[:, 6] = deg.sum() / max(n * (n - 1), 1)
    return q


# ---------------------------------------------------------------------------
# SAMPLE / SUBSAMPLE
# ---------------------------------------------------------------------------

def nodes_within(g: Graph, src: int, hops: int) -> list[int]:
    seen = {src}
    frontier = [src]
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for v in g.neighbor_lists[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
        if not frontier:
            break
    return sorted(seen)


def sample_ego_networks(g: Graph, k: int = 2) -> list[Subgraph]:
    """One k-hop ego network per node; every node is covered at least once."""
    if g.n == 0:
        return []
    return [extract_subgraph(g, nodes_within(g, v, k), center=v) for v in range(g.n)]


def _component_of(a: np.ndarray, start: int) -> list[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(a[u]):
            v = int(v)
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return sorted(seen)


def subsample(
    s: Subgraph,
    n_max: int,
    seed,
    keep: tuple[int, ...] = (),
) -> Subgraph:
    """Reduce a subgraph to at most n_max nodes, staying connected.

    Uniformly samples n_max nodes (the ego center, plus any original ids in
    ``keep``, are always retained), induces, and keeps the connected component
    containing the center. Degenerate draws (< 2 nodes) are retried up to 20
    times before falling back to the center's truncated 1-hop neighborhood.
    """
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    if s.n <= n_max:
        return s
    rng = np.random.default_rng(seed)
    center_orig = s.center if s.center is not None else s.parent_ids[0]
    pos = {orig: i for i, orig in enumerate(s.parent_ids)}
    forced = {pos[center_orig]}
    for orig in keep:
        if orig in pos:
            forced.add(pos[orig])
    free = np.asarray(sorted(set(range(s.n)) - forced), dtype=np.int64)
    n_draw = max(n_max - len(forced), 0)
    for _ in range(20):
        draw = rng.choice(free, size=n_draw, replace=False).tolist() if n_draw else []
        chosen = sorted(forced | set(draw))
        sub_a = s.A[np.ix_(chosen, chosen)]
        comp = _component_of(sub_a, chosen.index(pos[center_orig]))
        if len(comp) >= 2:
            local = [chosen[i] for i in comp]
            return _reindex(s, local)
    # fallback: truncated 1-hop neighborhood of the center
    ci = pos[center_orig]
    nbrs = [int(v) for v in np.flatnonzero(s.A[ci])]
    local = sorted([ci] + nbrs[: n_max - 1])
    return _reindex(s, local)


def _reindex(s: Subgraph, local_ids: list[int]) -> Subgraph:
    idx = np.asarray(local_ids, dtype=np.int64)
    return Subgraph(
        parent_ids=tuple(s.parent_ids[i] for i in local_ids),
        A=s.A[np.ix_(idx, idx)],
        X=s.X[idx] if s.X is not None else None,
        C=s.C[idx] if s.C is not None else None,
        center=s.center,
    )


def sample_training_set(
    g: Graph,
    hops: int = 2,
    n_max: int = DEFAULT_N_MAX,
    seed: int = 0,
) -> list[Subgraph]:
    """Ego networks for every node, subsampled to n_max.

    Per-subgraph RNG streams are derived from (seed, center id) so the result
    is independent of evaluation order.
    """
    subs = sample_ego_networks(g, hops)
    out = []
    for s in subs:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(s.center,))
        out.append(subsample(s, n_max, ss))
    return out


def write_subgraph_files(s: Subgraph, edges_path) -> None:
    """Edge list plus a JSON sidecar (same stem) with parent ids and context."""
    from pathlib import Path

    from .graphs import save_edge_list
    from .ioutil import atomic_write_json

    edges_path = Path(edges_path)
    save_edge_list(s.to_graph(), edges_path)
    atomic_write_json(edges_path.with_suffix(".json"), {
        "parent_ids": list(s.parent_ids),
        "center": s.center,
        "context": s.C.tolist() if s.C is not None else None,
        "labels": [int(v) for v in s.X] if s.X is not None else None,
    })


def read_subgraph_files(edges_path) -> Subgraph:
    """Inverse of write_subgraph_files; the sidecar is optional."""
    import json
    from pathlib import Path

    from .graphs import Graph, load_edge_list

    edges_path = Path(edges_path)
    g = load_edge_list(edges_path)
    sidecar = edges_path.with_suffix(".json")
    parent_ids = tuple(range(g.n))
    c = x = center = None
    if sidecar.exists():
        with sidecar.open("r", encoding="utf-8") as fh:
            meta = json.load(fh)
        parent_ids = tuple(meta["parent_ids"])
        center = meta.get("center")
        if meta.get("context") is not None:
            c = np.asarray(meta["context"], dtype=np.float64)
        if meta.get("labels") is not None:
            x = np.asarray(meta["labels"], dtype=np.int64)
        n = len(parent_ids)
        if n < g.n:
            raise ValueError(
                f"sidecar lists {n} nodes but {edges_path} has ids up to {g.n - 1}"
            )
        if n > g.n:
            g = Graph(n=n, edges=g.edges)
    return Subgraph(parent_ids=parent_ids, A=g.adjacency(), X=x, C=c, center=center)


def build_histograms(subgraphs: list[Subgraph]) -> Histograms:
    """Context-row and size multisets over a subgraph collection."""
    if not subgraphs:
        raise ValueError("need at least one subgraph")
    sizes, size_counts = np.unique(
        np.asarray([s.n for s in subgraphs], dtype=np.int64), return_counts=True
    )
    with_c = [s for s in subgraphs if s.C is not None]
    if with_c:
        if len(with_c) != len(subgraphs):
            raise ValueError("either all or no subgraphs may carry context rows")
        stacked = np.vstack([s.C for s in with_c])
        rows, counts = np.unique(stacked, axis=0, return_counts=True)
    else:
        rows = np.zeros((0, 0))
        counts = np.zeros(0, dtype=np.int64)
    return Histograms(rows, counts, sizes, size_counts)
