"""Synthetic benchmark graphs and the corruption protocol.

Corruption turns a clean target graph into an observed graph while recording
the ground-truth edit sets: removed edges (to be recovered by expansion) or
added edges (to be stripped by denoising).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Edge, Graph, is_connected, normalize_edge


class CorruptionBudgetError(RuntimeError):
    """Edit budget unreachable under the connectivity constraint."""

    def __init__(self, requested: int, succeeded: int):
        super().__init__(
            f"could not apply {requested} edits under the connectivity "
            f"constraint; {succeeded} succeeded"
        )
        self.requested = requested
        self.succeeded = succeeded


@dataclass(frozen=True)
class CorruptionSpec:
    """How to corrupt a clean graph.

    mode "remove" deletes edges (expansion task), "add" inserts non-edges
    (denoising task), "motif" deletes only marked motif edges.
    """

    mode: str
    frac: float
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("remove", "add", "motif"):
            raise ValueError(f"unknown corruption mode {self.mode!r}")
        if not 0.0 < self.frac <= 0.5:
            raise ValueError(f"frac must be in (0, 0.5], got {self.frac}")


@dataclass(frozen=True)
class CorruptionResult:
    observed: Graph
    missing_edges: frozenset[Edge]
    added_edges: frozenset[Edge]
    target: Graph

    def __post_init__(self):
        if self.missing_edges and self.added_edges:
            raise ValueError("a single corruption run edits in one direction only")


@dataclass(frozen=True)
class BAShapes:
    """A Barabasi-Albert base with attached house motifs.

    ``graph.labels`` is 0 for base nodes and 1 for motif nodes; ``motif_edges``
    holds the 6 in-house edges of every motif (attachment edges excluded).
    """

    graph: Graph
    motif_edges: frozenset[Edge]


def barabasi_albert(n: int, m: int, rng) -> Graph:
    """Degree-preferential attachment without replacement; m*(n-m) edges.

    The first incoming node connects to all m seed nodes; later nodes draw m
    distinct targets with probability proportional to degree.
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(rng)
    edges: set[Edge] = set()
    repeated: list[int] = []
    targets = list(range(m))
    source = m
    while source < n:
        for t in targets:
            edges.add(normalize_edge(source, t))
        repeated.extend(targets)
        repeated.extend([source] * m)
        if source + 1 < n:
            chosen: set[int] = set()
            while len(chosen) < m:
                chosen.add(repeated[rng.integers(0, len(repeated))])
            targets = sorted(chosen)
        source += 1
    return Graph(n=n, edges=frozenset(edges))


_HOUSE_EDGES = ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4))  # 4-cycle + roof


def generate_ba_shapes(
    n_base: int = 300,
    m: int = 5,
    n_motifs: int = 80,
    seed: int = 0,
    extra_edge_frac: float = 0.0,
) -> BAShapes:
    """BA base graph with house motifs, each attached to one random base node.

    A house is 5 nodes and 6 edges: a 4-cycle plus two roof edges meeting at an
    apex (exactly one triangle). ``extra_edge_frac`` optionally adds that
    fraction of uniformly random extra non-edges to the finished graph.
    """
    if n_motifs < 0:
        raise ValueError("n_motifs must be nonnegative")
    rng = np.random.default_rng(seed)
    base = barabasi_albert(n_base, m, rng)
    edges = set(base.edges)
    motif_edges: set[Edge] = set()
    n = n_base
    for _ in range(n_motifs):
        offset = n
        for a, b in _HOUSE_EDGES:
            e = normalize_edge(offset + a, offset + b)
            edges.add(e)
            motif_edges.add(e)
        anchor = int(rng.integers(0, n_base))
        edges.add(normalize_edge(anchor, offset))
        n += 5
    if extra_edge_frac > 0.0:
        budget = int(extra_edge_frac * len(edges))
        guard = 0
        while budget > 0:
            u = int(rng.integers(0, n))
            v = int(rng.integers(0, n))
            if u == v or normalize_edge(u, v) in edges:
                guard += 1
                if guard > 100 * (len(edges) + 1):
                    raise CorruptionBudgetError(budget, 0)
                continue
            edges.add(normalize_edge(u, v))
            budget -= 1
    labels = np.zeros(n, dtype=np.int64)
    labels[n_base:] = 1
    return BAShapes(
        graph=Graph(n=n, edges=frozenset(edges), labels=labels),
        motif_edges=frozenset(motif_edges),
    )


def _removal_keeps_connected(nbr: list[set[int]], u: int, v: int) -> bool:
    # v must stay reachable from u once (u, v) is gone
    nbr[u].discard(v)
    nbr[v].discard(u)
    seen = {u}
    stack = [u]
    ok = False
    while stack:
        x = stack.pop()
        if x == v:
            ok = True
            break
        for y in nbr[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    nbr[u].add(v)
    nbr[v].add(u)
    return ok


def _remove_edges(g: Graph, pool: list[Edge], count: int, rng) -> set[Edge]:
    nbr = [set(a) for a in g.neighbor_lists]
    pool = list(pool)
    removed: set[Edge] = set()
    rejects = 0
    max_rejects = 100 * max(1, g.num_edges)
    while len(removed) < count:
        if not pool or rejects > max_rejects:
            raise CorruptionBudgetError(count, len(removed))
        i = int(rng.integers(0, len(pool)))
        u, v = pool[i]
        if _removal_keeps_connected(nbr, u, v):
            nbr[u].discard(v)
            nbr[v].discard(u)
            removed.add((u, v))
            pool[i] = pool[-1]
            pool.pop()
        else:
            rejects += 1
    return removed


def corrupt(
    g: Graph,
    spec: CorruptionSpec,
    motif_edges: frozenset[Edge] | None = None,
) -> CorruptionResult:
    """Apply the corruption protocol to a connected clean graph.

    remove mode deletes floor(frac * |E|) edges, re-drawing any deletion that
    would disconnect the graph; add mode inserts floor(frac * |E|) uniformly
    sampled non-edges; motif mode deletes floor(frac * |motif edges|) marked
    edges under the same connectivity rule. Deterministic under spec.seed.
    """
    if not is_connected(g):
        raise ValueError("corrupt requires a connected input graph")
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "remove":
        count = int(spec.frac * g.num_edges)
        removed = _remove_edges(g, sorted(g.edges), count, rng) if count else set()
        observed = g.replace(edges=g.edges - removed)
        return CorruptionResult(observed, frozenset(removed), frozenset(), g)
    if spec.mode == "motif":
        if motif_edges is None:
            raise ValueError("motif mode needs the marked motif edge set")
        pool = sorted(e for e in motif_edges if e in g.edges)
        count = int(spec.frac * len(pool))
        removed = _remove_edges(g, pool, count, rng) if count else set()
        observed = g.replace(edges=g.edges - removed)
        return CorruptionResult(observed, frozenset(removed), frozenset(), g)
    # add mode
    count = int(spec.frac * g.num_edges)
    added: set[Edge] = set()
    rejects = 0
    max_rejects = 100 * max(1, g.num_edges)
    while len(added) < count:
        u = int(rng.integers(0, g.n))
        v = int(rng.integers(0, g.n))
        e = normalize_edge(u, v)
        if u == v or e in g.edges or e in added:
            rejects += 1
            if rejects > max_rejects:
                raise CorruptionBudgetError(count, len(added))
            continue
        added.add(e)
    observed = g.replace(edges=g.edges | added)
    return CorruptionResult(observed, frozenset(), frozenset(added), g)
