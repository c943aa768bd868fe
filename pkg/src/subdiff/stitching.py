"""Large-graph generation: sample subgraphs until every context row is
covered, then merge them by identifying nodes with equal context rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import DiffusionModel, reverse_sample
from .graphs import Graph, normalize_edge
from .subgraphs import Histograms, Subgraph

UNCOVERED_WEIGHT = 10.0


class AmbiguousMatchError(ValueError):
    """A context row matched more than one distinct row within epsilon."""


@dataclass
class StitchPlan:
    """Generation state: the empirical tables plus per-row coverage flags."""

    hist: Histograms
    epsilon_match: float = 0.0
    coverage: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.hist.context_rows.shape[0] == 0:
            raise ValueError("stitching needs a nonempty context histogram")
        self.coverage = np.zeros(self.hist.context_rows.shape[0], dtype=bool)

    @property
    def num_rows(self) -> int:
        return self.hist.context_rows.shape[0]


def _weighted_sample_distinct(rng, weights: np.ndarray, count: int) -> np.ndarray:
    """Sequential weighted draws without replacement."""
    weights = weights.astype(np.float64).copy()
    chosen = np.empty(count, dtype=np.int64)
    for i in range(count):
        p = weights / weights.sum()
        pick = int(rng.choice(len(weights), p=p))
        chosen[i] = pick
        weights[pick] = 0.0
    return chosen


def generate_large(
    model: DiffusionModel,
    plan: StitchPlan,
    rng: np.random.Generator,
) -> Graph:
    """Repeatedly sample subgraphs over context rows drawn from the empirical
    tables (uncovered rows upweighted) until every row has been sampled, then
    coalesce. The output has one node per distinct context row."""
    hist = plan.hist
    pieces: list[Subgraph] = []
    max_iters = 50 * plan.num_rows
    iters = 0
    while not plan.coverage.all():
        if iters >= max_iters:
            raise RuntimeError(
                f"stitching did not reach coverage after {max_iters} iterations "
                f"({int(plan.coverage.sum())}/{plan.num_rows} rows covered)"
            )
        iters += 1
        size_p = hist.size_counts / hist.size_counts.sum()
        n = int(rng.choice(hist.sizes, p=size_p))
        n = max(2, min(n, plan.num_rows))
        weights = hist.context_counts.astype(np.float64)
        weights = np.where(plan.coverage, weights, weights * UNCOVERED_WEIGHT)
        idx = _weighted_sample_distinct(rng, weights, n)
        rows = hist.context_rows[idx]
        pieces.append(reverse_sample(model, n, rows, rng))
        plan.coverage[idx] = True
    return coalesce(pieces, epsilon=plan.epsilon_match)


def coalesce(subgraphs: list[Subgraph], epsilon: float = 0.0) -> Graph:
    """Union of edges over subgraphs, with nodes identified by context row.

    Rows within each subgraph must be pairwise distinct. With epsilon > 0,
    rows within max-norm epsilon are merged; a row matching two distinct
    canonical rows is an error. Output nodes are ordered by lexicographically
    sorted context row, stored in the result's C matrix.
    """
    if not subgraphs:
        raise ValueError("nothing to coalesce")
    for s in subgraphs:
        if s.C is None:
            raise ValueError("coalesce needs context rows on every subgraph")
        if np.unique(s.C, axis=0).shape[0] != s.n:
            raise ValueError("context rows within a subgraph must be pairwise distinct")
    if epsilon == 0.0:
        all_rows = np.vstack([s.C for s in subgraphs])
        canon, inverse = np.unique(all_rows, axis=0, return_inverse=True)
        node_of = iter(inverse)
        assign = [[next(node_of) for _ in range(s.n)] for s in subgraphs]
    else:
        canon_list: list[np.ndarray] = []
        assign = []
        for s in subgraphs:
            ids = []
            for row in s.C:
                hits = [j for j, c in enumerate(canon_list)
                        if np.max(np.abs(c - row)) <= epsilon]
                if len(hits) > 1:
                    raise AmbiguousMatchError(
                        f"row {row.tolist()} is within epsilon={epsilon} of "
                        f"{len(hits)} distinct rows, e.g. {canon_list[hits[0]].tolist()} "
                        f"and {canon_list[hits[1]].tolist()}"
                    )
                if hits:
                    ids.append(hits[0])
                else:
                    canon_list.append(np.asarray(row, dtype=np.float64))
                    ids.append(len(canon_list) - 1)
            assign.append(ids)
        order = np.lexsort(np.asarray(canon_list).T[::-1])
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        canon = np.asarray(canon_list)[order]
        assign = [[int(rank[i]) for i in ids] for ids in assign]
    edges = set()
    for s, ids in zip(subgraphs, assign):
        for u, v in s.edge_set:
            gu, gv = ids[u], ids[v]
            if gu != gv:
                edges.add(normalize_edge(gu, gv))
    return Graph(n=canon.shape[0], edges=frozenset(edges), C=canon)
