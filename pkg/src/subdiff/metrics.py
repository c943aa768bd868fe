"""Refinement metrics: consensus, diversity, sparsity and edge overlap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Edge, Graph, normalize_edge
from .subgraphs import Subgraph


def _edge_set(g) -> frozenset[Edge]:
    if isinstance(g, Subgraph):
        return g.edge_set
    if isinstance(g, Graph):
        return g.edges
    return frozenset(normalize_edge(u, v) for u, v in g)


def _num_nodes(g) -> int:
    return g.n


@dataclass(frozen=True)
class MetricReport:
    task: str
    R: int
    consensus: float | None
    diversity: float
    distinct_fraction: float
    sparsity: float
    edge_overlap: float
    edge_overlap_vs_target: float
    sparsity_range: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "R": self.R,
            "consensus": self.consensus,
            "diversity": self.diversity,
            "distinct_fraction": self.distinct_fraction,
            "sparsity": self.sparsity,
            "sparsity_range": list(self.sparsity_range),
            "sparsity_in_range": bool(
                self.sparsity_range[0] - 1e-12 <= self.sparsity <= self.sparsity_range[1] + 1e-12
            ),
            "edge_overlap": self.edge_overlap,
            "edge_overlap_vs_target": self.edge_overlap_vs_target,
        }


def consensus(samples, edit_set, target) -> float:
    """Mean over edited pairs of the fraction of samples agreeing with the
    target at that pair (edge present for missing edges, absent for added)."""
    edit_pairs = sorted(frozenset(normalize_edge(u, v) for u, v in edit_set))
    if not edit_pairs:
        raise ValueError("edit set must be nonempty")
    if not samples:
        raise ValueError("need at least one sample")
    target_edges = _edge_set(target)
    sample_edges = [_edge_set(s) for s in samples]
    total = 0.0
    for pair in edit_pairs:
        want = pair in target_edges
        total += sum((pair in se) == want for se in sample_edges) / len(samples)
    return total / len(edit_pairs)


def diversity(samples) -> float:
    """Fraction of ordered distinct-index sample pairs with unequal edge sets."""
    r = len(samples)
    if r < 2:
        raise ValueError("diversity needs R >= 2")
    sets = [_edge_set(s) for s in samples]
    unequal = sum(
        1 for i in range(r) for j in range(r) if i != j and sets[i] != sets[j]
    )
    return unequal / (r * (r - 1))


def distinct_fraction(samples) -> float:
    """Number of distinct sampled edge sets divided by R."""
    if not samples:
        raise ValueError("need at least one sample")
    return len({_edge_set(s) for s in samples}) / len(samples)


def sparsity(samples, target) -> float:
    """Mean ratio of sample edge count to target edge count."""
    target_edges = _edge_set(target)
    if not target_edges:
        raise ValueError("target edge set must be nonempty")
    if not samples:
        raise ValueError("need at least one sample")
    return float(np.mean([len(_edge_set(s)) / len(target_edges) for s in samples]))


def _degree_rank(edges: frozenset[Edge], n: int) -> dict[int, int]:
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    order = sorted(range(n), key=lambda v: (-deg[v], v))
    return {node: rank for rank, node in enumerate(order)}


def edge_overlap(samples, observed, aligned: bool = False) -> float:
    """Mean over samples of |E_sample intersect E_observed| / |E_observed|.

    With aligned=True (samples without node correspondence), both sides are
    first relabeled by descending degree, ties broken by original id.
    """
    obs_edges = _edge_set(observed)
    if not obs_edges:
        raise ValueError("observed edge set must be nonempty")
    if not samples:
        raise ValueError("need at least one sample")
    if aligned:
        rank_o = _degree_rank(obs_edges, _num_nodes(observed))
        obs_cmp = frozenset(normalize_edge(rank_o[u], rank_o[v]) for u, v in obs_edges)
    else:
        obs_cmp = obs_edges
    vals = []
    for s in samples:
        se = _edge_set(s)
        if aligned:
            rank_s = _degree_rank(se, _num_nodes(s))
            se = frozenset(normalize_edge(rank_s[u], rank_s[v]) for u, v in se)
        vals.append(len(se & obs_cmp) / len(obs_cmp))
    return float(np.mean(vals))


def metric_report(samples, observed, target, edit_set, task: str) -> MetricReport:
    """Assemble the full report for one edit run."""
    n_obs = _num_nodes(observed)
    target_edges = _edge_set(target)
    obs_edges = _edge_set(observed)
    return MetricReport(
        task=task,
        R=len(samples),
        consensus=consensus(samples, edit_set, target) if edit_set else None,
        diversity=diversity(samples) if len(samples) >= 2 else 0.0,
        distinct_fraction=distinct_fraction(samples),
        sparsity=sparsity(samples, target),
        edge_overlap=edge_overlap(samples, observed),
        edge_overlap_vs_target=float(np.mean(
            [len(_edge_set(s) & target_edges) / max(len(target_edges), 1) for s in samples]
        )),
        sparsity_range=(
            len(obs_edges) / max(len(target_edges), 1),
            n_obs * n_obs / max(len(target_edges), 1),
        ),
    )
