"""Shared fixtures: small named graphs and an overfit toy diffusion model."""

from pathlib import Path

import numpy as np
import pytest

from subdiff.graphs import Graph
from subdiff.diffusion import TrainConfig, train
from subdiff.subgraphs import Subgraph

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

HOUSE_EDGES = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)]


def graph_from_edges(n, edges, **kw):
    return Graph.from_edges(n, edges, **kw)


def path_graph(n):
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n):
    return graph_from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(leaves):
    return graph_from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def house_graph():
    return graph_from_edges(5, HOUSE_EDGES)


def house_subgraph(context=True):
    a = house_graph().adjacency()
    c = None
    if context:
        from subdiff.subgraphs import global_context

        c = global_context(house_graph(), 2)
    return Subgraph(parent_ids=tuple(range(5)), A=a, C=c, center=0)


def dataset_path(name: str) -> Path:
    return DATA_DIR / f"{name}.edges"


def require_dataset(name: str) -> Path:
    path = dataset_path(name)
    if not path.exists():
        pytest.skip(
            f"{name} edge list not found at {path}; run scripts/fetch_datasets.py "
            f"in an environment with network access"
        )
    return path


@pytest.fixture(scope="session")
def house_model():
    """A model overfit to the single clean house motif (with context rows)."""
    sub = house_subgraph(context=True)
    cfg = TrainConfig(T=24, layers=2, hidden=32, steps=700, batch=4, lr=3e-3,
                      seed=0, n_max=8)
    model, losses = train([sub], cfg)
    assert np.isfinite(losses).all()
    return model
