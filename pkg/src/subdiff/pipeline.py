"""Batch pipeline: corrupt -> sample -> train -> edit -> evaluate.

Every stage writes its artifacts into the run directory as it completes, so a
failed run keeps everything produced so far. Re-running an identical config
reproduces report.json bitwise.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datasets, editing, metrics
from .diffusion import DiffusionModel, TrainConfig, save_checkpoint, train
from .graphs import Graph, load_edge_list, load_node_labels, normalize_edge, save_edge_list
from .ioutil import atomic_write_json, atomic_write_text
from .subgraphs import (
    Subgraph,
    attach_global_context,
    extract_subgraph,
    nodes_within,
    sample_training_set,
    subsample,
    write_subgraph_files,
)

METRIC_NAMES = ("consensus", "diversity", "sparsity", "edge_overlap")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class GeneratorSpec:
    n_base: int = 300
    m: int = 5
    n_motifs: int = 80
    seed: int = 0
    extra_edge_frac: float = 0.0


@dataclass(frozen=True)
class DatasetSpec:
    path: str | None = None
    labels_path: str | None = None
    generator: GeneratorSpec | None = None

    def __post_init__(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("dataset needs exactly one of 'path' or 'generator'")


@dataclass(frozen=True)
class SamplingSpec:
    hops: int = 2
    n_max: int = 50
    seed: int = 0
    context_dim: int = 2
    use_labels: bool = True


@dataclass(frozen=True)
class EditSpec:
    task: str = "denoise"
    R: int = 10
    seed: int = 0
    locations: int = 3
    style_attr: str | None = None
    style_delta: float = 3.0
    lam: float = 100.0
    regressor_arch: str = "mp"
    regressor_steps: int = 1500
    regressor_lr: float = 1e-3

    def __post_init__(self):
        if self.task not in editing.EDIT_TASKS:
            raise ValueError(f"edit task must be one of {editing.EDIT_TASKS}")
        if self.task == "style" and self.style_attr not in editing.STYLE_ATTRS:
            raise ValueError("style task needs style_attr")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    corruption: datasets.CorruptionSpec
    sampling: SamplingSpec
    diffusion: TrainConfig
    edit: EditSpec
    out_dir: str

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        return _strict_dataclass(cls, obj, "config")

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _strict_dataclass(cls, obj, where: str):
    """Build a dataclass from a dict, rejecting unknown keys recursively."""
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(obj) - set(fields)
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in obj.items():
        f = fields[name]
        target = _dataclass_type(f.type)
        if target is not None and value is not None:
            value = _strict_dataclass(target, value, f"{where}.{name}")
        kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    "DatasetSpec": DatasetSpec,
    "GeneratorSpec | None": GeneratorSpec,
    "SamplingSpec": SamplingSpec,
    "EditSpec": EditSpec,
    "TrainConfig": TrainConfig,
    "datasets.CorruptionSpec": datasets.CorruptionSpec,
}


def _dataclass_type(annotation):
    return _NESTED.get(str(annotation))


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def _load_dataset(spec: DatasetSpec) -> tuple[Graph, frozenset | None]:
    if spec.path is not None:
        g = load_edge_list(spec.path)
        if spec.labels_path:
            g = g.replace(labels=load_node_labels(spec.labels_path, g.n))
        return g, None
    gen = spec.generator
    shaped = datasets.generate_ba_shapes(
        n_base=gen.n_base, m=gen.m, n_motifs=gen.n_motifs,
        seed=gen.seed, extra_edge_frac=gen.extra_edge_frac,
    )
    return shaped.graph, shaped.motif_edges


def _edit_region(
    observed: Graph,
    pair: tuple[int, int],
    hops: int,
    n_max: int,
    seed: int,
) -> Subgraph:
    """Connected neighborhood of an edited pair inside the observed graph.

    Union of both endpoints' ego nets plus a shortest path between them, so
    the region stays connected even when the pair itself is a missing edge.
    """
    u, v = pair
    path = _shortest_path(observed, u, v)
    nodes = set(nodes_within(observed, u, hops)) | set(nodes_within(observed, v, hops))
    nodes |= set(path)
    region = extract_subgraph(observed, sorted(nodes), center=u)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(u, v))
    return subsample(region, n_max, ss, keep=tuple(path) + (v,))


def _shortest_path(g: Graph, src: int, dst: int) -> list[int]:
    from collections import deque

    prev = {src: src}
    queue = deque([src])
    while queue:
        x = queue.popleft()
        if x == dst:
            break
        for y in g.neighbor_lists[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    if dst not in prev:
        raise ValueError(f"no path between {src} and {dst}")
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _select_locations(edit_set: frozenset, count: int, seed: int) -> list[tuple[int, int]]:
    pairs = sorted(edit_set)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    rng.shuffle(pairs)
    return [tuple(p) for p in pairs[:count]]


def _local_edit_set(edit_set: frozenset, sub: Subgraph) -> frozenset:
    pos = {orig: i for i, orig in enumerate(sub.parent_ids)}
    return frozenset(
        normalize_edge(pos[u], pos[v]) for u, v in edit_set if u in pos and v in pos
    )


def run_pipeline(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_json(out / "config.json", config.to_dict())

    stage = "dataset"
    try:
        target, motif_edges = _load_dataset(config.dataset)
    except Exception as exc:
        raise StageError(stage, exc) from exc

    stage = "corrupt"
    try:
        result = datasets.corrupt(target, config.corruption, motif_edges)
        save_edge_list(result.target, out / "target.edges")
        save_edge_list(result.observed, out / "observed.edges")
        _save_edge_set(result.missing_edges, out / "missing.edges")
        _save_edge_set(result.added_edges, out / "added.edges")
    except Exception as exc:
        raise StageError(stage, exc) from exc

    stage = "sample"
    try:
        observed = result.observed
        if config.sampling.context_dim:
            observed = attach_global_context(observed, config.sampling.context_dim)
        if not config.sampling.use_labels:
            observed = observed.replace(labels=None)
        subs = sample_training_set(
            observed, config.sampling.hops, config.sampling.n_max, config.sampling.seed
        )
        manifest = {
            "num_subgraphs": len(subs),
            "sizes": [s.n for s in subs],
            "centers": [s.center for s in subs],
            "hops": config.sampling.hops,
            "n_max": config.sampling.n_max,
        }
        atomic_write_json(out / "samples_manifest.json", manifest)
    except Exception as exc:
        raise StageError(stage, exc) from exc

    stage = "train"
    try:
        model, losses = train(subs, config.diffusion)
        save_checkpoint(model, out / "ckpt.json")
        atomic_write_text(
            out / "losses.csv",
            "step,loss\n" + "\n".join(f"{i},{float(v)!r}" for i, v in enumerate(losses)) + "\n",
        )
    except Exception as exc:
        raise StageError(stage, exc) from exc

    stage = "edit"
    try:
        location_reports = _run_edits(config, observed, result, model, out)
    except Exception as exc:
        raise StageError(stage, exc) from exc

    stage = "eval"
    try:
        report = _aggregate_report(config, location_reports)
        atomic_write_json(out / "report.json", report)
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return out


def _save_edge_set(edges: frozenset, path: Path) -> None:
    lines = "\n".join(f"{u} {v}" for u, v in sorted(edges))
    atomic_write_text(path, lines + "\n" if lines else "")


def _run_edits(
    config: RunConfig,
    observed: Graph,
    corruption: datasets.CorruptionResult,
    model: DiffusionModel,
    out: Path,
) -> list[dict]:
    spec = config.edit
    edits_dir = out / "edits"
    reports = []
    if spec.task == "style":
        reg, _ = editing.train_regressor(
            _style_training_set(config, observed), spec.style_attr, spec.regressor_arch,
            editing.RegressorTrainConfig(
                steps=spec.regressor_steps, lr=spec.regressor_lr, seed=spec.seed,
            ),
            model,
        )
        editing.save_regressor(reg, spec.style_attr, out / "regressor.json")
        rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(3,)))
        centers = rng.choice(observed.n, size=min(spec.locations, observed.n), replace=False)
        for li, center in enumerate(sorted(int(c) for c in centers)):
            sub = _edit_region(observed, (center, center), config.sampling.hops,
                               config.diffusion.n_max, spec.seed)
            current = editing.attribute_value(sub.A, spec.style_attr)
            req = editing.EditRequest(
                observed=sub, task="style", R=spec.R,
                seed=spec.seed + 1000 * li,
                target_attr=spec.style_attr,
                target_value=current + spec.style_delta,
                lam=spec.lam, regressor=reg,
            )
            samples = editing.run_edit(req, model)
            _write_samples(samples, edits_dir / f"loc_{li:03d}")
            achieved = [editing.attribute_value(s.A, spec.style_attr) for s in samples]
            reports.append({
                "location": li,
                "center": int(center),
                "attr": spec.style_attr,
                "current": current,
                "target": current + spec.style_delta,
                "achieved_mean_abs_err": float(np.mean([abs(a - (current + spec.style_delta))
                                                        for a in achieved])),
                "metrics": metrics.metric_report(samples, sub, sub, frozenset(), "style").to_dict(),
            })
        return reports

    edit_set = corruption.missing_edges if spec.task == "expand" else corruption.added_edges
    if not edit_set:
        raise ValueError(f"corruption produced no edits for task {spec.task!r}")
    for li, pair in enumerate(_select_locations(edit_set, spec.locations, spec.seed)):
        sub = _edit_region(observed, pair, config.sampling.hops,
                           config.diffusion.n_max, spec.seed)
        target_sub = extract_subgraph(
            corruption.target.replace(C=observed.C, labels=observed.labels),
            sub.parent_ids, center=sub.center,
        )
        req = editing.EditRequest(observed=sub, task=spec.task, R=spec.R,
                                  seed=spec.seed + 1000 * li)
        samples = editing.run_edit(req, model)
        _write_samples(samples, edits_dir / f"loc_{li:03d}")
        local_edits = _local_edit_set(edit_set, sub)
        report = metrics.metric_report(samples, sub, target_sub, local_edits, spec.task)
        reports.append({
            "location": li,
            "pair": list(pair),
            "subgraph_nodes": sub.n,
            "local_edit_pairs": len(local_edits),
            "metrics": report.to_dict(),
        })
    return reports


def _style_training_set(config: RunConfig, observed: Graph) -> list[Subgraph]:
    return sample_training_set(
        observed, config.sampling.hops, config.sampling.n_max, config.sampling.seed
    )


def _write_samples(samples: list[Subgraph], loc_dir: Path) -> None:
    loc_dir.mkdir(parents=True, exist_ok=True)
    for r, s in enumerate(samples):
        write_subgraph_files(s, loc_dir / f"sample_{r:03d}.edges")


def _aggregate_report(config: RunConfig, location_reports: list[dict]) -> dict:
    agg = {}
    for name in METRIC_NAMES + ("distinct_fraction",):
        vals = [r["metrics"][name] for r in location_reports
                if r["metrics"].get(name) is not None]
        agg[name] = float(np.mean(vals)) if vals else None
    return {
        "config": config.to_dict(),
        "task": config.edit.task,
        "R": config.edit.R,
        "locations": location_reports,
        "aggregate": agg,
    }


# ---------------------------------------------------------------------------
# Plot data
# ---------------------------------------------------------------------------

def emit_plot_data(runs_root, out_dir) -> list[Path]:
    """One CSV per metric with a row per run (sorted by run id)."""
    runs_root = Path(runs_root)
    out_dir = Path(out_dir)
    run_dirs = sorted(p for p in runs_root.iterdir() if (p / "report.json").exists()) \
        if runs_root.is_dir() else []
    if (runs_root / "report.json").exists():
        run_dirs = [runs_root]
    if not run_dirs:
        raise FileNotFoundError(
            f"no report.json found under {runs_root}; expected run directories "
            f"each containing report.json"
        )
    written = []
    for name in METRIC_NAMES:
        lines = ["run,value"]
        for rd in run_dirs:
            with (rd / "report.json").open("r", encoding="utf-8") as fh:
                report = json.load(fh)
            value = report["aggregate"].get(name)
            lines.append(f"{rd.name},{'' if value is None else repr(value)}")
        path = out_dir / f"{name}.csv"
        atomic_write_text(path, "\n".join(lines) + "\n")
        written.append(path)
    return written
