"""Batch command-line interface.

Exit codes: 0 success, 1 usage error, 2 stage failure. The environment
variable SUBDIFF_OUT sets the default output root for relative --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, editing, metrics, pipeline
from .diffusion import TrainConfig, load_checkpoint, save_checkpoint, train
from .graphs import (
    graph_stats,
    load_edge_list,
    load_node_labels,
    save_edge_list,
)
from .ioutil import atomic_write_json
from .stitching import StitchPlan, generate_large
from .subgraphs import (
    Subgraph,
    attach_global_context,
    read_subgraph_files,
    sample_training_set,
    write_subgraph_files,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_path(raw: str) -> Path:
    p = Path(raw)
    root = os.environ.get("SUBDIFF_OUT")
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _load_edge_set(path):
    edges = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            u, v = line.split()
            edges.add((min(int(u), int(v)), max(int(u), int(v))))
    return frozenset(edges)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_corrupt(args) -> int:
    g = load_edge_list(args.input)
    if args.labels:
        g = g.replace(labels=load_node_labels(args.labels, g.n))
    motif = _load_edge_set(args.motif_edges) if args.motif_edges else None
    spec = datasets.CorruptionSpec(mode=args.mode, frac=args.frac, seed=args.seed)
    result = datasets.corrupt(g, spec, motif)
    out = _out_path(args.out)
    save_edge_list(result.target, out / "target.edges")
    save_edge_list(result.observed, out / "observed.edges")
    pipeline._save_edge_set(result.missing_edges, out / "missing.edges")
    pipeline._save_edge_set(result.added_edges, out / "added.edges")
    print(f"wrote corruption artifacts to {out} "
          f"(|E_M|={len(result.missing_edges)}, |E_A|={len(result.added_edges)})")
    return 0


def _cmd_sample(args) -> int:
    g = load_edge_list(args.input)
    if args.labels:
        g = g.replace(labels=load_node_labels(args.labels, g.n))
    if args.context_dim:
        g = attach_global_context(g, args.context_dim)
    subs = sample_training_set(g, hops=args.hops, n_max=args.nmax, seed=args.seed)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(subs):
        name = f"subgraph_{i:05d}.edges"
        write_subgraph_files(s, out / name)
        entries.append({"file": name, "parent_ids": list(s.parent_ids), "center": s.center})
    atomic_write_json(out / "manifest.json", {
        "num_subgraphs": len(subs),
        "hops": args.hops,
        "n_max": args.nmax,
        "subgraphs": entries,
    })
    print(f"wrote {len(subs)} subgraphs to {out}")
    return 0


def _load_sample_dir(path: Path) -> list[Subgraph]:
    manifest = path / "manifest.json"
    if not manifest.exists():
        raise FileNotFoundError(f"{manifest} not found; run 'subdiff sample' first")
    with manifest.open("r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return [read_subgraph_files(path / e["file"]) for e in meta["subgraphs"]]


def _cmd_train(args) -> int:
    subs = _load_sample_dir(Path(args.samples))
    config = TrainConfig(
        T=args.T, layers=args.layers, hidden=args.hidden, steps=args.steps,
        batch=args.batch, lr=args.lr, seed=args.seed, transition=args.transition,
        n_max=args.nmax, wall_clock_cap_s=args.time_cap,
    )
    model, losses = train(subs, config)
    out = _out_path(args.out)
    save_checkpoint(model, out)
    print(f"trained {config.steps} steps; final loss {losses[-1] if len(losses) else float('nan'):.4f}; "
          f"checkpoint at {out}")
    if args.regressor_attr:
        reg, _ = editing.train_regressor(
            subs, args.regressor_attr, args.regressor_arch,
            editing.RegressorTrainConfig(steps=args.regressor_steps, seed=args.seed),
            model,
        )
        reg_out = _out_path(args.regressor_out or "regressor.json")
        editing.save_regressor(reg, args.regressor_attr, reg_out)
        print(f"trained {args.regressor_attr} regressor; checkpoint at {reg_out}")
    return 0


def _cmd_edit(args) -> int:
    model = load_checkpoint(args.model)
    sub = read_subgraph_files(Path(args.subgraph))
    regressor = None
    attr = args.attr
    if args.task == "style":
        if not args.regressor:
            raise ValueError("style task needs --regressor")
        regressor, trained_attr = editing.load_regressor(args.regressor)
        attr = attr or trained_attr
    req = editing.EditRequest(
        observed=sub, task=args.task, R=args.rounds, seed=args.seed,
        target_attr=attr if args.task == "style" else None,
        target_value=args.target if args.task == "style" else None,
        lam=args.guidance_lambda if args.task == "style" else 100.0,
        regressor=regressor,
    )
    samples = editing.run_edit(req, model)
    out = _out_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r, s in enumerate(samples):
        write_subgraph_files(s, out / f"sample_{r:03d}.edges")
    print(f"wrote {len(samples)} {args.task} samples to {out}")
    return 0


def _cmd_stitch(args) -> int:
    model = load_checkpoint(args.model)
    plan = StitchPlan(model.histograms, epsilon_match=args.epsilon)
    rng = np.random.default_rng(args.seed)
    g = generate_large(model, plan, rng)
    out = _out_path(args.out)
    save_edge_list(g, out)
    report = {"nodes": g.n, "edges": g.num_edges}
    if args.reference:
        ref = load_edge_list(args.reference)
        try:
            report["generated_stats"] = graph_stats(g, ref).to_dict()
        except ValueError as exc:  # tiny or disconnected generation
            report["generated_stats"] = None
            report["generated_stats_note"] = str(exc)
        report["reference_stats"] = graph_stats(ref).to_dict()
    atomic_write_json(out.with_suffix(".stats.json"), report)
    print(f"wrote generated graph ({g.n} nodes, {g.num_edges} edges) to {out}")
    return 0


def _cmd_eval(args) -> int:
    sample_dir = Path(args.samples)
    files = sorted(sample_dir.glob("sample_*.edges"))
    if not files:
        raise FileNotFoundError(f"no sample_*.edges under {sample_dir}")
    samples = [read_subgraph_files(f) for f in files]
    observed = read_subgraph_files(Path(args.observed))
    target = read_subgraph_files(Path(args.target))
    edit_set = _load_edge_set(args.edit_set) if args.edit_set else frozenset()
    report = metrics.metric_report(samples, observed, target, edit_set, args.task)
    out = _out_path(args.out)
    atomic_write_json(out, {"config_echo": vars(args) | {"func": None}, **report.to_dict()})
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_stats(args) -> int:
    g = load_edge_list(args.input)
    ref = load_edge_list(args.reference) if args.reference else None
    stats = graph_stats(g, ref)
    doc = stats.to_dict() | {
        "nodes": g.n,
        "undirected_edges": g.num_edges,
        "adjacency_nonzeros": 2 * g.num_edges,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_pipeline(args) -> int:
    config = pipeline.RunConfig.from_json(args.config)
    out = pipeline.run_pipeline(config)
    print(f"pipeline complete; report at {out / 'report.json'}")
    return 0


def _cmd_plot_data(args) -> int:
    written = pipeline.emit_plot_data(Path(args.runs), _out_path(args.out))
    print(f"wrote {len(written)} CSV files to {_out_path(args.out)}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subdiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="corrupt a clean graph, recording the edit sets")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", required=True, choices=["remove", "add", "motif"])
    p.add_argument("--frac", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels")
    p.add_argument("--motif-edges", dest="motif_edges")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("sample", help="ego-network sampling with subsampling")
    p.add_argument("--input", required=True)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--nmax", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--context-dim", dest="context_dim", type=int, default=2)
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("train", help="train the subgraph diffusion model")
    p.add_argument("--samples", required=True)
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transition", choices=["marginal", "absorbing"], default="marginal")
    p.add_argument("--nmax", type=int, default=50)
    p.add_argument("--time-cap", dest="time_cap", type=float, default=None,
                   help="wall-clock training cap in seconds")
    p.add_argument("--regressor-attr", dest="regressor_attr",
                   choices=list(editing.STYLE_ATTRS))
    p.add_argument("--regressor-arch", dest="regressor_arch",
                   choices=list(editing.REGRESSOR_ARCHS), default="mp")
    p.add_argument("--regressor-steps", dest="regressor_steps", type=int, default=1500)
    p.add_argument("--regressor-out", dest="regressor_out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("edit", help="expansion, denoising or style transfer")
    p.add_argument("--task", required=True, choices=list(editing.EDIT_TASKS))
    p.add_argument("--subgraph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attr", choices=list(editing.STYLE_ATTRS))
    p.add_argument("--target", type=float)
    p.add_argument("--lambda", dest="guidance_lambda", type=float, default=100.0)
    p.add_argument("--regressor")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("stitch", help="generate a large graph by stitching")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--reference", help="training graph for the stats comparison")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stitch)

    p = sub.add_parser("eval", help="compute refinement metrics for edit samples")
    p.add_argument("--samples", required=True)
    p.add_argument("--observed", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--edit-set", dest="edit_set")
    p.add_argument("--task", default="expand")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="graph statistics (optionally vs a reference)")
    p.add_argument("--input", required=True)
    p.add_argument("--reference")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("pipeline", help="run the full batch pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("plot-data", help="per-metric CSVs across run directories")
    p.add_argument("--runs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except pipeline.StageError as exc:
        print(f"subdiff: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # stage failure of a single-stage command
        print(f"subdiff: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
