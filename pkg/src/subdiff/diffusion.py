"""Discrete denoising diffusion over subgraph edge and label states.

Each unordered node pair holds a categorical state in {absent, present}; node
labels, when used, are a second categorical channel. The forward process
interpolates between the identity and a reference distribution (the training
marginal, or the absorbing all-absent state); the learned reverse process
predicts the clean state and steps back through the closed-form posterior.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
import torch

from .denoiser import (
    DenoiserConfig,
    EdgeNodeDenoiser,
    NUM_EDGE_STATES,
    build_node_features,
    edge_state_onehot,
    label_onehot,
)
from .subgraphs import Histograms, Subgraph, build_histograms, local_context

TRANSITION_KINDS = ("marginal", "absorbing")


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative retention factors alpha_bar[0..T], strictly decreasing from 1."""

    T: int
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.shape != (self.T + 1,):
            raise ValueError(f"alpha_bar must have T+1 entries, got {ab.shape}")
        if ab[0] != 1.0:
            raise ValueError("alpha_bar[0] must be 1")
        if np.any(ab <= 0) or np.any(ab > 1):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if self.T > 0 and np.any(np.diff(ab) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        ab = ab.copy()
        ab.flags.writeable = False
        object.__setattr__(self, "alpha_bar", ab)

    @classmethod
    def cosine(cls, T: int, s: float = 0.008) -> "NoiseSchedule":
        if T == 0:
            return cls(0, np.ones(1))
        t = np.arange(T + 1, dtype=np.float64)
        f = np.cos(0.5 * math.pi * (t / T + s) / (1 + s)) ** 2
        ab = f / f[0]  # pins alpha_bar[0] to exactly 1
        ab = np.maximum(ab, 1e-30)
        return cls(T, ab)

    def alpha(self, t: int) -> float:
        """Single-step retention alpha_t = alpha_bar[t] / alpha_bar[t-1]."""
        if not 1 <= t <= self.T:
            raise ValueError(f"step t must be in [1, T], got {t}")
        return float(self.alpha_bar[t] / self.alpha_bar[t - 1])


@dataclass(frozen=True)
class TransitionModel:
    """Reference distributions for the edge and (optional) label channels."""

    kind: str
    m_edge: np.ndarray
    m_node: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in TRANSITION_KINDS:
            raise ValueError(f"kind must be one of {TRANSITION_KINDS}")
        m = np.asarray(self.m_edge, dtype=np.float64)
        if m.shape != (NUM_EDGE_STATES,) or abs(m.sum() - 1.0) > 1e-9 or np.any(m < 0):
            raise ValueError("m_edge must be a distribution over {absent, present}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "m_edge", m)
        if self.m_node is not None:
            mn = np.asarray(self.m_node, dtype=np.float64)
            if abs(mn.sum() - 1.0) > 1e-9 or np.any(mn < 0):
                raise ValueError("m_node must be a distribution")
            mn = mn.copy()
            mn.flags.writeable = False
            object.__setattr__(self, "m_node", mn)

    @classmethod
    def from_subgraphs(cls, subgraphs: list[Subgraph], kind: str = "marginal") -> "TransitionModel":
        """Marginal kind: empirical edge density over the training subgraphs."""
        m_node = None
        labeled = [s for s in subgraphs if s.X is not None]
        if labeled:
            k = int(max(s.X.max() for s in labeled)) + 1
            counts = np.zeros(k)
            for s in labeled:
                counts += np.bincount(np.asarray(s.X, dtype=np.int64), minlength=k)
            m_node = counts / counts.sum()
        if kind == "absorbing":
            return cls("absorbing", np.array([1.0, 0.0]), m_node)
        pairs = sum(s.n * (s.n - 1) // 2 for s in subgraphs)
        present = sum(s.num_edges for s in subgraphs)
        density = present / pairs if pairs else 0.0
        return cls("marginal", np.array([1.0 - density, density]), m_node)


@dataclass(frozen=True)
class DiffusionState:
    """A noisy subgraph state at step t, with its conditioning."""

    t: int
    A: np.ndarray
    X: np.ndarray | None = None
    C: np.ndarray | None = None
    Q: np.ndarray | None = None

    def with_local_context(self, n_max: int) -> "DiffusionState":
        return replace(self, Q=local_context(self.A, n_max))

    @property
    def n(self) -> int:
        return self.A.shape[0]


def qbar_matrix(ab_t: float, m: np.ndarray) -> np.ndarray:
    """Cumulative kernel: retain with prob ab_t, else resample from m."""
    k = len(m)
    return ab_t * np.eye(k) + (1.0 - ab_t) * np.outer(np.ones(k), m)


def qstep_matrix(alpha_t: float, m: np.ndarray) -> np.ndarray:
    return qbar_matrix(alpha_t, m)


def _triu(n: int):
    return np.triu_indices(n, k=1)


def forward_sample(
    s0: Subgraph,
    t: int,
    schedule: NoiseSchedule,
    transition: TransitionModel,
    rng: np.random.Generator,
    n_max: int | None = None,
) -> DiffusionState:
    """Draw a state at step t: each pair (and label) independently keeps its
    clean value with probability alpha_bar[t], else resamples from the
    reference distribution. t = 0 is the identity."""
    if not 0 <= t <= schedule.T:
        raise ValueError(f"t must be in [0, T], got {t}")
    ab = float(schedule.alpha_bar[t])
    n = s0.n
    iu = _triu(n)
    clean = s0.A[iu].astype(np.float64)
    p_present = ab * clean + (1.0 - ab) * transition.m_edge[1]
    draw = (rng.random(len(p_present)) < p_present).astype(np.int8)
    a = np.zeros((n, n), dtype=np.int8)
    a[iu] = draw
    a = a + a.T
    x = None
    if s0.X is not None and transition.m_node is not None:
        x = np.asarray(s0.X, dtype=np.int64).copy()
        resample = rng.random(n) >= ab
        if resample.any():
            x[resample] = rng.choice(len(transition.m_node), size=int(resample.sum()),
                                     p=transition.m_node)
    state = DiffusionState(t=t, A=a, X=x, C=s0.C)
    if n_max is not None:
        state = state.with_local_context(n_max)
    return state


def categorical_posterior(
    x_t: np.ndarray,
    p0_hat: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    m: np.ndarray,
) -> np.ndarray:
    """Per-item posterior over states at t-1.

    p(j) is proportional to Qstep_t[j, x_t] * sum_i p0_hat[i] * Qbar_{t-1}[i, j].
    """
    if t < 1:
        raise ValueError("posterior needs t >= 1")
    sums = p0_hat.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("p0_hat rows must sum to 1")
    qs = qstep_matrix(schedule.alpha(t), m)
    qb_prev = qbar_matrix(float(schedule.alpha_bar[t - 1]), m)
    back = p0_hat @ qb_prev                  # (items, k)
    like = qs[:, np.asarray(x_t, dtype=np.int64)].T  # (items, k): Qstep[j, x_t]
    num = back * like
    return num / num.sum(axis=-1, keepdims=True)


def posterior_step(
    state_t: DiffusionState,
    p0_hat: np.ndarray,
    schedule: NoiseSchedule,
    transition: TransitionModel,
) -> np.ndarray:
    """Edge-channel posterior for every unordered pair (upper-triangle order)."""
    iu = _triu(state_t.n)
    return categorical_posterior(state_t.A[iu], p0_hat, state_t.t, schedule, transition.m_edge)


# ---------------------------------------------------------------------------
# Denoiser application and loss
# ---------------------------------------------------------------------------

def denoiser_apply(
    denoiser: EdgeNodeDenoiser,
    state: DiffusionState,
    T: int,
) -> tuple[torch.Tensor, torch.Tensor | None]:
    """Run the denoiser on a state; returns symmetric (n, n, 2) edge logits
    plus (n, K) label logits when the model carries a label head."""
    cfg = denoiser.config
    if state.Q is None:
        raise ValueError("state needs a freshly computed local context Q")
    if cfg.context_dim and state.C is None:
        raise ValueError("model expects global-context rows but state has none")
    tau = state.t / max(T, 1)
    lab = label_onehot(state.X, cfg.num_label_classes) if cfg.num_label_classes else None
    node_feat = build_node_features(cfg, state.Q, lab, tau)
    ctx = torch.from_numpy(state.C.astype(np.float64)) if cfg.context_dim else None
    edge_oh = edge_state_onehot(state.A)
    return denoiser(edge_oh, node_feat, ctx)


def loss(
    denoiser: EdgeNodeDenoiser,
    batch: list[tuple[Subgraph, DiffusionState]],
    T: int,
) -> torch.Tensor:
    """Mean cross-entropy of the clean edge (and label) states under the
    denoiser logits evaluated at the noisy states."""
    if not batch:
        raise ValueError("batch must be nonempty")
    total = torch.zeros((), dtype=torch.float64)
    for s0, state in batch:
        edge_logits, node_logits = denoiser_apply(denoiser, state, T)
        iu = _triu(s0.n)
        pair_logits = edge_logits[iu]
        clean = torch.from_numpy(s0.A[iu].astype(np.int64))
        term = torch.nn.functional.cross_entropy(pair_logits, clean)
        if node_logits is not None:
            labels = torch.from_numpy(np.array(s0.X, dtype=np.int64))
            term = term + torch.nn.functional.cross_entropy(node_logits, labels)
        total = total + term
    return total / len(batch)


# ---------------------------------------------------------------------------
# Model bundle and training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    T: int = 500
    layers: int = 4
    hidden: int = 64
    steps: int = 2000
    batch: int = 8
    lr: float = 1e-3
    seed: int = 0
    transition: str = "marginal"
    n_max: int = 50
    time_dim: int = 8
    schedule_s: float = 0.008
    wall_clock_cap_s: float | None = None

    def __post_init__(self):
        if self.transition not in TRANSITION_KINDS:
            raise ValueError(f"transition must be one of {TRANSITION_KINDS}")
        if self.T < 0 or self.steps < 0 or self.batch < 1:
            raise ValueError("invalid training sizes")


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """Trained bundle: denoiser weights, schedule, transition and histograms."""

    denoiser: EdgeNodeDenoiser
    schedule: NoiseSchedule
    transition: TransitionModel
    config: TrainConfig
    histograms: Histograms

    @property
    def T(self) -> int:
        return self.schedule.T


def init_model(subgraphs: list[Subgraph], config: TrainConfig) -> DiffusionModel:
    """Build an untrained model whose shapes match the training collection."""
    if not subgraphs:
        raise ValueError("need at least one training subgraph")
    transition = TransitionModel.from_subgraphs(subgraphs, config.transition)
    schedule = NoiseSchedule.cosine(config.T, config.schedule_s)
    k_labels = len(transition.m_node) if transition.m_node is not None else 0
    ctx_dim = subgraphs[0].C.shape[1] if subgraphs[0].C is not None else 0
    torch.manual_seed(config.seed)
    den = EdgeNodeDenoiser(DenoiserConfig(
        layers=config.layers,
        hidden=config.hidden,
        num_label_classes=k_labels,
        context_dim=ctx_dim,
        time_dim=config.time_dim,
    ))
    return DiffusionModel(den, schedule, transition, config, build_histograms(subgraphs))


def train(subgraphs: list[Subgraph], config: TrainConfig) -> tuple[DiffusionModel, np.ndarray]:
    """Stochastic-gradient training over (subgraph, step) draws.

    Deterministic under config.seed: model init, data order and the gradient
    reduction order are all fixed. Returns the model and the loss trajectory.
    """
    model = init_model(subgraphs, config)
    oversize = [s.n for s in subgraphs if s.n > config.n_max]
    if oversize:
        raise ValueError(f"{len(oversize)} subgraphs exceed n_max={config.n_max}")
    if config.T == 0 and config.steps > 0:
        raise ValueError("cannot train with a degenerate T=0 schedule")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(1,)))
    opt = torch.optim.Adam(model.denoiser.parameters(), lr=config.lr)
    losses = np.zeros(config.steps)
    started = time.monotonic()
    for step in range(config.steps):
        idx = rng.integers(0, len(subgraphs), size=config.batch)
        ts = rng.integers(1, max(config.T, 1) + 1, size=config.batch)
        batch = []
        for i, t in zip(idx, ts):
            s0 = subgraphs[int(i)]
            state = forward_sample(s0, int(t), model.schedule, model.transition, rng,
                                   n_max=config.n_max)
            batch.append((s0, state))
        value = loss(model.denoiser, batch, config.T)
        if not torch.isfinite(value):
            raise RuntimeError(
                f"training diverged at step {step}: loss={value.item()} "
                f"(lr={config.lr}, batch={config.batch})"
            )
        opt.zero_grad()
        value.backward()
        opt.step()
        losses[step] = value.item()
        if config.wall_clock_cap_s is not None and time.monotonic() - started > config.wall_clock_cap_s:
            losses = losses[: step + 1]
            break
    return model, losses


# ---------------------------------------------------------------------------
# Reverse sampling
# ---------------------------------------------------------------------------

def reverse_sample(
    model: DiffusionModel,
    n: int,
    c_rows: np.ndarray | None,
    rng: np.random.Generator,
    parent_ids: tuple[int, ...] | None = None,
    post_step=None,
    reweight=None,
) -> Subgraph:
    """Sample a subgraph over n nodes conditioned on the given context rows.

    Starts every pair at the reference distribution and walks t = T..1; at
    each step the local context is recomputed, the denoiser predicts clean
    states, and each pair steps back through the posterior independently.
    Optional hooks: ``reweight(t, state, probs) -> probs`` adjusts the pair
    posterior before sampling; ``post_step(t_next, A, X) -> (A, X)`` edits the
    sampled state after every step (used for the editing masks).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    cfg = model.denoiser.config
    if cfg.context_dim:
        if c_rows is None:
            raise ValueError("model expects context rows")
        c_rows = np.asarray(c_rows, dtype=np.float64)
        if c_rows.shape != (n, cfg.context_dim):
            raise ValueError(f"context rows must have shape ({n}, {cfg.context_dim})")
    iu = _triu(n)
    a = np.zeros((n, n), dtype=np.int8)
    draw = (rng.random(len(iu[0])) < model.transition.m_edge[1]).astype(np.int8)
    a[iu] = draw
    a = a + a.T
    x = None
    if cfg.num_label_classes:
        x = rng.choice(cfg.num_label_classes, size=n, p=model.transition.m_node)
    for t in range(model.T, 0, -1):
        state = DiffusionState(t=t, A=a, X=x, C=c_rows).with_local_context(model.config.n_max)
        with torch.no_grad():
            edge_logits, node_logits = denoiser_apply(model.denoiser, state, model.T)
        p0 = torch.softmax(edge_logits[iu], dim=-1).numpy()
        probs = categorical_posterior(a[iu], p0, t, model.schedule, model.transition.m_edge)
        if reweight is not None:
            probs = reweight(t, state, probs)
        draw = (rng.random(len(probs)) < probs[:, 1]).astype(np.int8)
        a = np.zeros((n, n), dtype=np.int8)
        a[iu] = draw
        a = a + a.T
        if x is not None:
            p0_x = torch.softmax(node_logits, dim=-1).numpy()
            probs_x = categorical_posterior(x, p0_x, t, model.schedule, model.transition.m_node)
            cum = probs_x.cumsum(axis=-1)
            u = rng.random(n)[:, None]
            x = (u >= cum).sum(axis=-1).astype(np.int64)
        if post_step is not None:
            a, x = post_step(t - 1, a, x)
    return Subgraph(
        parent_ids=parent_ids if parent_ids is not None else tuple(range(n)),
        A=a,
        X=x,
        C=c_rows,
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "subdiff-checkpoint-v1"


def _array_entry(arr: np.ndarray) -> dict:
    arr = np.asarray(arr)
    return {"shape": list(arr.shape), "data": [float(v) for v in arr.reshape(-1)]}


def _array_from_entry(entry: dict) -> np.ndarray:
    return np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])


def save_checkpoint(model: DiffusionModel, path) -> None:
    """Single JSON document: named flat arrays with shapes plus the config."""
    from .ioutil import atomic_write_json

    arrays = {f"denoiser.{name}": _array_entry(p.detach().numpy())
              for name, p in model.denoiser.named_parameters()}
    arrays["schedule.alpha_bar"] = _array_entry(model.schedule.alpha_bar)
    arrays["transition.m_edge"] = _array_entry(model.transition.m_edge)
    if model.transition.m_node is not None:
        arrays["transition.m_node"] = _array_entry(model.transition.m_node)
    h = model.histograms
    arrays["hist.context_rows"] = _array_entry(h.context_rows)
    arrays["hist.context_counts"] = _array_entry(h.context_counts)
    arrays["hist.sizes"] = _array_entry(h.sizes)
    arrays["hist.size_counts"] = _array_entry(h.size_counts)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "kind": "diffusion",
        "config": model.config.__dict__,
        "denoiser_config": model.denoiser.config.__dict__,
        "transition_kind": model.transition.kind,
        "arrays": arrays,
    }
    atomic_write_json(path, doc)


def load_checkpoint(path) -> DiffusionModel:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("kind") != "diffusion":
        raise ValueError(f"{path} is not a diffusion checkpoint")
    config = TrainConfig(**doc["config"])
    den_cfg = DenoiserConfig(**doc["denoiser_config"])
    arrays = doc["arrays"]
    den = EdgeNodeDenoiser(den_cfg)
    state = {
        name: torch.from_numpy(_array_from_entry(arrays[f"denoiser.{name}"]))
        for name, _ in den.named_parameters()
    }
    den.load_state_dict(state)
    schedule = NoiseSchedule(config.T, _array_from_entry(arrays["schedule.alpha_bar"]))
    m_node = (_array_from_entry(arrays["transition.m_node"])
              if "transition.m_node" in arrays else None)
    transition = TransitionModel(doc["transition_kind"],
                                 _array_from_entry(arrays["transition.m_edge"]), m_node)
    hist = Histograms(
        _array_from_entry(arrays["hist.context_rows"]),
        _array_from_entry(arrays["hist.context_counts"]).astype(np.int64),
        _array_from_entry(arrays["hist.sizes"]).astype(np.int64),
        _array_from_entry(arrays["hist.size_counts"]).astype(np.int64),
    )
    return DiffusionModel(den, schedule, transition, config, hist)
