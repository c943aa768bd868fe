"""Subgraph diffusion models for refining a single, partially observed network."""

from .graphs import (
    DisconnectedGraphError,
    Graph,
    GraphStats,
    count_triangles_per_node,
    graph_stats,
    laplacian_eigens,
    largest_connected_component,
    load_edge_list,
    save_edge_list,
)
from .datasets import (
    BAShapes,
    CorruptionResult,
    CorruptionSpec,
    barabasi_albert,
    corrupt,
    generate_ba_shapes,
)
from .subgraphs import (
    Histograms,
    Subgraph,
    attach_global_context,
    build_histograms,
    extract_subgraph,
    global_context,
    local_context,
    sample_ego_networks,
    sample_training_set,
    subsample,
)
from .diffusion import (
    DiffusionModel,
    DiffusionState,
    NoiseSchedule,
    TrainConfig,
    TransitionModel,
    denoiser_apply,
    forward_sample,
    load_checkpoint,
    posterior_step,
    reverse_sample,
    save_checkpoint,
    train,
)
from .editing import (
    AttributeRegressor,
    EditRequest,
    attribute_value,
    denoise,
    expand,
    run_edit,
    style_transfer,
    train_regressor,
)
from .stitching import StitchPlan, coalesce, generate_large
from .metrics import (
    MetricReport,
    consensus,
    distinct_fraction,
    diversity,
    edge_overlap,
    metric_report,
    sparsity,
)
from .pipeline import RunConfig, emit_plot_data, run_pipeline

__version__ = "0.1.0"
