"""Graph-based interpolation of missing EEG channels.

Multichannel signals are modeled as signals on a graph over the electrode
montage. Missing channels are reconstructed by the closed-form minimizer of
the graph signal variation; the graph itself can be built from electrode
geometry, weighted by phase-lag connectivity, or learned end to end by
gradient descent on reconstruction loss. A preprocessing pipeline maps
heterogeneous datasets onto one union montage, and a seeded evaluation
harness benchmarks interpolators under random channel masks.
"""

__version__ = "0.1.0"

from .construction import (
    SpectralEstimationConfig,
    default_spectral_config,
    spatial_graph,
    wpli_matrix,
    wpli_weighted_spatial,
)
from .evaluate import (
    InterpolationMethod,
    ReconCell,
    ReconReport,
    eval_masked_reconstruction,
    graph_method,
    mean_method,
    spherical_method,
    write_recon_csv,
)
from .graphs import (
    Graph,
    Laplacian,
    Montage,
    Spectrum,
    build_laplacian,
    gft,
    graph_from_dict,
    graph_to_dict,
    igft,
    load_graph,
    load_montage,
    montage_from_dict,
    montage_to_dict,
    save_graph,
    save_montage,
    spectrum,
    subgraph,
    total_variation,
    total_variation_pairwise,
    total_variation_spectral,
)
from .interpolation import (
    MaskSpec,
    PartitionedLaplacian,
    SingularMaskError,
    interpolate,
    partition_laplacian,
    spherical_spline_interpolate,
)
from .learning import (
    AdjacencyParams,
    LearnConfig,
    LossTrace,
    finetune_graph,
    learn_graph,
    loss_gradient,
    r_squared,
    reconstruction_loss,
    write_loss_trace_csv,
)
from .pipeline import (
    EpochSet,
    UnionMontage,
    bandpass,
    euclidean_align,
    load_epochs,
    map_to_union,
    resample,
    save_epochs,
    union_montage,
    window,
)
from .synth import (
    SynthConfig,
    random_smooth_graph,
    synth_generate,
    synthetic_montage,
)

__all__ = [
    "AdjacencyParams",
    "EpochSet",
    "Graph",
    "InterpolationMethod",
    "Laplacian",
    "LearnConfig",
    "LossTrace",
    "MaskSpec",
    "Montage",
    "PartitionedLaplacian",
    "ReconCell",
    "ReconReport",
    "SingularMaskError",
    "SpectralEstimationConfig",
    "Spectrum",
    "SynthConfig",
    "UnionMontage",
    "bandpass",
    "build_laplacian",
    "default_spectral_config",
    "euclidean_align",
    "eval_masked_reconstruction",
    "finetune_graph",
    "gft",
    "graph_from_dict",
    "graph_method",
    "graph_to_dict",
    "igft",
    "interpolate",
    "learn_graph",
    "load_epochs",
    "load_graph",
    "load_montage",
    "loss_gradient",
    "map_to_union",
    "mean_method",
    "montage_from_dict",
    "montage_to_dict",
    "partition_laplacian",
    "r_squared",
    "random_smooth_graph",
    "reconstruction_loss",
    "resample",
    "save_epochs",
    "save_graph",
    "save_montage",
    "spatial_graph",
    "spectrum",
    "spherical_method",
    "spherical_spline_interpolate",
    "subgraph",
    "synth_generate",
    "synthetic_montage",
    "total_variation",
    "total_variation_pairwise",
    "total_variation_spectral",
    "union_montage",
    "window",
    "wpli_matrix",
    "wpli_weighted_spatial",
    "write_loss_trace_csv",
    "write_recon_csv",
]
