"""tokensieve: training-free visual token compression with text-guided recovery.

A bundle of visual token embeddings is filtered by class-token saliency,
topped up with question-relevant tokens by text similarity, and the
remainder is clustered and merged so background content survives. All
selection thresholds adapt per instance through a local-outlier-factor
filter over the score distribution.
"""

from .cost import ModelConfig, kv_cache_bytes, prefill_flops
from .io import read_bundle, read_csv_matrix, write_bundle, write_report
from .lof import LofTable, build_lof_table, count_salient, dynamic_select
from .pipeline import compress, order_output
from .recovery import assign_clusters, merge_clusters, seed_centers
from .scoring import minmax_normalize, project_tokens, softmax, text_score, visual_score
from .synth import Pcg32, gen_synthetic, oracle_assign, oracle_lof
from .types import (
    BundleError,
    CompressionReport,
    FileFormatError,
    LofParams,
    OutputSlot,
    PipelineError,
    ProjectionMap,
    ScoreVector,
    SelectionResult,
    TokenBundle,
    TokenSieveError,
    validate_bundle,
)
from .viz import render_grid, render_heat, render_mask

__version__ = "0.1.0"

__all__ = [
    "BundleError",
    "CompressionReport",
    "FileFormatError",
    "LofParams",
    "LofTable",
    "ModelConfig",
    "OutputSlot",
    "Pcg32",
    "PipelineError",
    "ProjectionMap",
    "ScoreVector",
    "SelectionResult",
    "TokenBundle",
    "TokenSieveError",
    "assign_clusters",
    "build_lof_table",
    "compress",
    "count_salient",
    "dynamic_select",
    "gen_synthetic",
    "kv_cache_bytes",
    "merge_clusters",
    "minmax_normalize",
    "oracle_assign",
    "oracle_lof",
    "order_output",
    "prefill_flops",
    "project_tokens",
    "read_bundle",
    "read_csv_matrix",
    "render_grid",
    "render_heat",
    "render_mask",
    "seed_centers",
    "softmax",
    "text_score",
    "validate_bundle",
    "visual_score",
    "write_bundle",
    "write_report",
]
