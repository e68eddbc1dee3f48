"""Flood extent mapping with a hidden Markov tree over flow dependencies.

The library turns a DEM plus co-registered feature bands into a per-pixel
flood/dry map. A merge tree built from the DEM encodes which pixels must be
flooded before which others; exact belief propagation on that tree drives EM
parameter learning and a MAP labeling that respects the flow partial order.
"""

from .baseline import label_propagation_smooth, pixelwise_classify
from .errors import (
    AlignmentError,
    DataError,
    FloodHmtError,
    GridParseError,
    NumericalError,
    ParameterError,
    UsageError,
)
from .flowtree import FlowTree, ancestors, build_flow_tree, dump_tree, validate_partial_order
from .infer import (
    Evidence,
    Posteriors,
    brute_force_map,
    brute_force_posterior,
    compute_evidence,
    joint_log_prob,
    max_sum,
    sum_product,
)
from .learn import EmConfig, EmTrace, em_fit, m_step
from .metrics import ClassMetrics, Confusion, confusion, precision_recall_f1, report
from .model import (
    ModelParams,
    fit_initial_params,
    local_log_density,
    params_from_text,
    params_to_text,
)
from .raster import (
    Grid,
    SceneBundle,
    load_scene,
    parse_ascii_grid,
    read_grid,
    write_ascii_grid,
    write_grid,
    write_ppm,
)
from .synth import SynthConfig, flat_flood_oracle, generate_scene, write_scene

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ClassMetrics",
    "Confusion",
    "DataError",
    "EmConfig",
    "EmTrace",
    "Evidence",
    "FloodHmtError",
    "FlowTree",
    "Grid",
    "GridParseError",
    "ModelParams",
    "NumericalError",
    "ParameterError",
    "Posteriors",
    "SceneBundle",
    "SynthConfig",
    "UsageError",
    "ancestors",
    "brute_force_map",
    "brute_force_posterior",
    "build_flow_tree",
    "compute_evidence",
    "confusion",
    "dump_tree",
    "em_fit",
    "fit_initial_params",
    "flat_flood_oracle",
    "generate_scene",
    "joint_log_prob",
    "label_propagation_smooth",
    "load_scene",
    "local_log_density",
    "m_step",
    "max_sum",
    "parse_ascii_grid",
    "params_from_text",
    "params_to_text",
    "pixelwise_classify",
    "precision_recall_f1",
    "read_grid",
    "report",
    "sum_product",
    "validate_partial_order",
    "write_ascii_grid",
    "write_grid",
    "write_ppm",
    "write_scene",
    "__version__",
]
