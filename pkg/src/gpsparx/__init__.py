"""GP-SPARX wind-farm modelling toolkit.

Synthetic wake-affected farm data, direction-specific Gaussian-process
spatial autoregressive models, sector switching between them, and polar
error maps over a full wind-direction sweep.
"""

from .errors import ConditioningError, FitError, GpSparxError, InputError, InvariantError, MetricError
from .geometry import (
    FarmLayout,
    WakeGeometryParams,
    WakeGraph,
    build_wake_graph,
    grid_layout,
    topological_order,
)
from .simulator import (
    FarmDataset,
    FreeStreamProcess,
    SimulationConfig,
    WindSample,
    combine_deficits,
    jensen_deficit,
    simulate,
)
from .gp import FitOptions, GpHyperparams, TrainedGp, fit, log_marginal_likelihood, predict, se_kernel
from .sparx import GpSparxModel, build_design, predict_cascade, predict_osa, train_pattern
from .switching import SectorTable, build_sectors, predict_switched, select_model
from .evaluation import ErrorRecords, PolarErrorMap, bin_polar, evaluate_sweep, nmse
from .experiment import ExperimentConfig

__version__ = "0.1.0"
