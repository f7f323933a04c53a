"""Multi-mode antenna response modeling and ML direction-of-arrival estimation.

Two interpolation models for spatially quantized antenna calibration data
(a sector-mapped virtual linear array and a truncated Fourier wavefield
expansion), a coherent maximum-likelihood DoA estimator that accepts either
model, and a Monte Carlo harness for transformation-error and RMSE
parameter studies.
"""

from . import ait, estimator, simulate, wavefield
from .calibration import AngleGrid, EmfDataset, gain_pattern, load_emf, save_emf
from .errors import (
    ArgError,
    DegenerateDataError,
    DomainError,
    GridError,
    IngestError,
    MmadoaError,
    PlanError,
    SchemaError,
    SingularityError,
)
from .estimator import (
    CovEstimate,
    MlDoaEstimator,
    SearchConfig,
    SnapshotBatch,
    estimate_doa,
    ls_signal_estimate,
    ml_objective,
    projection,
    sample_covariance,
)
from .provider import AntennaResponseProvider
from .simulate import (
    AitParams,
    ExperimentConfig,
    RmseResult,
    SweepKind,
    WmParams,
    rmse,
    run_sweep,
    synth_snapshots,
    transformation_error_sweep,
)
from .ula import Axis, VirtualUlaConfig, steering_matrix, steering_vector

__version__ = "0.1.0"

__all__ = [
    "AngleGrid",
    "AntennaResponseProvider",
    "ArgError",
    "AitParams",
    "Axis",
    "CovEstimate",
    "DegenerateDataError",
    "DomainError",
    "EmfDataset",
    "ExperimentConfig",
    "GridError",
    "IngestError",
    "MlDoaEstimator",
    "MmadoaError",
    "PlanError",
    "RmseResult",
    "SchemaError",
    "SearchConfig",
    "SingularityError",
    "SnapshotBatch",
    "SweepKind",
    "VirtualUlaConfig",
    "WmParams",
    "ait",
    "estimate_doa",
    "estimator",
    "gain_pattern",
    "load_emf",
    "ls_signal_estimate",
    "ml_objective",
    "projection",
    "rmse",
    "run_sweep",
    "sample_covariance",
    "save_emf",
    "simulate",
    "steering_matrix",
    "steering_vector",
    "synth_snapshots",
    "transformation_error_sweep",
    "wavefield",
]
