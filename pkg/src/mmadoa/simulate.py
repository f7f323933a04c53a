"""Snapshot synthesis, Monte Carlo RMSE experiments, and parameter sweeps.

Received signals are always generated from the quantized calibration data
(the truth provider), while the estimator interpolates with a fitted
model; the gap between the two is the model-mismatch bias under study.
Every run draws from its own RNG stream derived from (seed, angle index,
run index), so results are reproducible bit for bit and independent of
execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import ait, wavefield
from .calibration import EmfDataset
from .errors import ArgError
from .estimator import MlDoaEstimator, SearchConfig, SnapshotBatch
from .provider import AntennaResponseProvider
from .ula import Axis, VirtualUlaConfig


@dataclass(frozen=True)
class AitParams:
    """Estimator-model descriptor for the sector-mapping family."""

    elements: int = 4
    spacing: float = 0.25
    axis: Axis = Axis.Z
    sector_size: float = 30.0
    overlap: float = 15.0


@dataclass(frozen=True)
class WmParams:
    """Estimator-model descriptor for the wavefield family."""

    coefficients: int = 13


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment: model, noise level, and repetition counts.

    ``truth_angles=None`` means every calibration grid angle. ``runs`` is
    the per-angle Monte Carlo count; the desk-scale default of 100 keeps
    suites fast, raise it for full-scale studies.
    """

    estimator: AitParams | WmParams = field(default_factory=WmParams)
    snr_db: float = 20.0
    snapshots: int = 1000
    runs: int = 100
    seed: int = 0
    truth_angles: tuple[float, ...] | None = None
    coarse_step: float = 0.5
    refine_tolerance: float = 0.01

    def __post_init__(self):
        if self.runs < 1 or self.snapshots < 1:
            raise ArgError("runs and snapshots must be at least 1")


@dataclass(frozen=True)
class RmseResult:
    """Per-angle and mean RMSE (degrees) for one experiment point."""

    per_angle: tuple[tuple[float, float], ...]
    mean_rmse: float
    config: dict

    def rows(self):
        for theta, value in self.per_angle:
            yield theta, value, self.mean_rmse


class SweepKind(str, Enum):
    ELEMENT_COUNT = "element_count"
    SPACING = "spacing"
    SECTOR_SIZE = "sector_size"
    WM_COEFFICIENTS = "wm_coefficients"
    SNR = "snr"
    ORIENTATION = "orientation"


_RMSE_SWEEPS = {
    SweepKind.ELEMENT_COUNT,
    SweepKind.SPACING,
    SweepKind.SECTOR_SIZE,
    SweepKind.WM_COEFFICIENTS,
    SweepKind.SNR,
}
_ERROR_SWEEPS = {SweepKind.ELEMENT_COUNT, SweepKind.SPACING, SweepKind.ORIENTATION}


def synth_snapshots(
    truth: EmfDataset, theta_deg, snr_db: float, snapshots: int, seed
) -> SnapshotBatch:
    """Generate received snapshots from the quantized truth responses.

    Source amplitudes are i.i.d. circular complex Gaussian with unit
    variance; the noise variance is set so that the SNR equals the mean
    over ports of the received signal power divided by the per-port noise
    variance (independent of the port count). ``snr_db=inf`` disables the
    noise entirely. Angles must be calibration grid points.

    ``seed`` accepts an int or a numpy SeedSequence (the harness passes
    pre-derived per-run sequences).
    """
    angles = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    if snapshots < 1:
        raise ArgError("snapshot count must be at least 1")
    response = truth.response_matrix(angles)  # M x Q; raises GridError off grid
    rng = np.random.default_rng(seed)
    shape = (angles.size, snapshots)
    amplitudes = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    observations = response @ amplitudes
    if not math.isinf(snr_db):
        signal_power = float(np.mean(np.sum(np.abs(response) ** 2, axis=1)))
        noise_var = signal_power / 10.0 ** (snr_db / 10.0)
        noise = (
            rng.standard_normal(observations.shape) + 1j * rng.standard_normal(observations.shape)
        ) * math.sqrt(noise_var / 2.0)
        observations = observations + noise
    return SnapshotBatch(
        observations=observations,
        truth_angles=tuple(float(t) for t in angles),
        snr_db=float(snr_db),
        seed=None if isinstance(seed, np.random.SeedSequence) else seed,
    )


def rmse(estimates, truth_deg: float) -> float:
    """Root mean squared deviation of the estimates from the truth, degrees."""
    estimates = list(np.atleast_1d(estimates))
    if not estimates:
        raise ArgError("need at least one estimate")
    return math.sqrt(math.fsum((e - truth_deg) ** 2 for e in estimates) / len(estimates))


def build_model(ds: EmfDataset, params: AitParams | WmParams) -> AntennaResponseProvider:
    """Fit the described estimator model to the calibration data."""
    if isinstance(params, WmParams):
        return wavefield.fit(ds, params.coefficients)
    ula = VirtualUlaConfig(
        element_count=params.elements, spacing=params.spacing, axis=params.axis
    )
    plan = ait.partition_fov(params.sector_size, params.overlap)
    return ait.fit(ds, ula, plan)


def _config_echo(cfg: ExperimentConfig, estimator=None) -> dict:
    params = estimator if estimator is not None else cfg.estimator
    if isinstance(params, AitParams):
        model = {
            "family": "ait",
            "elements": params.elements,
            "spacing": params.spacing,
            "axis": params.axis.value,
            "sector_size": params.sector_size,
            "overlap": params.overlap,
        }
    else:
        model = {"family": "wm", "coefficients": params.coefficients}
    return {
        "estimator": model,
        "snr_db": cfg.snr_db,
        "snapshots": cfg.snapshots,
        "runs": cfg.runs,
        "seed": cfg.seed,
    }


def run_monte_carlo(
    ds: EmfDataset, cfg: ExperimentConfig, model: AntennaResponseProvider | None = None
) -> RmseResult:
    """Monte Carlo single-source RMSE over the configured truth angles.

    Each (angle, run) pair gets its own RNG stream spawned from the seed,
    so the result does not depend on iteration order; per-angle squared
    errors are accumulated with exact summation.
    """
    if model is None:
        model = build_model(ds, cfg.estimator)
    search = SearchConfig(
        source_count=1, coarse_step=cfg.coarse_step, refine_tolerance=cfg.refine_tolerance
    )
    engine = MlDoaEstimator(model, search)
    angles = (
        np.asarray(cfg.truth_angles, dtype=float)
        if cfg.truth_angles is not None
        else ds.grid.angles
    )
    per_angle = []
    for ai, theta in enumerate(angles):
        grid_index = ds.grid.index_of(theta)
        estimates = []
        for run in range(cfg.runs):
            stream = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(grid_index, run))
            batch = synth_snapshots(ds, theta, cfg.snr_db, cfg.snapshots, stream)
            estimates.append(float(engine.estimate(batch)[0]))
        per_angle.append((float(theta), rmse(estimates, float(theta))))
    mean = math.fsum(v for _, v in per_angle) / len(per_angle)
    return RmseResult(per_angle=tuple(per_angle), mean_rmse=mean, config=_config_echo(cfg))


def _sweep_config(cfg: ExperimentConfig, kind: SweepKind, value) -> ExperimentConfig:
    """Apply one sweep value to the experiment configuration."""
    params = cfg.estimator
    if kind is SweepKind.SNR:
        return replace(cfg, snr_db=float(value))
    if kind is SweepKind.WM_COEFFICIENTS:
        if not isinstance(params, WmParams):
            raise ArgError("coefficient-count sweep requires a wavefield estimator model")
        return replace(cfg, estimator=replace(params, coefficients=int(value)))
    if not isinstance(params, AitParams):
        raise ArgError(f"{kind.value} sweep requires a sector-mapping estimator model")
    if kind is SweepKind.ELEMENT_COUNT:
        return replace(cfg, estimator=replace(params, elements=int(value)))
    if kind is SweepKind.SPACING:
        return replace(cfg, estimator=replace(params, spacing=float(value)))
    if kind is SweepKind.SECTOR_SIZE:
        # half-size overlap, except the classical 5-degree sectors which use none
        size = float(value)
        overlap = 0.0 if size == 5.0 else size / 2.0
        return replace(cfg, estimator=replace(params, sector_size=size, overlap=overlap))
    raise ArgError(f"{kind.value} is not an RMSE sweep")


def run_sweep(
    ds: EmfDataset, cfg: ExperimentConfig, kind: SweepKind, values
) -> list[tuple[float, RmseResult]]:
    """Monte Carlo RMSE at each sweep value; fully deterministic per seed."""
    kind = SweepKind(kind)
    if kind not in _RMSE_SWEEPS:
        raise ArgError(f"{kind.value} cannot be swept for RMSE")
    values = list(values)
    if not values:
        raise ArgError("sweep needs at least one value")
    out = []
    for value in values:
        point_cfg = _sweep_config(cfg, kind, value)
        out.append((float(value), run_monte_carlo(ds, point_cfg)))
    return out


def transformation_error_sweep(
    ds: EmfDataset, base: AitParams, kind: SweepKind, values
) -> list[tuple[float | str, float]]:
    """Noise-free mean transformation error at each sweep value."""
    kind = SweepKind(kind)
    if kind not in _ERROR_SWEEPS:
        raise ArgError(f"{kind.value} is not a transformation-error sweep")
    values = list(values)
    if not values:
        raise ArgError("sweep needs at least one value")
    out = []
    for value in values:
        if kind is SweepKind.ELEMENT_COUNT:
            params = replace(base, elements=int(value))
            label: float | str = float(value)
        elif kind is SweepKind.SPACING:
            params = replace(base, spacing=float(value))
            label = float(value)
        else:
            params = replace(base, axis=Axis(value))
            label = Axis(value).value
        model = build_model(ds, params)
        out.append((label, ait.mean_transformation_error(model, ds)))
    return out
