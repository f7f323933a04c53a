"""Coherent deterministic maximum-likelihood direction-of-arrival estimation.

The estimator minimizes the trace of the sample covariance projected onto
the orthogonal complement of the candidate response subspace. It works
against any response provider, so model mismatch shows up directly as
estimation bias. The search is a coarse grid scan followed by bounded
golden-section refinement (coordinate-wise for two sources).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibration import FOV_DEG
from .errors import ArgError, SchemaError, SingularityError
from .provider import AntennaResponseProvider

_RANK_RTOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class SnapshotBatch:
    """Received-signal snapshots, one column per time sample.

    Optional ground-truth metadata travels with the batch so experiment
    code can score estimates without extra bookkeeping.
    """

    observations: np.ndarray
    truth_angles: tuple[float, ...] | None = None
    snr_db: float | None = None
    seed: int | None = None

    def __post_init__(self):
        y = np.asarray(self.observations, dtype=complex)
        if y.ndim != 2 or y.shape[1] < 1:
            raise ArgError("observations must be an M x K matrix with K >= 1")
        if not np.all(np.isfinite(y)):
            raise ArgError("observations must be finite")
        y = y.copy(order="C")
        y.setflags(write=False)
        object.__setattr__(self, "observations", y)

    @property
    def num_ports(self) -> int:
        return int(self.observations.shape[0])

    @property
    def num_snapshots(self) -> int:
        return int(self.observations.shape[1])


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Sample covariance; validated Hermitian and positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ArgError("covariance must be square")
        scale = max(np.abs(r).max(), 1.0)
        if np.abs(r - r.conj().T).max() > 1e-12 * scale:
            raise ArgError("covariance is not Hermitian")
        trace = float(np.trace(r).real)
        eigmin = float(np.linalg.eigvalsh(r)[0])
        if eigmin < -1e-10 * max(trace, 1.0):
            raise ArgError(f"covariance has a negative eigenvalue {eigmin:g}")
        r = r.copy(order="C")
        r.setflags(write=False)
        object.__setattr__(self, "matrix", r)


@dataclass(frozen=True)
class SearchConfig:
    """Grid-search setup: coarse step, refinement tolerance, source count."""

    source_count: int = 1
    coarse_step: float = 0.5
    refine_tolerance: float = 0.01
    fov: tuple[float, float] = FOV_DEG

    def __post_init__(self):
        if int(self.source_count) != self.source_count or self.source_count < 1:
            raise ArgError("source_count must be a positive integer")
        object.__setattr__(self, "source_count", int(self.source_count))
        if not 0.0 < self.refine_tolerance < self.coarse_step:
            raise ArgError("need 0 < refine_tolerance < coarse_step")
        if self.fov[0] >= self.fov[1]:
            raise ArgError("field of view must be a nonempty interval")


def sample_covariance(batch: SnapshotBatch) -> CovEstimate:
    """Average outer product of the snapshots: (1/K) * sum_k y_k y_k^H."""
    y = batch.observations
    return CovEstimate(matrix=(y @ y.conj().T) / batch.num_snapshots)


def _as_matrix(candidate) -> np.ndarray:
    a = np.asarray(candidate, dtype=complex)
    if a.ndim == 1:
        a = a[:, np.newaxis]
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise ArgError("candidate response must be a tall M x Q matrix")
    return a


def _check_rank(a: np.ndarray):
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < _RANK_RTOL * sv[0]:
        raise SingularityError("candidate response matrix is numerically rank deficient")


def projection(candidate) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projector onto span(A) and its complement.

    Computes A (A^H A)^-1 A^H with the Hermitian Gram; raises
    SingularityError when the smallest singular value of A falls below
    1e-10 of the largest.
    """
    a = _as_matrix(candidate)
    _check_rank(a)
    gram = a.conj().T @ a
    pi = a @ np.linalg.solve(gram, a.conj().T)
    return pi, np.eye(a.shape[0]) - pi


def ml_objective(cov: CovEstimate | np.ndarray, candidate) -> float:
    """Trace of the covariance projected off the candidate subspace."""
    r = cov.matrix if isinstance(cov, CovEstimate) else np.asarray(cov)
    _, pi_perp = projection(candidate)
    return float(np.trace(pi_perp @ r).real)


def ls_signal_estimate(batch: SnapshotBatch, candidate) -> np.ndarray:
    """Per-snapshot least-squares source amplitudes, shape (Q, K).

    Solves min_x ||y_k - A x_k|| for every snapshot; the residual is
    orthogonal to the columns of A.
    """
    a = _as_matrix(candidate)
    if a.shape[0] != batch.num_ports:
        raise SchemaError(
            f"candidate has {a.shape[0]} rows but the batch carries {batch.num_ports} ports"
        )
    _check_rank(a)
    x, _, rank, _ = np.linalg.lstsq(a, batch.observations, rcond=_RANK_RTOL)
    if rank < a.shape[1]:  # pragma: no cover - guarded by _check_rank
        raise SingularityError("candidate response matrix is rank deficient")
    return x


def _golden_section(objective, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Bounded golden-section minimization; returns (argmin, value)."""
    best_x, best_f = lo, objective(lo)
    f_hi = objective(hi)
    if f_hi < best_f:
        best_x, best_f = hi, f_hi
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = objective(c), objective(d)
    while (hi - lo) > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = objective(d)
    for x, f in ((c, fc), (d, fd)):
        if f < best_f:
            best_x, best_f = x, f
    return best_x, best_f


class MlDoaEstimator:
    """Reusable estimator that caches the coarse-grid model responses.

    Re-running many Monte Carlo batches against one model only pays the
    model evaluation over the coarse grid once.
    """

    def __init__(self, model: AntennaResponseProvider, config: SearchConfig = SearchConfig()):
        if config.source_count >= model.num_ports:
            raise ArgError(
                f"source count {config.source_count} must be below the port count {model.num_ports}"
            )
        self.model = model
        self.config = config
        lo, hi = config.fov
        n = int(round((hi - lo) / config.coarse_step))
        self.grid = lo + config.coarse_step * np.arange(n + 1)
        self.grid_responses = model.response_matrix(self.grid)

    def _check_batch(self, batch: SnapshotBatch):
        if batch.num_ports != self.model.num_ports:
            raise SchemaError(
                f"batch has {batch.num_ports} ports but the model provides {self.model.num_ports}"
            )

    def estimate(self, batch: SnapshotBatch) -> np.ndarray:
        """Angles of the configured number of sources, sorted ascending."""
        self._check_batch(batch)
        r = sample_covariance(batch).matrix
        if self.config.source_count == 1:
            return np.array([self._estimate_single(r)])
        if self.config.source_count == 2:
            return np.array(sorted(self._estimate_pair(r)))
        raise ArgError("only one- and two-source searches are supported")

    # -- single source: the projector of one vector a is a a^H / (a^H a),
    #    so the objective reduces to tr(R) - a^H R a / a^H a.
    def _objective_scan(self, r: np.ndarray) -> np.ndarray:
        a = self.grid_responses
        quad = np.real(np.sum(a.conj() * (r @ a), axis=0))
        power = np.real(np.sum(a.conj() * a, axis=0))
        return np.trace(r).real - quad / power

    def _point_objective(self, r: np.ndarray, theta: float) -> float:
        a = self.model.response(theta)
        return float(np.trace(r).real - (a.conj() @ r @ a).real / (a.conj() @ a).real)

    def _estimate_single(self, r: np.ndarray) -> float:
        scan = self._objective_scan(r)
        i = int(np.argmin(scan))
        lo = max(self.config.fov[0], self.grid[i] - self.config.coarse_step)
        hi = min(self.config.fov[1], self.grid[i] + self.config.coarse_step)
        refined, f_ref = _golden_section(
            lambda t: self._point_objective(r, t), lo, hi, self.config.refine_tolerance
        )
        return refined if f_ref <= scan[i] else float(self.grid[i])

    # -- two sources: coarse 2-degree pair grid, then alternating 1-D
    #    refinements (at most 50 sweeps).
    def _pair_objective(self, r: np.ndarray, t1: float, t2: float) -> float:
        a = np.column_stack([self.model.response(t1), self.model.response(t2)])
        try:
            _, pi_perp = projection(a)
        except SingularityError:
            return np.inf
        return float(np.trace(pi_perp @ r).real)

    def _estimate_pair(self, r: np.ndarray) -> tuple[float, float]:
        lo, hi = self.config.fov
        coarse = lo + 2.0 * np.arange(int(round((hi - lo) / 2.0)) + 1)
        best = (np.inf, lo, hi)
        for i, t1 in enumerate(coarse):
            for t2 in coarse[i + 1:]:
                v = self._pair_objective(r, t1, t2)
                if v < best[0]:
                    best = (v, t1, t2)
        _, t1, t2 = best
        tol = self.config.refine_tolerance
        for _ in range(50):
            new_t1, _ = _golden_section(
                lambda t: self._pair_objective(r, t, t2), max(lo, t1 - 2.0), min(hi, t1 + 2.0), tol
            )
            new_t2, _ = _golden_section(
                lambda t: self._pair_objective(r, new_t1, t), max(lo, t2 - 2.0), min(hi, t2 + 2.0), tol
            )
            moved = abs(new_t1 - t1) + abs(new_t2 - t2)
            t1, t2 = new_t1, new_t2
            if moved < tol:
                break
        return t1, t2


def estimate_doa(
    batch: SnapshotBatch, model: AntennaResponseProvider, config: SearchConfig = SearchConfig()
) -> np.ndarray:
    """One-shot estimation entry point; see MlDoaEstimator for batched use."""
    return MlDoaEstimator(model, config).estimate(batch)
