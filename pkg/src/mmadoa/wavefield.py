"""Truncated Fourier wavefield expansion of the antenna response.

The antenna response is factored as a(theta) = H * psi(theta): a sampling
matrix H (one row per port, independent of the incident angle) times a
vector of Fourier basis functions evaluated at the angle. Because the basis
spans the full circle, the model is defined for every angle and is
2*pi-periodic; fitting, however, only uses the calibration samples inside
the field of view, so the basis Gram matrix is non-diagonal.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .calibration import AngleGrid, EmfDataset
from .errors import ArgError, DegenerateDataError, SchemaError, SingularityError

log = logging.getLogger(__name__)

GRAM_CONDITION_WARN = 1e8
_RCOND = 1e-10


def _check_count(count: int) -> int:
    if int(count) != count or count < 1 or count % 2 == 0:
        raise ArgError(f"coefficient count must be a positive odd integer, got {count}")
    return int(count)


def index_range(count: int) -> np.ndarray:
    """Basis indices for an odd coefficient count: -(U-1)/2 .. (U-1)/2."""
    count = _check_count(count)
    half = (count - 1) // 2
    return np.arange(-half, half + 1)


def basis_matrix(angles_deg, count: int) -> np.ndarray:
    """Fourier basis vectors as columns, shape (U, P).

    Entry (u, p) is exp(j*u*theta_p)/sqrt(2*pi) with theta_p in radians.
    """
    u = index_range(count)
    theta = np.deg2rad(np.atleast_1d(np.asarray(angles_deg, dtype=float)))
    return np.exp(1j * np.outer(u, theta)) / np.sqrt(2.0 * np.pi)


def fourier_basis(theta_deg: float, count: int) -> np.ndarray:
    """Basis vector at a single angle, shape (U,)."""
    return basis_matrix([theta_deg], count)[:, 0]


@dataclass(frozen=True, eq=False)
class WmModel:
    """Sampling matrix over a truncated Fourier basis.

    ``sampling`` is M x U complex with columns ordered by ascending basis
    index u. Acts as a response provider for any angle.
    """

    sampling: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.sampling, dtype=complex)
        if h.ndim != 2 or h.shape[0] < 1:
            raise ArgError("sampling matrix must be M x U with M >= 1")
        _check_count(h.shape[1])
        if not np.all(np.isfinite(h)):
            raise ArgError("sampling matrix entries must be finite")
        h = h.copy(order="C")
        h.setflags(write=False)
        object.__setattr__(self, "sampling", h)

    @property
    def num_ports(self) -> int:
        return int(self.sampling.shape[0])

    @property
    def coefficient_count(self) -> int:
        return int(self.sampling.shape[1])

    @property
    def u_indices(self) -> np.ndarray:
        return index_range(self.coefficient_count)

    def response(self, theta_deg: float) -> np.ndarray:
        return self.sampling @ fourier_basis(theta_deg, self.coefficient_count)

    def response_matrix(self, angles_deg) -> np.ndarray:
        return self.sampling @ basis_matrix(angles_deg, self.coefficient_count)


def fit(ds: EmfDataset, count: int) -> WmModel:
    """Least-squares fit of the sampling matrix to a calibration dataset.

    Solves min_H ||H*Psi(grid) - E||_F. The grid must carry at least as
    many samples as coefficients, otherwise the basis Gram matrix is
    exactly singular. The Gram condition number is logged and a warning is
    emitted above 1e8; the solve itself tolerates poor conditioning via a
    singular-value cutoff.
    """
    count = _check_count(count)
    if count > len(ds.grid):
        raise SingularityError(
            f"{count} coefficients on {len(ds.grid)} grid samples: basis Gram matrix is singular"
        )
    psi = basis_matrix(ds.grid.angles, count)
    h_herm, _, rank, sv = np.linalg.lstsq(psi.conj().T, ds.responses.conj().T, rcond=_RCOND)
    gram_cond = (sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else np.inf
    log.info("wavefield fit: U=%d, basis Gram condition number %.3e", count, gram_cond)
    if gram_cond > GRAM_CONDITION_WARN:
        log.warning(
            "wavefield basis Gram condition number %.3e exceeds %.0e; "
            "coefficients near the cutoff are regularized",
            gram_cond,
            GRAM_CONDITION_WARN,
        )
    if rank == 0:
        raise SingularityError("basis matrix has numerical rank zero")
    return WmModel(sampling=h_herm.conj().T)


def approximation_error(model: WmModel, ds: EmfDataset) -> float:
    """Relative Frobenius mismatch of the model against the full grid."""
    denom = np.linalg.norm(ds.responses)
    if denom == 0.0:
        raise DegenerateDataError("dataset has zero norm")
    reconstructed = model.response_matrix(ds.grid.angles)
    return float(np.linalg.norm(reconstructed - ds.responses) / denom)


def coefficient_decay(model: WmModel) -> list[tuple[int, float]]:
    """Aggregate column magnitude per absolute basis index.

    Returns (|u|, max over ports and over +-u of |H entry|) in ascending
    |u| order; a diagnostic for choosing the coefficient count.
    """
    mags = np.abs(model.sampling)
    u = model.u_indices
    out = []
    for k in range(int(u.max()) + 1):
        cols = np.flatnonzero(np.abs(u) == k)
        out.append((k, float(mags[:, cols].max())))
    return out


# ---------------------------------------------------------------------------
# bundled reference coefficients
# ---------------------------------------------------------------------------


def _fixture_doc() -> dict:
    with resources.files("mmadoa.data").joinpath("prototype_wm_sampling.json").open() as fh:
        return json.load(fh)


def reference_sampling_entries() -> list[list[list[str]]]:
    """Raw (re, im) strings of the bundled sampling matrix, row-major."""
    return _fixture_doc()["entries"]


def load_reference_sampling() -> WmModel:
    """Sampling matrix of the bundled four-port planar prototype antenna."""
    doc = _fixture_doc()
    h = np.array(
        [[complex(float(re_s), float(im_s)) for re_s, im_s in row] for row in doc["entries"]]
    )
    if h.shape != (doc["ports"], doc["coefficients"]):  # pragma: no cover
        raise SchemaError("bundled sampling matrix has inconsistent shape")
    return WmModel(sampling=h)


def reference_dataset(grid_step: float = 5.0, polarization: str = "RHCP") -> EmfDataset:
    """Canonical stand-in calibration dataset.

    Evaluates the bundled prototype sampling matrix on a full field-of-view
    grid; the default 5-degree step yields 37 angles x 4 ports. This
    wavefield reconstruction stands in for raw field data, which is not
    redistributable.
    """
    grid = AngleGrid.spanning_fov(grid_step)
    model = load_reference_sampling()
    return EmfDataset(
        grid=grid, responses=model.response_matrix(grid.angles), polarization=polarization
    )
