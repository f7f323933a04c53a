"""Quantized calibration data: angle grids, port response datasets, file I/O.

A calibration dataset stores the complex field response of every antenna
port on a uniform grid of co-elevation angles. Angles are degrees at every
public boundary; trigonometry happens in radians inside the numerics
modules. All containers are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgError, DegenerateDataError, GridError, IngestError

FOV_DEG = (-90.0, 90.0)
"""Field of view of a planar antenna radiating into a half space."""

_ANGLE_ATOL = 1e-9

CSV_COLUMNS = ("theta_deg", "port", "re", "im")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = a.copy(order="C")  # detach from caller storage before freezing
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AngleGrid:
    """Uniform, strictly increasing grid of co-elevation angles in degrees.

    ``step`` is the common spacing; a single-point grid carries ``step=0``.
    Endpoints must stay inside the field of view [-90, +90].
    """

    angles: np.ndarray
    step: float

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if angles.ndim != 1 or angles.size == 0:
            raise GridError("grid needs at least one angle")
        if not np.all(np.isfinite(angles)):
            raise GridError("grid angles must be finite")
        if angles.min() < FOV_DEG[0] - _ANGLE_ATOL or angles.max() > FOV_DEG[1] + _ANGLE_ATOL:
            raise GridError(f"grid angles must lie in [{FOV_DEG[0]}, {FOV_DEG[1]}] deg")
        diffs = np.diff(angles)
        if np.any(diffs <= 0):
            raise GridError("grid angles must be strictly increasing and free of duplicates")
        step = float(self.step)
        if angles.size == 1:
            if step != 0.0:
                raise GridError("single-angle grid must carry step=0")
        else:
            if step <= 0:
                raise GridError("grid step must be positive")
            if not np.allclose(diffs, step, rtol=0.0, atol=_ANGLE_ATOL):
                raise GridError(f"grid spacing is not uniform at step={step} deg")
        object.__setattr__(self, "angles", _readonly(angles))
        object.__setattr__(self, "step", step)

    @classmethod
    def from_angles(cls, angles) -> "AngleGrid":
        """Build a grid from explicit angles, inferring the step."""
        angles = np.asarray(angles, dtype=float)
        step = float(angles[1] - angles[0]) if angles.size > 1 else 0.0
        return cls(angles=angles, step=step)

    @classmethod
    def spanning_fov(cls, step: float) -> "AngleGrid":
        """Full field-of-view grid at the given step (step must divide 180)."""
        step = float(step)
        if step <= 0:
            raise ArgError("grid step must be positive")
        count = 180.0 / step
        if abs(count - round(count)) > _ANGLE_ATOL:
            raise ArgError(f"step {step} deg does not divide the 180 deg field of view")
        n = int(round(count)) + 1
        return cls(angles=FOV_DEG[0] + step * np.arange(n), step=step)

    def __len__(self) -> int:
        return int(self.angles.size)

    def index_of(self, theta_deg: float) -> int:
        """Index of a grid angle; raises GridError for off-grid angles."""
        hits = np.flatnonzero(np.isclose(self.angles, theta_deg, rtol=0.0, atol=_ANGLE_ATOL))
        if hits.size == 0:
            raise GridError(f"{theta_deg} deg is not on the calibration grid")
        return int(hits[0])


@dataclass(frozen=True, eq=False)
class EmfDataset:
    """Complex field responses of M ports sampled on an angle grid.

    ``responses`` is an M x P complex matrix: row = port, column = grid
    angle. Every entry must be finite and no port may be identically zero.
    The dataset itself acts as a response provider restricted to grid
    angles (pure lookup, no interpolation).
    """

    grid: AngleGrid
    responses: np.ndarray
    polarization: str = "RHCP"

    def __post_init__(self):
        r = np.asarray(self.responses, dtype=complex)
        if r.ndim != 2 or r.shape[0] < 1:
            raise ArgError("responses must be an M x P matrix with M >= 1")
        if r.shape[1] != len(self.grid):
            raise ArgError(
                f"responses have {r.shape[1]} columns but the grid has {len(self.grid)} angles"
            )
        if not np.all(np.isfinite(r)):
            raise IngestError("responses contain non-finite entries")
        dead = np.flatnonzero(~r.any(axis=1))
        if dead.size:
            raise DegenerateDataError(f"port {dead[0] + 1} has an all-zero response")
        object.__setattr__(self, "responses", _readonly(r))

    @property
    def num_ports(self) -> int:
        return int(self.responses.shape[0])

    def response(self, theta_deg: float) -> np.ndarray:
        """Port response vector at a grid angle (lookup only)."""
        return self.responses[:, self.grid.index_of(theta_deg)].copy()

    def response_matrix(self, angles_deg) -> np.ndarray:
        cols = [self.grid.index_of(t) for t in np.atleast_1d(angles_deg)]
        return self.responses[:, cols].copy()


def gain_pattern(ds: EmfDataset, port: int, db: bool = False) -> np.ndarray:
    """Gain of one port over the grid: squared response magnitude.

    ``port`` is 1-based. With ``db=True`` returns 10*log10(gain); zero
    gain maps to -inf rather than raising.
    """
    if not 1 <= port <= ds.num_ports:
        raise ArgError(f"port must be in 1..{ds.num_ports}, got {port}")
    g = np.abs(ds.responses[port - 1]) ** 2
    if not db:
        return g
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(g)


# ---------------------------------------------------------------------------
# file I/O
#
# CSV schema: header theta_deg,port,re,im; one row per (angle, port) cell;
# ports numbered 1..M; exactly one polarization per file.
# JSON mirrors the same rows plus an explicit grid/polarization header.
# ---------------------------------------------------------------------------


def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        fmt = format.lower()
        if fmt not in ("csv", "json"):
            raise ArgError(f"unknown dataset format {format!r}")
        return fmt
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix == ".json":
        return "json"
    raise ArgError(f"cannot infer dataset format from {path.name!r}; pass format=")


def _dataset_from_cells(cells: dict, polarization: str) -> EmfDataset:
    thetas = sorted({t for t, _ in cells})
    ports = sorted({p for _, p in cells})
    if ports != list(range(1, len(ports) + 1)):
        raise IngestError(f"ports must be numbered 1..M without gaps, found {ports}")
    grid = AngleGrid.from_angles(thetas)
    responses = np.empty((len(ports), len(thetas)), dtype=complex)
    for j, theta in enumerate(thetas):
        for i, port in enumerate(ports):
            try:
                responses[i, j] = cells[(theta, port)]
            except KeyError:
                raise IngestError(f"missing response for port {port} at theta {theta} deg") from None
    return EmfDataset(grid=grid, responses=responses, polarization=polarization)


def load_emf(path, format: str | None = None) -> EmfDataset:
    """Load a calibration dataset from a CSV or JSON file.

    Parameters
    ----------
    path : str or Path
        Input file. Must exist.
    format : {"csv", "json"}, optional
        Explicit format; inferred from the file extension when omitted.

    Raises
    ------
    IngestError
        Missing/duplicate (angle, port) cells, bad numbers, gaps in port
        numbering.
    GridError
        Angles do not form a uniform grid inside the field of view.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if not path.exists():
        raise IngestError(f"dataset file not found: {path}")
    if fmt == "csv":
        return _load_csv(path)
    return _load_json(path)


def _parse_cell_row(theta_s, port_s, re_s, im_s, where: str):
    try:
        theta = float(theta_s)
        port = int(port_s)
        value = complex(float(re_s), float(im_s))
    except (TypeError, ValueError) as exc:
        raise IngestError(f"bad numeric value in {where}: {exc}") from None
    return theta, port, value


def _load_csv(path: Path) -> EmfDataset:
    cells = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise IngestError(
                f"CSV header must be {','.join(CSV_COLUMNS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            if any(row.get(c) in (None, "") for c in CSV_COLUMNS):
                raise IngestError(f"{path.name}:{lineno}: incomplete row")
            theta, port, value = _parse_cell_row(
                row["theta_deg"], row["port"], row["re"], row["im"], f"{path.name}:{lineno}"
            )
            key = (theta, port)
            if key in cells:
                raise IngestError(f"{path.name}:{lineno}: duplicate cell {key}")
            cells[key] = value
    if not cells:
        raise IngestError(f"{path.name}: no data rows")
    return _dataset_from_cells(cells, polarization="RHCP")


def _load_json(path: Path) -> EmfDataset:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path.name}: invalid JSON: {exc}") from None
    for key in ("grid", "ports", "entries"):
        if key not in doc:
            raise IngestError(f"{path.name}: missing {key!r} section")
    cells = {}
    for i, entry in enumerate(doc["entries"]):
        try:
            theta, port, value = _parse_cell_row(
                entry["theta_deg"], entry["port"], entry["re"], entry["im"], f"entry {i}"
            )
        except (KeyError, TypeError):
            raise IngestError(f"{path.name}: entry {i} lacks theta_deg/port/re/im") from None
        if (theta, port) in cells:
            raise IngestError(f"{path.name}: duplicate cell {(theta, port)}")
        cells[(theta, port)] = value
    if not cells:
        raise IngestError(f"{path.name}: no entries")
    ds = _dataset_from_cells(cells, polarization=str(doc.get("polarization", "RHCP")))
    header = doc["grid"]
    if int(header.get("count", len(ds.grid))) != len(ds.grid):
        raise IngestError(f"{path.name}: grid header count disagrees with entries")
    if len(ds.grid) > 1 and not np.isclose(float(header.get("step_deg", ds.grid.step)), ds.grid.step):
        raise IngestError(f"{path.name}: grid header step disagrees with entries")
    if int(doc["ports"]) != ds.num_ports:
        raise IngestError(f"{path.name}: ports header disagrees with entries")
    return ds


def _iter_rows(ds: EmfDataset):
    for j, theta in enumerate(ds.grid.angles):
        for i in range(ds.num_ports):
            v = ds.responses[i, j]
            yield float(theta), i + 1, float(v.real), float(v.imag)


def save_emf(ds: EmfDataset, path, format: str | None = None) -> Path:
    """Write a dataset to CSV or JSON.

    Floats are written with shortest round-trip precision, so
    load -> save -> load reproduces the complex values bit-exactly.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for theta, port, re_v, im_v in _iter_rows(ds):
                writer.writerow([repr(theta), port, repr(re_v), repr(im_v)])
    else:
        doc = {
            "polarization": ds.polarization,
            "grid": {
                "start_deg": float(ds.grid.angles[0]),
                "step_deg": ds.grid.step,
                "count": len(ds.grid),
            },
            "ports": ds.num_ports,
            "entries": [
                {"theta_deg": theta, "port": port, "re": re_v, "im": im_v}
                for theta, port, re_v, im_v in _iter_rows(ds)
            ],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
    return path
