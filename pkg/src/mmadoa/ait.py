"""Sectorized mapping from a virtual uniform linear array to the antenna.

The field of view is tiled by equally sized, possibly overlapping sectors.
Each sector gets one complex mapping matrix, fitted by least squares so
that the mapped virtual-array steering matrix reproduces the calibration
samples inside the sector. Overlap regions do not get new coefficients:
per port, the better-fitting column is selected from the neighboring
sectors' matrices. The fitted model interpolates the antenna response at
any angle inside the field of view.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .calibration import FOV_DEG, EmfDataset
from .errors import ArgError, DegenerateDataError, DomainError, PlanError, SingularityError
from .ula import VirtualUlaConfig, steering_matrix

log = logging.getLogger(__name__)

_ATOL = 1e-9
_RCOND = 1e-10


@dataclass(frozen=True)
class SectorPlan:
    """Equal-size sector tiling of the field of view.

    Consecutive sectors advance by ``sector_size - overlap_size`` degrees;
    the first starts at -90 and the last ends at +90. Sector intervals are
    closed; a calibration angle on a shared boundary belongs to every
    sector containing it.
    """

    sector_size: float
    overlap_size: float
    sectors: tuple[tuple[float, float], ...]

    @property
    def stride(self) -> float:
        return self.sector_size - self.overlap_size

    @property
    def num_sectors(self) -> int:
        return len(self.sectors)

    def sector_samples(self, angles: np.ndarray, index: int) -> np.ndarray:
        """Boolean mask of grid angles inside sector ``index`` (closed)."""
        lo, hi = self.sectors[index]
        angles = np.asarray(angles, dtype=float)
        return (angles >= lo - _ATOL) & (angles <= hi + _ATOL)


def partition_fov(sector_size: float, overlap_size: float) -> SectorPlan:
    """Tile [-90, +90] degrees with overlapping sectors.

    Raises PlanError unless the stride divides the span exactly, i.e.
    (180 - sector_size) must be a multiple of (sector_size - overlap_size).
    """
    span = FOV_DEG[1] - FOV_DEG[0]
    if not 0.0 < sector_size <= span:
        raise PlanError(f"sector size must be in (0, {span}] deg, got {sector_size}")
    if not 0.0 <= overlap_size < sector_size:
        raise PlanError(
            f"overlap must satisfy 0 <= overlap < sector size, got {overlap_size}/{sector_size}"
        )
    stride = sector_size - overlap_size
    steps = (span - sector_size) / stride
    if abs(steps - round(steps)) > _ATOL:
        raise PlanError(
            f"sectors of {sector_size} deg with {overlap_size} deg overlap do not tile "
            f"the {span} deg field of view"
        )
    count = int(round(steps)) + 1
    sectors = tuple(
        (FOV_DEG[0] + l * stride, FOV_DEG[0] + l * stride + sector_size) for l in range(count)
    )
    return SectorPlan(sector_size=float(sector_size), overlap_size=float(overlap_size), sectors=sectors)


def fit_sector(
    responses: np.ndarray, steering: np.ndarray, allow_pseudo_inverse: bool = True
) -> np.ndarray:
    """Least-squares mapping matrix for one sector.

    Minimizes ||G^H * A_v - E||_F over G for the sector's samples, i.e.
    the normal-equations solution (A_v A_v^H)^-1 A_v E^H, computed through
    an SVD-backed solver. Singular values below 1e-10 of the largest are
    treated as zero; if that truncates the rank and ``allow_pseudo_inverse``
    is false, SingularityError is raised instead.

    Parameters
    ----------
    responses : (M, P_l) complex ndarray
        Calibration responses at the sector's sample angles.
    steering : (N, P_l) complex ndarray
        Virtual-array steering vectors at the same angles.

    Returns
    -------
    (N, M) complex ndarray
    """
    responses = np.asarray(responses, dtype=complex)
    steering = np.asarray(steering, dtype=complex)
    if responses.ndim != 2 or steering.ndim != 2 or responses.shape[1] != steering.shape[1]:
        raise ArgError("responses and steering must share the sample dimension")
    mapping, _, rank, _ = np.linalg.lstsq(steering.conj().T, responses.conj().T, rcond=_RCOND)
    if rank < steering.shape[0]:
        if not allow_pseudo_inverse:
            raise SingularityError(
                f"sector steering matrix has rank {rank} < {steering.shape[0]} elements"
            )
        log.debug("rank-deficient sector (rank %d of %d); pseudo-inverse used", rank, steering.shape[0])
    return mapping


def _column_errors(mapping: np.ndarray, steering: np.ndarray, responses: np.ndarray) -> np.ndarray:
    """Squared fit error of each mapped port column over the given samples."""
    return np.sum(np.abs(mapping.conj().T @ steering - responses) ** 2, axis=1)


def _choose_sources(
    candidates: list[np.ndarray], steering: np.ndarray, responses: np.ndarray
) -> tuple[int, ...]:
    """Per-port index of the candidate mapping with least sample error."""
    errs = np.stack([_column_errors(g, steering, responses) for g in candidates])
    return tuple(int(i) for i in np.argmin(errs, axis=0))


def resolve_overlap(
    mapping_a: np.ndarray,
    mapping_b: np.ndarray,
    angles_deg,
    ds: EmfDataset,
    ula: VirtualUlaConfig,
) -> tuple[int, ...]:
    """Select, per port, the better mapping column inside an overlap region.

    Returns one index per port: 0 for ``mapping_a``, 1 for ``mapping_b``.
    Port columns enter the overlap error independently, so the per-column
    minimum equals the minimum over all 2^M column combinations.
    """
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    if angles.size == 0:
        raise PlanError("overlap region contains no calibration samples")
    steering = steering_matrix(ula, angles)
    responses = ds.response_matrix(angles)
    return _choose_sources([mapping_a, mapping_b], steering, responses)


@dataclass(frozen=True)
class ResolvedSpan:
    """One interval of the runtime lookup map.

    ``sources`` names, per port, the sector whose mapping column serves
    this interval. Intervals are half-open [lo, hi); the last one is closed
    at +90.
    """

    lo: float
    hi: float
    sources: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class AitModel:
    """Fitted sector-mapping model; a response provider over the field of view."""

    ula: VirtualUlaConfig
    plan: SectorPlan
    coefficients: tuple[np.ndarray, ...]
    spans: tuple[ResolvedSpan, ...]

    def __post_init__(self):
        if len(self.coefficients) != self.plan.num_sectors:
            raise ArgError("one mapping matrix per sector required")
        frozen = []
        for g in self.coefficients:
            g = np.asarray(g, dtype=complex).copy(order="C")
            if g.shape[0] != self.ula.element_count or not np.all(np.isfinite(g)):
                raise ArgError("mapping matrices must be finite with one row per virtual element")
            g.setflags(write=False)
            frozen.append(g)
        object.__setattr__(self, "coefficients", tuple(frozen))
        # cache per-span effective matrices and lookup edges
        effective = []
        for span in self.spans:
            cols = [self.coefficients[src][:, m] for m, src in enumerate(span.sources)]
            effective.append(np.column_stack(cols))
        object.__setattr__(self, "_effective", tuple(effective))
        object.__setattr__(self, "_edges", np.array([s.lo for s in self.spans]))

    @property
    def num_ports(self) -> int:
        return int(self.coefficients[0].shape[1])

    def _span_index(self, angles: np.ndarray) -> np.ndarray:
        lo, hi = FOV_DEG
        if np.any(angles < lo - _ATOL) or np.any(angles > hi + _ATOL):
            bad = angles[(angles < lo - _ATOL) | (angles > hi + _ATOL)][0]
            raise DomainError(f"{bad} deg lies outside the [{lo}, {hi}] deg field of view")
        idx = np.searchsorted(self._edges, angles, side="right") - 1
        return np.clip(idx, 0, len(self.spans) - 1)

    def response(self, theta_deg: float) -> np.ndarray:
        return self.response_matrix([theta_deg])[:, 0]

    def response_matrix(self, angles_deg) -> np.ndarray:
        angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
        idx = self._span_index(angles)
        steering = steering_matrix(self.ula, angles)
        out = np.empty((self.num_ports, angles.size), dtype=complex)
        for span in np.unique(idx):
            sel = idx == span
            out[:, sel] = self._effective[span].conj().T @ steering[:, sel]
        return out


def _resolve_spans(
    plan: SectorPlan, mappings: list[np.ndarray], ds: EmfDataset, ula: VirtualUlaConfig
) -> tuple[ResolvedSpan, ...]:
    """Break the field of view at sector edges and pick per-port sources.

    Intervals covered by a single sector use that sector's matrix; each
    overlap interval gets a per-port selection among the covering sectors'
    columns (for the usual pairwise overlap this is the two-matrix
    selection rule) and must contain at least one calibration sample.
    """
    angles = ds.grid.angles
    bounds = sorted({edge for sec in plan.sectors for edge in sec})
    spans = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid = (lo + hi) / 2.0
        covering = [
            l for l, (slo, shi) in enumerate(plan.sectors) if slo - _ATOL <= mid <= shi + _ATOL
        ]
        if len(covering) == 1:
            sources = (covering[0],) * ds.num_ports
        else:
            mask = (angles >= lo - _ATOL) & (angles <= hi + _ATOL)
            if not np.any(mask):
                raise PlanError(f"overlap interval [{lo}, {hi}] deg contains no calibration samples")
            steering = steering_matrix(ula, angles[mask])
            picks = _choose_sources(
                [mappings[l] for l in covering], steering, ds.responses[:, mask]
            )
            sources = tuple(covering[p] for p in picks)
        spans.append(ResolvedSpan(lo=float(lo), hi=float(hi), sources=sources))
    return tuple(spans)


def fit(
    ds: EmfDataset, ula: VirtualUlaConfig, plan: SectorPlan, allow_pseudo_inverse: bool = True
) -> AitModel:
    """Fit all sector mappings and resolve the overlap regions.

    Every sector and every overlap interval must contain at least one
    calibration sample.
    """
    angles = ds.grid.angles
    mappings = []
    for l in range(plan.num_sectors):
        mask = plan.sector_samples(angles, l)
        if not np.any(mask):
            raise PlanError(f"sector {l} ({plan.sectors[l]}) contains no calibration samples")
        steering = steering_matrix(ula, angles[mask])
        mappings.append(fit_sector(ds.responses[:, mask], steering, allow_pseudo_inverse))
    spans = _resolve_spans(plan, mappings, ds, ula)
    return AitModel(ula=ula, plan=plan, coefficients=tuple(mappings), spans=spans)


def transformation_error(model: AitModel, ds: EmfDataset, sector_index: int) -> float:
    """Relative Frobenius mismatch of one sector's mapping over its samples.

    Uses the sector's own matrix (not the overlap-resolved mix), normalized
    by the norm of the sector's calibration block.
    """
    if not 0 <= sector_index < model.plan.num_sectors:
        raise ArgError(f"sector index must be in 0..{model.plan.num_sectors - 1}")
    mask = model.plan.sector_samples(ds.grid.angles, sector_index)
    if not np.any(mask):
        raise PlanError(f"sector {sector_index} contains no calibration samples")
    responses = ds.responses[:, mask]
    denom = np.linalg.norm(responses)
    if denom == 0.0:
        raise DegenerateDataError(f"sector {sector_index} calibration block has zero norm")
    steering = steering_matrix(model.ula, ds.grid.angles[mask])
    mapped = model.coefficients[sector_index].conj().T @ steering
    return float(np.linalg.norm(mapped - responses) / denom)


def mean_transformation_error(model: AitModel, ds: EmfDataset) -> float:
    """Arithmetic mean of the per-sector transformation errors."""
    errors = [transformation_error(model, ds, l) for l in range(model.plan.num_sectors)]
    return float(np.mean(errors))


# ---------------------------------------------------------------------------
# JSON export / import
# ---------------------------------------------------------------------------


def _matrix_to_pairs(matrix: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in matrix]


def _matrix_from_pairs(rows) -> np.ndarray:
    return np.array([[complex(re_v, im_v) for re_v, im_v in row] for row in rows])


def model_to_dict(model: AitModel) -> dict:
    return {
        "family": "ait",
        "ula": {
            "element_count": model.ula.element_count,
            "spacing": model.ula.spacing,
            "axis": model.ula.axis.value,
            "wavelength": model.ula.wavelength,
        },
        "plan": {
            "sector_size": model.plan.sector_size,
            "overlap_size": model.plan.overlap_size,
        },
        "matrices": [_matrix_to_pairs(g) for g in model.coefficients],
        "spans": [
            {"lo": s.lo, "hi": s.hi, "sources": list(s.sources)} for s in model.spans
        ],
    }


def model_from_dict(doc: dict) -> AitModel:
    ula = VirtualUlaConfig(
        element_count=doc["ula"]["element_count"],
        spacing=doc["ula"]["spacing"],
        axis=doc["ula"]["axis"],
        wavelength=doc["ula"].get("wavelength", 1.0),
    )
    plan = partition_fov(doc["plan"]["sector_size"], doc["plan"]["overlap_size"])
    coefficients = tuple(_matrix_from_pairs(m) for m in doc["matrices"])
    spans = tuple(
        ResolvedSpan(lo=s["lo"], hi=s["hi"], sources=tuple(s["sources"])) for s in doc["spans"]
    )
    return AitModel(ula=ula, plan=plan, coefficients=coefficients, spans=spans)


def save_model(model: AitModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1) + "\n")
    return path


def load_model(path) -> AitModel:
    return model_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# bundled reference mapping matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReferenceMapping:
    """Bundled mapping matrices of the four-port prototype, with raw strings."""

    ula: VirtualUlaConfig
    plan: SectorPlan
    matrices: tuple[np.ndarray, ...]
    entries: tuple  # printed (re, im) string pairs, per sector, row-major


def load_reference_mapping() -> ReferenceMapping:
    with resources.files("mmadoa.data").joinpath("prototype_ait_mapping.json").open() as fh:
        doc = json.load(fh)
    ula = VirtualUlaConfig(
        element_count=doc["elements"], spacing=doc["spacing_wavelengths"], axis=doc["axis"]
    )
    plan = partition_fov(doc["sector_size_deg"], doc["overlap_deg"])
    matrices = []
    entries = []
    for item in doc["matrices"]:
        matrices.append(
            np.array(
                [[complex(float(re_s), float(im_s)) for re_s, im_s in row] for row in item["entries"]]
            )
        )
        entries.append(item["entries"])
    return ReferenceMapping(
        ula=ula, plan=plan, matrices=tuple(matrices), entries=tuple(entries)
    )


def model_from_reference(ds: EmfDataset | None = None) -> AitModel:
    """Build a runnable model from the bundled mapping matrices.

    Overlap selection needs calibration data; when ``ds`` is given the
    selection minimizes the overlap error against it, otherwise every
    overlap interval falls back to the lowest-numbered covering sector's
    columns.
    """
    ref = load_reference_mapping()
    ports = ref.matrices[0].shape[1]
    if ds is not None:
        spans = _resolve_spans(ref.plan, list(ref.matrices), ds, ref.ula)
    else:
        bounds = sorted({edge for sec in ref.plan.sectors for edge in sec})
        spans = tuple(
            ResolvedSpan(
                lo=float(lo),
                hi=float(hi),
                sources=(
                    min(
                        l
                        for l, (slo, shi) in enumerate(ref.plan.sectors)
                        if slo - _ATOL <= (lo + hi) / 2.0 <= shi + _ATOL
                    ),
                )
                * ports,
            )
            for lo, hi in zip(bounds[:-1], bounds[1:])
        )
    return AitModel(ula=ref.ula, plan=ref.plan, coefficients=ref.matrices, spans=spans)
