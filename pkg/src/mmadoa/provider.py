"""Shared contract for anything that yields antenna port responses by angle."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class AntennaResponseProvider(Protocol):
    """Deterministic map from co-elevation angle to complex port responses.

    Implementations: calibration datasets (grid-only lookup), sector-mapped
    virtual-array models, and wavefield expansion models. The same angle
    must always return the identical vector.
    """

    @property
    def num_ports(self) -> int: ...

    def response(self, theta_deg: float) -> np.ndarray:
        """Complex response of all ports at one angle, shape (M,)."""
        ...

    def response_matrix(self, angles_deg) -> np.ndarray:
        """Responses at several angles stacked as columns, shape (M, P)."""
        ...
