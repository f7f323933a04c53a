"""Virtual uniform linear array geometry and steering vectors.

The virtual array is a mathematical construct: element positions are
origin-centered along a single coordinate axis of the antenna's xz-plane,
with spacing given in wavelengths. Spacings above half a wavelength are
rejected to avoid spatial aliasing; sub-half-wavelength spacing carries no
mutual-coupling penalty because no physical elements exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ArgError


class Axis(str, Enum):
    """Orientation of the virtual array in the xz-plane."""

    X = "x"
    Z = "z"


@dataclass(frozen=True)
class VirtualUlaConfig:
    """Origin-centered virtual uniform linear array.

    ``spacing`` is in wavelengths, in (0, 0.5]. ``wavelength`` is carried
    for documentation only; phases depend on spacing in wavelengths alone.
    """

    element_count: int
    spacing: float
    axis: Axis = Axis.Z
    wavelength: float = 1.0

    def __post_init__(self):
        if int(self.element_count) != self.element_count or self.element_count < 1:
            raise ArgError(f"element_count must be a positive integer, got {self.element_count}")
        object.__setattr__(self, "element_count", int(self.element_count))
        if not 0.0 < self.spacing <= 0.5:
            raise ArgError(f"spacing must be in (0, 0.5] wavelengths, got {self.spacing}")
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.wavelength <= 0:
            raise ArgError("wavelength must be positive")

    @property
    def positions(self) -> np.ndarray:
        """Element coordinates along the chosen axis, in wavelengths."""
        n = self.element_count
        return (np.arange(n) - (n - 1) / 2.0) * self.spacing


def steering_matrix(cfg: VirtualUlaConfig, angles_deg) -> np.ndarray:
    """Steering matrix of the virtual array, one column per angle.

    Element n at angle theta responds with
    exp(j*k*(x_n*sin(theta) + z_n*cos(theta))); on-axis placement reduces
    this to the sine (x axis) or cosine (z axis) term. Entries all have
    unit modulus.
    """
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    if angles.size == 0:
        raise ArgError("angle list must not be empty")
    if not np.all(np.isfinite(angles)):
        raise ArgError("angles must be finite")
    theta = np.deg2rad(angles)
    direction = np.sin(theta) if cfg.axis is Axis.X else np.cos(theta)
    # positions are in wavelengths, so k*position = 2*pi*position
    return np.exp(2j * np.pi * np.outer(cfg.positions, direction))


def steering_vector(cfg: VirtualUlaConfig, theta_deg: float) -> np.ndarray:
    """Steering vector at a single angle (total in theta)."""
    return steering_matrix(cfg, [theta_deg])[:, 0]
