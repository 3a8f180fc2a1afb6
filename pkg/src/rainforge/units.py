"""Canonical physical quantities and unit conversions for weather parameters.

World frame convention used throughout the package: +y is up, gravity acts
along -y, so rain falls toward -y. Wind is horizontal (x/z components only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

# Hard caps are sanity policy, not physics: they keep downstream math away
# from pathological magnitudes.
MAX_INTENSITY_MM_PER_H = 500.0
MAX_WIND_SPEED_MPS = 60.0
MAX_DIAMETER_M = 0.01


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class RainIntensity:
    """Rain intensity: millimeters of water per hour."""

    value_mm_per_h: float

    def __post_init__(self):
        v = _require_finite("rain intensity", self.value_mm_per_h)
        if v <= 0:
            raise ValidationError(f"rain intensity must be > 0 mm/h, got {v}")
        if v > MAX_INTENSITY_MM_PER_H:
            raise ValidationError(
                f"rain intensity {v} mm/h exceeds cap {MAX_INTENSITY_MM_PER_H}"
            )
        object.__setattr__(self, "value_mm_per_h", v)

    def to_si(self) -> float:
        """Intensity in SI units (m/s): x mm/h = x * 1e-3 / 3600 m/s."""
        return self.value_mm_per_h * 1e-3 / 3600.0


def intensity_to_si(i: RainIntensity) -> float:
    """Convert a rain intensity to m/s."""
    return i.to_si()


@dataclass(frozen=True)
class WindVector:
    """Horizontal wind in m/s (world frame; no vertical component)."""

    vx: float
    vz: float

    def __post_init__(self):
        vx = _require_finite("wind vx", self.vx)
        vz = _require_finite("wind vz", self.vz)
        mag = math.hypot(vx, vz)
        if mag > MAX_WIND_SPEED_MPS:
            raise ValidationError(
                f"wind magnitude {mag:.2f} m/s exceeds cap {MAX_WIND_SPEED_MPS}"
            )
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vz", vz)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.vx, self.vz)


@dataclass(frozen=True)
class DiameterRange:
    """Raindrop diameter interval [d_min, d_max], meters."""

    d_min: float
    d_max: float

    def __post_init__(self):
        lo = _require_finite("d_min", self.d_min)
        hi = _require_finite("d_max", self.d_max)
        if not (0 < lo < hi <= MAX_DIAMETER_M):
            raise ValidationError(
                f"diameter range must satisfy 0 < d_min < d_max <= "
                f"{MAX_DIAMETER_M} m, got [{lo}, {hi}]"
            )
        object.__setattr__(self, "d_min", lo)
        object.__setattr__(self, "d_max", hi)

    def contains(self, d: float) -> bool:
        return self.d_min <= d <= self.d_max


# Covers drizzle-to-heavy-rain drops without the numerically negligible tail.
DEFAULT_DIAMETER_RANGE = DiameterRange(0.5e-3, 5.0e-3)
