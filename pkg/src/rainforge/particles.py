"""Raindrop particle spawning and kinematics.

Drops are spawned uniformly in an axis-aligned world-space box and fall at
their terminal velocity (v_t = 130 * sqrt(D), D in meters) plus horizontal
wind. The transient to reach terminal velocity is neglected, so each drop's
velocity is constant over the exposure and its position at time t is
position + velocity * t exactly.

Drop sets are stored struct-of-arrays for throughput; `Raindrop` is the
per-particle view used at API boundaries and in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsd import DropSizeDistribution, make_rng
from .errors import DomainError, ParticleBudgetError, ValidationError
from .units import WindVector

TERMINAL_VELOCITY_COEFF = 130.0  # m^0.5 / s

DEFAULT_PARTICLE_BUDGET = 50_000_000


def terminal_velocity(d):
    """Kessler terminal fall speed 130 * sqrt(d) in m/s; d > 0 in meters."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("diameter must be > 0 for terminal velocity")
    v = TERMINAL_VELOCITY_COEFF * np.sqrt(d)
    return float(v) if v.ndim == 0 else v


def drop_velocity(d: float, wind: WindVector) -> np.ndarray:
    """World-frame velocity (wind.vx, -v_t(d), wind.vz) in m/s."""
    return np.array([wind.vx, -terminal_velocity(d), wind.vz])


def slant_angle_deg(d: float, wind: WindVector) -> float:
    """Streak slant from vertical, degrees: arctan(|wind| / v_t(d))."""
    return math.degrees(math.atan2(wind.magnitude, terminal_velocity(d)))


@dataclass(frozen=True)
class Raindrop:
    """One simulated particle at exposure start."""

    id: int
    position: np.ndarray  # (3,) meters, world frame
    diameter: float  # meters
    velocity: np.ndarray  # (3,) m/s


@dataclass(frozen=True)
class SimVolume:
    """Axis-aligned world-space spawn box."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float)
        hi = np.asarray(self.max_corner, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValidationError("corners must be 3-vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("corners must be finite")
        if not np.all(hi > lo):
            raise ValidationError(
                f"max_corner must exceed min_corner component-wise: {lo} vs {hi}"
            )
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def volume_m3(self) -> float:
        return float(np.prod(self.max_corner - self.min_corner))


@dataclass
class DropSet:
    """Struct-of-arrays collection of raindrops, ordered by ascending id."""

    ids: np.ndarray  # (n,) int64
    positions: np.ndarray  # (n, 3) float64
    diameters: np.ndarray  # (n,) float64
    velocities: np.ndarray  # (n, 3) float64

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> Raindrop:
        return Raindrop(
            id=int(self.ids[i]),
            position=self.positions[i].copy(),
            diameter=float(self.diameters[i]),
            velocity=self.velocities[i].copy(),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def select(self, index) -> "DropSet":
        """Subset by boolean mask or index array; preserves order."""
        return DropSet(
            ids=self.ids[index],
            positions=self.positions[index],
            diameters=self.diameters[index],
            velocities=self.velocities[index],
        )

    @staticmethod
    def empty() -> "DropSet":
        return DropSet(
            ids=np.empty(0, dtype=np.int64),
            positions=np.empty((0, 3)),
            diameters=np.empty(0),
            velocities=np.empty((0, 3)),
        )


def spawn_drops(
    volume: SimVolume,
    dsd: DropSizeDistribution,
    wind: WindVector,
    seed: int,
    count_override: int | None = None,
    particle_budget: int = DEFAULT_PARTICLE_BUDGET,
    poisson: bool = False,
) -> DropSet:
    """Spawn raindrops uniformly in `volume` with DSD-sampled diameters.

    The count is round(total_concentration * volume) (banker's rounding)
    unless `count_override` is given; `poisson=True` instead draws the count
    from a Poisson law with that expectation, for statistical studies.
    Fully deterministic given the seed.
    """
    root = np.random.SeedSequence(int(seed))
    ss_count, ss_pos, ss_diam = root.spawn(3)

    expected = dsd.total_concentration() * volume.volume_m3
    if count_override is not None:
        count = int(count_override)
        if count < 0:
            raise DomainError("count_override must be >= 0")
    elif poisson:
        count = int(make_rng(ss_count).poisson(expected))
    else:
        count = round(expected)

    if count > particle_budget:
        raise ParticleBudgetError(count, particle_budget)

    if count == 0:
        return DropSet.empty()

    rng_pos = make_rng(ss_pos)
    positions = rng_pos.uniform(volume.min_corner, volume.max_corner, size=(count, 3))
    diameters = dsd.sample_diameters(ss_diam, count)

    velocities = np.empty((count, 3))
    velocities[:, 0] = wind.vx
    velocities[:, 1] = -terminal_velocity(diameters)
    velocities[:, 2] = wind.vz

    return DropSet(
        ids=np.arange(count, dtype=np.int64),
        positions=positions,
        diameters=diameters,
        velocities=velocities,
    )
