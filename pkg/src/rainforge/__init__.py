"""Deterministic physically-based rain simulation and compositing."""

__version__ = "0.1.0"

from .units import (  # noqa: F401
    DEFAULT_DIAMETER_RANGE,
    DiameterRange,
    RainIntensity,
    WindVector,
    intensity_to_si,
)
from .dsd import DropSizeDistribution, marshall_palmer  # noqa: F401
from .particles import (  # noqa: F401
    DropSet,
    Raindrop,
    SimVolume,
    drop_velocity,
    spawn_drops,
    terminal_velocity,
)
from .camera import CameraModel, DepthMap, frustum_cull, occlusion_cull  # noqa: F401
from .raster import (  # noqa: F401
    RainLayer,
    StreakAppearance,
    StreakSegment,
    export_quads,
    per_pixel_tau1,
    rasterize,
    streak_segment,
)
from .compositing import BlendParams, blend, linearize, delinearize  # noqa: F401
from .pipeline import SceneJob, run_batch, run_job  # noqa: F401
