"""Pinhole camera model, projection, and the two-stage visibility cull.

Camera space is the usual computer-vision frame: x right, y down, z forward
(positive depth in front of the camera). World space is +y up. Intrinsics
are derived from focal length and sensor width: fx = focal/sensor * width_px,
square pixels (fy = fx), principal point at the image center. No distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError
from .particles import DropSet

FRUSTUM_SWEEP_SAMPLES = 33
DEFAULT_OCCLUSION_EPS_M = 0.05


def _rotation_from_angles(yaw_deg: float, pitch_deg: float, roll_deg: float) -> np.ndarray:
    """World->camera rotation for a camera looking along world -z at zero angles.

    Yaw rotates the view direction about world +y (positive = leftward),
    pitch tilts it up, roll spins about the view axis.
    """
    yaw = math.radians(yaw_deg)
    pitch = math.radians(pitch_deg)
    forward = np.array(
        [
            -math.sin(yaw) * math.cos(pitch),
            math.sin(pitch),
            -math.cos(yaw) * math.cos(pitch),
        ]
    )
    world_up = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(forward, world_up)) > 0.999999:
        world_up = np.array([0.0, 0.0, -1.0])
    right = np.cross(forward, world_up)
    right /= np.linalg.norm(right)
    up = np.cross(right, forward)
    if roll_deg:
        c, s = math.cos(math.radians(roll_deg)), math.sin(math.radians(roll_deg))
        right, up = c * right + s * up, -s * right + c * up
    # rows: camera x (right), y (down), z (forward) expressed in world coords
    return np.stack([right, -up, forward])


@dataclass(frozen=True)
class ImagePoint:
    u: float
    v: float
    z_cam: float  # meters in front of the camera


@dataclass(frozen=True)
class CameraModel:
    focal_length_mm: float
    sensor_width_mm: float
    image_width_px: int
    image_height_px: int
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))  # world->camera
    exposure_s: float = 1.0 / 60.0
    near_m: float = 0.2
    far_m: float = 1000.0

    def __post_init__(self):
        if not (1.0 <= self.focal_length_mm <= 500.0):
            raise ValidationError(
                f"focal length {self.focal_length_mm} mm outside [1, 500]"
            )
        if self.sensor_width_mm <= 0:
            raise ValidationError("sensor width must be > 0")
        if self.image_width_px <= 0 or self.image_height_px <= 0:
            raise ValidationError("image dimensions must be positive")
        if not (0 < self.near_m < self.far_m):
            raise ValidationError("require 0 < near_m < far_m")
        if self.exposure_s <= 0:
            raise ValidationError("exposure must be > 0")
        pos = np.asarray(self.position, dtype=float).reshape(3)
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    @classmethod
    def create(
        cls,
        focal_length_mm: float,
        sensor_width_mm: float,
        image_width_px: int,
        image_height_px: int,
        position=(0.0, 0.0, 0.0),
        yaw_deg: float = 0.0,
        pitch_deg: float = 0.0,
        roll_deg: float = 0.0,
        **kwargs,
    ) -> "CameraModel":
        return cls(
            focal_length_mm=focal_length_mm,
            sensor_width_mm=sensor_width_mm,
            image_width_px=image_width_px,
            image_height_px=image_height_px,
            position=np.asarray(position, dtype=float),
            rotation=_rotation_from_angles(yaw_deg, pitch_deg, roll_deg),
            **kwargs,
        )

    @property
    def fx(self) -> float:
        return self.focal_length_mm / self.sensor_width_mm * self.image_width_px

    @property
    def cx(self) -> float:
        return self.image_width_px / 2.0

    @property
    def cy(self) -> float:
        return self.image_height_px / 2.0

    @property
    def view_direction(self) -> np.ndarray:
        """Camera forward axis in world coordinates."""
        return self.rotation[2]

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        """Transform (n, 3) or (3,) world points into camera space."""
        return (np.asarray(points, dtype=float) - self.position) @ self.rotation.T

    def project_many(self, points: np.ndarray):
        """Project (n, 3) world points.

        Returns (uv (n, 2), z (n,), valid (n,)); uv/z are meaningful only
        where valid (z_cam > near). uv may lie outside the image rectangle.
        """
        cam = np.atleast_2d(self.world_to_camera(points))
        z = cam[:, 2]
        valid = z > self.near_m
        zsafe = np.where(valid, z, 1.0)
        uv = np.empty((len(cam), 2))
        uv[:, 0] = self.cx + self.fx * cam[:, 0] / zsafe
        uv[:, 1] = self.cy + self.fx * cam[:, 1] / zsafe
        return uv, z, valid

    def project(self, world_point) -> ImagePoint | None:
        """Project a single world point; None if at or behind the near plane."""
        uv, z, valid = self.project_many(np.asarray(world_point, dtype=float))
        if not valid[0]:
            return None
        return ImagePoint(u=float(uv[0, 0]), v=float(uv[0, 1]), z_cam=float(z[0]))


@dataclass(frozen=True)
class DepthMap:
    """Metric scene depth along the camera view axis; +inf encodes sky."""

    values: np.ndarray  # (h, w) float, meters

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ValidationError("depth map must be 2-D")
        finite = vals[np.isfinite(vals)]
        if np.any(np.isnan(vals)) or (finite.size and finite.min() <= 0):
            raise ValidationError("depth values must be positive or +inf (sky)")
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def frustum_cull(cam: CameraModel, drops: DropSet) -> DropSet:
    """Keep drops whose swept exposure segment can appear in the image.

    A drop is kept iff any of FRUSTUM_SWEEP_SAMPLES evenly spaced points on
    [position, position + velocity * exposure] has near < z_cam < far and
    projects inside the image rectangle expanded by the drop's projected
    radius. Order (ascending id) is preserved.
    """
    n = len(drops)
    if n == 0:
        return drops
    keep = np.zeros(n, dtype=bool)
    half_d = drops.diameters / 2.0
    w, h = cam.image_width_px, cam.image_height_px
    for t in np.linspace(0.0, cam.exposure_s, FRUSTUM_SWEEP_SAMPLES):
        pts = drops.positions + drops.velocities * t
        uv, z, _ = cam.project_many(pts)
        in_depth = (z > cam.near_m) & (z < cam.far_m)
        zsafe = np.where(in_depth, z, 1.0)
        r = cam.fx * half_d / zsafe
        inside = (
            in_depth
            & (uv[:, 0] >= -r)
            & (uv[:, 0] <= w + r)
            & (uv[:, 1] >= -r)
            & (uv[:, 1] <= h + r)
        )
        keep |= inside
    return drops.select(keep)


def occlusion_cull(
    cam: CameraModel,
    depth_map: DepthMap,
    drops: DropSet,
    eps_m: float = DEFAULT_OCCLUSION_EPS_M,
) -> DropSet:
    """Drop drops hidden behind scene geometry.

    Tests the midpoint of the swept segment: a drop is culled iff the
    midpoint projects to an in-image pixel whose scene depth is closer than
    z_cam - eps_m. Sky pixels (+inf) never occlude; midpoints that cannot be
    tested (behind near plane or off-image) are kept for the rasterizer's
    per-pixel depth handling.
    """
    if depth_map.width != cam.image_width_px or depth_map.height != cam.image_height_px:
        raise ConfigurationError(
            f"depth map {depth_map.width}x{depth_map.height} does not match "
            f"camera {cam.image_width_px}x{cam.image_height_px}"
        )
    n = len(drops)
    if n == 0:
        return drops
    mid = drops.positions + drops.velocities * (cam.exposure_s / 2.0)
    uv, z, valid = cam.project_many(mid)
    px = np.floor(uv[:, 0]).astype(np.int64)
    py = np.floor(uv[:, 1]).astype(np.int64)
    testable = (
        valid
        & (px >= 0)
        & (px < cam.image_width_px)
        & (py >= 0)
        & (py < cam.image_height_px)
    )
    scene = np.full(n, np.inf)
    scene[testable] = depth_map.values[py[testable], px[testable]]
    occluded = testable & (z >= scene - eps_m)
    return drops.select(~occluded)
