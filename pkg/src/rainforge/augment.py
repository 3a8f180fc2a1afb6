"""Scikit-learn style transformer wrapping the rain renderer.

Turns (background, depth) array pairs into rainy images so the renderer can
sit inside sklearn pipelines and other estimator-based tooling. Stateless:
fit only validates parameters.
"""

from __future__ import annotations

import numpy as np

try:
    from sklearn.base import BaseEstimator, TransformerMixin
except ImportError:  # sklearn is optional; degrade to plain mixins

    class BaseEstimator:  # type: ignore[no-redef]
        def get_params(self, deep=True):
            return {k: v for k, v in self.__dict__.items() if not k.startswith("_")}

        def set_params(self, **params):
            for k, v in params.items():
                setattr(self, k, v)
            return self

    class TransformerMixin:  # type: ignore[no-redef]
        def fit_transform(self, X, y=None, **fit_params):
            return self.fit(X, y, **fit_params).transform(X)


from .camera import CameraModel, DepthMap, frustum_cull, occlusion_cull
from .compositing import BlendParams, blend, linear_to_srgb, srgb_to_linear
from .dsd import marshall_palmer
from .errors import ConfigurationError
from .particles import spawn_drops
from .pipeline import _simulation_volume
from .raster import RainLayer, StreakAppearance, rasterize, streak_segment
from .units import DiameterRange, RainIntensity, WindVector


class RainAugmenter(BaseEstimator, TransformerMixin):
    """Add physically-simulated rain streaks to images.

    Parameters mirror the renderer config: intensity in mm/h, horizontal
    wind in m/s, drop diameter bounds in mm, and pinhole camera settings.
    `transform` takes a sequence of (background, depth) pairs, where the
    background is (h, w, 3) sRGB floats in [0, 1] or uint8 and the depth is
    (h, w) metric meters (+inf = sky), and returns the rainy images in the
    same encoding as the input.
    """

    def __init__(
        self,
        intensity_mm_per_h=50.0,
        wind_mps=(0.0, 0.0),
        diameter_range_mm=(0.5, 5.0),
        focal_length_mm=30.0,
        sensor_width_mm=36.0,
        exposure_s=1.0 / 60.0,
        max_distance_m=8.0,
        sigma_factor=0.5,
        base_intensity=1.0,
        seed=0,
    ):
        self.intensity_mm_per_h = intensity_mm_per_h
        self.wind_mps = wind_mps
        self.diameter_range_mm = diameter_range_mm
        self.focal_length_mm = focal_length_mm
        self.sensor_width_mm = sensor_width_mm
        self.exposure_s = exposure_s
        self.max_distance_m = max_distance_m
        self.sigma_factor = sigma_factor
        self.base_intensity = base_intensity
        self.seed = seed

    def fit(self, X=None, y=None):
        self._validated_params()
        return self

    def _validated_params(self):
        intensity = RainIntensity(self.intensity_mm_per_h)
        wind = WindVector(*self.wind_mps)
        lo, hi = self.diameter_range_mm
        drange = DiameterRange(lo * 1e-3, hi * 1e-3)
        return intensity, wind, drange

    def transform(self, X):
        intensity, wind, drange = self._validated_params()
        dsd = marshall_palmer(intensity, drange)
        appearance = StreakAppearance(
            mode="procedural",
            sigma_factor=self.sigma_factor,
            base_intensity=self.base_intensity,
        )
        out = []
        for idx, (background, depth) in enumerate(X):
            background = np.asarray(background)
            was_uint8 = background.dtype == np.uint8
            srgb = background.astype(np.float64) / 255.0 if was_uint8 else background
            if srgb.ndim != 3 or srgb.shape[2] != 3:
                raise ConfigurationError("background must be (h, w, 3)")
            h, w = srgb.shape[:2]
            cam = CameraModel.create(
                focal_length_mm=self.focal_length_mm,
                sensor_width_mm=self.sensor_width_mm,
                image_width_px=w,
                image_height_px=h,
                exposure_s=self.exposure_s,
            )
            depth_map = DepthMap(values=np.asarray(depth, dtype=np.float64))
            volume = _simulation_volume(cam, wind, drange.d_max, self.max_distance_m)
            drops = spawn_drops(volume, dsd, wind, seed=int(self.seed) + idx)
            visible = occlusion_cull(cam, depth_map, frustum_cull(cam, drops))
            segments = [
                s for s in (streak_segment(cam, d) for d in visible) if s is not None
            ]
            layer = rasterize(
                RainLayer.zeros(w, h),
                segments,
                appearance,
                seed=int(self.seed) + idx,
                exposure_s=self.exposure_s,
            )
            rainy = linear_to_srgb(
                blend(srgb_to_linear(srgb), layer, BlendParams(self.exposure_s))
            )
            if was_uint8:
                rainy = (np.clip(rainy, 0, 1) * 255.0 + 0.5).astype(np.uint8)
            out.append(rainy)
        return out
