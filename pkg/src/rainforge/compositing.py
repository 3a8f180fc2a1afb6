"""Exposure-time blending of the rain layer over the background.

Per pixel, with exposure T, rain alpha a, per-pixel dwell tau1 and the
reference dwell tau0 baked into the streak database:

    out = (T - a * tau1) / T * background + rain * tau1 / tau0

evaluated in linear light and clamped to [0, 1] unless HDR output is
requested. Where a == 0 (and hence tau1 == 0) the background passes through
bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ValidationError
from .raster import RainLayer

# Reference per-pixel dwell time of the streak database, seconds.
TAU0_S = math.sqrt(1e-3) / 50.0


@dataclass(frozen=True)
class BlendParams:
    exposure_s: float
    tau0_s: float = TAU0_S

    def __post_init__(self):
        if not (self.exposure_s > 0):
            raise ValidationError("exposure must be > 0")
        if not (self.tau0_s > 0):
            raise ValidationError("tau0 must be > 0")


def blend(
    background: np.ndarray,
    layer: RainLayer,
    params: BlendParams,
    clamp: bool = True,
) -> np.ndarray:
    """Blend a rain layer into a linear-light (h, w, 3) background."""
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim != 3 or bg.shape[2] != 3:
        raise ConfigurationError("background must be (h, w, 3)")
    if bg.shape[:2] != layer.alpha.shape:
        raise ConfigurationError(
            f"background {bg.shape[:2]} does not match rain layer "
            f"{layer.alpha.shape}"
        )
    t = params.exposure_s
    a = layer.alpha[:, :, None]
    tau1 = layer.tau1[:, :, None]
    out = (t - a * tau1) / t * bg + layer.color * (tau1 / params.tau0_s)
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


# sRGB transfer curve (IEC 61966-2-1 piecewise definition)
_SRGB_CUT_ENC = 0.0031308
_SRGB_CUT_DEC = 0.04045


def srgb_to_linear(image: np.ndarray) -> np.ndarray:
    """Decode sRGB-encoded values in [0, 1] to linear light."""
    x = np.asarray(image, dtype=np.float64)
    return np.where(x <= _SRGB_CUT_DEC, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(image: np.ndarray) -> np.ndarray:
    """Encode linear-light values in [0, 1] to sRGB."""
    x = np.asarray(image, dtype=np.float64)
    x = np.clip(x, 0.0, None)
    return np.where(
        x <= _SRGB_CUT_ENC, x * 12.92, 1.055 * x ** (1.0 / 2.4) - 0.055
    )


def linearize(image: np.ndarray, transfer: str = "srgb") -> np.ndarray:
    """Decode an encoded image to linear light; 'linear' is the identity."""
    if transfer == "linear":
        return np.asarray(image, dtype=np.float64)
    if transfer == "srgb":
        return srgb_to_linear(image)
    raise ConfigurationError(f"unknown transfer {transfer!r}")


def delinearize(image: np.ndarray, transfer: str = "srgb") -> np.ndarray:
    """Encode a linear-light image; 'linear' is the identity."""
    if transfer == "linear":
        return np.asarray(image, dtype=np.float64)
    if transfer == "srgb":
        return linear_to_srgb(image)
    raise ConfigurationError(f"unknown transfer {transfer!r}")
