"""Image file I/O: 8-bit PNG, 16-bit grayscale PNG, and PFM float maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DecodeError


def read_rgb_png(path) -> np.ndarray:
    """Read an 8-bit image as (h, w, 3) float64 in [0, 1] (still sRGB-encoded)."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except Exception as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    return arr / 255.0


def write_rgb_png(path, image: np.ndarray) -> None:
    """Write (h, w, 3) floats in [0, 1] as 8-bit PNG."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    data = (arr * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def write_rgba_png(path, rgb: np.ndarray, alpha: np.ndarray) -> None:
    rgba = np.dstack([np.clip(rgb, 0.0, 1.0), np.clip(alpha, 0.0, 1.0)])
    data = (rgba * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(data, mode="RGBA").save(path)


def read_gray16_png(path) -> np.ndarray:
    """Read a 16-bit grayscale PNG as (h, w) uint16."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im, dtype=np.uint16)
    except Exception as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DecodeError(f"{path}: expected single-channel depth PNG")
    return arr


def write_gray16_png(path, values: np.ndarray) -> None:
    arr = np.asarray(values)
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_pfm(path) -> np.ndarray:
    """Read a PFM file as (h, w) or (h, w, 3) float32, row 0 at the top."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise DecodeError(f"{path}: not a PFM file (header {header!r})")
        dims = f.readline().split()
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        data = np.frombuffer(
            f.read(width * height * channels * 4),
            dtype="<f4" if scale < 0 else ">f4",
        )
    img = data.reshape(height, width, channels)
    img = np.flipud(img)  # PFM stores bottom-to-top
    if channels == 1:
        img = img[:, :, 0]
    return np.ascontiguousarray(img.astype(np.float32))


def write_pfm(path, image: np.ndarray) -> None:
    """Write (h, w) or (h, w, 3) floats as little-endian PFM."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 2:
        header = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError("PFM supports (h, w) or (h, w, 3) arrays")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")  # negative scale = little-endian
        f.write(np.flipud(arr).astype("<f4").tobytes())


def read_depth(
    path,
    depth_scale: float | None = None,
    sky_is_max: bool = False,
) -> np.ndarray:
    """Load a metric depth map (meters) from PFM or 16-bit PNG.

    PFM files are taken as meters directly (+inf = sky). PNG files require
    `depth_scale` (meters per count); when `sky_is_max` is set, the maximum
    16-bit value maps to +inf.
    """
    path = Path(path)
    if path.suffix.lower() == ".pfm":
        depth = read_pfm(path).astype(np.float64)
        if depth.ndim != 2:
            raise DecodeError(f"{path}: depth PFM must be single-channel")
        return depth
    raw = read_gray16_png(path)
    if depth_scale is None:
        raise DecodeError(f"{path}: PNG depth requires a depth_scale (m/count)")
    depth = raw.astype(np.float64) * float(depth_scale)
    if sky_is_max:
        depth[raw == np.iinfo(np.uint16).max] = np.inf
    return depth
