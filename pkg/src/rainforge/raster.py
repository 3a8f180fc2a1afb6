"""Rasterize motion-blurred raindrop streaks into an image-space rain layer.

Each visible drop sweeps a segment in image space over the exposure. The
segment is stamped as an anti-aliased thick line; overlapping streaks are
combined front-to-back (nearest camera depth first, ties broken by drop id)
with OVER compositing. Alongside color and coverage alpha, the layer stores
the per-pixel dwell time: exposure / streak length in pixels, attributed to
the frontmost streak touching the pixel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .camera import CameraModel, ImagePoint
from .errors import ConfigurationError, DecodeError, InternalError, ValidationError
from .particles import DropSet

MIN_STREAK_LENGTH_PX = 1.0  # lower clamp keeps dwell time <= exposure


@dataclass
class RainLayer:
    """Image-space rain accumulation target.

    `color` holds the accumulated (premultiplied) streak radiance in linear
    light, `alpha` the coverage, and `tau1` the per-pixel dwell time in
    seconds. alpha == 0 exactly where tau1 == 0.
    """

    color: np.ndarray  # (h, w, 3) float64 in [0, 1]
    alpha: np.ndarray  # (h, w) float64 in [0, 1]
    tau1: np.ndarray  # (h, w) float64 seconds

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @classmethod
    def zeros(cls, width: int, height: int) -> "RainLayer":
        return cls(
            color=np.zeros((height, width, 3)),
            alpha=np.zeros((height, width)),
            tau1=np.zeros((height, width)),
        )


@dataclass(frozen=True)
class AtlasEntry:
    intensity: np.ndarray  # (h, w) float in [0, 1]
    alpha: np.ndarray  # (h, w) float in [0, 1]
    length_px: int
    width_px: int


@dataclass(frozen=True)
class StreakAppearance:
    """How a streak's footprint maps to intensity and alpha.

    Procedural mode uses a gaussian cross-section (sigma = sigma_factor *
    half width) with alpha from geometric coverage. Database mode samples a
    texture atlas; intensities are relative and scaled by `gain`.
    """

    mode: str = "procedural"
    sigma_factor: float = 0.5
    base_intensity: float = 1.0
    gain: float = 1.0
    atlas: tuple = ()

    def __post_init__(self):
        if self.mode not in ("procedural", "database"):
            raise ValidationError(f"unknown appearance mode {self.mode!r}")
        if self.mode == "procedural" and not (0 < self.sigma_factor <= 1):
            raise ValidationError("sigma_factor must be in (0, 1]")


def load_streak_atlas(atlas_dir, gain: float = 1.0) -> StreakAppearance:
    """Load a streak texture atlas: index.json + grayscale+alpha PNGs."""
    atlas_dir = Path(atlas_dir)
    index_path = atlas_dir / "index.json"
    try:
        index = json.loads(index_path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read streak atlas index: {exc}") from exc
    entries = []
    for item in index["entries"]:
        with Image.open(atlas_dir / item["texture_path"]) as im:
            la = np.asarray(im.convert("LA"), dtype=np.float64)
        peak = 65535.0 if np.asarray(im).dtype == np.uint16 else 255.0
        if la.shape[0] <= 0 or la.shape[1] <= 0:
            raise DecodeError(f"atlas texture {item['texture_path']} is empty")
        entries.append(
            AtlasEntry(
                intensity=la[:, :, 0] / peak,
                alpha=la[:, :, 1] / peak,
                length_px=int(item["length_px"]),
                width_px=int(item["width_px"]),
            )
        )
    return StreakAppearance(mode="database", gain=gain, atlas=tuple(entries))


@dataclass(frozen=True)
class StreakSegment:
    """Projected swept segment of one drop, image space."""

    p0: ImagePoint
    p1: ImagePoint
    width_px: float
    drop_id: int

    def __post_init__(self):
        if not (self.width_px > 0):
            raise ValidationError("segment width must be > 0")

    @property
    def length_px(self) -> float:
        return float(np.hypot(self.p1.u - self.p0.u, self.p1.v - self.p0.v))

    @property
    def z_mid(self) -> float:
        return 0.5 * (self.p0.z_cam + self.p1.z_cam)


def streak_segment(cam: CameraModel, drop) -> StreakSegment | None:
    """Project one culled drop's exposure sweep into image space.

    The camera-space segment is clipped at the near plane before projection;
    the projected segment is then clipped to the image rectangle (expanded by
    its half width so anti-aliased edges survive). Returns None when the
    clipped footprint is empty, which can happen for drops kept only by the
    expanded-rectangle frustum margin.
    """
    a = cam.world_to_camera(drop.position)
    b = cam.world_to_camera(drop.position + drop.velocity * cam.exposure_s)
    znear = cam.near_m * (1.0 + 1e-9)
    if a[2] <= znear and b[2] <= znear:
        raise InternalError(
            f"drop {drop.id} fully behind the near plane; cull contract violated"
        )
    # clip at the near plane
    if a[2] < znear:
        t = (znear - a[2]) / (b[2] - a[2])
        a = a + t * (b - a)
    elif b[2] < znear:
        t = (znear - b[2]) / (a[2] - b[2])
        b = b + t * (a - b)

    def to_image(p):
        return np.array([cam.cx + cam.fx * p[0] / p[2], cam.cy + cam.fx * p[1] / p[2]])

    p0, p1 = to_image(a), to_image(b)
    z_mid = 0.5 * (a[2] + b[2])
    width_px = max(cam.fx * drop.diameter / z_mid, 1e-6)

    clipped = _clip_to_rect(
        p0,
        p1,
        margin=width_px / 2.0 + 1.0,
        width=cam.image_width_px,
        height=cam.image_height_px,
    )
    if clipped is None:
        return None
    (q0, t0), (q1, t1) = clipped
    z0 = a[2] + t0 * (b[2] - a[2])
    z1 = a[2] + t1 * (b[2] - a[2])
    return StreakSegment(
        p0=ImagePoint(u=float(q0[0]), v=float(q0[1]), z_cam=float(z0)),
        p1=ImagePoint(u=float(q1[0]), v=float(q1[1]), z_cam=float(z1)),
        width_px=float(width_px),
        drop_id=drop.id,
    )


def _clip_to_rect(p0, p1, margin, width, height):
    """Liang-Barsky clip of segment p0-p1 to the margin-expanded image rect."""
    lo = np.array([-margin, -margin])
    hi = np.array([width + margin, height + margin])
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for axis in range(2):
        if d[axis] == 0.0:
            if p0[axis] < lo[axis] or p0[axis] > hi[axis]:
                return None
            continue
        ta = (lo[axis] - p0[axis]) / d[axis]
        tb = (hi[axis] - p0[axis]) / d[axis]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return (p0 + t0 * d, t0), (p0 + t1 * d, t1)


def per_pixel_tau1(segment: StreakSegment, exposure_s: float) -> float:
    """Dwell time on one pixel: exposure / streak length (>= 1 px)."""
    return exposure_s / max(segment.length_px, MIN_STREAK_LENGTH_PX)


@dataclass
class SegmentBatch:
    """Struct-of-arrays form of projected streak segments."""

    u0: np.ndarray
    v0: np.ndarray
    u1: np.ndarray
    v1: np.ndarray
    z_mid: np.ndarray
    width_px: np.ndarray
    drop_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.drop_ids)

    @classmethod
    def from_segments(cls, segments) -> "SegmentBatch":
        segs = list(segments)
        return cls(
            u0=np.array([s.p0.u for s in segs]),
            v0=np.array([s.p0.v for s in segs]),
            u1=np.array([s.p1.u for s in segs]),
            v1=np.array([s.p1.v for s in segs]),
            z_mid=np.array([s.z_mid for s in segs]),
            width_px=np.array([s.width_px for s in segs]),
            drop_ids=np.array([s.drop_id for s in segs], dtype=np.int64),
        )


def build_segments(cam: CameraModel, drops: DropSet) -> SegmentBatch:
    """Vectorized projection of all culled drops' exposure sweeps.

    Matches streak_segment except that clipping against the image rectangle
    is deferred to the rasterizer's bounding-box clamp; segments entirely
    behind the near plane are dropped (they violate the cull contract only
    by the midpoint-test tolerance).
    """
    n = len(drops)
    if n == 0:
        return SegmentBatch(*[np.empty(0) for _ in range(6)], np.empty(0, np.int64))
    a = cam.world_to_camera(drops.positions)
    b = cam.world_to_camera(drops.positions + drops.velocities * cam.exposure_s)
    znear = cam.near_m * (1.0 + 1e-9)
    usable = (a[:, 2] > znear) | (b[:, 2] > znear)
    a, b = a[usable], b[usable]
    # clip endpoints behind the near plane onto it
    for p, q in ((a, b), (b, a)):
        behind = p[:, 2] < znear
        if behind.any():
            t = (znear - p[behind, 2]) / (q[behind, 2] - p[behind, 2])
            p[behind] = p[behind] + t[:, None] * (q[behind] - p[behind])
    z_mid = 0.5 * (a[:, 2] + b[:, 2])
    width = np.maximum(cam.fx * drops.diameters[usable] / z_mid, 1e-6)
    return SegmentBatch(
        u0=cam.cx + cam.fx * a[:, 0] / a[:, 2],
        v0=cam.cy + cam.fx * a[:, 1] / a[:, 2],
        u1=cam.cx + cam.fx * b[:, 0] / b[:, 2],
        v1=cam.cy + cam.fx * b[:, 1] / b[:, 2],
        z_mid=z_mid,
        width_px=width,
        drop_ids=drops.ids[usable].copy(),
    )


def _stamp_procedural(
    u0, v0, u1, v1, width_px, tau, order,
    gray, alpha, tau1, trans,
    sigma_factor, base_intensity,
):
    """Front-to-back stamp loop; numba-compiled when available."""
    h, w = gray.shape
    for k in range(order.shape[0]):
        i = order[k]
        ax, ay, bx, by = u0[i], v0[i], u1[i], v1[i]
        half_w = width_px[i] / 2.0
        dx = bx - ax
        dy = by - ay
        length = (dx * dx + dy * dy) ** 0.5
        if length > 0.0:
            ex, ey = dx / length, dy / length
        else:
            ex, ey = 1.0, 0.0
        sigma = sigma_factor * max(half_w, 0.5)
        inv2s2 = 1.0 / (2.0 * sigma * sigma)
        pad = half_w + 1.0
        x0 = max(int(np.floor(min(ax, bx) - pad)), 0)
        x1 = min(int(np.ceil(max(ax, bx) + pad)), w)
        y0 = max(int(np.floor(min(ay, by) - pad)), 0)
        y1 = min(int(np.ceil(max(ay, by) + pad)), h)
        for py in range(y0, y1):
            ry = py + 0.5 - ay
            for px in range(x0, x1):
                rx = px + 0.5 - ax
                t_long = rx * ex + ry * ey
                d_lat = abs(rx * ey - ry * ex)
                lat = min(0.5, half_w - d_lat) + min(0.5, half_w + d_lat)
                lat_cov = min(max(lat, 0.0), 1.0)
                lng = min(t_long + 0.5, length) - max(t_long - 0.5, 0.0)
                long_cov = min(max(lng, 0.0), 1.0)
                a_px = lat_cov * long_cov
                if a_px <= 0.0:
                    continue
                intensity = base_intensity * np.exp(-d_lat * d_lat * inv2s2)
                t_here = trans[py, px]
                contrib = t_here * a_px
                gray[py, px] += contrib * intensity
                alpha[py, px] += contrib
                if tau1[py, px] == 0.0:
                    tau1[py, px] = tau[i]
                trans[py, px] = t_here * (1.0 - a_px)


try:
    import numba

    _stamp_procedural = numba.njit(cache=True)(_stamp_procedural)
except ImportError:  # pragma: no cover - numba is an optional speedup
    pass


def rasterize(
    layer: RainLayer,
    segments,
    appearance: StreakAppearance,
    seed: int,
    exposure_s: float,
) -> RainLayer:
    """Stamp streak segments into a fresh rain layer.

    Segments are processed front to back by midpoint camera depth (ties by
    drop id), so the result is independent of the input ordering. The input
    layer only supplies dimensions and is not modified. Accepts a
    SegmentBatch or any iterable of StreakSegment.
    """
    if appearance.mode == "database" and not appearance.atlas:
        raise ConfigurationError("database appearance mode with an empty atlas")

    if not isinstance(segments, SegmentBatch):
        segments = SegmentBatch.from_segments(segments)

    h, w = layer.height, layer.width
    gray = np.zeros((h, w))
    alpha = np.zeros((h, w))
    tau1 = np.zeros((h, w))
    trans = np.ones((h, w))

    order = np.lexsort((segments.drop_ids, segments.z_mid))
    lengths = np.hypot(segments.u1 - segments.u0, segments.v1 - segments.v0)
    tau = exposure_s / np.maximum(lengths, MIN_STREAK_LENGTH_PX)

    if appearance.mode == "procedural":
        _stamp_procedural(
            segments.u0, segments.v0, segments.u1, segments.v1,
            segments.width_px, tau, order,
            gray, alpha, tau1, trans,
            float(appearance.sigma_factor), float(appearance.base_intensity),
        )
    else:
        _stamp_database(
            segments, tau, order, appearance, seed, gray, alpha, tau1, trans
        )

    np.clip(gray, 0.0, 1.0, out=gray)
    np.clip(alpha, 0.0, 1.0, out=alpha)
    return RainLayer(color=np.repeat(gray[:, :, None], 3, axis=2), alpha=alpha, tau1=tau1)


def _stamp_database(segments, tau, order, appearance, seed, gray, alpha, tau1, trans):
    """Texture-atlas stamping; per-segment numpy (atlas datasets are small)."""
    h, w = gray.shape
    n_atlas = len(appearance.atlas)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    # texture pick must not depend on processing order: index by drop id
    pick_salt = int(rng.integers(0, 2**62))

    for i in order:
        p0 = np.array([segments.u0[i], segments.v0[i]])
        p1 = np.array([segments.u1[i], segments.v1[i]])
        half_w = segments.width_px[i] / 2.0
        length = float(np.hypot(*(p1 - p0)))

        pad = half_w + 1.0
        x0 = max(int(np.floor(min(p0[0], p1[0]) - pad)), 0)
        x1 = min(int(np.ceil(max(p0[0], p1[0]) + pad)), w)
        y0 = max(int(np.floor(min(p0[1], p1[1]) - pad)), 0)
        y1 = min(int(np.ceil(max(p0[1], p1[1]) + pad)), h)
        if x0 >= x1 or y0 >= y1:
            continue

        px, py = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
        rx = px - p0[0]
        ry = py - p0[1]
        if length > 0:
            ex, ey = (p1 - p0) / length
        else:
            ex, ey = 1.0, 0.0
        t_long = rx * ex + ry * ey
        d_lat = np.abs(rx * ey - ry * ex)

        # exact box-filter coverage of a unit pixel by the streak rectangle
        lat_cov = np.clip(
            np.minimum(0.5, half_w - d_lat) + np.minimum(0.5, half_w + d_lat), 0.0, 1.0
        )
        long_cov = np.clip(
            np.minimum(t_long + 0.5, length) - np.maximum(t_long - 0.5, 0.0), 0.0, 1.0
        )
        coverage = lat_cov * long_cov

        entry = appearance.atlas[int(segments.drop_ids[i] + pick_salt) % n_atlas]
        th, tw = entry.intensity.shape
        # map streak-local coords into the texture (length down the rows)
        tv = np.clip(t_long / max(length, 1e-9), 0.0, 1.0) * (th - 1)
        tu = np.clip(d_lat / max(half_w, 1e-9), 0.0, 1.0)
        tu = np.clip((tu * 0.5 + 0.5) * (tw - 1), 0, tw - 1)
        iv = np.round(tv).astype(np.int64)
        iu = np.round(tu).astype(np.int64)
        intensity = appearance.gain * entry.intensity[iv, iu]
        a_seg = coverage * entry.alpha[iv, iu]

        sl = (slice(y0, y1), slice(x0, x1))
        t_here = trans[sl]
        contrib = t_here * a_seg
        gray[sl] += contrib * intensity
        alpha[sl] += contrib
        new_front = (tau1[sl] == 0.0) & (a_seg > 0.0)
        tau1[sl][new_front] = tau[i]
        trans[sl] = t_here * (1.0 - a_seg)


def export_quads(
    cam: CameraModel,
    drops: DropSet,
    path,
    per_pixel: bool = False,
) -> int:
    """Write camera-facing streak billboards as an ASCII OBJ mesh.

    One quad spans each drop's swept world segment with width equal to the
    drop diameter. With `per_pixel`, each streak is subdivided into one quad
    per traversed image pixel. Returns the number of quads written.
    """
    forward = cam.view_direction
    lines = ["# rainforge streak billboards", "o rain_streaks"]
    faces = []
    n_verts = 0
    for drop in drops:
        a = drop.position
        b = drop.position + drop.velocity * cam.exposure_s
        seg = b - a
        seg_len = np.linalg.norm(seg)
        seg_dir = seg / seg_len if seg_len > 0 else np.array([0.0, -1.0, 0.0])
        side = np.cross(seg_dir, forward)
        norm = np.linalg.norm(side)
        if norm < 1e-12:
            side = np.cross(seg_dir, np.array([1.0, 0.0, 0.0]))
            norm = np.linalg.norm(side)
        side = side / norm * (drop.diameter / 2.0)

        n_sub = 1
        if per_pixel:
            ip = cam.project(a + seg / 2.0)
            if ip is not None:
                mid_z = ip.z_cam
                n_sub = max(1, round(cam.fx * seg_len / mid_z))
        for k in range(n_sub):
            q0 = a + seg * (k / n_sub)
            q1 = a + seg * ((k + 1) / n_sub)
            for v in (q0 - side, q0 + side, q1 + side, q1 - side):
                lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
            faces.append(
                f"f {n_verts + 1} {n_verts + 2} {n_verts + 3} {n_verts + 4}"
            )
            n_verts += 4
    lines.extend(faces)
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IOError(f"cannot write mesh to {path}: {exc}") from exc
    return len(faces)
