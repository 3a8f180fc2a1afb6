"""End-to-end job runner: config -> simulate -> cull -> rasterize -> blend.

Each job produces one paired record (background, depth, rain layer, rainy
image) plus a manifest entry carrying the full resolved parameter state, so
any record can be regenerated byte-identically from the manifest alone.
"""

from __future__ import annotations

import concurrent.futures
import copy
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .camera import CameraModel, DepthMap, frustum_cull, occlusion_cull
from .compositing import TAU0_S, BlendParams, blend, linear_to_srgb, srgb_to_linear
from .dsd import RNG_ALGORITHM_ID, marshall_palmer
from .errors import ConfigurationError, RainforgeError
from .imgio import (
    read_depth,
    read_rgb_png,
    write_gray16_png,
    write_pfm,
    write_rgb_png,
    write_rgba_png,
)
from .particles import (
    DEFAULT_PARTICLE_BUDGET,
    SimVolume,
    spawn_drops,
    terminal_velocity,
)
from .raster import (
    RainLayer,
    StreakAppearance,
    build_segments,
    export_quads,
    load_streak_atlas,
    rasterize,
)
from .units import DiameterRange, RainIntensity, WindVector

import math

MANIFEST_SCHEMA_VERSION = 1
CONFIG_SCHEMA_VERSION = 1

# Rain farther out than this renders sub-pixel and costs most of the budget;
# override per job via sim.max_spawn_distance_m.
DEFAULT_MAX_SPAWN_DISTANCE_M = 8.0

_CAMERA_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "focal_length_mm": {"type": "number"},
        "sensor_width_mm": {"type": "number"},
        "exposure_s": {"type": "number"},
        "near_m": {"type": "number"},
        "far_m": {"type": "number"},
        "position_m": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 3,
            "maxItems": 3,
        },
        "yaw_deg": {"type": "number"},
        "pitch_deg": {"type": "number"},
        "roll_deg": {"type": "number"},
    },
}

_RAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "intensity_mm_per_h": {"type": "number"},
        "wind_mps": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
        "slant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "angle_deg": {"type": "number"},
                "azimuth_deg": {"type": "number"},
            },
            "required": ["angle_deg"],
        },
        "diameter_range_mm": {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
        },
    },
}

_SIM_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_spawn_distance_m": {"type": "number"},
        "particle_budget": {"type": "integer"},
        "poisson_counts": {"type": "boolean"},
        "count_override": {"type": ["integer", "null"]},
        "occlusion_eps_m": {"type": "number"},
    },
}

_APPEARANCE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["procedural", "database"]},
        "sigma_factor": {"type": "number"},
        "base_intensity": {"type": "number"},
        "atlas_dir": {"type": "string"},
        "gain": {"type": "number"},
    },
}

_JOB_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "background": {"type": "string"},
        "depth": {"type": "string"},
        "depth_scale": {"type": ["number", "null"]},
        "sky_is_max": {"type": "boolean"},
        "camera": _CAMERA_SCHEMA,
        "rain": _RAIN_SCHEMA,
        "sim": _SIM_SCHEMA,
        "appearance": _APPEARANCE_SCHEMA,
        "seed": {"type": "integer"},
        "tau0_s": {"type": "number"},
        "hdr": {"type": "boolean"},
        "export_quads": {"type": "boolean"},
        "quads_per_pixel": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": CONFIG_SCHEMA_VERSION},
        "output_dir": {"type": "string"},
        "defaults": _JOB_SCHEMA,
        "jobs": {"type": "array", "items": _JOB_SCHEMA},
    },
    "required": ["schema_version", "output_dir", "jobs"],
}

_JOB_DEFAULTS = {
    "depth_scale": None,
    "sky_is_max": False,
    "camera": {
        "focal_length_mm": 30.0,
        "sensor_width_mm": 36.0,
        "exposure_s": 1.0 / 60.0,
        "near_m": 0.2,
        "far_m": 1000.0,
        "position_m": [0.0, 0.0, 0.0],
        "yaw_deg": 0.0,
        "pitch_deg": 0.0,
        "roll_deg": 0.0,
    },
    "rain": {
        "intensity_mm_per_h": 50.0,
        "wind_mps": [0.0, 0.0],
        "diameter_range_mm": [0.5, 5.0],
    },
    "sim": {
        "max_spawn_distance_m": DEFAULT_MAX_SPAWN_DISTANCE_M,
        "particle_budget": DEFAULT_PARTICLE_BUDGET,
        "poisson_counts": False,
        "count_override": None,
        "occlusion_eps_m": 0.05,
    },
    "appearance": {
        "mode": "procedural",
        "sigma_factor": 0.5,
        "base_intensity": 1.0,
        "gain": 1.0,
    },
    "tau0_s": TAU0_S,
    "hdr": False,
    "export_quads": False,
    "quads_per_pixel": False,
}


def validate_config(config: dict) -> None:
    """Schema-check a config document; unknown keys are rejected by path."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        msgs = [f"{e.json_path}: {e.message}" for e in errors]
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(msgs))
    names = [job.get("name") for job in config["jobs"]]
    if len(set(names)) != len(names):
        raise ConfigurationError("job names must be unique")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_wind(rain_cfg: dict) -> list:
    """Resolve the wind vector; a slant spec is converted for a 1 mm drop."""
    if "slant" in rain_cfg:
        slant = rain_cfg["slant"]
        speed = terminal_velocity(1.0e-3) * math.tan(
            math.radians(slant["angle_deg"])
        )
        az = math.radians(slant.get("azimuth_deg", 0.0))
        return [speed * math.cos(az), speed * math.sin(az)]
    return list(rain_cfg.get("wind_mps", [0.0, 0.0]))


@dataclass
class SceneJob:
    """One fully resolved unit of work producing one paired record."""

    name: str
    background_path: str
    depth_path: str
    output_dir: str
    params: dict  # resolved job config (defaults merged, wind resolved)

    @classmethod
    def from_config_entry(
        cls, entry: dict, defaults: dict, base_dir: Path, output_dir: Path
    ) -> "SceneJob":
        merged = _merge(_JOB_DEFAULTS, _merge(defaults, entry))
        for key in ("name", "background", "depth", "seed"):
            if key not in merged:
                raise ConfigurationError(f"job missing required key {key!r}")
        merged["rain"]["wind_mps"] = resolve_wind(merged["rain"])
        merged["rain"].pop("slant", None)
        background = str((base_dir / merged.pop("background")).resolve())
        depth = str((base_dir / merged.pop("depth")).resolve())
        if merged["appearance"].get("atlas_dir"):
            merged["appearance"]["atlas_dir"] = str(
                (base_dir / merged["appearance"]["atlas_dir"]).resolve()
            )
        return cls(
            name=merged.pop("name"),
            background_path=background,
            depth_path=depth,
            output_dir=str(output_dir),
            params=merged,
        )


def _simulation_volume(cam: CameraModel, wind: WindVector, d_max: float, max_dist: float) -> SimVolume:
    """Frustum AABB out to `max_dist`, padded by the maximum exposure travel."""
    z_far = min(cam.far_m, max_dist)
    corners_cam = []
    for z in (cam.near_m, z_far):
        hx = cam.cx / cam.fx * z
        hy = cam.cy / cam.fx * z
        for sx in (-1, 1):
            for sy in (-1, 1):
                corners_cam.append([sx * hx, sy * hy, z])
    corners_world = np.asarray(corners_cam) @ cam.rotation + cam.position
    pad = np.array(
        [
            abs(wind.vx) * cam.exposure_s,
            terminal_velocity(d_max) * cam.exposure_s,
            abs(wind.vz) * cam.exposure_s,
        ]
    ) + 1e-3
    return SimVolume(
        min_corner=corners_world.min(axis=0) - pad,
        max_corner=corners_world.max(axis=0) + pad,
    )


def run_job(job: SceneJob) -> dict:
    """Execute one job end to end; returns its manifest entry."""
    p = job.params
    out_dir = Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    background_srgb = read_rgb_png(job.background_path)
    height, width = background_srgb.shape[:2]

    cam_cfg = p["camera"]
    cam = CameraModel.create(
        focal_length_mm=cam_cfg["focal_length_mm"],
        sensor_width_mm=cam_cfg["sensor_width_mm"],
        image_width_px=width,
        image_height_px=height,
        position=cam_cfg["position_m"],
        yaw_deg=cam_cfg["yaw_deg"],
        pitch_deg=cam_cfg["pitch_deg"],
        roll_deg=cam_cfg["roll_deg"],
        exposure_s=cam_cfg["exposure_s"],
        near_m=cam_cfg["near_m"],
        far_m=cam_cfg["far_m"],
    )

    depth_values = read_depth(
        job.depth_path, depth_scale=p["depth_scale"], sky_is_max=p["sky_is_max"]
    )
    if depth_values.shape != (height, width):
        raise ConfigurationError(
            f"depth {depth_values.shape} does not match background "
            f"{(height, width)}"
        )
    depth_map = DepthMap(values=depth_values)

    rain_cfg = p["rain"]
    intensity = RainIntensity(rain_cfg["intensity_mm_per_h"])
    wind = WindVector(*rain_cfg["wind_mps"])
    d_lo, d_hi = rain_cfg["diameter_range_mm"]
    drange = DiameterRange(d_lo * 1e-3, d_hi * 1e-3)
    dsd = marshall_palmer(intensity, drange)

    sim_cfg = p["sim"]
    volume = _simulation_volume(
        cam, wind, drange.d_max, sim_cfg["max_spawn_distance_m"]
    )
    drops = spawn_drops(
        volume,
        dsd,
        wind,
        seed=p["seed"],
        count_override=sim_cfg["count_override"],
        particle_budget=sim_cfg["particle_budget"],
        poisson=sim_cfg["poisson_counts"],
    )
    in_frustum = frustum_cull(cam, drops)
    visible = occlusion_cull(cam, depth_map, in_frustum, eps_m=sim_cfg["occlusion_eps_m"])

    app_cfg = p["appearance"]
    if app_cfg["mode"] == "database":
        if not app_cfg.get("atlas_dir"):
            raise ConfigurationError("database appearance requires atlas_dir")
        appearance = load_streak_atlas(app_cfg["atlas_dir"], gain=app_cfg["gain"])
    else:
        appearance = StreakAppearance(
            mode="procedural",
            sigma_factor=app_cfg["sigma_factor"],
            base_intensity=app_cfg["base_intensity"],
        )

    segments = build_segments(cam, visible)

    layer = rasterize(
        RainLayer.zeros(width, height),
        segments,
        appearance,
        seed=p["seed"],
        exposure_s=cam.exposure_s,
    )

    params = BlendParams(exposure_s=cam.exposure_s, tau0_s=p["tau0_s"])
    background_lin = srgb_to_linear(background_srgb)
    rainy_lin = blend(background_lin, layer, params)

    files = {
        "background": f"{job.name}_background.png",
        "depth": f"{job.name}_depth.pfm",
        "depth_preview": f"{job.name}_depth.png",
        "rain_layer": f"{job.name}_rainlayer.png",
        "tau1": f"{job.name}_tau1.pfm",
        "rainy": f"{job.name}_rainy.png",
    }
    write_rgb_png(out_dir / files["background"], background_srgb)
    write_pfm(out_dir / files["depth"], depth_values)
    preview = np.where(
        np.isinf(depth_values),
        65535.0,
        np.clip(depth_values / cam.far_m, 0.0, 1.0) * 65535.0,
    )
    write_gray16_png(out_dir / files["depth_preview"], np.round(preview))
    write_rgba_png(
        out_dir / files["rain_layer"], linear_to_srgb(layer.color), layer.alpha
    )
    write_pfm(out_dir / files["tau1"], layer.tau1)
    write_rgb_png(out_dir / files["rainy"], linear_to_srgb(rainy_lin))
    if p["hdr"]:
        files["rainy_hdr"] = f"{job.name}_rainy.pfm"
        write_pfm(
            out_dir / files["rainy_hdr"],
            blend(background_lin, layer, params, clamp=False),
        )
    if p["export_quads"]:
        files["streaks_obj"] = f"{job.name}_streaks.obj"
        export_quads(
            cam, visible, out_dir / files["streaks_obj"], per_pixel=p["quads_per_pixel"]
        )

    return {
        "name": job.name,
        "files": files,
        "intensity_mm_h": intensity.value_mm_per_h,
        "wind": {"vx": wind.vx, "vz": wind.vz},
        "seed": p["seed"],
        "camera": {
            "focal_length_mm": cam.focal_length_mm,
            "sensor_width_mm": cam.sensor_width_mm,
            "image_width_px": width,
            "image_height_px": height,
            "exposure_s": cam.exposure_s,
            "near_m": cam.near_m,
            "far_m": cam.far_m,
        },
        "stats": {
            "drops_spawned": len(drops),
            "drops_after_frustum": len(in_frustum),
            "drops_visible": len(visible),
            "segments": len(segments),
            "coverage_fraction": float(np.mean(layer.alpha > 0)),
        },
        "job": {
            "name": job.name,
            "background_path": job.background_path,
            "depth_path": job.depth_path,
            "params": p,
        },
    }


def _run_job_entry(args):
    return run_job(SceneJob(**args))


def run_batch(
    config: dict | str | Path,
    parallelism: int = 1,
    fail_fast: bool = False,
    base_dir: Path | None = None,
    overrides: dict | None = None,
) -> dict:
    """Run every job in a config document and write the dataset manifest.

    Per-record outputs are independent of the parallelism degree. Job
    failures are recorded in the manifest unless `fail_fast` is set.
    """
    if not isinstance(config, dict):
        config_path = Path(config)
        base_dir = base_dir or config_path.parent
        try:
            config = json.loads(config_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from exc
    base_dir = Path(base_dir or ".")
    validate_config(config)

    defaults = config.get("defaults", {})
    output_dir = (base_dir / config["output_dir"]).resolve()
    entries = config["jobs"]
    if overrides:
        # CLI overrides beat both defaults and per-job settings
        entries = [_merge(entry, overrides) for entry in entries]
    jobs = [
        SceneJob.from_config_entry(entry, defaults, base_dir, output_dir)
        for entry in entries
    ]
    return run_jobs(jobs, output_dir, parallelism=parallelism, fail_fast=fail_fast)


def run_jobs(
    jobs, output_dir, parallelism: int = 1, fail_fast: bool = False
) -> dict:
    """Execute resolved jobs and assemble + write the manifest."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    records, errors = [], []

    def handle(job, outcome):
        if isinstance(outcome, Exception):
            if fail_fast:
                raise outcome
            errors.append(
                {
                    "name": job.name,
                    "error": type(outcome).__name__,
                    "message": str(outcome),
                }
            )
        else:
            records.append(outcome)

    if parallelism <= 1 or len(jobs) <= 1:
        for job in jobs:
            try:
                handle(job, run_job(job))
            except RainforgeError as exc:
                handle(job, exc)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(run_job, job): job for job in jobs}
            for fut, job in futures.items():
                try:
                    handle(job, fut.result())
                except RainforgeError as exc:
                    handle(job, exc)

    records.sort(key=lambda r: r["name"])
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool": "rainforge",
        "tool_version": __version__,
        "rng_algorithm": RNG_ALGORITHM_ID,
        "records": records,
        "errors": errors,
    }
    manifest_path = output_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def jobs_from_manifest(manifest: dict | str | Path, output_dir=None):
    """Rebuild the job list from a manifest for byte-identical regeneration."""
    if not isinstance(manifest, dict):
        manifest = json.loads(Path(manifest).read_text())
    jobs = []
    for record in manifest["records"]:
        spec = record["job"]
        jobs.append(
            SceneJob(
                name=spec["name"],
                background_path=spec["background_path"],
                depth_path=spec["depth_path"],
                output_dir=str(output_dir) if output_dir else ".",
                params=copy.deepcopy(spec["params"]),
            )
        )
    return jobs


def manifest_stats_rows(manifest: dict | str | Path):
    """Per-record drop-count/coverage rows for CSV export."""
    if not isinstance(manifest, dict):
        manifest = json.loads(Path(manifest).read_text())
    rows = []
    for record in manifest["records"]:
        stats = record["stats"]
        rows.append(
            {
                "name": record["name"],
                "intensity_mm_h": record["intensity_mm_h"],
                "seed": record["seed"],
                "drops_spawned": stats["drops_spawned"],
                "drops_after_frustum": stats["drops_after_frustum"],
                "drops_visible": stats["drops_visible"],
                "coverage_fraction": stats["coverage_fraction"],
            }
        )
    return rows


def write_stats_csv(manifest, stream) -> None:
    rows = manifest_stats_rows(manifest)
    fieldnames = [
        "name",
        "intensity_mm_h",
        "seed",
        "drops_spawned",
        "drops_after_frustum",
        "drops_visible",
        "coverage_fraction",
    ]
    writer = csv.DictWriter(stream, fieldnames=fieldnames)
    writer.writeheader()
    writer.writerows(rows)
