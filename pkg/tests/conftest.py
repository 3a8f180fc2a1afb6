import json

import numpy as np
import pytest

from rainforge.imgio import write_pfm, write_rgb_png


def make_scene(
    directory,
    width=320,
    height=200,
    depth_near=3.0,
    depth_far=30.0,
    sky_rows=0,
):
    """Write a synthetic background PNG and metric depth PFM; return paths."""
    rng = np.random.default_rng(123)
    background = rng.random((height, width, 3)) * 0.6 + 0.2
    bg_path = directory / "background.png"
    write_rgb_png(bg_path, background)

    ramp = np.linspace(depth_near, depth_far, width)
    depth = np.tile(ramp, (height, 1)).astype(np.float32)
    if sky_rows:
        depth[:sky_rows, :] = np.inf
    depth_path = directory / "depth.pfm"
    write_pfm(depth_path, depth)
    return bg_path, depth_path


def make_config(
    directory,
    jobs,
    output_dir="out",
    defaults=None,
):
    config = {
        "schema_version": 1,
        "output_dir": output_dir,
        "jobs": jobs,
    }
    if defaults is not None:
        config["defaults"] = defaults
    path = directory / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return path


@pytest.fixture
def scene(tmp_path):
    bg, depth = make_scene(tmp_path)
    return tmp_path, bg, depth
