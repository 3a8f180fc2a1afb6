import json

import numpy as np
import pytest
from PIL import Image

from rainforge.camera import CameraModel, ImagePoint
from rainforge.errors import ConfigurationError, ValidationError
from rainforge.particles import DropSet
from rainforge.raster import (
    RainLayer,
    StreakAppearance,
    StreakSegment,
    export_quads,
    load_streak_atlas,
    per_pixel_tau1,
    rasterize,
    streak_segment,
)

EXPOSURE = 1.0 / 60.0
OPAQUE = StreakAppearance(mode="procedural", sigma_factor=1.0, base_intensity=1.0)


def seg(u0, v0, u1, v1, width=1.0, z=5.0, drop_id=0):
    return StreakSegment(
        p0=ImagePoint(u=u0, v=v0, z_cam=z),
        p1=ImagePoint(u=u1, v=v1, z_cam=z),
        width_px=width,
        drop_id=drop_id,
    )


def make_camera(width=640, height=480):
    return CameraModel.create(
        focal_length_mm=30.0,
        sensor_width_mm=36.0,
        image_width_px=width,
        image_height_px=height,
        exposure_s=EXPOSURE,
    )


def make_drops(positions, diameters, velocities):
    n = len(positions)
    return DropSet(
        ids=np.arange(n, dtype=np.int64),
        positions=np.asarray(positions, dtype=float),
        diameters=np.asarray(diameters, dtype=float),
        velocities=np.asarray(velocities, dtype=float),
    )


class TestStreakSegment:
    def test_vertical_without_wind(self):
        cam = make_camera()
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -4.0, 0.0]])
        s = streak_segment(cam, drops[0])
        assert abs(s.p1.u - s.p0.u) < 1e-6 * abs(s.p1.v - s.p0.v)

    def test_width(self):
        cam = make_camera()
        # width_px = fx * d / z ; fx = 533.33
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -4.0, 0.0]])
        s = streak_segment(cam, drops[0])
        assert s.width_px == pytest.approx(cam.fx * 2e-3 / 10.0, rel=1e-3)

    def test_length(self):
        cam = make_camera()
        v = 4.111
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -v, 0.0]])
        s = streak_segment(cam, drops[0])
        assert s.length_px == pytest.approx(cam.fx * v * EXPOSURE / 10.0, rel=1e-3)

    def test_hand_computed_example(self):
        # fx = 2000 px, z = 10 m, d = 2 mm -> width 0.4 px; v_t = 4.111 m/s,
        # T = 1/60 -> length ~= 13.7 px
        cam = CameraModel.create(
            focal_length_mm=50.0,
            sensor_width_mm=25.0,
            image_width_px=1000,
            image_height_px=1000,
            exposure_s=1.0 / 60.0,
        )
        assert cam.fx == pytest.approx(2000.0)
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -4.111, 0.0]])
        s = streak_segment(cam, drops[0])
        assert s.width_px == pytest.approx(0.4, rel=1e-3)
        assert s.length_px == pytest.approx(2000 * 4.111 / 60.0 / 10.0, rel=1e-3)


class TestPerPixelTau1:
    def test_short_streak_clamps_to_exposure(self):
        s = seg(10, 10, 10.4, 10, width=1.0)
        assert per_pixel_tau1(s, EXPOSURE) == EXPOSURE

    def test_dwell_is_exposure_over_length(self):
        s = seg(10, 10, 10 + 13.7, 10)
        assert per_pixel_tau1(s, EXPOSURE) == pytest.approx(1.217e-3, rel=1e-3)

    def test_never_exceeds_exposure(self):
        for length in (0.1, 0.9, 1.0, 2.0, 50.0):
            s = seg(0, 0, length, 0)
            assert per_pixel_tau1(s, EXPOSURE) <= EXPOSURE


class TestRasterize:
    def test_empty(self):
        layer = RainLayer.zeros(64, 48)
        out = rasterize(layer, [], OPAQUE, seed=0, exposure_s=EXPOSURE)
        assert np.all(out.alpha == 0)
        assert np.all(out.tau1 == 0)
        assert np.all(out.color == 0)

    def test_horizontal_segment_pixel_count(self):
        length = 20.0
        s = seg(10.0, 24.5, 10.0 + length, 24.5, width=1.0)
        out = rasterize(RainLayer.zeros(64, 48), [s], OPAQUE, 0, EXPOSURE)
        covered_cols = np.unique(np.nonzero(out.alpha)[1])
        assert length <= len(covered_cols) <= length + 2
        # fully covered interior pixels saturate
        assert out.alpha.max() == pytest.approx(1.0, abs=1e-9)

    def test_over_saturation(self):
        s1 = seg(10.0, 24.5, 30.0, 24.5, width=2.0, drop_id=0)
        s2 = seg(10.0, 24.5, 30.0, 24.5, width=2.0, drop_id=1)
        one = rasterize(RainLayer.zeros(64, 48), [s1], OPAQUE, 0, EXPOSURE)
        two = rasterize(RainLayer.zeros(64, 48), [s1, s2], OPAQUE, 0, EXPOSURE)
        # 1 OVER 1 = 1: fully covered pixels are unchanged by the duplicate;
        # partially covered edge pixels compound as 1 - (1 - a)^2
        full = one.alpha == 1.0
        assert full.any()
        assert np.array_equal(two.alpha[full], one.alpha[full])
        edge = (one.alpha > 0) & ~full
        assert np.allclose(two.alpha[edge], 1 - (1 - one.alpha[edge]) ** 2)
        assert np.all(two.alpha <= 1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        segs = [
            seg(
                rng.uniform(0, 64),
                rng.uniform(0, 48),
                rng.uniform(0, 64),
                rng.uniform(0, 48),
                width=rng.uniform(0.5, 3.0),
                z=rng.uniform(2.0, 30.0),
                drop_id=i,
            )
            for i in range(50)
        ]
        fwd = rasterize(RainLayer.zeros(64, 48), segs, OPAQUE, 0, EXPOSURE)
        rev = rasterize(RainLayer.zeros(64, 48), segs[::-1], OPAQUE, 0, EXPOSURE)
        assert np.array_equal(fwd.alpha, rev.alpha)
        assert np.array_equal(fwd.color, rev.color)
        assert np.array_equal(fwd.tau1, rev.tau1)

    def test_alpha_mass_monotone_in_drop_count(self):
        rng = np.random.default_rng(6)
        segs = [
            seg(
                rng.uniform(0, 64),
                rng.uniform(0, 48),
                rng.uniform(0, 64),
                rng.uniform(0, 48),
                width=rng.uniform(0.5, 2.0),
                z=rng.uniform(2.0, 30.0),
                drop_id=i,
            )
            for i in range(40)
        ]
        masses = []
        for n in (0, 10, 20, 40):
            out = rasterize(RainLayer.zeros(64, 48), segs[:n], OPAQUE, 0, EXPOSURE)
            masses.append(out.alpha.sum())
        assert all(a <= b + 1e-12 for a, b in zip(masses, masses[1:]))

    def test_co_support_invariant(self):
        rng = np.random.default_rng(7)
        segs = [
            seg(
                rng.uniform(-10, 74),
                rng.uniform(-10, 58),
                rng.uniform(-10, 74),
                rng.uniform(-10, 58),
                width=rng.uniform(0.2, 4.0),
                z=rng.uniform(1.0, 50.0),
                drop_id=i,
            )
            for i in range(100)
        ]
        out = rasterize(RainLayer.zeros(64, 48), segs, OPAQUE, 0, EXPOSURE)
        assert np.array_equal(out.alpha > 0, out.tau1 > 0)
        assert np.all(out.alpha <= 1.0)
        assert np.all(out.tau1 <= EXPOSURE + 1e-15)

    def test_tau1_frontmost_wins(self):
        near = seg(10.0, 24.5, 40.0, 24.5, width=2.0, z=2.0, drop_id=7)
        far = seg(10.0, 24.5, 20.0, 24.5, width=2.0, z=20.0, drop_id=1)
        out = rasterize(RainLayer.zeros(64, 48), [far, near], OPAQUE, 0, EXPOSURE)
        tau_near = per_pixel_tau1(near, EXPOSURE)
        ys, xs = np.nonzero(out.alpha)
        mid = out.tau1[24, 15]
        assert mid == pytest.approx(tau_near)

    def test_gaussian_cross_section_mass(self):
        # wide vertical streak; per-row stamped intensity*alpha must match a
        # densely supersampled integral of the same continuous profile
        app = StreakAppearance(mode="procedural", sigma_factor=0.5, base_intensity=1.0)
        width = 8.0
        s = seg(32.0, 4.0, 32.0, 44.0, width=width)
        out = rasterize(RainLayer.zeros(64, 48), [s], app, 0, EXPOSURE)
        sigma = 0.5 * (width / 2.0)
        xs = np.linspace(0.0, 64.0, 64 * 200, endpoint=False)
        d = np.abs(xs - 32.0)
        half_w = width / 2.0
        cover = (d <= half_w).astype(float)
        profile = np.exp(-(d**2) / (2 * sigma**2)) * cover
        oracle_mass = profile.sum() * (64.0 / len(xs))
        row = 24
        stamped_mass = (out.color[row, :, 0] * 0 + out.color[row, :, 0]).sum()
        # color holds premultiplied intensity: sum over the row approximates
        # the integral of intensity * coverage
        assert stamped_mass == pytest.approx(oracle_mass, rel=0.02)

    def test_empty_database_atlas_rejected(self):
        with pytest.raises(ConfigurationError):
            rasterize(
                RainLayer.zeros(8, 8),
                [],
                StreakAppearance(mode="database", atlas=()),
                0,
                EXPOSURE,
            )

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValidationError):
            StreakAppearance(mode="procedural", sigma_factor=0.0)


class TestDatabaseAppearance:
    def make_atlas(self, tmp_path):
        tex = np.zeros((32, 8, 2), dtype=np.uint8)
        tex[:, :, 0] = 200
        tex[:, :, 1] = 255
        Image.fromarray(tex, mode="LA").save(tmp_path / "streak0.png")
        (tmp_path / "index.json").write_text(
            json.dumps(
                {"entries": [{"texture_path": "streak0.png", "length_px": 32, "width_px": 8}]}
            )
        )
        return tmp_path

    def test_load_and_rasterize(self, tmp_path):
        app = load_streak_atlas(self.make_atlas(tmp_path))
        assert app.mode == "database"
        assert len(app.atlas) == 1
        s = seg(16.0, 4.0, 16.0, 40.0, width=2.0)
        out = rasterize(RainLayer.zeros(32, 48), [s], app, seed=1, exposure_s=EXPOSURE)
        assert out.alpha.max() > 0
        assert out.color.max() == pytest.approx(200 / 255, rel=0.05)


class TestExportQuads:
    def test_zero_drops(self, tmp_path):
        cam = make_camera()
        path = tmp_path / "empty.obj"
        n = export_quads(cam, DropSet.empty(), path)
        assert n == 0
        text = path.read_text()
        assert "f " not in text

    def test_single_drop_billboard(self, tmp_path):
        cam = make_camera()
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -4.0, 0.0]])
        path = tmp_path / "one.obj"
        n = export_quads(cam, drops, path)
        assert n == 1
        verts = []
        faces = []
        for line in path.read_text().splitlines():
            if line.startswith("v "):
                verts.append([float(x) for x in line.split()[1:]])
            elif line.startswith("f "):
                faces.append(line.split()[1:])
        assert len(verts) == 4
        assert len(faces) == 1
        v = np.asarray(verts)
        normal = np.cross(v[1] - v[0], v[3] - v[0])
        normal /= np.linalg.norm(normal)
        view = cam.view_direction
        assert min(
            np.linalg.norm(normal - view), np.linalg.norm(normal + view)
        ) < 1e-6

    def test_per_streak_count(self, tmp_path):
        cam = make_camera()
        rng = np.random.default_rng(2)
        n = 17
        drops = make_drops(
            np.column_stack(
                [rng.uniform(-2, 2, n), rng.uniform(-2, 2, n), rng.uniform(-20, -5, n)]
            ),
            rng.uniform(1e-3, 4e-3, n),
            np.column_stack([np.zeros(n), -rng.uniform(3, 8, n), np.zeros(n)]),
        )
        path = tmp_path / "many.obj"
        assert export_quads(cam, drops, path) == n
        text = path.read_text()
        assert text.count("\nf ") == n
        assert text.count("\nv ") == 4 * n

    def test_per_pixel_mode_inflates(self, tmp_path):
        cam = make_camera()
        drops = make_drops([[0.0, 0.0, -10.0]], [2e-3], [[0.0, -4.0, 0.0]])
        n = export_quads(cam, drops, tmp_path / "pp.obj", per_pixel=True)
        assert n > 1
