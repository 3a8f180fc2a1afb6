import numpy as np
import pytest

from rainforge.compositing import (
    TAU0_S,
    BlendParams,
    blend,
    delinearize,
    linear_to_srgb,
    linearize,
    srgb_to_linear,
)
from rainforge.errors import ConfigurationError, ValidationError
from rainforge.raster import RainLayer

T = 1.0 / 60.0


def make_layer(w, h, alpha=0.0, color=0.0, tau1=0.0):
    layer = RainLayer.zeros(w, h)
    layer.alpha[:] = alpha
    layer.color[:] = color
    layer.tau1[:] = tau1
    return layer


def scalar_blend_reference(background, layer, params, clamp=True):
    """Pixel-by-pixel reference of the blending formula."""
    h, w = layer.alpha.shape
    out = np.empty((h, w, 3))
    for y in range(h):
        for x in range(w):
            a = layer.alpha[y, x]
            t1 = layer.tau1[y, x]
            for c in range(3):
                val = (params.exposure_s - a * t1) / params.exposure_s * background[
                    y, x, c
                ] + layer.color[y, x, c] * (t1 / params.tau0_s)
                if clamp:
                    val = min(max(val, 0.0), 1.0)
                out[y, x, c] = val
    return out


class TestBlend:
    def test_tau0_constant(self):
        assert TAU0_S == pytest.approx(6.32456e-4, rel=1e-5)

    def test_zero_alpha_identity(self):
        rng = np.random.default_rng(0)
        bg = rng.random((16, 16, 3))
        out = blend(bg, make_layer(16, 16), BlendParams(T))
        assert np.array_equal(out, bg)

    def test_hand_evaluated_case(self):
        # T = 1/60, tau1 = tau0, alpha = 1, rain = 0.5, background = 0.2
        bg = np.full((4, 4, 3), 0.2)
        layer = make_layer(4, 4, alpha=1.0, color=0.5, tau1=TAU0_S)
        out = blend(bg, layer, BlendParams(T, tau0_s=TAU0_S), clamp=False)
        assert out[0, 0, 0] == pytest.approx(0.69241, abs=1e-5)

    def test_clamp(self):
        bg = np.full((2, 2, 3), 0.2)
        layer = make_layer(2, 2, alpha=1.0, color=1.0, tau1=2 * TAU0_S)
        pre = blend(bg, layer, BlendParams(T), clamp=False)
        post = blend(bg, layer, BlendParams(T))
        assert pre[0, 0, 0] > 1.0
        assert post[0, 0, 0] == 1.0

    def test_matches_scalar_reference_bit_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            h, w = rng.integers(4, 12, 2)
            bg = rng.random((h, w, 3))
            layer = RainLayer.zeros(w, h)
            mask = rng.random((h, w)) < 0.5
            layer.alpha[mask] = rng.random(mask.sum())
            layer.tau1[mask] = rng.uniform(1e-4, T, mask.sum())
            layer.color[mask] = rng.random((mask.sum(), 3))
            params = BlendParams(T)
            fast = blend(bg, layer, params)
            slow = scalar_blend_reference(bg, layer, params)
            assert np.array_equal(fast, slow)

    def test_locality(self):
        rng = np.random.default_rng(4)
        bg = rng.random((8, 8, 3))
        base = make_layer(8, 8)
        changed = make_layer(8, 8)
        changed.alpha[3, 5] = 0.7
        changed.tau1[3, 5] = 1e-3
        changed.color[3, 5] = 0.9
        a = blend(bg, base, BlendParams(T))
        b = blend(bg, changed, BlendParams(T))
        diff = np.any(a != b, axis=2)
        assert diff[3, 5]
        assert diff.sum() == 1

    def test_monotone_in_alpha_tau_product(self):
        # brighter-than-background rain: output grows with alpha * tau1
        bg = np.full((1, 1, 3), 0.1)
        vals = []
        for tau1 in (1e-4, 3e-4, 6e-4, 1e-3):
            layer = make_layer(1, 1, alpha=1.0, color=0.8, tau1=tau1)
            vals.append(blend(bg, layer, BlendParams(T), clamp=False)[0, 0, 0])
        assert all(x <= y for x, y in zip(vals, vals[1:]))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            blend(np.zeros((4, 4, 3)), make_layer(5, 5), BlendParams(T))

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            BlendParams(0.0)


class TestTransferCurves:
    def test_linear_identity(self):
        x = np.linspace(0, 1, 11)
        assert np.array_equal(linearize(x, "linear"), x)
        assert np.array_equal(delinearize(x, "linear"), x)

    def test_endpoints(self):
        assert srgb_to_linear(0.0) == 0.0
        assert srgb_to_linear(1.0) == pytest.approx(1.0, abs=1e-12)
        assert linear_to_srgb(0.0) == 0.0
        assert linear_to_srgb(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip_all_8bit_codes(self):
        codes = np.arange(256) / 255.0
        back = linear_to_srgb(srgb_to_linear(codes))
        assert np.max(np.abs(back - codes)) < 1.0 / 65535.0

    def test_unknown_transfer(self):
        with pytest.raises(ConfigurationError):
            linearize(np.zeros(3), "rec709")
