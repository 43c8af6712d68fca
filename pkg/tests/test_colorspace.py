import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colorlex.colorspace import (ColorChip, HslColor, context_ease, delta_e,
                                 hsl_grid_to_cielab, hsl_to_cielab)
from colorlex.dataset import Trial

# golden values computed with an independent reference implementation
# (colorsys HLS -> sRGB, skimage rgb2lab, D65/2deg) and frozen here
CONVERSION_GOLDENS = [
    # (h, s, l) -> (L, a, b) quantized to 0.1
    ((0.0, 0.0, 1.0), (100.0, 0.0, 0.0)),
    ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ((120.0, 1.0, 0.5), (87.7, -86.2, 83.2)),
    ((0.0, 1.0, 0.5), (53.2, 80.1, 67.2)),
    ((240.0, 1.0, 0.5), (32.3, 79.2, -107.9)),
    ((60.0, 1.0, 0.5), (97.1, -21.6, 94.5)),
    ((200.0, 0.5, 0.3), (35.7, -8.4, -19.6)),
    ((330.5, 0.25, 0.75), (74.7, 14.1, -3.7)),
]


class TestColorChip:
    def test_quantizes_once(self):
        chip = ColorChip(50.123, -3.149, 7.06)
        assert chip.as_tuple() == (50.1, -3.1, 7.1)

    def test_quantization_idempotent(self):
        chip = ColorChip(50.123, -3.149, 7.06)
        again = ColorChip(*chip.as_tuple())
        assert chip == again

    def test_equality_is_componentwise(self):
        assert ColorChip(1.04, 2.0, 3.0) == ColorChip(1.0, 2.04, 3.0 - 0.04)
        assert ColorChip(1.0, 2.0, 3.0) != ColorChip(1.1, 2.0, 3.0)

    @pytest.mark.parametrize("bad", [(-0.1, 0, 0), (100.2, 0, 0),
                                     (50, -128.2, 0), (50, 0, 129)])
    def test_range_violations_raise(self, bad):
        with pytest.raises(ValueError):
            ColorChip(*bad)

    def test_negative_zero_folded(self):
        chip = ColorChip(0.0, -0.04, 0.0)
        assert math.copysign(1.0, chip.a) == 1.0


class TestHslColor:
    def test_hue_wraps(self):
        assert HslColor(372.5, 0.5, 0.5).h == pytest.approx(12.5)

    def test_saturation_range(self):
        with pytest.raises(ValueError):
            HslColor(0, 1.2, 0.5)


class TestConversion:
    @pytest.mark.parametrize("hsl,lab", CONVERSION_GOLDENS)
    def test_golden_values(self, hsl, lab):
        chip = hsl_to_cielab(HslColor(*hsl))
        assert chip.as_tuple() == lab

    def test_against_reference_implementation(self):
        # cross-check the full chain against skimage on a grid
        import colorsys
        from skimage import color as skcolor

        rng = np.random.default_rng(7)
        for _ in range(200):
            h = float(rng.uniform(0, 360))
            s = float(rng.uniform(0, 1))
            l = float(rng.uniform(0, 1))
            r, g, b = colorsys.hls_to_rgb(h / 360.0, l, s)
            expected = skcolor.rgb2lab(np.array([[[r, g, b]]]),
                                       illuminant="D65", observer="2")[0, 0]
            chip = hsl_to_cielab(HslColor(h, s, l))
            assert np.allclose(chip.as_tuple(), np.round(expected, 1), atol=0.051)

    @given(st.floats(0, 359.999), st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_grey_axis_neutral(self, h, l):
        chip = hsl_to_cielab(HslColor(h, 0.0, l))
        assert chip.a == 0.0
        assert chip.b == 0.0

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(0, 360, 50)
        s = rng.uniform(0, 1, 50)
        l = rng.uniform(0, 1, 50)
        batch = hsl_grid_to_cielab(h, s, l)
        for i in range(50):
            chip = hsl_to_cielab(HslColor(h[i], s[i], l[i]))
            assert np.allclose(batch[i], chip.as_tuple())


chips = st.builds(
    ColorChip,
    st.floats(0, 100).map(lambda x: round(x, 1)),
    st.floats(-128, 128).map(lambda x: round(x, 1)),
    st.floats(-128, 128).map(lambda x: round(x, 1)),
)


class TestDeltaE:
    def test_identity(self):
        c = ColorChip(10, 20, 30)
        assert delta_e(c, c) == 0.0

    def test_three_four_five(self):
        assert delta_e(ColorChip(0, 0, 0), ColorChip(3, 4, 0)) == pytest.approx(5.0)

    def test_analytic(self):
        d = delta_e(ColorChip(50, 10, -10), ColorChip(60, -10, 10))
        assert d == pytest.approx(math.sqrt(100 + 400 + 400))

    @given(chips, chips)
    @settings(max_examples=80, deadline=None)
    def test_symmetry(self, x, y):
        assert delta_e(x, y) == pytest.approx(delta_e(y, x))

    @given(chips, chips, chips)
    @settings(max_examples=80, deadline=None)
    def test_triangle_inequality(self, x, y, z):
        assert delta_e(x, z) <= delta_e(x, y) + delta_e(y, z) + 1e-9

    @given(chips, chips)
    @settings(max_examples=80, deadline=None)
    def test_zero_iff_equal(self, x, y):
        if x == y:
            assert delta_e(x, y) == 0.0
        else:
            assert delta_e(x, y) > 0.0


class TestContextEase:
    def _trial(self, target, d1, d2):
        return Trial(target=target, distractors=(d1, d2), condition="far")

    def test_minimum_of_two(self):
        t = self._trial(ColorChip(0, 0, 0), ColorChip(10, 0, 0), ColorChip(50, 0, 0))
        assert context_ease(t) == pytest.approx(10.0)

    def test_equal_distractors(self):
        t = self._trial(ColorChip(0, 0, 0), ColorChip(25, 0, 0), ColorChip(0, 25, 0))
        assert context_ease(t) == pytest.approx(25.0)

    @given(chips, chips, chips)
    @settings(max_examples=60, deadline=None)
    def test_bounded_by_each_distractor(self, t, d1, d2):
        if d1 == t or d2 == t:
            return
        trial = self._trial(t, d1, d2)
        ease = context_ease(trial)
        assert ease <= delta_e(t, d1) + 1e-12
        assert ease <= delta_e(t, d2) + 1e-12
