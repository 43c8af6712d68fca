"""Color chips, HSL→CIELAB conversion, perceptual distance, and context ease.

Chips live in CIELAB at a fixed 0.1 resolution; quantization happens once at
construction so every downstream computation sees identical values across
runs.  Distances are plain Euclidean (CIE76 ΔE) computed in full float
precision from the quantized coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# sRGB companding + D65/2° white point (classic BT.709 primaries); same
# constants as skimage, so conversions can be cross-checked against it.
_XYZ_FROM_RGB = np.array([
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
])
_WHITE_D65 = (0.95047, 1.0, 1.08883)
_LAB_DELTA = 6.0 / 29.0


def _quant(x: float) -> float:
    # round-half-even at one decimal, matching numpy.round
    return float(np.round(x, 1)) + 0.0  # +0.0 folds -0.0 into 0.0


@dataclass(frozen=True, order=True)
class ColorChip:
    """A CIELAB point quantized to one decimal place; the atomic referent."""

    L: float
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "L", _quant(self.L))
        object.__setattr__(self, "a", _quant(self.a))
        object.__setattr__(self, "b", _quant(self.b))
        if not (0.0 <= self.L <= 100.0):
            raise ValueError(f"L out of range: {self.L}")
        if not (-128.0 <= self.a <= 128.0):
            raise ValueError(f"a out of range: {self.a}")
        if not (-128.0 <= self.b <= 128.0):
            raise ValueError(f"b out of range: {self.b}")

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.a, self.b])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.L, self.a, self.b)


@dataclass(frozen=True)
class HslColor:
    """Hue in degrees [0, 360), saturation and lightness in [0, 1]."""

    h: float
    s: float
    l: float

    def __post_init__(self):
        object.__setattr__(self, "h", self.h % 360.0)
        if not (0.0 <= self.s <= 1.0):
            raise ValueError(f"saturation out of range: {self.s}")
        if not (0.0 <= self.l <= 1.0):
            raise ValueError(f"lightness out of range: {self.l}")


def _hsl_to_linear_rgb(h: float, s: float, l: float) -> tuple[float, float, float]:
    # hue-chroma construction, then sRGB inverse companding
    c = (1.0 - abs(2.0 * l - 1.0)) * s
    hp = (h % 360.0) / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    if hp < 1.0:
        r, g, b = c, x, 0.0
    elif hp < 2.0:
        r, g, b = x, c, 0.0
    elif hp < 3.0:
        r, g, b = 0.0, c, x
    elif hp < 4.0:
        r, g, b = 0.0, x, c
    elif hp < 5.0:
        r, g, b = x, 0.0, c
    else:
        r, g, b = c, 0.0, x
    m = l - c / 2.0
    out = []
    for u in (r + m, g + m, b + m):
        u = min(1.0, max(0.0, u))
        if u > 0.04045:
            out.append(((u + 0.055) / 1.055) ** 2.4)
        else:
            out.append(u / 12.92)
    return out[0], out[1], out[2]


def _lab_f(t: float) -> float:
    if t > _LAB_DELTA ** 3:
        return t ** (1.0 / 3.0)
    return t / (3.0 * _LAB_DELTA ** 2) + 4.0 / 29.0


def hsl_to_cielab(c: HslColor) -> ColorChip:
    """Convert through sRGB and XYZ (D65/2°), quantizing the result to 0.1."""
    rgb = _hsl_to_linear_rgb(c.h, c.s, c.l)
    x, y, z = _XYZ_FROM_RGB @ rgb
    fx = _lab_f(x / _WHITE_D65[0])
    fy = _lab_f(y / _WHITE_D65[1])
    fz = _lab_f(z / _WHITE_D65[2])
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return ColorChip(min(100.0, max(0.0, L)), a, b)


def hsl_grid_to_cielab(h: np.ndarray, s: np.ndarray, l: np.ndarray) -> np.ndarray:
    """Vectorized conversion; returns an (n, 3) array of quantized LAB rows."""
    h = np.asarray(h, dtype=float) % 360.0
    s = np.asarray(s, dtype=float)
    l = np.asarray(l, dtype=float)
    c = (1.0 - np.abs(2.0 * l - 1.0)) * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    zeros = np.zeros_like(c)
    sector = np.floor(hp).astype(int) % 6
    r = np.choose(sector, [c, x, zeros, zeros, x, c])
    g = np.choose(sector, [x, c, c, x, zeros, zeros])
    b = np.choose(sector, [zeros, zeros, x, c, c, x])
    m = l - c / 2.0
    rgb = np.clip(np.stack([r + m, g + m, b + m], axis=1), 0.0, 1.0)
    lin = np.where(rgb > 0.04045, ((rgb + 0.055) / 1.055) ** 2.4, rgb / 12.92)
    xyz = lin @ _XYZ_FROM_RGB.T
    t = xyz / np.array(_WHITE_D65)
    f = np.where(t > _LAB_DELTA ** 3, np.cbrt(t), t / (3.0 * _LAB_DELTA ** 2) + 4.0 / 29.0)
    L = 116.0 * f[:, 1] - 16.0
    a = 500.0 * (f[:, 0] - f[:, 1])
    bb = 200.0 * (f[:, 1] - f[:, 2])
    lab = np.stack([np.clip(L, 0.0, 100.0), a, bb], axis=1)
    return np.round(lab, 1) + 0.0


def delta_e(x: ColorChip, y: ColorChip) -> float:
    """Euclidean CIELAB distance between two chips."""
    return math.sqrt((x.L - y.L) ** 2 + (x.a - y.a) ** 2 + (x.b - y.b) ** 2)


def context_ease(trial) -> float:
    """Distance from the target to its most similar (hardest) distractor."""
    d1, d2 = trial.distractors
    return min(delta_e(trial.target, d1), delta_e(trial.target, d2))
