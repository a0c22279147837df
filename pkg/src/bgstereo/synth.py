"""Synthetic stereo scenes with known disparity.

Scenes pair a textured foreground region at one disparity with a
background at another, with the intensity boundary aligned to the
disparity boundary.  The left image is warped out of the right one, so
ground truth is exact by construction.  Pixels whose match falls outside
the right frame, and background pixels occluded by the foreground, are
marked invalid.
"""
from __future__ import annotations

import numpy as np

from .core import DenseArray
from .errors import ConfigError
from .imageio import DisparityMap, Image

SCENES = ("step", "square")

FG_DISP = 8
BG_DISP = 2


def _texture(rng: np.random.Generator, h: int, w: int, lo: float, hi: float) -> np.ndarray:
    """Multi-scale value noise so block-downsampled copies stay textured."""
    acc = np.zeros((h, w), dtype=np.float64)
    for cell, weight in ((32, 1.0), (16, 0.8), (8, 0.6), (4, 0.4)):
        coarse = rng.uniform(0.0, 1.0, size=(h // cell + 2, w // cell + 2))
        yy = np.arange(h) / cell
        xx = np.arange(w) / cell
        y0 = yy.astype(int)
        x0 = xx.astype(int)
        fy = (yy - y0)[:, None]
        fx = (xx - x0)[None, :]
        c00 = coarse[np.ix_(y0, x0)]
        c01 = coarse[np.ix_(y0, x0 + 1)]
        c10 = coarse[np.ix_(y0 + 1, x0)]
        c11 = coarse[np.ix_(y0 + 1, x0 + 1)]
        acc += weight * ((1 - fy) * ((1 - fx) * c00 + fx * c01) + fy * ((1 - fx) * c10 + fx * c11))
    acc += 0.25 * rng.uniform(0.0, 1.0, size=(h, w))
    acc -= acc.min()
    acc /= max(acc.max(), 1e-9)
    return lo + acc * (hi - lo)


def _foreground_mask(scene: str, h: int, w: int) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    if scene == "step":
        mask[:, : w // 2] = True
    elif scene == "square":
        sh, sw = int(h * 0.5), int(w * 0.4)
        y0, x0 = (h - sh) // 2, (w - sw) // 2
        mask[y0 : y0 + sh, x0 : x0 + sw] = True
    else:
        raise ConfigError(f"unknown scene {scene!r}; choose from {SCENES}")
    return mask


def _shift_right(img: np.ndarray, d: int) -> np.ndarray:
    """Sample img at x - d; out-of-frame columns repeat the first column."""
    out = np.empty_like(img)
    out[:, d:] = img[:, : img.shape[1] - d]
    out[:, :d] = img[:, :1]
    return out


def _shift_mask_right(mask: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros_like(mask)
    out[:, d:] = mask[:, : mask.shape[1] - d]
    return out


def make_scene(
    scene: str, width: int = 480, height: int = 270, seed: int = 7
) -> tuple[Image, Image, DisparityMap]:
    """Build (left, right, ground truth) for a named scene.

    The foreground sits at 8 px disparity over a 2 px background; the
    foreground texture band is bright, the background dark, so the luma
    edge coincides with the disparity edge.
    """
    rng = np.random.default_rng(seed)
    h, w = height, width
    fg_left = _foreground_mask(scene, h, w)
    disp = np.where(fg_left, float(FG_DISP), float(BG_DISP)).astype(np.float32)

    tex_bg = _texture(rng, h, w, 25.0, 115.0)
    tex_fg = _texture(rng, h, w, 150.0, 245.0)

    # Right image: background texture everywhere, foreground pasted at its
    # right-frame position (each left fg pixel x lands at x - FG_DISP).
    xs = np.arange(w)
    right = tex_bg.copy()
    cols = xs[xs >= FG_DISP]
    m = fg_left[:, cols]
    right[:, cols - FG_DISP] = np.where(m, tex_fg[:, cols], right[:, cols - FG_DISP])
    fg_right = np.zeros((h, w), dtype=bool)
    fg_right[:, cols - FG_DISP] = m

    # Left image by the warp L(x) = R(x - d(x)).
    left = np.where(fg_left, _shift_right(right, FG_DISP), _shift_right(right, BG_DISP))

    valid = np.ones((h, w), dtype=bool)
    valid[:, :FG_DISP] &= ~fg_left[:, :FG_DISP]
    valid[:, :BG_DISP] = False
    # Background pixels whose right-frame match was overwritten by the
    # pasted foreground are occluded; exclude them from ground truth.
    valid &= ~(~fg_left & _shift_mask_right(fg_right, BG_DISP))

    left_img = Image.from_values(np.clip(left, 0.0, 255.0))
    right_img = Image.from_values(np.clip(right, 0.0, 255.0))
    gt = DisparityMap(width=w, height=h, disp=DenseArray(disp), valid=valid)
    return left_img, right_img, gt
