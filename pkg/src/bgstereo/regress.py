"""Disparity regression from a cost volume and the matching loss.

Soft argmin turns each per-pixel cost (or similarity) column into the
softmax-weighted mean of the disparity indices; the smooth L1 loss scores
a prediction against ground truth over pixels valid in both maps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DenseArray
from .errors import ConfigError, EmptyOverlap, ShapeMismatch
from .features import COST, CostVolume
from .imageio import DisparityMap

_ROW_CHUNK = 64  # bounds float64 temporaries on large volumes


@dataclass
class SoftArgminConfig:
    """Softmax sharpness; costs are negated before the softmax."""

    temperature: float = 1.0

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")


def _softmax_rows(block: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax along the last axis, in float64."""
    block = block - block.max(axis=-1, keepdims=True)
    np.exp(block, out=block)
    block /= block.sum(axis=-1, keepdims=True)
    return block


def soft_argmin(ch: CostVolume, cfg: SoftArgminConfig | None = None) -> DisparityMap:
    """Expected disparity index under a softmax over each (x, y) column.

    Cost volumes are negated so that smaller cost means higher probability;
    similarity volumes enter the softmax directly.  Every output pixel is
    valid and lies in [0, D-1].
    """
    cfg = cfg or SoftArgminConfig()
    sign = -1.0 if ch.polarity == COST else 1.0
    v = ch.c.values
    h, w, d = v.shape
    levels = np.arange(d, dtype=np.float64)
    disp = np.empty((h, w), dtype=np.float32)
    for y0 in range(0, h, _ROW_CHUNK):
        y1 = min(y0 + _ROW_CHUNK, h)
        p = _softmax_rows(v[y0:y1].astype(np.float64) * (sign / cfg.temperature))
        disp[y0:y1] = p @ levels
    return DisparityMap(
        width=w, height=h, disp=DenseArray(disp), valid=np.ones((h, w), dtype=bool)
    )


def soft_argmin_backward(
    ch: CostVolume, cfg: SoftArgminConfig, d_disp: DenseArray
) -> DenseArray:
    """Gradient of soft_argmin w.r.t. the volume for an upstream [H, W] gradient.

    dC(x,y,d) = dD(x,y) * (sigma/tau) * p(d) * (d - D_pred(x,y)), with
    sigma = +1 for similarity and -1 for cost polarity.
    """
    v = ch.c.values
    h, w, d = v.shape
    if d_disp.shape != (h, w):
        raise ShapeMismatch(f"upstream shape {d_disp.shape} != spatial shape {(h, w)}")
    sign = -1.0 if ch.polarity == COST else 1.0
    levels = np.arange(d, dtype=np.float64)
    grad = np.empty((h, w, d), dtype=np.float32)
    up = d_disp.values.astype(np.float64)
    for y0 in range(0, h, _ROW_CHUNK):
        y1 = min(y0 + _ROW_CHUNK, h)
        p = _softmax_rows(v[y0:y1].astype(np.float64) * (sign / cfg.temperature))
        pred = p @ levels
        grad[y0:y1] = (
            up[y0:y1, :, None]
            * (sign / cfg.temperature)
            * p
            * (levels[None, None, :] - pred[:, :, None])
        )
    return DenseArray(grad)


def smooth_l1_loss(pred: DisparityMap, gt: DisparityMap, reduction: str = "mean") -> float:
    """Smooth L1 over pixels valid in both maps.

    Per pixel: 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise, with x = pred - gt.
    ``reduction`` is "mean" (default) or "sum".
    """
    if pred.disp.shape != gt.disp.shape:
        raise ShapeMismatch(f"shapes {pred.disp.shape} != {gt.disp.shape}")
    if reduction not in ("mean", "sum"):
        raise ConfigError(f"reduction must be 'mean' or 'sum', got {reduction!r}")
    both = pred.valid & gt.valid
    n = int(both.sum())
    if n == 0:
        raise EmptyOverlap("no pixel is valid in both maps")
    x = pred.disp.values[both].astype(np.float64) - gt.disp.values[both].astype(np.float64)
    ax = np.abs(x)
    per = np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)
    total = float(per.sum())
    return total / n if reduction == "mean" else total
