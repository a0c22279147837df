"""Disparity evaluation: EPE, threshold errors, D1, and the edge/flat split.

The edge region is found by running a Canny detector on the ground-truth
disparity (rendered to [0, 255] over its valid range) and dilating the
detected edges with a 5x5 square.  Canny parameters are fixed: 5x5
Gaussian with sigma 1.4, Sobel gradients, non-maximum suppression, and
hysteresis at 0.1/0.3 of the maximum gradient magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyOverlap, ShapeMismatch
from .imageio import DisparityMap

CANNY_SIGMA = 1.4
CANNY_LOW, CANNY_HIGH = 0.1, 0.3
DILATE_SIZE = 5

CSV_HEADER = "epe,bad_2,bad_3,d1_all,d1_abs,epe_edge,epe_flat,n_edge,n_flat,n_valid,time_ms"


@dataclass
class EdgeMask:
    """Dilated ground-truth disparity edges; the complement is 'flat'."""

    is_edge: np.ndarray  # bool [H, W]


@dataclass
class EvalReport:
    """One evaluation of a predicted disparity map against ground truth."""

    epe: float
    bad_2: float
    bad_3: float
    d1_all: float
    d1_abs: float
    epe_edge: float
    epe_flat: float
    n_edge: int
    n_flat: int
    n_valid: int
    time_ms: float | None = None


def _overlap(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray | None) -> np.ndarray:
    if pred.disp.shape != gt.disp.shape:
        raise ShapeMismatch(f"shapes {pred.disp.shape} != {gt.disp.shape}")
    both = pred.valid & gt.valid
    if mask is not None:
        both = both & np.asarray(mask, dtype=bool)
    if not both.any():
        raise EmptyOverlap("no pixel is valid in both maps")
    return both


def epe(pred: DisparityMap, gt: DisparityMap, mask: np.ndarray | None = None) -> float:
    """Mean absolute disparity error over the selected valid overlap."""
    both = _overlap(pred, gt, mask)
    err = np.abs(pred.disp.values[both].astype(np.float64) - gt.disp.values[both].astype(np.float64))
    return float(err.mean())


def bad_tau(pred: DisparityMap, gt: DisparityMap, tau: float, mask: np.ndarray | None = None) -> float:
    """Percentage of overlap pixels with error strictly larger than tau."""
    if tau <= 0:
        raise ShapeMismatch(f"tau must be positive, got {tau}")
    both = _overlap(pred, gt, mask)
    err = np.abs(pred.disp.values[both].astype(np.float64) - gt.disp.values[both].astype(np.float64))
    return float(100.0 * (err > tau).sum() / err.size)


def d1(pred: DisparityMap, gt: DisparityMap, mode: str = "kitti", mask: np.ndarray | None = None) -> float:
    """Disparity outlier percentage.

    "kitti" counts |e| > 3 and |e| > 5% of the ground-truth value;
    "absolute" counts |e| > 3 alone.
    """
    if mode not in ("kitti", "absolute"):
        raise ShapeMismatch(f"mode must be 'kitti' or 'absolute', got {mode!r}")
    both = _overlap(pred, gt, mask)
    g = gt.disp.values[both].astype(np.float64)
    err = np.abs(pred.disp.values[both].astype(np.float64) - g)
    out = err > 3.0
    if mode == "kitti":
        out &= err > 0.05 * np.abs(g)
    return float(100.0 * out.sum() / err.size)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    i = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(i * i) / (2.0 * sigma * sigma))
    k = np.outer(g, g)
    return k / k.sum()


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def _nms(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels not smaller than both neighbors along the gradient."""
    angle = np.mod(np.arctan2(gy, gx), math.pi)
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= math.pi / 8) & (angle < 3 * math.pi / 8)] = 1
    sector[(angle >= 3 * math.pi / 8) & (angle < 5 * math.pi / 8)] = 2
    sector[(angle >= 5 * math.pi / 8) & (angle < 7 * math.pi / 8)] = 3

    padded = np.pad(mag, 1, mode="constant")
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in offsets.items():
        fwd = padded[1 + dy : 1 + dy + mag.shape[0], 1 + dx : 1 + dx + mag.shape[1]]
        bwd = padded[1 - dy : 1 - dy + mag.shape[0], 1 - dx : 1 - dx + mag.shape[1]]
        sel = sector == s
        keep |= sel & (mag >= fwd) & (mag >= bwd)
    return np.where(keep, mag, 0.0)


def canny_edges(image: np.ndarray) -> np.ndarray:
    """Canny edges of a grayscale array with the module's fixed parameters."""
    img = np.asarray(image, dtype=np.float64)
    kernel = _gaussian_kernel(5, CANNY_SIGMA)
    smoothed = ndimage.correlate(img, kernel, mode="nearest")
    gx = ndimage.correlate(smoothed, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(smoothed, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros(img.shape, dtype=bool)
    suppressed = _nms(mag, gx, gy)
    strong = suppressed >= CANNY_HIGH * peak
    weak = suppressed >= CANNY_LOW * peak
    if not strong.any():
        return np.zeros(img.shape, dtype=bool)
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    keep = np.unique(labels[strong])
    return weak & np.isin(labels, keep[keep > 0])


def edge_flat_partition(gt: DisparityMap) -> EdgeMask:
    """Dilated Canny edges of the ground-truth disparity.

    Invalid pixels are filled from their nearest valid neighbor before
    smoothing so sparsity boundaries do not read as edges; the disparity is
    then normalized to [0, 255] over its valid range.  A constant map has
    no edges and returns an all-flat mask.
    """
    if not gt.valid.any():
        raise EmptyOverlap("ground truth has no valid pixel")
    disp = gt.disp.values.astype(np.float64)
    if not gt.valid.all():
        _, (iy, ix) = ndimage.distance_transform_edt(~gt.valid, return_indices=True)
        disp = disp[iy, ix]
    lo, hi = disp.min(), disp.max()
    if hi <= lo:
        return EdgeMask(is_edge=np.zeros(disp.shape, dtype=bool))
    rendered = (disp - lo) * (255.0 / (hi - lo))
    edges = canny_edges(rendered)
    dilated = ndimage.binary_dilation(edges, structure=np.ones((DILATE_SIZE, DILATE_SIZE), dtype=bool))
    return EdgeMask(is_edge=dilated)


def eval_report(pred: DisparityMap, gt: DisparityMap, time_ms: float | None = None) -> EvalReport:
    """Bundle every metric plus the edge/flat split into one report."""
    both = _overlap(pred, gt, None)
    em = edge_flat_partition(gt).is_edge
    edge_sel = both & em
    flat_sel = both & ~em
    n_edge, n_flat = int(edge_sel.sum()), int(flat_sel.sum())
    return EvalReport(
        epe=epe(pred, gt),
        bad_2=bad_tau(pred, gt, 2.0),
        bad_3=bad_tau(pred, gt, 3.0),
        d1_all=d1(pred, gt, "kitti"),
        d1_abs=d1(pred, gt, "absolute"),
        epe_edge=epe(pred, gt, edge_sel) if n_edge else 0.0,
        epe_flat=epe(pred, gt, flat_sel) if n_flat else 0.0,
        n_edge=n_edge,
        n_flat=n_flat,
        n_valid=int(both.sum()),
        time_ms=time_ms,
    )


def report_to_text(r: EvalReport) -> str:
    """Line-oriented ``key = value`` rendering."""
    lines = [
        f"epe = {r.epe:.6f}",
        f"bad_2 = {r.bad_2:.6f}",
        f"bad_3 = {r.bad_3:.6f}",
        f"d1_all = {r.d1_all:.6f}",
        f"d1_abs = {r.d1_abs:.6f}",
        f"epe_edge = {r.epe_edge:.6f}",
        f"epe_flat = {r.epe_flat:.6f}",
        f"n_edge = {r.n_edge}",
        f"n_flat = {r.n_flat}",
        f"n_valid = {r.n_valid}",
    ]
    if r.time_ms is not None:
        lines.append(f"time_ms = {r.time_ms:.3f}")
    return "\n".join(lines) + "\n"


def report_to_csv_row(r: EvalReport) -> str:
    """One CSV row matching CSV_HEADER."""
    time_s = f"{r.time_ms:.3f}" if r.time_ms is not None else ""
    return (
        f"{r.epe:.6f},{r.bad_2:.6f},{r.bad_3:.6f},{r.d1_all:.6f},{r.d1_abs:.6f},"
        f"{r.epe_edge:.6f},{r.epe_flat:.6f},{r.n_edge},{r.n_flat},{r.n_valid},{time_s}"
    )
