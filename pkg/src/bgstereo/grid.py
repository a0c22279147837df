"""Bilateral grid construction and slicing with analytic gradients.

The grid stores matching costs over (x, y, disparity, guidance-intensity).
Building it from a low-resolution cost volume and slicing it back out at
full resolution under a high-resolution guidance map yields an upsampled
cost volume whose values follow intensity edges.

Coordinate convention: align-corners.  A sliced axis maps output index i
to grid coordinate i * (extent-1) / max(out-1, 1); the guidance coordinate
is G(x, y) * (l_grid - 1).  All coordinates clamp to [0, extent-1]; an
axis of extent 1 puts full weight on its single plane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numba

from . import _kernels
from .core import DenseArray
from .errors import FormatError, InvalidShape, ShapeMismatch
from .features import CostVolume, GroupCostVolume, GuidanceMap, SIMILARITY

_EMPTY_BIN_WEIGHT = 1e-12


@dataclass
class BilateralGrid:
    """4D grid of costs over width, height, disparity, and guidance bins."""

    b: DenseArray  # [X, Y, Dg, G]
    l_grid: int
    polarity: str

    def __post_init__(self) -> None:
        if self.b.rank != 4:
            raise InvalidShape(f"grid must be rank 4, got {self.b.shape}")
        if self.l_grid < 2 or self.b.shape[3] != self.l_grid:
            raise InvalidShape(f"grid shape {self.b.shape} inconsistent with l_grid={self.l_grid}")
        if not np.isfinite(self.b.values).all():
            raise InvalidShape("grid values must be finite")


@dataclass
class SliceParams:
    """Target extents for slicing; the coordinate convention is align-corners."""

    out_w: int
    out_h: int
    out_d: int

    def __post_init__(self) -> None:
        if min(self.out_w, self.out_h, self.out_d) < 1:
            raise InvalidShape(f"output extents must be >= 1, got {self}")

    def ratios(self, grid: BilateralGrid) -> tuple[float, float, float, float]:
        x, y, dg, g = grid.b.shape
        sx = (x - 1) / max(self.out_w - 1, 1)
        sy = (y - 1) / max(self.out_h - 1, 1)
        sd = (dg - 1) / max(self.out_d - 1, 1)
        return sx, sy, sd, float(g - 1)


@dataclass
class LinearGridWeights:
    """Loadable per-cell linear map from group channels to guidance levels."""

    weights: np.ndarray  # [l_grid, G_in] float32
    bias: np.ndarray  # [l_grid] float32

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise InvalidShape(
                f"weights {self.weights.shape} and bias {self.bias.shape} are inconsistent"
            )


def set_threads(n: int) -> int:
    """Set the worker count for parallel kernels; returns the effective value.

    The count is clamped to numba's launch-time maximum (NUMBA_NUM_THREADS).
    """
    effective = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(effective)
    return effective


def splat_build(
    cl: CostVolume,
    gl: GuidanceMap,
    l_grid: int,
    sigma_g: float,
    spatial_radius: int = 1,
) -> BilateralGrid:
    """Build a bilateral grid from a low-resolution cost volume.

    Each grid column (x, y, d, :) gathers the costs of the cells in its
    (2*spatial_radius+1)^2 neighborhood, weighted per guidance bin g by
    exp(-(g - gl*(l_grid-1))^2 / (2*sigma_g^2)) and normalized per bin, so
    every bin holds a convex combination of contributing costs.  Bins whose
    accumulated weight stays below 1e-12 copy the guidance-nearest nonempty
    bin of their column.  The neighborhood gathering stands in for the
    learned 3x3x3 grid conversion; radius 0 reproduces the pure per-cell
    spread (constant along g).
    """
    h, w, d = cl.c.shape
    if gl.shape != (h, w):
        raise ShapeMismatch(f"guidance shape {gl.shape} != volume spatial shape {(h, w)}")
    if l_grid < 2:
        raise InvalidShape(f"l_grid must be >= 2, got {l_grid}")
    if sigma_g <= 0:
        raise InvalidShape(f"sigma_g must be positive, got {sigma_g}")
    if spatial_radius < 0:
        raise InvalidShape(f"spatial_radius must be >= 0, got {spatial_radius}")

    c = cl.c.values.astype(np.float64)
    z = gl.g.values.astype(np.float64) * (l_grid - 1)  # [H, W]
    bins = np.arange(l_grid, dtype=np.float64)
    inv2s2 = 1.0 / (2.0 * sigma_g * sigma_g)

    num = np.zeros((h, w, d, l_grid), dtype=np.float64)
    den = np.zeros((h, w, l_grid), dtype=np.float64)
    r = spatial_radius
    for dy in range(-r, r + 1):
        ty0, ty1 = max(0, -dy), min(h, h - dy)
        for dx in range(-r, r + 1):
            tx0, tx1 = max(0, -dx), min(w, w - dx)
            if ty0 >= ty1 or tx0 >= tx1:
                continue
            zs = z[ty0 + dy : ty1 + dy, tx0 + dx : tx1 + dx]
            cs = c[ty0 + dy : ty1 + dy, tx0 + dx : tx1 + dx, :]
            wgt = np.exp(-((bins[None, None, :] - zs[:, :, None]) ** 2) * inv2s2)
            num[ty0:ty1, tx0:tx1] += wgt[:, :, None, :] * cs[:, :, :, None]
            den[ty0:ty1, tx0:tx1] += wgt

    filled = den >= _EMPTY_BIN_WEIGHT
    # sigma_g close to 0 can underflow a whole column; fall back to a hard
    # nearest-bin assignment there so the delta-splat limit is honored.
    dead = ~filled.any(axis=2)
    if dead.any():
        ys, xs = np.nonzero(dead)
        for yy, xx in zip(ys, xs):
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    sy, sx = yy + dy, xx + dx
                    if not (0 <= sy < h and 0 <= sx < w):
                        continue
                    g_star = int(round(min(max(z[sy, sx], 0.0), l_grid - 1)))
                    num[yy, xx, :, g_star] += c[sy, sx, :]
                    den[yy, xx, g_star] += 1.0
        filled = den >= _EMPTY_BIN_WEIGHT

    safe_den = np.where(filled, den, 1.0)
    b = num / safe_den[:, :, None, :]

    # Copy the guidance-nearest nonempty bin into empty bins.
    if not filled.all():
        idx = np.arange(l_grid)
        left = np.where(filled, idx[None, None, :], -l_grid)
        left = np.maximum.accumulate(left, axis=2)
        right = np.where(filled, idx[None, None, :], 2 * l_grid)
        right = np.minimum.accumulate(right[:, :, ::-1], axis=2)[:, :, ::-1]
        take_right = (idx[None, None, :] - left) > (right - idx[None, None, :])
        nearest = np.where(take_right, right, np.maximum(left, 0))
        nearest = np.clip(nearest, 0, l_grid - 1)
        b = np.take_along_axis(b, nearest[:, :, None, :], axis=3)

    grid = np.ascontiguousarray(b.transpose(1, 0, 2, 3), dtype=np.float32)
    return BilateralGrid(b=DenseArray(grid), l_grid=l_grid, polarity=cl.polarity)


def convert_linear(gc: GroupCostVolume, weights: LinearGridWeights) -> BilateralGrid:
    """Map group channels to guidance levels with a loadable per-cell linear map."""
    g_in, h, w, d = gc.c.shape
    l_grid, k = weights.weights.shape
    if k != g_in:
        raise ShapeMismatch(f"weights expect {k} input channels, volume has {g_in}")
    out = np.tensordot(weights.weights.astype(np.float64), gc.c.values, axes=([1], [0]))
    out += weights.bias.astype(np.float64)[:, None, None, None]
    grid = np.ascontiguousarray(out.transpose(2, 1, 3, 0), dtype=np.float32)
    return BilateralGrid(b=DenseArray(grid), l_grid=l_grid, polarity=SIMILARITY)


def slice_forward(b: BilateralGrid, g: GuidanceMap, p: SliceParams) -> CostVolume:
    """Quadrilinear lookup of the grid at every output (x, y, d).

    The grid is read at (x*s_x, y*s_y, d*s_d, G(x,y)*s_G); the 16 corner
    weights per element are nonnegative and sum to 1.  Runs parallel over
    output rows with disjoint writes, so results are bit-identical across
    thread counts.
    """
    if g.shape != (p.out_h, p.out_w):
        raise ShapeMismatch(f"guidance shape {g.shape} != output spatial shape {(p.out_h, p.out_w)}")
    sx, sy, sd, sg = p.ratios(b)
    out = np.empty((p.out_h, p.out_w, p.out_d), dtype=np.float32)
    _kernels.slice_forward_kernel(b.b.values, g.g.values, out, sx, sy, sd, sg)
    return CostVolume(c=DenseArray(out), d_levels=p.out_d, polarity=b.polarity)


def slice_backward(
    b: BilateralGrid,
    g: GuidanceMap,
    p: SliceParams,
    d_out: DenseArray,
) -> tuple[DenseArray, DenseArray]:
    """Gradients of slice_forward w.r.t. the grid and the guidance map.

    The grid gradient is the adjoint splat of the upstream values through
    the same 16 corner weights; the guidance gradient replaces the two
    guidance-axis weights by (-1, +1) and is zero where the guidance
    coordinate was clamped.
    """
    if d_out.shape != (p.out_h, p.out_w, p.out_d):
        raise ShapeMismatch(
            f"upstream shape {d_out.shape} != output shape {(p.out_h, p.out_w, p.out_d)}"
        )
    if g.shape != (p.out_h, p.out_w):
        raise ShapeMismatch(f"guidance shape {g.shape} != output spatial shape {(p.out_h, p.out_w)}")
    sx, sy, sd, sg = p.ratios(b)
    d_grid = np.zeros(b.b.shape, dtype=np.float64)
    d_guide = np.zeros(g.shape, dtype=np.float64)
    _kernels.slice_backward_kernel(
        b.b.values, g.g.values, d_out.values, d_grid, d_guide, sx, sy, sd, sg
    )
    return DenseArray(d_grid.astype(np.float32)), DenseArray(d_guide.astype(np.float32))


def linear_upsample(cl: CostVolume, out_w: int, out_h: int, out_d: int) -> CostVolume:
    """Trilinear align-corners resize of a cost volume; no guidance involved."""
    if min(out_w, out_h, out_d) < 1:
        raise InvalidShape(f"output extents must be >= 1, got {(out_w, out_h, out_d)}")
    v = cl.c.values.astype(np.float64)
    v = _resize_axis(v, out_h, axis=0)
    v = _resize_axis(v, out_w, axis=1)
    v = _resize_axis(v, out_d, axis=2)
    return CostVolume(c=DenseArray(v.astype(np.float32)), d_levels=out_d, polarity=cl.polarity)


def _resize_axis(v: np.ndarray, n: int, axis: int) -> np.ndarray:
    old = v.shape[axis]
    if n == old:
        return v
    if old == 1:
        return np.repeat(v, n, axis=axis)
    pos = np.arange(n, dtype=np.float64) * ((old - 1) / max(n - 1, 1))
    i0 = np.clip(pos.astype(np.int64), 0, old - 2)
    f = pos - i0
    lo = np.take(v, i0, axis=axis)
    hi = np.take(v, i0 + 1, axis=axis)
    shape = [1] * v.ndim
    shape[axis] = n
    f = f.reshape(shape)
    return lo * (1.0 - f) + hi * f


def write_grid_weights(path: str, w: LinearGridWeights) -> None:
    """Write "GRIDW <l_grid> <G_in>\\n" then matrix rows and bias as LE floats."""
    l_grid, g_in = w.weights.shape
    with open(path, "wb") as f:
        f.write(b"GRIDW %d %d\n" % (l_grid, g_in))
        f.write(w.weights.astype("<f4").tobytes())
        f.write(w.bias.astype("<f4").tobytes())


def read_grid_weights(path: str) -> LinearGridWeights:
    """Read a weights file written by write_grid_weights."""
    with open(path, "rb") as f:
        buf = f.read()
    end = buf.find(b"\n")
    if end < 0:
        raise FormatError("truncated GRIDW header")
    parts = buf[:end].split()
    if len(parts) != 3 or parts[0] != b"GRIDW":
        raise FormatError(f"not a GRIDW file: {buf[:end]!r}")
    try:
        l_grid, g_in = int(parts[1]), int(parts[2])
    except ValueError as e:
        raise FormatError("bad GRIDW dimensions") from e
    n = (l_grid * g_in + l_grid) * 4
    payload = buf[end + 1 : end + 1 + n]
    if len(payload) != n:
        raise FormatError(f"truncated payload: expected {n} bytes, got {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f4")
    return LinearGridWeights(
        weights=flat[: l_grid * g_in].reshape(l_grid, g_in).copy(),
        bias=flat[l_grid * g_in :].copy(),
    )
