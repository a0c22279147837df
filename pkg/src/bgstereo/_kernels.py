"""Numba kernels for bilateral grid slicing.

Coordinates and interpolation weights are computed in float64 so the
float32 result differs from an exact evaluation only by the final store
rounding.  The forward kernel writes disjoint outputs per element, so it
is bit-reproducible at any thread count; the backward kernel accumulates
into shared corners and therefore runs sequentially.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _corner(u: float, n: int) -> tuple[int, float]:
    """Clamped align-corners lower index and fraction for an axis of extent n."""
    if n == 1:
        return 0, 0.0
    m = float(n - 1)
    if u <= 0.0:
        return 0, 0.0
    if u >= m:
        return n - 2, 1.0
    i0 = int(u)
    if i0 > n - 2:
        i0 = n - 2
    return i0, u - i0


@njit(cache=True, parallel=True)
def slice_forward_kernel(grid, guide, out, sx, sy, sd, sg):
    """grid [X,Y,Dg,G] f32, guide [H,W] f32 -> out [H,W,D] f32."""
    X, Y, Dg, G = grid.shape
    H, W, D = out.shape
    og = 1 if G > 1 else 0
    for yy in prange(H):
        col = np.empty(Dg, dtype=np.float64)
        v = yy * sy
        iy, fy = _corner(v, Y)
        oy = 1 if Y > 1 else 0
        for xx in range(W):
            u = xx * sx
            z = float(guide[yy, xx]) * sg
            ix, fx = _corner(u, X)
            ig, fz = _corner(z, G)
            ox = 1 if X > 1 else 0
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = (1.0 - fx) * fy
            w10 = fx * (1.0 - fy)
            w11 = fx * fy
            wg0 = 1.0 - fz
            wg1 = fz
            for k in range(Dg):
                acc = w00 * (wg0 * grid[ix, iy, k, ig] + wg1 * grid[ix, iy, k, ig + og])
                acc += w01 * (wg0 * grid[ix, iy + oy, k, ig] + wg1 * grid[ix, iy + oy, k, ig + og])
                acc += w10 * (wg0 * grid[ix + ox, iy, k, ig] + wg1 * grid[ix + ox, iy, k, ig + og])
                acc += w11 * (wg0 * grid[ix + ox, iy + oy, k, ig] + wg1 * grid[ix + ox, iy + oy, k, ig + og])
                col[k] = acc
            od = 1 if Dg > 1 else 0
            for d in range(D):
                wd = d * sd
                k0, fd = _corner(wd, Dg)
                out[yy, xx, d] = (1.0 - fd) * col[k0] + fd * col[k0 + od]


@njit(cache=True)
def slice_backward_kernel(grid, guide, d_out, d_grid, d_guide, sx, sy, sd, sg):
    """Adjoint of slice_forward_kernel.

    d_grid [X,Y,Dg,G] f64 and d_guide [H,W] f64 are accumulated in place.
    The guidance gradient is zero where the guidance coordinate was clamped.
    """
    X, Y, Dg, G = grid.shape
    H, W, D = d_out.shape
    og = 1 if G > 1 else 0
    dcol = np.empty(Dg, dtype=np.float64)
    for yy in range(H):
        v = yy * sy
        iy, fy = _corner(v, Y)
        oy = 1 if Y > 1 else 0
        for xx in range(W):
            u = xx * sx
            zraw = float(guide[yy, xx]) * sg
            ix, fx = _corner(u, X)
            ig, fz = _corner(zraw, G)
            ox = 1 if X > 1 else 0
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = (1.0 - fx) * fy
            w10 = fx * (1.0 - fy)
            w11 = fx * fy
            wg0 = 1.0 - fz
            wg1 = fz
            # Adjoint of the d-axis lerp: spread upstream into grid-level bins.
            for k in range(Dg):
                dcol[k] = 0.0
            od = 1 if Dg > 1 else 0
            for d in range(D):
                wd = d * sd
                k0, fd = _corner(wd, Dg)
                up = float(d_out[yy, xx, d])
                dcol[k0] += (1.0 - fd) * up
                dcol[k0 + od] += fd * up
            zgrad = 0.0
            for k in range(Dg):
                dk = dcol[k]
                if dk == 0.0:
                    continue
                d_grid[ix, iy, k, ig] += dk * w00 * wg0
                d_grid[ix, iy, k, ig + og] += dk * w00 * wg1
                d_grid[ix, iy + oy, k, ig] += dk * w01 * wg0
                d_grid[ix, iy + oy, k, ig + og] += dk * w01 * wg1
                d_grid[ix + ox, iy, k, ig] += dk * w10 * wg0
                d_grid[ix + ox, iy, k, ig + og] += dk * w10 * wg1
                d_grid[ix + ox, iy + oy, k, ig] += dk * w11 * wg0
                d_grid[ix + ox, iy + oy, k, ig + og] += dk * w11 * wg1
                zgrad += dk * (
                    w00 * (grid[ix, iy, k, ig + og] - grid[ix, iy, k, ig])
                    + w01 * (grid[ix, iy + oy, k, ig + og] - grid[ix, iy + oy, k, ig])
                    + w10 * (grid[ix + ox, iy, k, ig + og] - grid[ix + ox, iy, k, ig])
                    + w11 * (grid[ix + ox, iy + oy, k, ig + og] - grid[ix + ox, iy + oy, k, ig])
                )
            if 0.0 <= zraw <= float(G - 1) and G > 1:
                d_guide[yy, xx] = sg * zgrad
