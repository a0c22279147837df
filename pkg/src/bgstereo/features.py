"""Guidance maps and matching-cost volumes.

Provides the untrained building blocks of a classical stereo front end:
luma guidance, census-transform Hamming costs, box aggregation, and the
group-wise correlation volume for feature maps supplied from outside
(e.g. dumped by a network, see read_fmap/write_fmap).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DenseArray
from .errors import (
    FormatError,
    GroupMismatch,
    InvalidFactor,
    InvalidShape,
    InvalidWindow,
    ShapeMismatch,
)
from .imageio import Image

# ITU-R BT.601 luma weights.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114

COST = "cost"
SIMILARITY = "similarity"


@dataclass
class GuidanceMap:
    """Scalar per-pixel guidance in [0, 1] that steers grid slicing."""

    g: DenseArray  # [H, W]

    def __post_init__(self) -> None:
        if self.g.rank != 2:
            raise InvalidShape(f"guidance must be rank 2, got {self.g.shape}")
        v = self.g.values
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 1.0:
            raise InvalidShape("guidance values must be finite and within [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape  # type: ignore[return-value]


@dataclass
class FeatureMap:
    """Dense per-pixel feature channels, channel-major."""

    f: DenseArray  # [C, H, W]

    def __post_init__(self) -> None:
        if self.f.rank != 3:
            raise InvalidShape(f"feature map must be rank 3 [C,H,W], got {self.f.shape}")
        if not np.isfinite(self.f.values).all():
            raise InvalidShape("feature values must be finite")

    @property
    def channels(self) -> int:
        return self.f.shape[0]


@dataclass
class CostVolume:
    """Matching scores per pixel and disparity level.

    ``polarity`` records whether larger values mean a worse match (cost)
    or a better one (similarity); disparity regression respects it.
    """

    c: DenseArray  # [H, W, D]
    d_levels: int
    polarity: str  # COST | SIMILARITY

    def __post_init__(self) -> None:
        if self.c.rank != 3 or self.c.shape[2] != self.d_levels:
            raise InvalidShape(f"volume shape {self.c.shape} inconsistent with D={self.d_levels}")
        if self.polarity not in (COST, SIMILARITY):
            raise InvalidShape(f"polarity must be '{COST}' or '{SIMILARITY}'")
        if not np.isfinite(self.c.values).all():
            raise InvalidShape("cost volume must be finite")


@dataclass
class GroupCostVolume:
    """Per-group correlation scores, before channel reduction."""

    c: DenseArray  # [G, H, W, D]
    groups: int

    def __post_init__(self) -> None:
        if self.c.rank != 4 or self.c.shape[0] != self.groups:
            raise InvalidShape(f"group volume shape {self.c.shape} inconsistent with G={self.groups}")
        if not np.isfinite(self.c.values).all():
            raise InvalidShape("group cost volume must be finite")


@dataclass
class CensusCodes:
    """Bit-packed census descriptors for one image."""

    codes: np.ndarray  # uint64 [H, W]
    window: int
    bits: int


def to_luma(img: Image) -> GuidanceMap:
    """Convert an image to a [0, 1] luma guidance map (BT.601 weights)."""
    v = img.data.values
    if img.channels == 3:
        gray = _LUMA_R * v[:, :, 0] + _LUMA_G * v[:, :, 1] + _LUMA_B * v[:, :, 2]
    else:
        gray = v[:, :, 0]
    gray = np.clip(gray / 255.0, 0.0, 1.0).astype(np.float32)
    return GuidanceMap(g=DenseArray(gray))


def census_transform(gray: DenseArray, window: int = 5) -> CensusCodes:
    """Bit-pack neighbor-darker-than-center comparisons over a square window.

    Bit b of a pixel's code is set when the b-th window neighbor (row-major
    scan, center excluded) is strictly smaller than the center.  Border
    neighbors are edge-clamped.
    """
    if window not in (3, 5, 7):
        raise InvalidWindow(f"window must be 3, 5 or 7, got {window}")
    if gray.rank != 2:
        raise InvalidShape(f"census input must be rank 2, got {gray.shape}")
    h, w = gray.shape
    if h <= window or w <= window:
        raise InvalidWindow(f"image {h}x{w} too small for window {window}")
    r = window // 2
    img = gray.values
    padded = np.pad(img, r, mode="edge")
    codes = np.zeros((h, w), dtype=np.uint64)
    bit = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            nb = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            codes |= (nb < img).astype(np.uint64) << np.uint64(bit)
            bit += 1
    return CensusCodes(codes=codes, window=window, bits=window * window - 1)


def census_cost_volume(left: CensusCodes, right: CensusCodes, d_levels: int) -> CostVolume:
    """Normalized Hamming-distance volume; out-of-range shifts get max cost 1."""
    if left.codes.shape != right.codes.shape:
        raise ShapeMismatch(f"census shapes {left.codes.shape} != {right.codes.shape}")
    if left.bits != right.bits:
        raise ShapeMismatch(f"census windows differ: {left.window} vs {right.window}")
    if d_levels < 1:
        raise InvalidShape(f"d_levels must be >= 1, got {d_levels}")
    h, w = left.codes.shape
    vol = np.ones((h, w, d_levels), dtype=np.float32)
    inv_bits = 1.0 / left.bits
    for d in range(min(d_levels, w)):
        diff = np.bitwise_count(left.codes[:, d:] ^ right.codes[:, : w - d])
        vol[:, d:, d] = diff.astype(np.float32) * inv_bits
    return CostVolume(c=DenseArray(vol), d_levels=d_levels, polarity=COST)


def groupwise_correlation(fl: FeatureMap, fr: FeatureMap, groups: int, d_levels: int) -> GroupCostVolume:
    """Per-group mean inner product between left and right feature columns.

    Group g at (x, y, d) averages fl(ch, x, y) * fr(ch, x-d, y) over the
    channels of its slice; x-d out of range contributes 0.
    """
    if fl.f.shape != fr.f.shape:
        raise ShapeMismatch(f"feature shapes {fl.f.shape} != {fr.f.shape}")
    c, h, w = fl.f.shape
    if groups < 1 or c % groups != 0:
        raise GroupMismatch(f"groups {groups} must divide channel count {c}")
    per = c // groups
    a = fl.f.values.reshape(groups, per, h, w)
    b = fr.f.values.reshape(groups, per, h, w)
    vol = np.zeros((groups, h, w, d_levels), dtype=np.float32)
    for d in range(min(d_levels, w)):
        prod = a[:, :, :, d:] * b[:, :, :, : w - d]
        vol[:, :, d:, d] = prod.mean(axis=1, dtype=np.float64)
    return GroupCostVolume(c=DenseArray(vol), groups=groups)


def reduce_groups(gc: GroupCostVolume) -> CostVolume:
    """Collapse the group axis by its mean; similarity polarity is kept."""
    mean = gc.c.values.mean(axis=0, dtype=np.float64).astype(np.float32)
    return CostVolume(c=DenseArray(mean), d_levels=mean.shape[2], polarity=SIMILARITY)


def downsample_avg(a: DenseArray | Image, factor: int) -> DenseArray | Image:
    """Block-mean downsample by k; edge blocks are truncated, not padded."""
    if factor not in (2, 4, 8, 16):
        raise InvalidFactor(f"factor must be one of 2, 4, 8, 16, got {factor}")
    if isinstance(a, Image):
        out = _block_mean(a.data.values, factor)
        return Image.from_values(out)
    if a.rank != 2:
        raise InvalidShape(f"downsample expects rank 2, got {a.shape}")
    return DenseArray(_block_mean(a.values, factor))


def _block_mean(v: np.ndarray, k: int) -> np.ndarray:
    h, w = v.shape[:2]
    ys = np.arange(0, h, k)
    xs = np.arange(0, w, k)
    acc = np.add.reduceat(np.add.reduceat(v.astype(np.float64), ys, axis=0), xs, axis=1)
    bh = np.minimum(ys + k, h) - ys
    bw = np.minimum(xs + k, w) - xs
    if v.ndim == 2:
        counts = bh[:, None] * bw[None, :]
    else:
        counts = (bh[:, None] * bw[None, :])[:, :, None]
    return (acc / counts).astype(np.float32)


def aggregate_box(cv: CostVolume, rx: int, ry: int, rd: int) -> CostVolume:
    """Mean over the edge-clamped (2rx+1)x(2ry+1)x(2rd+1) box per cell."""
    if rx < 0 or ry < 0 or rd < 0:
        raise InvalidShape(f"radii must be >= 0, got ({rx}, {ry}, {rd})")
    if rx == 0 and ry == 0 and rd == 0:
        return CostVolume(c=cv.c.copy(), d_levels=cv.d_levels, polarity=cv.polarity)
    v = cv.c.values
    padded = np.pad(v, ((ry, ry), (rx, rx), (rd, rd)), mode="edge")
    acc = np.zeros(v.shape, dtype=np.float64)
    h, w, d = v.shape
    for oy in range(2 * ry + 1):
        for ox in range(2 * rx + 1):
            for od in range(2 * rd + 1):
                acc += padded[oy : oy + h, ox : ox + w, od : od + d]
    acc /= (2 * rx + 1) * (2 * ry + 1) * (2 * rd + 1)
    return CostVolume(c=DenseArray(acc.astype(np.float32)), d_levels=cv.d_levels, polarity=cv.polarity)


def write_fmap(path: str, fm: FeatureMap) -> None:
    """Write a raw feature map: "FMAP <C> <H> <W>\\n" then little-endian floats."""
    c, h, w = fm.f.shape
    with open(path, "wb") as f:
        f.write(b"FMAP %d %d %d\n" % (c, h, w))
        f.write(fm.f.values.astype("<f4").tobytes())


def read_fmap(path: str) -> FeatureMap:
    """Read a raw feature map written by write_fmap."""
    with open(path, "rb") as f:
        buf = f.read()
    end = buf.find(b"\n")
    if end < 0:
        raise FormatError("truncated FMAP header")
    parts = buf[:end].split()
    if len(parts) != 4 or parts[0] != b"FMAP":
        raise FormatError(f"not an FMAP file: {buf[:end]!r}")
    try:
        c, h, w = (int(p) for p in parts[1:])
    except ValueError as e:
        raise FormatError("bad FMAP dimensions") from e
    n = c * h * w * 4
    payload = buf[end + 1 : end + 1 + n]
    if len(payload) != n:
        raise FormatError(f"truncated payload: expected {n} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    return FeatureMap(f=DenseArray(arr.astype(np.float32)))
