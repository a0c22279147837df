"""Stereo image and disparity file I/O.

Supported formats: binary PGM (P5) / PPM (P6) with maxval 255 for images,
grayscale PFM for disparity maps, and a PGM rendering for quick visual
checks.  PFM files follow the Middlebury conventions: a negative scale
marks little-endian data, rows are stored bottom to top, and +infinity
encodes an invalid pixel.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import DenseArray
from .errors import FormatError, InvalidShape

_PFM_INVALID = np.float32(np.inf)


@dataclass
class Image:
    """8-bit gray or RGB image held as float32 values in [0, 255]."""

    width: int
    height: int
    channels: int
    data: DenseArray  # [H, W, C]

    def __post_init__(self) -> None:
        if self.channels not in (1, 3):
            raise InvalidShape(f"channels must be 1 or 3, got {self.channels}")
        if self.data.shape != (self.height, self.width, self.channels):
            raise InvalidShape(
                f"data shape {self.data.shape} != "
                f"({self.height}, {self.width}, {self.channels})"
            )
        v = self.data.values
        if not np.isfinite(v).all() or v.min() < 0.0 or v.max() > 255.0:
            raise InvalidShape("image values must be finite and within [0, 255]")

    @classmethod
    def from_values(cls, values: np.ndarray) -> "Image":
        """Build an image from an [H, W] or [H, W, C] array of byte values."""
        arr = np.asarray(values, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=DenseArray(arr))


@dataclass
class DisparityMap:
    """Per-pixel horizontal disparity with a validity mask."""

    width: int
    height: int
    disp: DenseArray  # [H, W], pixels of horizontal shift
    valid: np.ndarray = field(repr=False)  # bool [H, W]

    def __post_init__(self) -> None:
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.disp.shape != (self.height, self.width):
            raise InvalidShape(f"disp shape {self.disp.shape} != ({self.height}, {self.width})")
        if self.valid.shape != (self.height, self.width):
            raise InvalidShape(f"valid shape {self.valid.shape} != ({self.height}, {self.width})")
        if not np.isfinite(self.disp.values[self.valid]).all():
            raise InvalidShape("disparity must be finite wherever valid")

    @classmethod
    def from_values(cls, disp: np.ndarray, valid: np.ndarray | None = None) -> "DisparityMap":
        arr = np.asarray(disp, dtype=np.float32)
        if valid is None:
            valid = np.ones(arr.shape, dtype=bool)
        h, w = arr.shape
        return cls(width=w, height=h, disp=DenseArray(arr), valid=np.asarray(valid, dtype=bool))


def _parse_pnm_header(buf: bytes, n_fields: int) -> tuple[list[int], int]:
    """Parse whitespace/comment separated integer header fields.

    Returns the fields and the offset of the first payload byte (one
    whitespace byte after the last field, per the PNM spec).
    """
    fields: list[int] = []
    i = 2  # past the magic
    while len(fields) < n_fields:
        while i < len(buf) and buf[i : i + 1].isspace():
            i += 1
        if i < len(buf) and buf[i : i + 1] == b"#":
            while i < len(buf) and buf[i : i + 1] != b"\n":
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j : j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PNM header")
        try:
            fields.append(int(buf[i:j]))
        except ValueError as e:
            raise FormatError(f"bad PNM header token {buf[i:j]!r}") from e
        i = j
    if i >= len(buf) or not buf[i : i + 1].isspace():
        raise FormatError("missing whitespace after PNM header")
    return fields, i + 1


def read_pnm(path: str) -> Image:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255."""
    with open(path, "rb") as f:
        buf = f.read()
    magic = buf[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"not a binary PGM/PPM file (magic {magic!r})")
    (width, height, maxval), offset = _parse_pnm_header(buf, 3)
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}")
    n = width * height * channels
    payload = buf[offset : offset + n]
    if len(payload) != n:
        raise FormatError(f"truncated payload: expected {n} bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return Image(
        width=width,
        height=height,
        channels=channels,
        data=DenseArray(values.astype(np.float32)),
    )


def write_pnm(path: str, img: Image) -> None:
    """Write a binary PGM (channels=1) or PPM (channels=3), maxval 255."""
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    payload = np.clip(np.rint(img.data.values), 0, 255).astype(np.uint8).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def write_pfm(path: str, d: DisparityMap) -> None:
    """Write a grayscale little-endian PFM; invalid pixels become +inf."""
    arr = d.disp.values.astype(np.float32).copy()
    arr[~d.valid] = _PFM_INVALID
    with open(path, "wb") as f:
        f.write(b"Pf\n%d %d\n-1.0\n" % (d.width, d.height))
        # PFM stores the bottom row first.
        f.write(np.flipud(arr).astype("<f4").tobytes())


def read_pfm(path: str) -> DisparityMap:
    """Read a grayscale PFM; non-finite samples map to valid=False."""
    with open(path, "rb") as f:
        buf = f.read()
    lines, offset = _split_pfm_header(buf)
    magic, dims, scale_s = lines
    if magic == b"PF":
        raise FormatError("color PFM is not supported; disparity is scalar")
    if magic != b"Pf":
        raise FormatError(f"not a PFM file (magic {magic!r})")
    try:
        width, height = (int(t) for t in dims.split())
        scale = float(scale_s)
    except ValueError as e:
        raise FormatError("bad PFM header") from e
    if scale == 0.0:
        raise FormatError("PFM scale must be nonzero")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}")
    n = width * height * 4
    payload = buf[offset : offset + n]
    if len(payload) != n:
        raise FormatError(f"truncated payload: expected {n} bytes, got {len(payload)}")
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    arr = np.flipud(arr).astype(np.float32)
    valid = np.isfinite(arr)
    arr = np.where(valid, arr, np.float32(0.0))
    return DisparityMap(width=width, height=height, disp=DenseArray(arr), valid=valid)


def _split_pfm_header(buf: bytes) -> tuple[list[bytes], int]:
    lines: list[bytes] = []
    i = 0
    for _ in range(3):
        j = buf.find(b"\n", i)
        if j < 0:
            raise FormatError("truncated PFM header")
        lines.append(buf[i:j].strip())
        i = j + 1
    return lines, i


def write_disparity_pgm(path: str, d: DisparityMap, scale: float) -> None:
    """Write a PGM rendering: clamp(round(disp*scale), 0, 255), invalid=0."""
    if scale <= 0:
        raise FormatError(f"scale must be positive, got {scale}")
    vis = np.clip(np.rint(d.disp.values * scale), 0, 255).astype(np.uint8)
    vis[~d.valid] = 0
    img = Image.from_values(vis)
    write_pnm(path, img)
