"""End-to-end stereo matching with grid-based or linear cost upsampling.

The untrained pipeline: luma both images, block-downsample, census costs
at low resolution, box aggregation, then either build-and-slice a
bilateral grid under the full-resolution luma ("cubg") or trilinearly
upsample the volume ("linear"), and regress disparity by soft argmin.
The regressed low-resolution disparity index is scaled by the downsample
factor to express full-resolution pixels.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import features, grid as griding, metrics, regress
from .core import DenseArray
from .errors import ConfigError
from .features import CostVolume, GuidanceMap
from .imageio import DisparityMap, Image
from .metrics import EvalReport

UPSAMPLERS = ("cubg", "linear")

STAGES = ("cost", "aggregate", "grid", "slice", "regress")


@dataclass
class PipelineConfig:
    """Tunables for one pipeline invocation.

    The default temperature is matched to the [0, 1]-normalized census
    costs (roughly one census bit): much larger values flatten the softmax
    toward the mid-disparity and ruin the regression.
    """

    factor: int = 8
    d_max: int = 192
    census_window: int = 5
    agg_rx: int = 1
    agg_ry: int = 1
    agg_rd: int = 1
    l_grid: int = 32
    sigma_g: float = 1.0
    splat_radius: int = 1
    temperature: float = 0.04
    upsampler: str = "cubg"
    threads: int = 0
    deterministic: bool = False

    def validate(self) -> None:
        if self.factor not in (2, 4, 8, 16):
            raise ConfigError(f"factor must be one of 2, 4, 8, 16, got {self.factor}")
        if self.d_max < 1 or self.d_max % self.factor != 0:
            raise ConfigError(f"factor {self.factor} must divide d_max {self.d_max}")
        if self.census_window not in (3, 5, 7):
            raise ConfigError(f"census_window must be 3, 5 or 7, got {self.census_window}")
        if min(self.agg_rx, self.agg_ry, self.agg_rd) < 0:
            raise ConfigError("aggregation radii must be >= 0")
        if self.l_grid < 2:
            raise ConfigError(f"l_grid must be >= 2, got {self.l_grid}")
        if self.sigma_g <= 0:
            raise ConfigError(f"sigma_g must be positive, got {self.sigma_g}")
        if self.splat_radius < 0:
            raise ConfigError(f"splat_radius must be >= 0, got {self.splat_radius}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.upsampler not in UPSAMPLERS:
            raise ConfigError(f"upsampler must be one of {UPSAMPLERS}, got {self.upsampler!r}")
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0, got {self.threads}")

    @property
    def d_low(self) -> int:
        return self.d_max // self.factor


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse line-oriented ``key = value`` text; unknown keys are errors."""
    cfg = base or PipelineConfig()
    types = {f.name: f.type for f in fields(PipelineConfig)}
    updates: dict[str, object] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {ln}: unknown config key {key!r}")
        try:
            updates[key] = _parse_value(key, value)
        except ValueError as e:
            raise ConfigError(f"line {ln}: bad value for {key!r}: {value!r}") from e
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def _parse_value(key: str, value: str) -> object:
    kind = PipelineConfig.__dataclass_fields__[key].type
    if kind == "bool":
        if value.lower() not in _BOOL_WORDS:
            raise ValueError(value)
        return _BOOL_WORDS[value.lower()]
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value


def read_config(path: str, base: PipelineConfig | None = None) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), base)


@dataclass
class MatchResult:
    """Disparity output plus per-stage timings and the low-res volume hash."""

    disparity: DisparityMap
    stage_ms: dict[str, float]
    cost_checksum: str


@dataclass
class CompareResult:
    """Paired evaluation of both upsamplers on one scene."""

    report_cubg: EvalReport
    report_linear: EvalReport
    disparity_cubg: DisparityMap = field(repr=False, default=None)  # type: ignore[assignment]
    disparity_linear: DisparityMap = field(repr=False, default=None)  # type: ignore[assignment]

    def deltas(self) -> dict[str, float]:
        """linear minus cubg for every scalar metric (positive favors cubg)."""
        out = {}
        for name in ("epe", "bad_2", "bad_3", "d1_all", "d1_abs", "epe_edge", "epe_flat"):
            out[name] = getattr(self.report_linear, name) - getattr(self.report_cubg, name)
        return out


@dataclass
class _Prepared:
    volume: CostVolume  # aggregated, at low resolution
    guide_low: GuidanceMap
    guide_high: GuidanceMap
    stage_ms: dict[str, float]
    checksum: str


def _apply_threads(cfg: PipelineConfig) -> None:
    if cfg.threads > 0:
        griding.set_threads(cfg.threads)


def _prepare(left: Image, right: Image, cfg: PipelineConfig) -> _Prepared:
    cfg.validate()
    if (left.width, left.height) != (right.width, right.height):
        raise ConfigError(
            f"image sizes differ: {left.width}x{left.height} vs {right.width}x{right.height}"
        )
    if left.width < cfg.factor or left.height < cfg.factor:
        raise ConfigError(f"images must be at least {cfg.factor} px on each side")
    _apply_threads(cfg)
    times: dict[str, float] = {}

    t0 = time.perf_counter()
    luma_l = features.to_luma(left)
    luma_r = features.to_luma(right)
    low_l = features.downsample_avg(luma_l.g, cfg.factor)
    low_r = features.downsample_avg(luma_r.g, cfg.factor)
    codes_l = features.census_transform(low_l, cfg.census_window)
    codes_r = features.census_transform(low_r, cfg.census_window)
    volume = features.census_cost_volume(codes_l, codes_r, cfg.d_low)
    times["cost"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    volume = features.aggregate_box(volume, cfg.agg_rx, cfg.agg_ry, cfg.agg_rd)
    times["aggregate"] = (time.perf_counter() - t0) * 1e3

    checksum = hashlib.sha256(volume.c.values.tobytes()).hexdigest()
    return _Prepared(
        volume=volume,
        guide_low=GuidanceMap(g=low_l),
        guide_high=luma_l,
        stage_ms=times,
        checksum=checksum,
    )


def _upsample_and_regress(
    prep: _Prepared, cfg: PipelineConfig, upsampler: str, width: int, height: int
) -> tuple[DisparityMap, dict[str, float]]:
    times: dict[str, float] = {}
    if upsampler == "cubg":
        t0 = time.perf_counter()
        bg = griding.splat_build(
            prep.volume, prep.guide_low, cfg.l_grid, cfg.sigma_g, cfg.splat_radius
        )
        times["grid"] = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        high = griding.slice_forward(
            bg, prep.guide_high, griding.SliceParams(out_w=width, out_h=height, out_d=cfg.d_low)
        )
        times["slice"] = (time.perf_counter() - t0) * 1e3
    else:
        times["grid"] = 0.0
        t0 = time.perf_counter()
        high = griding.linear_upsample(prep.volume, width, height, cfg.d_low)
        times["slice"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    dm = regress.soft_argmin(high, regress.SoftArgminConfig(temperature=cfg.temperature))
    dm.disp.values *= np.float32(cfg.factor)
    times["regress"] = (time.perf_counter() - t0) * 1e3
    return dm, times


def match(left: Image, right: Image, cfg: PipelineConfig | None = None) -> MatchResult:
    """Run the full matcher; disparities come out in full-resolution pixels."""
    cfg = cfg or PipelineConfig()
    prep = _prepare(left, right, cfg)
    dm, times = _upsample_and_regress(prep, cfg, cfg.upsampler, left.width, left.height)
    return MatchResult(
        disparity=dm, stage_ms={**prep.stage_ms, **times}, cost_checksum=prep.checksum
    )


def upsample_compare(
    left: Image, right: Image, gt: DisparityMap, cfg: PipelineConfig | None = None
) -> CompareResult:
    """Evaluate both upsamplers over a shared low-resolution cost volume."""
    cfg = cfg or PipelineConfig()
    prep = _prepare(left, right, cfg)
    reports = {}
    disparities = {}
    for mode in UPSAMPLERS:
        t0 = time.perf_counter()
        dm, _ = _upsample_and_regress(prep, cfg, mode, left.width, left.height)
        elapsed = (time.perf_counter() - t0) * 1e3
        reports[mode] = metrics.eval_report(dm, gt, time_ms=elapsed)
        disparities[mode] = dm
    return CompareResult(
        report_cubg=reports["cubg"],
        report_linear=reports["linear"],
        disparity_cubg=disparities["cubg"],
        disparity_linear=disparities["linear"],
    )


def bench(
    cfg: PipelineConfig | None = None,
    sizes: list[tuple[int, int]] | None = None,
    repeats: int = 5,
    seed: int = 11,
) -> list[dict[str, float]]:
    """Per-stage wall-clock means over ``repeats`` runs after one warmup.

    Returns one row per size with stage times in milliseconds.
    """
    cfg = cfg or PipelineConfig()
    cfg.validate()
    sizes = sizes or [(480, 270), (960, 540), (1242, 375)]
    rng = np.random.default_rng(seed)
    rows: list[dict[str, float]] = []
    for width, height in sizes:
        base = rng.uniform(0.0, 255.0, size=(height, width)).astype(np.float32)
        noise = rng.uniform(-12.0, 12.0, size=(height, width))
        left = Image.from_values(base)
        right = Image.from_values(np.clip(base + noise, 0.0, 255.0).astype(np.float32))
        acc = {stage: 0.0 for stage in STAGES}
        for rep in range(repeats + 1):
            result = match(left, right, cfg)
            if rep == 0:
                continue  # warmup
            for stage in STAGES:
                acc[stage] += result.stage_ms[stage]
        row: dict[str, float] = {"width": float(width), "height": float(height)}
        row.update({stage: acc[stage] / repeats for stage in STAGES})
        row["total"] = sum(acc[stage] / repeats for stage in STAGES)
        rows.append(row)
    return rows
