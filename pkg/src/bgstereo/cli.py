"""Command-line interface.

Subcommands: match, compare, eval, bench, synth.  Exit codes: 0 success,
2 usage or config error, 3 I/O or format error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import imageio, metrics, pipeline, synth
from .errors import BgStereoError, ConfigError, FormatError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--upsampler", choices=pipeline.UPSAMPLERS)
    p.add_argument("--threads", type=int)
    p.add_argument("--deterministic", action="store_true", default=None)


def _build_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig()
    if getattr(args, "config", None):
        cfg = pipeline.read_config(args.config, cfg)
    overrides = {}
    for name in ("upsampler", "threads", "deterministic"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _cmd_match(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    left = imageio.read_pnm(args.left)
    right = imageio.read_pnm(args.right)
    result = pipeline.match(left, right, cfg)
    imageio.write_pfm(args.out, result.disparity)
    if args.vis:
        imageio.write_disparity_pgm(args.vis, result.disparity, args.vis_scale)
    total = sum(result.stage_ms.values())
    stages = "  ".join(f"{k}={v:.1f}ms" for k, v in result.stage_ms.items())
    print(f"match [{cfg.upsampler}] {args.out}  total={total:.1f}ms  {stages}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    left = imageio.read_pnm(args.left)
    right = imageio.read_pnm(args.right)
    gt = imageio.read_pfm(args.gt)
    result = pipeline.upsample_compare(left, right, gt, cfg)
    deltas = result.deltas()
    with open(args.report, "w", encoding="utf-8") as f:
        f.write("method," + metrics.CSV_HEADER + "\n")
        f.write("cubg," + metrics.report_to_csv_row(result.report_cubg) + "\n")
        f.write("linear," + metrics.report_to_csv_row(result.report_linear) + "\n")
        delta_cols = ",".join(f"{deltas[k]:.6f}" for k in ("epe", "bad_2", "bad_3", "d1_all", "d1_abs", "epe_edge", "epe_flat"))
        f.write(f"delta,{delta_cols},,,,\n")
    print(
        f"compare: epe cubg={result.report_cubg.epe:.4f} linear={result.report_linear.epe:.4f}  "
        f"epe_edge cubg={result.report_cubg.epe_edge:.4f} linear={result.report_linear.epe_edge:.4f}"
    )
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    pred = imageio.read_pfm(args.pred)
    gt = imageio.read_pfm(args.gt)
    report = metrics.eval_report(pred, gt)
    if args.report.endswith(".csv"):
        text = metrics.CSV_HEADER + "\n" + metrics.report_to_csv_row(report) + "\n"
    else:
        text = metrics.report_to_text(report)
    with open(args.report, "w", encoding="utf-8") as f:
        f.write(text)
    print(text, end="")
    return EXIT_OK


def _parse_sizes(spec: str) -> list[tuple[int, int]]:
    sizes = []
    for token in spec.split(","):
        try:
            w, h = token.lower().split("x")
            sizes.append((int(w), int(h)))
        except ValueError as e:
            raise ConfigError(f"bad size {token!r}; expected WxH") from e
    return sizes


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    sizes = _parse_sizes(args.sizes)
    rows = pipeline.bench(cfg, sizes, repeats=args.repeats)
    header = ["size"] + list(pipeline.STAGES) + ["total"]
    print("  ".join(f"{h:>10}" for h in header))
    for row in rows:
        size = f"{int(row['width'])}x{int(row['height'])}"
        cells = [size] + [f"{row[s]:.1f}" for s in pipeline.STAGES] + [f"{row['total']:.1f}"]
        print("  ".join(f"{c:>10}" for c in cells))
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    left, right, gt = synth.make_scene(args.scene, args.width, args.height, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    imageio.write_pnm(os.path.join(args.out_dir, "left.pgm"), left)
    imageio.write_pnm(os.path.join(args.out_dir, "right.pgm"), right)
    imageio.write_pfm(os.path.join(args.out_dir, "gt.pfm"), gt)
    print(f"synth [{args.scene}] {args.width}x{args.height} -> {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgstereo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="compute a disparity map for a stereo pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--out", required=True, help="output PFM path")
    p.add_argument("--vis", help="optional PGM visualization path")
    p.add_argument("--vis-scale", type=float, default=4.0)
    _add_pipeline_args(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("compare", help="evaluate cubg vs linear upsampling")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--gt", required=True, help="ground-truth PFM")
    p.add_argument("--report", required=True, help="output CSV path")
    _add_pipeline_args(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("eval", help="score a predicted PFM against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True, help="output .txt or .csv path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="per-stage timings over synthetic inputs")
    p.add_argument("--sizes", default="480x270,960x540,1242x375")
    p.add_argument("--repeats", type=int, default=5)
    _add_pipeline_args(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic scene to files")
    p.add_argument("--scene", required=True, choices=synth.SCENES)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--width", type=int, default=480)
    p.add_argument("--height", type=int, default=270)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except BgStereoError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
