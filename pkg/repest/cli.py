"""
Command-line interface
Subcommands: count, eval, synth, spectrum, segment
Exit codes: 0 success, 1 processing failure, 2 usage error
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .core import CHANNEL_NAMES, CycleAnnotation, RepestError, WaveletConfig
from .evaluation import METHODS, run_channel_study, run_dataset
from .flow import HSParams
from .flow_cache import FlowCacheManager
from .io import (
    Manifest,
    ManifestEntry,
    load_flows,
    load_frames,
    load_manifest,
    read_signal,
    write_flows,
    write_frames,
    write_manifest,
    write_masks,
    write_scalogram,
    write_signal,
)
from .pipeline import PipelineConfig, analyze_video, validate_pipeline_config
from .synth import (
    SIGNAL_KINDS,
    SYNTH_KINDS,
    SynthSpec,
    chirp_annotation,
    gen_bouncing_square_video,
    gen_flow_sequence,
    gen_signal,
    gen_viewpoint_transition,
)
from .wavelet import cwt

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _stride(value: str) -> Optional[int]:
    if value == "auto":
        return None
    try:
        stride = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"stride must be 'auto' or an integer, got {value!r}")
    if stride < 1:
        raise argparse.ArgumentTypeError("stride must be >= 1")
    return stride


def _min_cycles(value: str) -> Optional[float]:
    return None if value == "none" else float(value)


def _channels(value: str) -> Tuple[str, ...]:
    names = tuple(name.strip() for name in value.split(",") if name.strip())
    unknown = [name for name in names if name not in CHANNEL_NAMES]
    if not names or unknown:
        raise argparse.ArgumentTypeError(
            f"channels must be a comma-separated subset of {','.join(CHANNEL_NAMES)}, got {value!r}"
        )
    return names


def _add_wavelet_flags(p: argparse.ArgumentParser):
    p.add_argument("--omega0", type=float, default=6.0, help="Morlet non-dimensional frequency")
    p.add_argument("--dj", type=float, default=0.125, help="scale resolution (octaves per step)")
    p.add_argument("--s0", type=float, default=2.0, help="smallest scale in frames")
    p.add_argument("--min-cycles", type=_min_cycles, default=4.0,
                   help="minimum repetitions the largest scale must fit in the clip ('none' disables)")


def _add_pipeline_flags(p: argparse.ArgumentParser):
    _add_wavelet_flags(p)
    p.add_argument("--sigma", type=float, default=4.0, help="spatial Gaussian scale in px")
    p.add_argument("--stride", type=_stride, default=None,
                   help="spatial downsampling factor, or 'auto' (larger side <= 64 px)")
    p.add_argument("--median-window", type=int, default=9, help="frequency median filter length (frames)")
    p.add_argument("--mask-floor", type=float, default=0.01, help="minimum foreground fraction of a mask")
    p.add_argument("--alpha", type=float, default=15.0, help="Horn-Schunck smoothness weight")
    p.add_argument("--iterations", type=int, default=200, help="Horn-Schunck iterations per pyramid level")
    p.add_argument("--pyramid-levels", type=int, default=3, help="Horn-Schunck pyramid levels")
    p.add_argument("--channels", type=_channels, default=CHANNEL_NAMES,
                   help="comma-separated motion maps to fuse")


def _add_source_flags(p: argparse.ArgumentParser):
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--frames", metavar="DIR", help="directory of frames (PGM, RIMG or common image formats)")
    source.add_argument("--flow", metavar="DIR", help="directory of .flo flow fields")
    p.add_argument("--fps", type=float, required=True, help="clip frame rate")


def _wavelet_config(args, fps: float) -> WaveletConfig:
    return WaveletConfig(omega0=args.omega0, dj=args.dj, s0=args.s0, min_cycles=args.min_cycles, fps=fps)


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        sigma=args.sigma,
        wavelet=_wavelet_config(args, args.fps),
        stride=args.stride,
        median_window=args.median_window,
        mask_floor=args.mask_floor,
        hs=HSParams(alpha=args.alpha, iterations=args.iterations, pyramid_levels=args.pyramid_levels),
        channels=args.channels,
    )


def _run_pipeline(args):
    cfg = _pipeline_config(args)
    if args.flow:
        return analyze_video(flows=load_flows(args.flow), cfg=cfg)
    if getattr(args, "cache_dir", None):
        flows = FlowCacheManager(args.cache_dir).build_from_folder(args.frames, cfg.hs, args.progress)
        return analyze_video(flows=flows, cfg=cfg)
    return analyze_video(frames=load_frames(args.frames), cfg=cfg, show_progress=args.progress)


# ----------------------------
# Subcommands
# ----------------------------

def cmd_count(args) -> int:
    analysis = _run_pipeline(args)
    result = analysis.result
    print(f"count: {result.count:.2f}")
    if args.report:
        report = {
            "count": result.count,
            "freq_trace": result.freq_trace.tolist(),
            "increments": result.increments.tolist(),
        }
        Path(args.report).write_text(json.dumps(report, indent=2), encoding="utf-8")
        logger.info(f"[SAVED] Report written to {args.report}")
    if args.masks:
        write_masks(args.masks, analysis.masks)
        logger.info(f"[SAVED] {len(analysis.masks)} masks written to {args.masks}")
    return EXIT_OK


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = PipelineConfig(
        sigma=args.sigma,
        wavelet=_wavelet_config(args, 30.0),
        stride=args.stride,
        median_window=args.median_window,
        mask_floor=args.mask_floor,
        hs=HSParams(alpha=args.alpha, iterations=args.iterations, pyramid_levels=args.pyramid_levels),
        channels=args.channels,
    )
    validate_pipeline_config(cfg)
    if args.per_channel:
        if args.method != "wavelet":
            raise ValueError("--per-channel only applies to the wavelet method")
        study = run_channel_study(manifest, cfg)
        text = study.to_csv() if args.format == "csv" else study.to_json()
        Path(args.report).write_text(text, encoding="utf-8")
        for row in study.summary():
            print(f"{row['setting']}: mae_mean: {row['mae_mean']}, oboa: {row['oboa']}")
        return EXIT_OK

    report = run_dataset(manifest, cfg, method=args.method)
    text = report.to_csv() if args.format == "csv" else report.to_json()
    Path(args.report).write_text(text, encoding="utf-8")
    agg = report.aggregate
    print(f"scored: {agg['scored']}, failed: {agg['failed']}, oboa: {agg['oboa']}")
    return EXIT_OK


def _synth_spec(args) -> SynthSpec:
    return SynthSpec(
        kind=args.case,
        fps=args.fps,
        duration=args.duration,
        base_freq=args.freq,
        amplitude=args.amplitude,
        width=args.width,
        height=args.height,
        seed=args.seed,
        chirp_rate=args.chirp_rate,
        case_id=args.case_id,
        duty=args.duty,
        midpoint_accel=args.midpoint_accel,
        square_size=args.square_size,
    )


def cmd_synth(args) -> int:
    spec = _synth_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = spec.n_frames
    truth = {}

    if spec.kind in SIGNAL_KINDS:
        signal, true_count = gen_signal(spec)
        (out / "signal.txt").write_text(
            write_signal(signal, f"{spec.kind} f={spec.base_freq:g} Hz fps={spec.fps:g}"), encoding="utf-8"
        )
        source = {"signal": "signal.txt"}
        if spec.kind == "exp_chirp":
            truth["cycle_bounds"] = list(chirp_annotation(spec, video_id=spec.kind).cycle_bounds)
    elif spec.kind == "bouncing_square_video":
        frames, true_count = gen_bouncing_square_video(spec)
        write_frames(out / "frames", frames)
        source = {"frames_dir": "frames"}
    else:
        if spec.kind == "viewpoint_transition":
            flows, true_freq = gen_viewpoint_transition(spec)
            true_count = true_freq * n / spec.fps
            truth["true_freq"] = true_freq
        else:
            flows, true_count = gen_flow_sequence(spec)
        write_flows(out / "flow", flows)
        source = {"flow_dir": "flow"}

    if truth:
        truth["true_count"] = float(true_count)
        (out / "truth.json").write_text(json.dumps(truth, indent=2), encoding="utf-8")
    annotation = CycleAnnotation(video_id=spec.kind, fps=spec.fps, count=float(true_count))
    entry = ManifestEntry(id=spec.kind, fps=spec.fps, annotation=annotation, **source)
    (out / "manifest.json").write_text(write_manifest(Manifest(videos=(entry,))), encoding="utf-8")
    print(f"true count: {float(true_count):.4g}")
    logger.info(f"[SAVED] {spec.kind} written to {out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    signal = read_signal(Path(args.signal).read_text(encoding="utf-8"))
    scalogram = cwt(signal, _wavelet_config(args, args.fps))
    Path(args.out).write_bytes(write_scalogram(scalogram))
    if args.csv:
        matrix = np.column_stack([scalogram.scales, scalogram.power]).astype(np.float64)
        np.savetxt(args.csv, matrix, delimiter=",", fmt="%.9g")
    logger.info(f"[SAVED] Scalogram {scalogram.n_scales}x{scalogram.n_times} written to {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    analysis = _run_pipeline(args)
    write_masks(args.out, analysis.masks)
    print(f"masks: {len(analysis.masks)}")
    return EXIT_OK


# ----------------------------
# Parser
# ----------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress details to stderr")
    common.add_argument("--progress", action="store_true", help="show progress bars during flow estimation")

    parser = argparse.ArgumentParser(
        prog="repest",
        description="Count repetitive motion in video with wavelet analysis of optical-flow motion maps",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", parents=[common], formatter_class=fmt, help="count repetitions in a clip")
    _add_source_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--report", metavar="PATH", help="write a JSON report {count, freq_trace, increments}")
    p.add_argument("--masks", metavar="DIR", help="write per-frame segmentation masks as PGM")
    p.add_argument("--cache-dir", metavar="DIR", help="reuse estimated flow from this cache directory")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("eval", parents=[common], formatter_class=fmt, help="evaluate a dataset manifest")
    p.add_argument("--manifest", required=True, metavar="PATH", help="manifest JSON")
    p.add_argument("--report", required=True, metavar="PATH", help="report output path")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format")
    p.add_argument("--method", choices=METHODS, default="wavelet", help="counting method")
    p.add_argument("--per-channel", action="store_true",
                   help="count with each motion map alone, all maps fused, and the best-map oracle")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], formatter_class=fmt, help="generate a synthetic clip")
    p.add_argument("--case", required=True, choices=SYNTH_KINDS, help="generator")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--fps", type=float, default=30.0, help="frame rate")
    p.add_argument("--duration", type=float, default=10.0, help="clip length in seconds")
    p.add_argument("--freq", type=float, default=1.0, help="base repetition frequency in Hz")
    p.add_argument("--amplitude", type=float, default=1.0, help="signal amplitude, or px for flow and video")
    p.add_argument("--width", type=int, default=64, help="frame width in px")
    p.add_argument("--height", type=int, default=64, help="frame height in px")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--chirp-rate", type=float, default=0.1, help="exponential chirp rate (1/s)")
    p.add_argument("--case-id", type=int, default=3, help="motion case id for taxonomy_case")
    p.add_argument("--duty", type=float, default=0.4, help="moving fraction of each intermittent cycle")
    p.add_argument("--midpoint-accel", action="store_true", help="drop every second frame after the midpoint")
    p.add_argument("--square-size", type=int, default=None, help="bouncing square side in px")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrum", parents=[common], formatter_class=fmt, help="dump the scalogram of a signal")
    p.add_argument("--signal", required=True, metavar="PATH", help="signal text file")
    p.add_argument("--out", required=True, metavar="PATH", help="RSCL output path")
    p.add_argument("--fps", type=float, default=30.0, help="signal sample rate")
    p.add_argument("--csv", metavar="PATH", help="also export the power matrix as CSV")
    _add_wavelet_flags(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("segment", parents=[common], formatter_class=fmt, help="export repetitive-motion masks")
    _add_source_flags(p)
    p.add_argument("--out", required=True, metavar="DIR", help="mask output directory")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_segment)
    return parser


def _configure_logging(verbose: bool):
    root = logging.getLogger("repest")
    for handler in list(root.handlers):
        if getattr(handler, "_repest_cli", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler._repest_cli = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except (RepestError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
