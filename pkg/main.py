"""
Main entry point for the CSI power tracker
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger

from display_utils import display_bench, display_paths, display_track_summary
from src.config.settings import Settings
from src.core.config_loader import load_config
from src.core.exceptions import CsiTrackError
from src.services.pipeline_service import CSI_FILENAME, PipelineService
from src.simulation.scene import load_scene
from src.utils.helpers import latency_histogram


def setup_logging(settings: Settings):
    """Configure logging"""
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level)
    logger.add(str(settings.log_dir / "csitrack_{time}.log"),
               rotation=settings.log_rotation,
               retention=settings.log_retention,
               level=settings.log_level)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="System configuration file (key = value)")
    common.add_argument("--seed", type=int, default=None, help="Random seed for simulated data")
    common.add_argument("--out", default=None, help="Output directory")
    common.add_argument("--debug-tensors", action="store_true", help="Dump every feature tensor")

    parser = argparse.ArgumentParser(prog="csitrack", description="Passive tracking from CSI power")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="Synthesize a CSI capture")
    simulate.add_argument("--scene", help="Scene file (JSON)")
    simulate.add_argument("--duration", type=float, default=None, help="Capture length in seconds")

    track = sub.add_parser("track", parents=[common], help="Track targets in a capture or live stream")
    track.add_argument("csi", nargs="?", help="CSI capture (default: <out>/capture.csi)")
    track.add_argument("--udp", metavar="HOST:PORT", help="Receive CSI datagrams instead of reading a file")
    track.add_argument("--max-seconds", type=float, default=None, help="Stop live ingest after this long")

    micro = sub.add_parser("microdoppler", parents=[common], help="Micro-Doppler signature of a capture")
    micro.add_argument("csi", nargs="?", help="CSI capture (default: <out>/capture.csi)")
    micro.add_argument("--png", action="store_true", help="Also render a PNG")

    bench = sub.add_parser("bench", parents=[common], help="Per-CPI latency on synthetic CPIs")
    bench.add_argument("--cpis", type=int, default=None, help="Number of CPIs to process")

    project = sub.add_parser("project", parents=[common], help="Feature tensor projections of one CPI")
    project.add_argument("csi", nargs="?", help="CSI capture (default: <out>/capture.csi)")
    project.add_argument("--cpi", type=int, default=0, help="CPI index")
    return parser


def _capture_path(args, out_dir: Path) -> Path:
    return Path(args.csi) if args.csi else out_dir / CSI_FILENAME


def run(args, settings: Settings) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out) if args.out else settings.out_dir
    debug_tensors = args.debug_tensors or settings.debug_tensors
    service = PipelineService(cfg, settings)

    if args.command == "simulate":
        scene = load_scene(args.scene) if args.scene else None
        path = service.simulate(out_dir, scene=scene, seed=args.seed, duration=args.duration)
        display_paths("CAPTURE WRITTEN", [path])

    elif args.command == "track":
        if args.udp:
            result = service.track_udp(args.udp, out_dir, max_seconds=args.max_seconds,
                                       debug_tensors=debug_tensors)
        else:
            result = service.track_file(_capture_path(args, out_dir), out_dir, debug_tensors=debug_tensors)
        display_track_summary(result.summary, result.tracks_path, result.fused_path)

    elif args.command == "microdoppler":
        outcome = service.microdoppler(_capture_path(args, out_dir), out_dir, png=args.png)
        display_paths("SPECTROGRAM WRITTEN", outcome["paths"])

    elif args.command == "bench":
        n_cpis = args.cpis if args.cpis is not None else settings.bench_cpis
        outcome = service.bench(n_cpis, seed=args.seed or 0)
        display_bench(outcome["stats"], latency_histogram(outcome["durations"]))

    elif args.command == "project":
        path = service.project(_capture_path(args, out_dir), out_dir, cpi_index=args.cpi)
        display_paths("PROJECTIONS WRITTEN", [path])

    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    args = build_parser().parse_args(argv)
    settings = Settings()
    setup_logging(settings)
    logger.debug(f"Settings: {settings.to_dict()}")

    try:
        return run(args, settings)
    except (CsiTrackError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"csitrack {args.command}: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nInterrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
