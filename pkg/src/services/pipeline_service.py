"""
Pipeline coordination: simulate captures, track, build micro-Doppler
signatures and benchmark per-CPI processing
"""

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
from loguru import logger
from scipy.constants import c as SPEED_OF_LIGHT

from src.analysis.microdoppler import CoefficientSeries, Spectrogram, build_spectrogram, extract_peak_coefficient
from src.config.settings import Settings
from src.core.detection.detector import detect
from src.core.detection.fusion import FusedMeasurement, SlidingFusion
from src.core.exceptions import ConfigError, CsiTrackError, TruncatedRecord
from src.core.features.cascaded_fft import extract_features, project_tensor
from src.core.features.tensor_io import dump_tensor
from src.core.models import CpiCube, RunSummary, SystemConfig
from src.core.tracking.tracker import Tracker
from src.data.cpi_assembler import CpiQueue, CpiAssembler, assemble_cpis, fill_timestamp_gaps
from src.data.csi_file import CsiFileHeader, iter_records, read_csi, write_csi_arrays
from src.data.outputs import write_fused_csv, write_spectrogram, write_spectrogram_png, write_tracks_csv
from src.data.udp_ingest import UdpCsiReceiver, parse_address
from src.simulation.channel import synth_cpi, synth_stream
from src.simulation.scene import SceneSpec, default_scene_spec
from src.utils.helpers import latency_summary

CSI_FILENAME = "capture.csi"
TRACKS_FILENAME = "tracks.csv"
FUSED_FILENAME = "fused.csv"
SPECTROGRAM_STEM = "spectrogram"


@dataclass
class TrackResult:
    """Outcome of a tracking run"""
    summary: RunSummary
    tracks_path: Path
    fused_path: Path
    fused: List[FusedMeasurement] = field(default_factory=list)


class PipelineService:
    """Runs the processing chain for one SystemConfig"""

    def __init__(self, cfg: SystemConfig, settings: Optional[Settings] = None):
        self.cfg = cfg
        self.settings = settings or Settings()

    # ------------------------------------------------------------------
    # simulate
    # ------------------------------------------------------------------
    def simulate(self, out_dir: Union[str, Path], scene: Optional[SceneSpec] = None,
                 seed: Optional[int] = None, duration: Optional[float] = None) -> Path:
        """
        Synthesize a continuous capture and write it as a CSI file

        Args:
            out_dir: Output directory
            scene: Scene description (default: one person walking a line)
            seed: Overrides the scene seed
            duration: Overrides the scene duration in seconds

        Returns:
            Path of the written CSI file
        """
        scene = scene or default_scene_spec()
        if duration is not None:
            scene = scene.model_copy(update={"duration": duration})
        built = scene.build(self.cfg, seed=seed)
        n_samples = int(round(scene.duration / self.cfg.sample_interval))
        if n_samples < 1:
            raise ConfigError(f"Duration {scene.duration} s holds no samples")

        logger.info(f"Simulating {scene.duration:.1f} s ({n_samples} samples), seed {built.impairments.rng_seed}")
        timestamps, payloads = synth_stream(built, self.cfg, 0.0, n_samples)
        path = Path(out_dir) / CSI_FILENAME
        write_csi_arrays(path, CsiFileHeader.from_config(self.cfg), timestamps, payloads)
        return path

    # ------------------------------------------------------------------
    # track
    # ------------------------------------------------------------------
    def _load_capture(self, csi_path: Union[str, Path]):
        try:
            header, timestamps, payloads = read_csi(csi_path)
        except TruncatedRecord as e:
            logger.warning(f"{e}; continuing with the complete records")
            header, timestamps, payloads = e.partial
        header.check_config(self.cfg)
        return timestamps, payloads

    def process_cpis(self, cubes: Iterable[CpiCube], out_dir: Union[str, Path],
                     debug_tensors: Optional[bool] = None) -> TrackResult:
        """
        Features, detection, fusion and tracking over a CPI stream

        One failing CPI is logged and counted, the run continues.
        """
        out_dir = Path(out_dir)
        debug_tensors = self.settings.debug_tensors if debug_tensors is None else debug_tensors
        summary = RunSummary()
        fusion = SlidingFusion(self.cfg)
        tracker = Tracker(self.cfg)
        fused_history: List[FusedMeasurement] = []

        for cube in cubes:
            summary.cpis += 1
            try:
                cube.validate(self.cfg)
                tensor = extract_features(cube, self.cfg)
                if debug_tensors:
                    dump_tensor(out_dir / "tensors" / f"cpi_{cube.seq:06d}.tensor", tensor)
                detection = detect(tensor, self.cfg)
            except CsiTrackError as e:
                logger.error(f"CPI {cube.seq} failed: {e}")
                summary.errors.append(f"cpi {cube.seq}: {e}")
                continue

            if detection.valid:
                summary.detections += 1
            fused = fusion.push(detection)
            if fused is not None:
                fused_history.append(fused)
            try:
                tracker.step(fused, time=detection.time)
            except CsiTrackError as e:
                logger.error(f"Tracking frame at {detection.time:.3f} s failed: {e}")
                summary.errors.append(f"frame {detection.time:.3f}: {e}")

        summary.fused = len(fused_history)
        summary.outliers_removed = fusion.outliers_removed
        summary.dropped_measurements = tracker.dropped_measurements
        summary.confirmed_tracks = len(tracker.ever_confirmed)

        tracks_path = write_tracks_csv(out_dir / TRACKS_FILENAME, tracker.rows)
        fused_path = write_fused_csv(out_dir / FUSED_FILENAME, fused_history)
        logger.info(
            f"Tracking finished: {summary.cpis} CPIs, {summary.detections} detections, "
            f"{summary.confirmed_tracks} confirmed tracks"
        )
        return TrackResult(summary=summary, tracks_path=tracks_path, fused_path=fused_path, fused=fused_history)

    def track_file(self, csi_path: Union[str, Path], out_dir: Union[str, Path],
                   debug_tensors: Optional[bool] = None) -> TrackResult:
        """Track every CPI of a CSI capture"""
        timestamps, payloads = self._load_capture(csi_path)
        assembler = CpiAssembler(self.cfg)
        cubes = (cube for cube in map(assembler.push, fill_timestamp_gaps(iter_records(timestamps, payloads), self.cfg))
                 if cube is not None)
        result = self.process_cpis(cubes, out_dir, debug_tensors)
        result.summary.skipped = assembler.skipped
        return result

    def track_udp(self, address: str, out_dir: Union[str, Path], max_seconds: Optional[float] = None,
                  debug_tensors: Optional[bool] = None) -> TrackResult:
        """
        Live tracking: a reader thread assembles CPIs from UDP datagrams
        and hands them to this thread through a bounded queue
        """
        host, port = parse_address(address)
        poll_timeout = self.settings.get_setting("udp_poll_timeout", 0.5)
        receiver = UdpCsiReceiver(host, port, self.cfg, poll_timeout=poll_timeout)
        queue = CpiQueue(self.cfg.queue_depth)
        assembler = CpiAssembler(self.cfg)
        stop = threading.Event()

        def produce():
            try:
                for item in receiver.records(max_seconds=max_seconds, stop=stop.is_set):
                    cube = assembler.push(item)
                    if cube is not None:
                        queue.put(cube)
            except Exception as e:
                logger.error(f"UDP ingest stopped: {e}")
            finally:
                queue.close()

        reader = threading.Thread(target=produce, name="csi-udp-reader", daemon=True)
        reader.start()

        def consume():
            while not queue.closed:
                cube = queue.get(timeout=self.settings.get_setting("queue_wait", 1.0))
                if cube is not None:
                    yield cube

        try:
            result = self.process_cpis(consume(), out_dir, debug_tensors)
        finally:
            stop.set()
            reader.join()
        result.summary.skipped = assembler.skipped + queue.dropped
        if queue.dropped:
            logger.warning(f"{queue.dropped} CPIs dropped because processing fell behind")
        return result

    # ------------------------------------------------------------------
    # micro-Doppler
    # ------------------------------------------------------------------
    def coefficient_series(self, cubes: Iterable[CpiCube]) -> CoefficientSeries:
        """
        Peak coefficient of every CPI

        CPIs without a valid detection, and CPIs whose detection the sliding
        Z-score test rejects in any window, become gaps.
        """
        values: List[Optional[complex]] = []
        times: List[float] = []
        fusion = SlidingFusion(self.cfg)
        positions: Dict[int, int] = {}
        for cube in cubes:
            times.append(cube.start_time)
            try:
                cube.validate(self.cfg)
                tensor = extract_features(cube, self.cfg)
                detection = detect(tensor, self.cfg)
            except CsiTrackError as e:
                logger.error(f"CPI {cube.seq} failed: {e}")
                values.append(None)
                continue
            positions[fusion.pushed] = len(values)
            fusion.push(detection)
            values.append(extract_peak_coefficient(tensor) if detection.valid else None)

        for slot in fusion.rejected:
            values[positions[slot]] = None
        if fusion.rejected:
            logger.info(f"{len(fusion.rejected)} outlier CPIs marked invalid before the Doppler FFT")
        return CoefficientSeries.from_lists(values, times)

    def microdoppler(self, csi_path: Union[str, Path], out_dir: Union[str, Path],
                     png: bool = False) -> Dict[str, object]:
        """Micro-Doppler signature of a capture, written as binary, graymap and optionally PNG"""
        timestamps, payloads = self._load_capture(csi_path)
        cubes = assemble_cpis(fill_timestamp_gaps(iter_records(timestamps, payloads), self.cfg), self.cfg)
        spectrogram: Spectrogram = build_spectrogram(self.coefficient_series(cubes), self.cfg)
        stem = Path(out_dir) / SPECTROGRAM_STEM
        paths = write_spectrogram(stem, spectrogram)
        if png:
            paths.append(write_spectrogram_png(stem.with_suffix(".png"), spectrogram))
        return {"spectrogram": spectrogram, "paths": paths}

    # ------------------------------------------------------------------
    # projections
    # ------------------------------------------------------------------
    def project(self, csi_path: Union[str, Path], out_dir: Union[str, Path], cpi_index: int = 0) -> Path:
        """PNG of the three max-projections of one CPI's feature tensor"""
        from src.utils.plotting import plot_projections

        timestamps, payloads = self._load_capture(csi_path)
        for cube in assemble_cpis(fill_timestamp_gaps(iter_records(timestamps, payloads), self.cfg), self.cfg):
            if cube.seq < cpi_index:
                continue
            tensor = extract_features(cube, self.cfg)
            axes = {
                "delay": tensor.delay_axis * SPEED_OF_LIGHT,
                "aoa": np.degrees(tensor.aoa_axis),
                "doppler": tensor.doppler_axis,
            }
            return plot_projections(Path(out_dir) / f"projection_{cube.seq:06d}.png", project_tensor(tensor), axes)
        raise ConfigError(f"Capture has no CPI with index {cpi_index}")

    # ------------------------------------------------------------------
    # bench
    # ------------------------------------------------------------------
    def bench(self, n_cpis: int, seed: int = 0, distinct: int = 16) -> Dict[str, object]:
        """
        Per-CPI latency of feature extraction plus detection

        A handful of distinct simulated CPIs are cycled so synthesis does
        not dominate the run.
        """
        if n_cpis < 1:
            raise ConfigError("bench needs at least one CPI")
        scene = default_scene_spec(seed=seed).build(self.cfg)
        cubes = [synth_cpi(scene, self.cfg, t0=1.0 + i * self.cfg.cpi_len * self.cfg.sample_interval, seq=i)
                 for i in range(min(distinct, n_cpis))]

        durations = np.empty(n_cpis)
        for i in range(n_cpis):
            cube = cubes[i % len(cubes)]
            start = time.perf_counter()
            detect(extract_features(cube, self.cfg), self.cfg)
            durations[i] = time.perf_counter() - start

        stats = latency_summary(durations)
        logger.info(f"Bench over {n_cpis} CPIs: p50 {stats['p50_ms']:.3f} ms, p98 {stats['p98_ms']:.3f} ms")
        return {"stats": stats, "durations": durations}
