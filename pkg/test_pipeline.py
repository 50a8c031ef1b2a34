"""
End-to-end tests for the pipeline service and the command line
"""

import socket
import threading
import time

import numpy as np
import pandas as pd
import pytest
from loguru import logger

from main import main
from src.config.settings import Settings
from src.core.config_loader import lte_preset
from src.core.exceptions import ConfigError, RecordShapeMismatch
from src.core.features.tensor_io import load_tensor
from src.core.models import CpiCube
from src.data.csi_file import read_csi, write_csi_arrays
from src.data.udp_ingest import send_capture
from src.services.pipeline_service import CSI_FILENAME, PipelineService
from src.simulation.channel import synth_cpi
from src.simulation.scene import default_scene_spec


@pytest.fixture
def cfg():
    return lte_preset()


@pytest.fixture
def service(cfg):
    return PipelineService(cfg, Settings())


@pytest.fixture(autouse=True)
def quiet_logs():
    yield
    logger.remove()


def _free_port():
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def test_simulate_is_deterministic(tmp_path, service):
    a = service.simulate(tmp_path / "a", seed=3, duration=0.5)
    b = service.simulate(tmp_path / "b", seed=3, duration=0.5)
    c = service.simulate(tmp_path / "c", seed=4, duration=0.5)
    assert a.name == CSI_FILENAME
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    _, timestamps, payloads = read_csi(a)
    assert payloads.shape == (500, 100, 3)
    assert timestamps[-1] == pytest.approx(0.499)


def test_simulate_rejects_empty_duration(tmp_path, service):
    with pytest.raises(ConfigError):
        service.simulate(tmp_path, duration=1e-5)


def test_track_short_capture(tmp_path, service):
    path = service.simulate(tmp_path, seed=1, duration=0.3)
    result = service.track_file(path, tmp_path)
    assert result.summary.cpis == 87
    assert result.summary.skipped == 0
    assert result.summary.errors == []
    assert result.tracks_path.exists()
    assert list(pd.read_csv(result.fused_path).columns)[0] == "time"


def test_track_truncated_capture(tmp_path, service):
    path = service.simulate(tmp_path, seed=1, duration=0.3)
    path.write_bytes(path.read_bytes()[:-1000])
    result = service.track_file(path, tmp_path)
    assert result.summary.cpis == 86


def test_track_capture_with_non_finite_sample(tmp_path, service):
    path = service.simulate(tmp_path, seed=1, duration=0.3)
    header, timestamps, payloads = read_csi(path)
    payloads = payloads.copy()
    payloads[60, 5, 1] = np.nan
    write_csi_arrays(path, header, timestamps, payloads)
    result = service.track_file(path, tmp_path)
    assert result.summary.cpis == 87
    assert result.summary.errors == []
    assert result.tracks_path.exists()


def test_process_cpis_survives_non_finite_cube(tmp_path, service, cfg):
    good = synth_cpi(default_scene_spec().build(cfg), cfg, 0.0, seq=0)
    bad = good.data.copy()
    bad[0, 0, 0] = np.nan
    result = service.process_cpis([good, CpiCube(bad, 0.002, 1)], tmp_path)
    assert result.summary.cpis == 2
    assert len(result.summary.errors) == 1
    assert result.summary.errors[0].startswith("cpi 1")


def test_track_outputs_are_byte_identical(tmp_path, service):
    path = service.simulate(tmp_path, seed=2, duration=0.4)
    first = service.track_file(path, tmp_path / "one")
    second = service.track_file(path, tmp_path / "two")
    assert first.tracks_path.read_bytes() == second.tracks_path.read_bytes()
    assert first.fused_path.read_bytes() == second.fused_path.read_bytes()


def test_track_rejects_mismatched_capture(tmp_path, cfg):
    path = PipelineService(cfg.with_overrides(num_antennas=2)).simulate(tmp_path, seed=1, duration=0.2)
    with pytest.raises(RecordShapeMismatch):
        PipelineService(cfg).track_file(path, tmp_path)


def test_debug_tensors(tmp_path, service):
    path = service.simulate(tmp_path, seed=2, duration=0.2)
    service.track_file(path, tmp_path, debug_tensors=True)
    dumps = sorted((tmp_path / "tensors").glob("*.tensor"))
    assert len(dumps) == 37
    assert load_tensor(dumps[0]).data.shape == (63, 32, 13)


@pytest.mark.slow
def test_track_confirms_walker(tmp_path, service):
    path = service.simulate(tmp_path, seed=5, duration=3.0)
    result = service.track_file(path, tmp_path)
    assert result.summary.confirmed_tracks >= 1
    tracks = pd.read_csv(result.tracks_path)
    confirmed = tracks[tracks["confirmed"] == 1]
    assert len(confirmed) > 0
    assert confirmed["y"].between(0.0, 15.0).all()


def test_microdoppler_is_deterministic(tmp_path, service):
    path = service.simulate(tmp_path, seed=7, duration=0.6)
    first = service.microdoppler(path, tmp_path / "one")
    second = service.microdoppler(path, tmp_path / "two")
    spec = first["spectrogram"]
    assert spec.matrix.shape == (237 - 63, 128)
    assert [p.suffix for p in first["paths"]] == [".f32", ".txt", ".pgm"]
    assert first["paths"][0].read_bytes() == second["paths"][0].read_bytes()


def test_project_writes_png(tmp_path, service):
    path = service.simulate(tmp_path, seed=1, duration=0.2)
    png = service.project(path, tmp_path, cpi_index=3)
    assert png.name == "projection_000003.png"
    assert png.stat().st_size > 0
    with pytest.raises(ConfigError):
        service.project(path, tmp_path, cpi_index=1000)


def test_bench_smoke(service):
    outcome = service.bench(20, distinct=4)
    assert outcome["stats"]["count"] == 20
    assert len(outcome["durations"]) == 20
    assert 0 < outcome["stats"]["p50_ms"] <= outcome["stats"]["max_ms"]
    with pytest.raises(ConfigError):
        service.bench(0)


def test_track_udp(tmp_path, cfg):
    source = PipelineService(cfg).simulate(tmp_path / "src", seed=1, duration=0.4)
    _, timestamps, payloads = read_csi(source)
    port = _free_port()

    def sender():
        time.sleep(0.3)
        for start in range(0, len(timestamps), 50):
            send_capture("127.0.0.1", port, timestamps, payloads, order=np.arange(start, min(start + 50, len(timestamps))))
            time.sleep(0.01)

    settings = Settings()
    settings.update_setting("udp_poll_timeout", 0.05)
    settings.update_setting("queue_wait", 0.1)
    thread = threading.Thread(target=sender)
    thread.start()
    result = PipelineService(cfg, settings).track_udp(f"127.0.0.1:{port}", tmp_path / "out", max_seconds=2.0)
    thread.join()
    assert result.summary.cpis >= 1
    assert result.tracks_path.exists()


def test_settings_lookup_and_export():
    settings = Settings()
    settings.update_setting("queue_wait", 0.25)
    assert settings.get_setting("queue_wait") == 0.25
    assert settings.get_setting("no_such_setting", 7) == 7
    exported = settings.to_dict()
    assert exported["queue_wait"] == 0.25
    assert "log_level" in exported


def test_cli_simulate_and_track(tmp_path, monkeypatch):
    monkeypatch.setenv("CSITRACK_LOG_DIR", str(tmp_path / "logs"))
    out = str(tmp_path / "run")
    assert main(["simulate", "--out", out, "--seed", "1", "--duration", "0.3"]) == 0
    assert (tmp_path / "run" / CSI_FILENAME).exists()
    assert main(["track", "--out", out]) == 0
    assert (tmp_path / "run" / "tracks.csv").exists()
    assert any((tmp_path / "logs").iterdir())


def test_cli_missing_config(tmp_path, monkeypatch):
    monkeypatch.setenv("CSITRACK_LOG_DIR", str(tmp_path / "logs"))
    assert main(["bench", "--config", str(tmp_path / "none.cfg"), "--cpis", "1"]) == 1


def test_cli_missing_capture(tmp_path, monkeypatch):
    monkeypatch.setenv("CSITRACK_LOG_DIR", str(tmp_path / "logs"))
    assert main(["track", str(tmp_path / "absent.csi")]) == 1


def test_cli_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["teleport"])
    assert info.value.code == 2
