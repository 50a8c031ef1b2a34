"""
Tests for micro-Doppler spectrogram construction
"""

import numpy as np
import pytest

from src.analysis.microdoppler import (CoefficientSeries, build_spectrogram, extract_peak_coefficient,
                                       interpolate_gaps, normalize_spectrogram, power_doppler_profile,
                                       tensor_doppler_profile, window_doppler_fft)
from src.core.config_loader import lte_preset
from src.core.exceptions import AllZero, InsufficientData
from src.core.features.cascaded_fft import compute_csi_power, extract_features
from src.core.models import FeatureTensor
from src.services.pipeline_service import PipelineService
from src.simulation.channel import (DynamicScatterer, ImpairmentModel, Scene, StaticPath, bistatic_truth,
                                    make_walker, synth_cpi)
from src.simulation.trajectories import WaypointTrajectory


@pytest.fixture
def cfg():
    return lte_preset()


def _series(values, dt=0.002):
    values = np.asarray(values, dtype=complex)
    return CoefficientSeries(values, np.arange(len(values)) * dt, np.ones(len(values), dtype=bool))


def _db(ratio):
    return 10 * np.log10(ratio)


def _velocity_for_doppler(pos, f_d, cfg):
    """Velocity at pos, heading into the bistatic ellipse, that produces Doppler f_d"""
    pos = np.asarray(pos, dtype=float)
    inward = -((pos - cfg.tx_position) / np.linalg.norm(pos - cfg.tx_position) + pos / np.linalg.norm(pos))
    inward /= np.linalg.norm(inward)
    _, _, per_unit = bistatic_truth(pos, inward, cfg)
    return inward * f_d / per_unit


def _scene(cfg, scatterers, seed=0):
    return Scene(
        static_paths=[StaticPath.direct(cfg)],
        scatterers=scatterers,
        impairments=ImpairmentModel.typical(rng_seed=seed, noise_std=0.05),
    )


def _linear_scatterer(pos, vel, duration=1.0, amplitude=0.3):
    pos = np.asarray(pos, dtype=float)
    return DynamicScatterer(amplitude, WaypointTrajectory([0.0, duration], [pos, pos + duration * vel]))


def _peak_series(scene, cfg, n_cpis):
    values, times = [], []
    for k in range(n_cpis):
        t0 = k * cfg.md_sample_interval
        tensor = extract_features(synth_cpi(scene, cfg, t0, seq=k), cfg)
        values.append(extract_peak_coefficient(tensor))
        times.append(t0)
    return CoefficientSeries.from_lists(values, times)


def test_peak_coefficient():
    data = np.zeros((63, 32, 13), dtype=complex)
    data[4, 7, 9] = 2 + 3j
    data[10, 1, 2] = 1.0
    tensor = FeatureTensor(data, np.arange(1, 64) * 1e-9, np.linspace(-1, 1, 32), np.linspace(-40, 40, 13))
    assert extract_peak_coefficient(tensor) == 2 + 3j


def test_interpolate_interior_gap():
    series = CoefficientSeries.from_lists([1 + 1j, None, None, 4 + 4j], [0.0, 1.0, 2.0, 3.0])
    filled = interpolate_gaps(series)
    assert filled.values == pytest.approx([1 + 1j, 2 + 2j, 3 + 3j, 4 + 4j])
    assert filled.valid_mask.all()


def test_interpolate_edges_take_nearest():
    series = CoefficientSeries.from_lists([None, 2.0, 4.0, None], [0.0, 1.0, 2.0, 3.0])
    assert interpolate_gaps(series).values == pytest.approx([2.0, 2.0, 4.0, 4.0])


def test_interpolate_needs_two_points():
    with pytest.raises(InsufficientData):
        interpolate_gaps(CoefficientSeries.from_lists([None, 1.0, None], [0.0, 1.0, 2.0]))


def test_complete_series_unchanged():
    series = _series([1.0, 2.0, 3.0])
    assert interpolate_gaps(series) is series


def test_window_count_and_axis(cfg):
    spec = window_doppler_fft(_series(np.ones(100)), cfg)
    assert spec.matrix.shape == (37, 128)
    assert spec.doppler_axis[64] == 0.0
    assert spec.doppler_axis[1] - spec.doppler_axis[0] == pytest.approx(500.0 / 128)
    assert spec.time_axis[0] == pytest.approx(63 * 0.002 / 2)


def test_series_shorter_than_window(cfg):
    with pytest.raises(InsufficientData):
        window_doppler_fft(_series(np.ones(63)), cfg)


def test_constant_series_peaks_at_dc(cfg):
    spec = window_doppler_fft(_series(np.full(80, 1 + 1j)), cfg)
    assert np.all(spec.ridge() == 0.0)


def test_complex_exponential_ridge_and_mirror(cfg):
    t = np.arange(200) * 0.002
    spec = window_doppler_fft(_series(np.exp(2j * np.pi * 62.5 * t)), cfg)
    assert np.allclose(spec.ridge(), 62.5)
    magnitude = np.abs(spec.matrix)
    plus = np.argmin(np.abs(spec.doppler_axis - 62.5))
    minus = np.argmin(np.abs(spec.doppler_axis + 62.5))
    assert np.all(magnitude[:, minus] <= 0.1 * magnitude[:, plus])


def test_normalize_examples():
    spec = normalize_spectrogram(np.array([[1.0, 10.0, 100.0]]))
    assert spec.matrix[0] == pytest.approx([0.0, 0.5, 1.0], abs=1e-9)


def test_normalize_zero_range():
    spec = normalize_spectrogram(np.full((3, 4), 2.0))
    assert np.array_equal(spec.matrix, np.zeros((3, 4)))


def test_normalize_all_zero():
    with pytest.raises(AllZero):
        normalize_spectrogram(np.zeros((5, 128)))


def test_build_spectrogram_range(cfg):
    rng = np.random.default_rng(2)
    values = [complex(v) if rng.random() > 0.1 else None for v in rng.standard_normal(120) + 1j]
    values[0] = values[-1] = 1.0
    spec = build_spectrogram(CoefficientSeries.from_lists(values, np.arange(120) * 0.002), cfg)
    assert spec.matrix.shape == (57, 128)
    assert spec.matrix.min() == pytest.approx(0.0)
    assert spec.matrix.max() == pytest.approx(1.0)


def test_single_sided_delay_suppresses_mirror(cfg):
    pos = np.array([3.0, 8.0])
    f_d = 15.625
    vel = _velocity_for_doppler(pos, f_d, cfg)
    cube = synth_cpi(_scene(cfg, [_linear_scatterer(pos, vel)], seed=4), cfg, 0.0)

    tensor = extract_features(cube, cfg)
    profile = tensor_doppler_profile(tensor)
    plus = np.argmin(np.abs(tensor.doppler_axis - f_d))
    minus = np.argmin(np.abs(tensor.doppler_axis + f_d))
    assert _db(profile[plus] / profile[minus]) >= 6.0

    raw, freqs = power_doppler_profile(compute_csi_power(cube), cfg)
    raw_plus = np.argmin(np.abs(freqs - f_d))
    raw_minus = np.argmin(np.abs(freqs + f_d))
    assert abs(_db(raw[raw_plus] / raw[raw_minus])) <= 3.0


def test_spectrogram_mirror_below_ridge_in_every_window(cfg):
    pos = np.array([3.0, 8.0])
    f_d = 15.625
    scene = _scene(cfg, [_linear_scatterer(pos, _velocity_for_doppler(pos, f_d, cfg))], seed=4)
    spec = window_doppler_fft(_peak_series(scene, cfg, 100), cfg)
    assert spec.matrix.shape[0] == 37
    power = np.abs(spec.matrix) ** 2
    plus = np.argmin(np.abs(spec.doppler_axis - f_d))
    minus = np.argmin(np.abs(spec.doppler_axis + f_d))
    assert np.all(_db(power[:, plus] / power[:, minus]) >= 6.0)


def test_outlier_cpi_marked_invalid(cfg):
    pos = np.array([3.0, 8.0])
    walker = _scene(cfg, [_linear_scatterer(pos, _velocity_for_doppler(pos, 15.625, cfg))], seed=4)
    stray_pos = np.array([-1.5, 6.0])
    stray = _scene(cfg, [_linear_scatterer(stray_pos, _velocity_for_doppler(stray_pos, -31.25, cfg), amplitude=0.6)],
                   seed=5)
    cubes = [synth_cpi(stray if k == 40 else walker, cfg, k * cfg.md_sample_interval, seq=k) for k in range(80)]

    series = PipelineService(cfg).coefficient_series(cubes)
    assert not series.valid_mask[40]
    assert series.values[40] == 0
    assert series.valid_mask.sum() >= 70


def test_single_antenna_spectrogram(cfg):
    single = cfg.with_overrides(num_antennas=1)
    pos = np.array([3.0, 8.0])
    vel = _velocity_for_doppler(pos, 19.5, single)
    scene = _scene(single, [_linear_scatterer(pos, vel)], seed=6)
    spec = build_spectrogram(_peak_series(scene, single, 72), single)
    assert spec.matrix.shape == (9, 128)
    assert np.all((spec.matrix >= 0) & (spec.matrix <= 1))
    assert np.median(spec.ridge()) == pytest.approx(19.5, abs=2 * 500.0 / 128)


@pytest.mark.slow
def test_walker_ridge_follows_torso(cfg):
    pos = np.array([3.0, 8.0])
    vel = _velocity_for_doppler(pos, 18.0, cfg)
    base = WaypointTrajectory([0.0, 1.0], [pos, pos + vel])
    scene = _scene(cfg, make_walker(base, torso_amplitude=0.3, limb_amplitude=0.2, limb_ratio=0.3), seed=9)

    spec = build_spectrogram(_peak_series(scene, cfg, 160), cfg)
    centres = spec.time_axis + 0.5 * cfg.cpi_len * cfg.sample_interval
    torso = np.array([bistatic_truth(base.position(t), base.velocity(t), cfg)[2] for t in centres])
    hits = np.abs(spec.ridge() - torso) <= 2 * 500.0 / 128
    assert hits.mean() >= 0.9
