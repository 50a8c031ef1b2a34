"""
Tests for bistatic localization, the EKF and track management
"""

import math
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import brentq
from scipy.stats import chi2

from src.core.config_loader import lte_preset
from src.core.conversions import doppler_bin_to_velocity
from src.core.detection.fusion import FusedMeasurement
from src.core.exceptions import DegenerateGeometry
from src.core.tracking.ekf import (Track, ekf_predict, ekf_update, innovation_nis, measurement_function,
                                   measurement_jacobian, process_noise, transition_matrix)
from src.core.tracking.geometry import bistatic_range, bistatic_to_cartesian
from src.core.tracking.tracker import (TRACK_COLUMNS, PositionMeasurement, Tracker, associate_and_manage,
                                       spawn_track)
from src.simulation.channel import bistatic_truth
from src.simulation.trajectories import make_walk


@pytest.fixture
def cfg():
    return lte_preset()


def _track(state, cov=None):
    return Track(state=np.asarray(state, dtype=float), cov=np.eye(6) if cov is None else cov)


def _ellipse_residual(r, d_s, d_x, delta):
    return r + np.sqrt(r * r + d_s * d_s - 2 * r * d_s * np.cos(delta)) - d_x


def test_collinear_closure(cfg):
    three = cfg.with_overrides(tx_range=3.0)
    assert bistatic_range(5.0, three.tx_aoa, three) == pytest.approx(4.0)


def test_right_angle_case(cfg):
    three = cfg.with_overrides(tx_range=3.0)
    r = bistatic_range(5.0, three.tx_aoa + math.pi / 2, three)
    assert r == pytest.approx(1.6)
    assert r + math.sqrt(r ** 2 + 9.0) == pytest.approx(5.0)


def test_degenerate_path_length(cfg):
    with pytest.raises(DegenerateGeometry):
        bistatic_range(cfg.tx_range, 0.3, cfg)
    with pytest.raises(DegenerateGeometry):
        bistatic_range(cfg.tx_range - 1.0, 0.3, cfg)


def test_cartesian_uses_absolute_delay(cfg):
    pos = np.array([1.0, 5.0])
    delay, aoa, _ = bistatic_truth(pos, (0.0, 0.0), cfg)
    x, y = bistatic_to_cartesian(SimpleNamespace(delay=delay, aoa=aoa), cfg)
    assert (x, y) == pytest.approx((1.0, 5.0), abs=1e-9)


def test_closed_form_matches_bisection(cfg):
    rng = np.random.default_rng(18)
    worst = 0.0
    for _ in range(100):
        d_s = rng.uniform(1.0, 10.0)
        tx_aoa = rng.uniform(-1.4, 1.4)
        local = cfg.with_overrides(tx_range=d_s, tx_aoa=tx_aoa)
        d_x = d_s + rng.uniform(0.01, 30.0, 1000)
        aoa = rng.uniform(-math.pi / 2, math.pi / 2, 1000)
        delta = aoa - tx_aoa

        lo, hi = np.zeros(1000), d_x.copy()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            above = _ellipse_residual(mid, d_s, d_x, delta) > 0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        numeric = 0.5 * (lo + hi)

        closed = np.array([bistatic_range(p, a, local) for p, a in zip(d_x, aoa)])
        worst = max(worst, float(np.max(np.abs(closed - numeric))))
    assert worst <= 1e-9


def test_closed_form_matches_brentq(cfg):
    rng = np.random.default_rng(4)
    for _ in range(200):
        d_x = cfg.tx_range + rng.uniform(0.05, 20.0)
        aoa = rng.uniform(-1.5, 1.5)
        delta = aoa - cfg.tx_aoa
        root = brentq(_ellipse_residual, 0.0, d_x, args=(cfg.tx_range, d_x, delta), xtol=1e-13)
        assert bistatic_range(d_x, aoa, cfg) == pytest.approx(root, abs=1e-9)


def test_predict_stationary():
    track = ekf_predict(_track([1.0, 2.0, 0, 0, 0, 0]), 0.5)
    assert track.state[:2] == pytest.approx([1.0, 2.0])


def test_predict_constant_velocity():
    track = ekf_predict(_track([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]), 1.0)
    assert track.state[0] == pytest.approx(1.0)


def test_predict_constant_acceleration():
    track = ekf_predict(_track([0.0, 0.0, 0.0, 0.0, 0.1, 0.0]), 2.0)
    assert track.state[0] == pytest.approx(0.2)
    assert track.state[2] == pytest.approx(0.2)


def test_predict_rejects_non_positive_step():
    with pytest.raises(ValueError):
        ekf_predict(_track(np.zeros(6)), 0.0)


def test_predict_does_not_mutate():
    original = _track([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    ekf_predict(original, 1.0)
    assert original.state[0] == 0.0


def test_process_noise_structure():
    q = process_noise(0.1, 2.0)
    assert q.shape == (6, 6)
    assert np.allclose(q, q.T)
    assert np.all(np.linalg.eigvalsh(q) >= -1e-15)
    assert q[0, 1] == 0.0
    assert transition_matrix(0.1)[0, 4] == pytest.approx(0.005)


def test_update_with_consistent_measurement(cfg):
    track = _track([1.0, 5.0, 0.3, -0.5, 0.0, 0.0], np.eye(6) * 0.5)
    z = measurement_function(track.state, cfg)
    updated = ekf_update(track, z, cfg, r=np.eye(3) * 1e-8)
    assert updated.state == pytest.approx(track.state, abs=1e-9)
    assert np.trace(updated.cov) < np.trace(track.cov)
    assert innovation_nis(track, z, cfg) == pytest.approx(0.0, abs=1e-12)


def test_stationary_target_converges(cfg):
    truth = np.array([1.5, 6.0])
    track = _track([2.0, 5.6, 0.0, 0.0, 0.0, 0.0])
    for _ in range(50):
        track = ekf_predict(track, 0.1, cfg.ekf_jerk_psd)
        track = ekf_update(track, np.array([truth[0], truth[1], 0.0]), cfg, r=np.eye(3) * 1e-8)
    assert np.linalg.norm(track.position - truth) <= 0.01


def test_measurement_jacobian_matches_finite_differences(cfg):
    rng = np.random.default_rng(6)
    h = 1e-6
    for _ in range(100):
        state = np.concatenate([rng.uniform([-4.0, 1.0], [4.0, 9.0]), rng.uniform(-2, 2, 2), rng.uniform(-1, 1, 2)])
        analytic = measurement_jacobian(state, cfg)
        numeric = np.zeros_like(analytic)
        for j in range(6):
            step = np.zeros(6)
            step[j] = h
            numeric[:, j] = (measurement_function(state + step, cfg) - measurement_function(state - step, cfg)) / (2 * h)
        assert np.all(np.abs(analytic - numeric) <= 1e-6 * np.maximum(1.0, np.abs(analytic)))


def test_measurement_function_is_closing_speed(cfg):
    pos, vel = np.array([1.0, 5.0]), np.array([0.2, -1.1])
    _, _, doppler = bistatic_truth(pos, vel, cfg)
    state = np.concatenate([pos, vel, [0.0, 0.0]])
    assert measurement_function(state, cfg)[2] == pytest.approx(doppler_bin_to_velocity(doppler, cfg))


def test_covariance_stays_positive_definite(cfg):
    rng = np.random.default_rng(8)
    track = _track([1.0, 5.0, 0.5, 0.0, 0.0, 0.0])
    for _ in range(10000):
        track = ekf_predict(track, rng.uniform(0.001, 0.2), cfg.ekf_jerk_psd)
        z = measurement_function(track.state, cfg) + rng.normal(0, [0.3, 0.3, 0.1])
        assert np.all(np.linalg.eigvalsh(track.cov) > 0)
        track = ekf_update(track, z, cfg)
        assert np.array_equal(track.cov, track.cov.T)
        assert np.all(np.linalg.eigvalsh(track.cov) > 0)
        if np.linalg.norm(track.position) < 1.0 or np.linalg.norm(track.position - cfg.tx_position) < 1.0:
            track = _track([1.0, 5.0, 0.5, 0.0, 0.0, 0.0], track.cov)


def test_innovation_stays_consistent_over_noiseless_walk(cfg):
    start, velocity = np.array([3.0, 3.0]), np.array([-0.1, 0.12])
    dt = 0.02
    track = _track(np.concatenate([start, velocity, [0.0, 0.0]]), np.diag([0.09, 0.09, 0.25, 0.25, 0.01, 0.01]))
    bound = chi2.ppf(0.999, 3)
    worst = 0.0
    for t in np.arange(dt, 60.0 + dt / 2, dt):
        truth = np.concatenate([start + velocity * t, velocity, [0.0, 0.0]])
        z = measurement_function(truth, cfg)
        track = ekf_predict(track, dt, cfg.ekf_jerk_psd)
        worst = max(worst, innovation_nis(track, z, cfg))
        track = ekf_update(track, z, cfg)
    assert worst <= bound
    assert np.linalg.norm(track.position - (start + 60.0 * velocity)) <= 0.05


def test_birth_from_measurement(cfg):
    tracks, assoc_id, next_id = associate_and_manage([], np.array([1.0, 4.0, 0.5]), 0.0, cfg, next_id=7)
    assert len(tracks) == 1
    assert tracks[0].track_id == 7 == assoc_id
    assert next_id == 8
    assert tracks[0].position == pytest.approx([1.0, 4.0])
    assert not tracks[0].confirmed


def test_spawn_velocity_along_bearing(cfg):
    track = spawn_track(np.array([3.0, 4.0, 1.0]), 0.0, 1, cfg)
    assert track.velocity == pytest.approx([-0.3, -0.4])
    assert track.state[4:] == pytest.approx([cfg.init_accel, cfg.init_accel])


def test_confirmation_after_consecutive_hits(cfg):
    tracks, next_id = [], 1
    for k in range(25):
        tracks, _, next_id = associate_and_manage(tracks, np.array([1.0, 4.0, 0.0]), 0.01 * k, cfg, next_id)
    assert len(tracks) == 1
    assert tracks[0].confirmed
    assert tracks[0].age == 25
    assert tracks[0].visibility == pytest.approx(1.0)


def test_tentative_track_with_low_visibility_is_dropped(cfg):
    tracks, next_id = [], 1
    tracks, _, next_id = associate_and_manage(tracks, np.array([1.0, 4.0, 0.0]), 0.0, cfg, next_id)
    for k in range(1, 21):
        z = np.array([1.0, 4.0, 0.0]) if k % 3 == 0 else None
        tracks, _, next_id = associate_and_manage(tracks, z, 0.01 * k, cfg, next_id)
    assert tracks == []


def test_track_deleted_after_misses(cfg):
    tracker = Tracker(cfg)
    for k in range(25):
        tracker.step(PositionMeasurement(np.array([1.0, 4.0, 0.0]), 0.01 * k))
    assert tracker.confirmed_tracks
    for k in range(25, 25 + cfg.delete_misses):
        tracker.step(None, time=0.01 * k)
    assert tracker.tracks == []
    assert tracker.deleted == [1]
    assert tracker.ever_confirmed == {1}


def test_far_measurement_spawns_new_track(cfg):
    tracks, _, next_id = associate_and_manage([], np.array([1.0, 4.0, 0.0]), 0.0, cfg, 1)
    tracks, assoc_id, next_id = associate_and_manage(tracks, np.array([-3.0, 8.0, 0.0]), 0.01, cfg, next_id)
    assert [t.track_id for t in tracks] == [1, 2]
    assert assoc_id == 2
    assert tracks[0].consecutive_misses == 1


def test_tracker_rows_and_fused_input(cfg):
    tracker = Tracker(cfg)
    pos = np.array([1.0, 5.0])
    delay, aoa, doppler = bistatic_truth(pos, (0.0, -1.0), cfg)
    fused = FusedMeasurement(delay=delay, aoa=aoa, doppler=doppler, snr=20.0, window_end_time=0.5, n_used=10)
    tracker.step(fused)
    row = tracker.rows[-1]
    assert list(row) == TRACK_COLUMNS
    assert row["time"] == 0.5
    assert (row["x"], row["y"]) == pytest.approx((1.0, 5.0), abs=1e-9)
    assert row["assoc_flag"] == 1


def _replay(cfg, measurements):
    tracker = Tracker(cfg)
    for t, z in measurements:
        tracker.step(None if z is None else PositionMeasurement(z, t), time=t)
    return tracker


def test_tracker_history_is_deterministic(cfg):
    rng = np.random.default_rng(21)
    measurements = []
    for k in range(300):
        t = 0.01 * k
        if k % 7 == 3 or 120 <= k < 145:
            measurements.append((t, None))
        elif k % 50 == 10:
            measurements.append((t, np.array([-3.0, 9.0, 0.0])))
        else:
            measurements.append((t, np.array([1.0 + 0.5 * t, 5.0, -0.4]) + rng.normal(0, [0.3, 0.3, 0.1])))

    first = _replay(cfg, measurements)
    second = _replay(cfg, measurements)
    assert len(first.rows) > 0
    assert pd.DataFrame(first.rows).equals(pd.DataFrame(second.rows))
    assert first.deleted == second.deleted
    assert first.deleted
    assert first.ever_confirmed == second.ever_confirmed


def test_tracker_drops_degenerate_measurement(cfg):
    tracker = Tracker(cfg)
    bad = FusedMeasurement(delay=0.5 * cfg.tx_delay, aoa=0.0, doppler=0.0, snr=20.0, window_end_time=0.1, n_used=3)
    assert tracker.step(bad) == []
    assert tracker.dropped_measurements == 1


def test_tracker_requires_time(cfg):
    with pytest.raises(ValueError):
        Tracker(cfg).step(None)


@pytest.mark.slow
@pytest.mark.parametrize("shape", ["linear", "vshape", "rectangle"])
def test_tracking_accuracy_on_walks(cfg, shape):
    rng = np.random.default_rng({"linear": 1, "vshape": 2, "rectangle": 3}[shape])
    walk = make_walk(shape, speed=1.0, duration=30.0)
    tracker = Tracker(cfg)
    times = np.arange(0.0, 30.0, 0.01)
    positions = walk.position(times)
    velocities = walk.velocity(times)

    for t, pos, vel in zip(times, positions, velocities):
        _, _, doppler = bistatic_truth(pos, vel, cfg)
        z = np.array([
            pos[0] + rng.normal(0, 0.3),
            pos[1] + rng.normal(0, 0.3),
            doppler_bin_to_velocity(doppler, cfg) + rng.normal(0, 0.1),
        ])
        tracker.step(PositionMeasurement(z, float(t)))

    assert tracker.deleted == []
    rows = pd.DataFrame(tracker.rows)
    confirmed = rows[rows["confirmed"] == 1]
    assert set(confirmed["track_id"]) == {1}
    truth = walk.position(confirmed["time"].to_numpy())
    errors = np.hypot(confirmed["x"].to_numpy() - truth[:, 0], confirmed["y"].to_numpy() - truth[:, 1])
    assert np.median(errors) <= 0.5
    assert len(confirmed) >= 0.95 * len(times)
