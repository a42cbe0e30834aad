import numpy as np
import pytest

from afdmtk.ambiguity import empirical_af
from afdmtk.constellation import build_qam, uniform_pmf
from afdmtk.pcs import single_ring_pmf
from afdmtk.sensing import (
    CfarParams,
    PointTarget,
    RadarScenario,
    ca_cfar,
    cfar_detections,
    detection_probability,
    echo_frame,
    false_alarm_rate,
    mean_sidelobe_db,
    music_spectrum,
    music_velocity,
    peak_sidelobe_db,
    random_frame,
    range_doppler_map,
    slow_time_snapshots,
    waveform_variant,
)

C64 = build_qam(64)
PU = uniform_pmf(C64)


def _frame(cfg, seed=0):
    return random_frame(cfg, C64, PU, np.random.default_rng(seed))


def test_variant_factory():
    ofdm = waveform_variant("ofdm", 64, 32, c1=5 / 128, c2=1 / 128)
    assert ofdm.c1 == 0 and not ofdm.spread
    afdm = waveform_variant("afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    assert afdm.c1 == 5 / 128 and not afdm.spread
    full = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    assert full.spread and full.delta_lambda == 0
    with pytest.raises(ValueError):
        waveform_variant("cdma", 64, 32, c1=0, c2=0)


def test_map_cell_matches_ambiguity_surface():
    # receive-side matched output at offset (l, k) from the true target cell
    # equals the transmit-side AF sample at that offset, noise-free
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    tx = _frame(cfg)
    rx = echo_frame(tx, [PointTarget(5, 7)], 0.0, np.random.default_rng(1))
    z = range_doppler_map(rx, tx)
    # z[l, k] = |chi_tx(l - 5, k - 7)|^2 up to a unit-modulus phase
    for l, k in ((5, 7), (6, 7), (5, 9), (12, 40)):
        chi = empirical_af(tx, l - 5, float((k - 7) % 64))
        assert np.isclose(z[l, k], np.abs(chi) ** 2, rtol=1e-9, atol=1e-9)


def test_map_peak_is_frame_energy_squared():
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    tx = _frame(cfg)
    rx = echo_frame(tx, [PointTarget(9, 3)], 0.0, np.random.default_rng(1))
    z = range_doppler_map(rx, tx)
    energy = np.sum(np.abs(tx) ** 2)
    assert np.isclose(z[9, 3], energy**2, rtol=1e-10)
    assert np.unravel_index(z.argmax(), z.shape) == (9, 3)


def test_cfar_constant_map_silent():
    params = CfarParams(n_train=4, n_guard=1, p_fa=0.01)
    assert not ca_cfar(np.ones((32, 32)), params).any()


def test_cfar_spike_detected_once():
    params = CfarParams()
    z = np.ones((64, 64))
    z[10, 20] = 100.0
    dets = cfar_detections(z, params)
    assert dets == [(10, 20, 100.0)]


def test_cfar_window_too_large():
    with pytest.raises(ValueError):
        ca_cfar(np.ones((8, 8)), CfarParams(n_train=8, n_guard=2))


def test_cfar_false_alarm_calibration():
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    params = CfarParams(p_fa=1e-2)
    rate, cells = false_alarm_rate(cfg, C64, PU, params, 8000, seed=4)
    sd = np.sqrt(params.p_fa * (1 - params.p_fa) / cells)
    assert abs(rate - params.p_fa) < 3 * sd


def test_delay_window_variant():
    params = CfarParams(n_train=4, n_guard=2, window="delay")
    assert params.n_training_cells == 8
    z = np.ones((32, 32))
    z[5, 5] = 50.0
    assert cfar_detections(z, params) == [(5, 5, 50.0)]


def test_detection_probability_increases_with_snr():
    cfg = waveform_variant("daft-s-afdm", 64, 64, c1=5 / 128, c2=1 / 128)
    params = CfarParams()
    tgt = [PointTarget(10, 3)]
    lo = detection_probability(cfg, C64, PU, tgt, -18.0, params, trials=60, seed=1)
    hi = detection_probability(cfg, C64, PU, tgt, -2.0, params, trials=60, seed=1)
    assert hi > lo
    assert hi >= 0.95


def test_scenario_unit_conversions():
    scen = RadarScenario()
    assert scen.frame_duration == pytest.approx(1.28e-6)
    # 20 m/s at 77 GHz: f_d ~ 10.27 kHz
    assert scen.phase_per_frame(20.0) == pytest.approx(0.08257, rel=1e-3)
    assert scen.range_to_delay_tap(30.0) == 20
    assert scen.max_unambiguous_velocity > 100


def test_music_noise_free_peak_exact():
    scen = RadarScenario(n=64, n_frames=24)
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    vgrid = np.linspace(0, 60, 121)
    snaps = slow_time_snapshots(cfg, C64, PU, scen, 20.0, delay=5, snr_db=None, seed=2)
    db = music_spectrum(snaps, scen, vgrid)
    assert db.max() == 0.0  # normalized
    assert abs(vgrid[np.argmax(db)] - 20.0) <= (vgrid[1] - vgrid[0])


def test_music_velocity_end_to_end():
    scen = RadarScenario(n=64, n_frames=16)
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    phi = scen.phase_per_frame(25.0)
    idx = np.arange(64)
    tx = np.stack([_frame(cfg, seed=f) for f in range(16)])
    rx = np.stack([np.exp(1j * phi * f) * tx[f][(idx - 7) % 64] for f in range(16)])
    vgrid = np.linspace(0, 60, 121)
    db = music_velocity(rx, tx, 7, scen, vgrid)
    assert abs(vgrid[np.argmax(db)] - 25.0) <= (vgrid[1] - vgrid[0])


def test_music_rejects_degenerate_input():
    scen = RadarScenario(n=64, n_frames=4)
    with pytest.raises(ValueError):
        music_spectrum(np.ones(4, dtype=complex), scen, np.linspace(0, 10, 5), n_sources=3)
    with pytest.raises(ValueError):
        music_velocity(np.ones((1, 64)), np.ones((1, 64)), 0, scen, np.linspace(0, 10, 5))


def test_sidelobe_helpers():
    db = np.array([-30.0, -10.0, 0.0, -12.0, -25.0])
    # exclusion 1 removes indices 1..3, leaving -30 and -25
    assert peak_sidelobe_db(db, 2, 1) == -25.0
    assert mean_sidelobe_db(db, 2, 1) < peak_sidelobe_db(db, 2, 1) + 1e-9
    assert peak_sidelobe_db(db, 2, 0) == -10.0
    with pytest.raises(ValueError):
        peak_sidelobe_db(db, 2, 10)


def test_low_kurtosis_pmf_cleans_music_sidelobes():
    scen = RadarScenario(n=64, n_frames=24)
    cfg = waveform_variant("daft-s-afdm", 64, 32, c1=5 / 128, c2=1 / 128)
    vgrid = np.linspace(0, 60, 121)
    levels = {}
    for name, p in (("sensing", single_ring_pmf(C64)), ("comm", PU)):
        vals = []
        for seed in range(4):
            snaps = slow_time_snapshots(cfg, C64, p, scen, 20.0, delay=5,
                                        snr_db=20.0, seed=seed)
            db = music_spectrum(snaps, scen, vgrid)
            vals.append(mean_sidelobe_db(db, int(np.argmax(db)), exclusion=6))
        levels[name] = np.mean(vals)
    assert levels["sensing"] < levels["comm"]
