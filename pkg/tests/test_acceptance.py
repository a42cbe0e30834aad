"""End-to-end acceptance checks for the toolkit.

Each test pins one externally checkable property of the implementation:
closed-form ambiguity statistics against Monte Carlo, exact BER identities,
optimizer contracts, CFAR/MUSIC behavior, and CLI determinism. Scenarios and
seeds are frozen so reruns are bit-for-bit stable.
"""

import json
import time

import numpy as np
import pytest
import yaml

from afdmtk.ambiguity import (
    check_prop1,
    comb_concentration,
    default_delay_axis,
    default_doppler_axis,
    expected_af_closed,
    expected_af_mc,
    grid_local_maxima,
    origin_expected_value,
    sidelobe_flatness,
    t1_peak_locations,
)
from afdmtk.channel import ThreePathModel
from afdmtk.cli import main, runtime_comparison
from afdmtk.comm import (
    ber_ring_approx,
    ber_union_bound,
    qfunc,
    simulate_ber,
    theory_ber_random_channel,
)
from afdmtk.config import parse_config
from afdmtk.constellation import build_qam, pmf_moments, uniform_pmf
from afdmtk.pcs import (
    CommModel,
    evaluate_point,
    mb_pmf,
    optimize_hybrid,
    pareto_sweep,
    score_pmf,
    single_ring_pmf,
)
from afdmtk.sensing import (
    CfarParams,
    PointTarget,
    RadarScenario,
    detection_probability,
    false_alarm_rate,
    mean_sidelobe_db,
    music_spectrum,
    slow_time_snapshots,
    waveform_variant,
)
from afdmtk.waveform import WaveformConfig, modulation_matrix

# the three reference placements: full occupancy, half localized, half interleaved
CFG_A = WaveformConfig(n=64, m=64, s=1, c1=5 / 128, c2=1 / 128, l2=1 / 128)
CFG_B = WaveformConfig(n=64, m=32, s=1, c1=5 / 128, c2=1 / 128, l2=1 / 128)
CFG_C = WaveformConfig(n=64, m=32, s=2, c1=5 / 128, c2=1 / 128, l2=1 / 32)
CONFIGS = {"full": CFG_A, "half_localized": CFG_B, "half_interleaved": CFG_C}

# larger frame used for the BER and sensing scenarios
CFG_BIG = WaveformConfig(n=128, m=64, s=1, c1=5 / 256, c2=1 / 256, l2=1 / 256)

Q64 = build_qam(64)
P64 = uniform_pmf(Q64)
MU4_64 = pmf_moments(Q64, P64)[2]


# --- expected ambiguity surface ---------------------------------------------


@pytest.mark.parametrize("name", list(CONFIGS))
def test_closed_form_af_matches_monte_carlo(name):
    cfg = CONFIGS[name]
    taus = default_delay_axis(cfg.n)
    nus = default_doppler_axis(cfg.n)
    t0 = time.time()
    emp = expected_af_mc(cfg, Q64, P64, taus, nus, trials=2000, seed=0)
    closed = expected_af_closed(cfg, MU4_64, taus, nus)[0]
    elapsed = time.time() - t0
    rel_rms = np.sqrt(np.mean((emp - closed) ** 2)) / np.sqrt(np.mean(closed**2))
    assert rel_rms <= 0.05
    assert elapsed <= 120.0


def test_origin_value_constant_modulus_is_deterministic():
    # constant-modulus symbols give |chi(0,0)|^2 = M^2 on every realization
    qpsk = build_qam(4)
    u = modulation_matrix(CFG_A)
    rng = np.random.default_rng(0)
    for _ in range(10):
        s = u @ qpsk.points[rng.integers(0, 4, CFG_A.m)]
        val = np.abs(np.vdot(s, s)) ** 2
        assert np.isclose(val, CFG_A.m**2, rtol=1e-12)


def test_origin_value_64qam_monte_carlo_mean():
    # E|chi(0,0)|^2 = M^2 + (mu4 - 1) M, checked within 3 standard errors
    u = modulation_matrix(CFG_A)
    rng = np.random.default_rng(1)
    m = CFG_A.m
    vals = np.empty(10_000)
    for t in range(vals.size):
        s = u @ Q64.points[rng.integers(0, 64, m)]
        vals[t] = np.abs(np.vdot(s, s)) ** 2
    expect = origin_expected_value(m, 1.3810)
    assert np.isclose(expect, m**2 + 0.3810 * m)
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - expect) < 3 * se


def test_kurtosis_insensitivity_off_the_comb_slices():
    # delta = c2 S^2 - l2 in {0, 1/2} keeps the mu4-sensitive term on the
    # tau = kN/S slices; an irrational offset voids the precondition
    for l2 in (1 / 128, 1 / 128 - 0.5):
        rep = check_prop1(WaveformConfig(n=64, m=32, s=1, c1=5 / 128, c2=1 / 128, l2=l2))
        assert rep.condition_met
        assert rep.passed
    bad = check_prop1(
        WaveformConfig(n=64, m=32, s=1, c1=5 / 128, c2=1 / 128, l2=1 / 128 - np.pi / 2)
    )
    assert not bad.condition_met
    assert not bad.passed


@pytest.mark.parametrize("name", list(CONFIGS))
def test_main_lobe_grid_maxima_match_enumeration(name):
    cfg = CONFIGS[name]
    taus = default_delay_axis(cfg.n)
    nus = default_doppler_axis(cfg.n)
    _, t1, _, _ = expected_af_closed(cfg, MU4_64, taus, nus)
    hits = grid_local_maxima(t1)
    found = {(int(taus[i]), int(nus[j])) for i, j in hits}
    assert found == set(t1_peak_locations(cfg))


def test_sidelobe_pedestal_flat_at_full_occupancy():
    assert sidelobe_flatness(CFG_A, MU4_64) <= 0.02


def test_interleaved_energy_concentrates_on_comb():
    assert comb_concentration(CFG_C, MU4_64) < 1e-9


# --- BER closed forms --------------------------------------------------------


def test_qpsk_awgn_bounds_reduce_to_q_functions():
    qpsk = build_qam(4)
    p = uniform_pmf(qpsk)
    for snr_db in (0.0, 4.0, 8.0, 12.0):
        es_n0 = 10 ** (snr_db / 10)
        # Gray QPSK: exact BER = Q(sqrt(2 Eb/N0)) with Eb/N0 = Es/(2 N0)
        ring = ber_ring_approx(qpsk, p, 1.0, 1 / es_n0)
        assert abs(ring - qfunc(np.sqrt(es_n0))) <= 1e-12
        union = ber_union_bound(qpsk, p, 1.0, 1 / es_n0)
        assert abs(union - (qfunc(np.sqrt(es_n0)) + qfunc(np.sqrt(2 * es_n0)))) <= 1e-12


@pytest.mark.xfail(
    strict=True,
    reason="non-nearest pairs (mostly diagonal neighbors at sqrt(2) d_min) still "
    "contribute ~11% of the union bound at Es/N0 = 20 dB; the 2% level is "
    "first reached near 22.5 dB",
)
def test_64qam_ring_form_within_2pct_of_union_at_20db():
    n0 = 10 ** (-20 / 10)
    ring = ber_ring_approx(Q64, P64, 1.0, n0)
    union = ber_union_bound(Q64, P64, 1.0, n0)
    assert abs(union - ring) / union <= 0.02


def test_64qam_ring_form_converges_to_union_at_high_snr():
    n0 = 10 ** (-24 / 10)
    ring = ber_ring_approx(Q64, P64, 1.0, n0)
    union = ber_union_bound(Q64, P64, 1.0, n0)
    assert abs(union - ring) / union <= 0.02


def test_simulated_ber_tracks_theory_within_half_db():
    # horizontal gap between the simulated and closed-form curves at BER 1e-3
    qpsk = build_qam(4)
    p = uniform_pmf(qpsk)
    model = ThreePathModel()
    snrs = np.array([18.0, 19.0, 20.0])
    theory = np.array(
        [theory_ber_random_channel(CFG_BIG, model, qpsk, p, s, n_channels=6000, seed=2)
         for s in snrs]
    )
    sim, errs = [], []
    for s in snrs:
        b, ne = simulate_ber(CFG_BIG, model, qpsk, p, s, 600_000, seed=2)
        sim.append(b)
        errs.append(ne)
    sim = np.array(sim)
    assert min(errs) >= 100
    # both curves cross 1e-3 inside the measured bracket
    assert theory[0] > 1e-3 > theory[-1]
    assert sim[0] > 1e-3 > sim[-1]

    def snr_at_1e3(bers):
        return float(np.interp(-3.0, np.log10(bers)[::-1], snrs[::-1]))

    assert abs(snr_at_1e3(theory) - snr_at_1e3(sim)) <= 0.5


def test_shaped_pmfs_strictly_reduce_simulated_ber():
    model = ThreePathModel()
    n_bits = 600_000  # 1e5 symbols at 6 bits each
    bers = []
    for lam in (0.0, 0.57, 1.28, 2.37):
        p = mb_pmf(Q64, -lam, 0.0)
        ber, _ = simulate_ber(CFG_BIG, model, Q64, p, 16.0, n_bits, seed=11)
        bers.append(ber)
    assert all(a > b for a, b in zip(bers, bers[1:]))


# --- shaping optimizer contract ----------------------------------------------

PCS_CFG = WaveformConfig(n=32, m=16, s=1, c1=5 / 64, c2=1 / 64, l2=1 / 64)


def test_refinement_never_loses_to_coarse_grid():
    for seed in (0, 1, 2):
        comm = CommModel(cfg=PCS_CFG, snr_db=14.0, n_channels=10, seed=seed)
        grid_best = min(
            evaluate_point(Q64, comm, w, s).objective
            for w in (0.25, 0.5, 0.75, 1.0)
            for s in (0.7, 0.85, 1.0, 1.15)
        )
        assert optimize_hybrid(Q64, comm, maxfev=60).objective <= grid_best + 1e-12


def test_pure_comm_weight_beats_uniform_throughput():
    comm = CommModel(cfg=PCS_CFG, snr_db=14.0, n_channels=10, seed=1)
    pt = optimize_hybrid(Q64, comm, fix_omega=1.0, maxfev=60)
    _, uniform_thr = score_pmf(Q64, P64, comm)
    assert pt.throughput >= uniform_thr - 1e-12


def test_sensing_endpoint_hits_single_ring_kurtosis_floor():
    # the limiting sensing-only operating point is a deterministic single ring
    mu4 = pmf_moments(Q64, single_ring_pmf(Q64))[2]
    assert abs(mu4 - 1.0) <= 1e-6


def test_pareto_frontier_monotone_after_dominance_filter():
    comm = CommModel(cfg=PCS_CFG, snr_db=14.0, n_channels=10, seed=1)
    front = pareto_sweep(Q64, comm, omegas=(0.25, 0.5, 0.75, 1.0), maxfev=40)
    assert front
    front = sorted(front, key=lambda q: q.mu4)
    thr = [q.throughput for q in front]
    assert all(a <= b + 1e-12 for a, b in zip(thr, thr[1:]))


def test_closed_form_objective_at_least_10x_faster_than_mc():
    cfg = parse_config(
        {
            "waveform": {"n": 64, "m": 32, "s": 1, "c1": 5 / 128, "c2": 1 / 128,
                         "l2": 1 / 128},
            "constellation": {"order": 64},
            "seed": 0,
        }
    )
    res = runtime_comparison(cfg, repeats=20, mc_frames=3000)
    assert res["speedup"] >= 10.0


# --- CFAR detection -----------------------------------------------------------


def test_cfar_false_alarm_rate_calibrated():
    cfg = waveform_variant("daft-s-afdm", 128, 64, c1=5 / 256, c2=1 / 256)
    params = CfarParams(p_fa=1e-3)
    rate, cells = false_alarm_rate(cfg, Q64, P64, params, 10_000, seed=0)
    assert cells >= 10_000
    sd = np.sqrt(params.p_fa * (1 - params.p_fa) / cells)
    assert abs(rate - params.p_fa) <= 3 * sd


def test_single_target_detection_monotone_in_snr():
    cfg = waveform_variant("daft-s-afdm", 128, 64, c1=5 / 256, c2=1 / 256)
    params = CfarParams(n_train=8, n_guard=2, p_fa=1e-3)
    target = [PointTarget(20, 5, 1.0)]
    pds = [
        detection_probability(cfg, Q64, P64, target, snr, params, trials=1000, seed=0)
        for snr in (-20.0, -16.0, -12.0, -8.0, -4.0, 0.0)
    ]
    assert all(a <= b for a, b in zip(pds, pds[1:]))
    assert pds[-1] >= 0.99


def test_chirped_waveforms_resolve_masked_weak_target():
    # strong scatterer 9 delay taps from a weak one at the same Doppler:
    # without chirping, the strong target's delay ridge sits inside the
    # delay-strip training window and raises the threshold over the weak cell
    params = CfarParams(n_train=4, n_guard=2, p_fa=1e-3, window="delay")
    targets = [PointTarget(20, 5, 1.0), PointTarget(29, 5, 0.6)]
    pd = {}
    for name in ("ofdm", "dft-s-ofdm", "afdm", "daft-s-afdm"):
        cfg = waveform_variant(name, 128, 64, c1=5 / 256, c2=1 / 256)
        pd[name] = detection_probability(
            cfg, Q64, P64, targets, 14.0, params, trials=1000, seed=0
        )
    chirped = min(pd["afdm"], pd["daft-s-afdm"])
    unchirped = max(pd["ofdm"], pd["dft-s-ofdm"])
    assert chirped >= unchirped + 0.05


# --- MUSIC velocity estimation -------------------------------------------------

SCEN = RadarScenario()
SENSE_CFG = waveform_variant("daft-s-afdm", 128, 64, c1=5 / 256, c2=1 / 256)
VGRID = np.linspace(0.0, 60.0, 241)
TRUE_V = 20.0


def _music_pmfs():
    from afdmtk.pcs import shaped_pmf

    return {
        "sensing": single_ring_pmf(Q64),
        "balanced": shaped_pmf(Q64, 0.5, 1.0)[0],
        "comm": P64,
    }


def test_music_noise_free_peak_within_one_cell():
    cell = VGRID[1] - VGRID[0]
    for p in _music_pmfs().values():
        snaps = slow_time_snapshots(SENSE_CFG, Q64, p, SCEN, TRUE_V, delay=20,
                                    snr_db=None, seed=3)
        db = music_spectrum(snaps, SCEN, VGRID)
        assert abs(VGRID[np.argmax(db)] - TRUE_V) <= cell


def _mean_sidelobes_at_20db():
    levels = {}
    for name, p in _music_pmfs().items():
        vals = []
        for seed in range(8):
            snaps = slow_time_snapshots(SENSE_CFG, Q64, p, SCEN, TRUE_V, delay=20,
                                        snr_db=20.0, seed=seed)
            db = music_spectrum(snaps, SCEN, VGRID)
            vals.append(mean_sidelobe_db(db, int(np.argmax(db)), exclusion=8))
        levels[name] = float(np.mean(vals))
    return levels


def test_low_kurtosis_pmf_lowers_music_sidelobes():
    levels = _mean_sidelobes_at_20db()
    # constant-modulus shaping buys at least 1.5 dB of sidelobe suppression
    assert levels["sensing"] <= levels["comm"] - 1.5
    # and the average level is nondecreasing in the kurtosis
    mu4s = {k: pmf_moments(Q64, p)[2] for k, p in _music_pmfs().items()}
    order = sorted(levels, key=lambda k: mu4s[k])
    assert [levels[k] for k in order] == sorted(levels.values())


# --- determinism ---------------------------------------------------------------


def test_cli_selftest_passes(tmp_path):
    assert main(["selftest", "--out", str(tmp_path)]) == 0


def test_fixed_seed_reruns_are_byte_identical(tmp_path):
    cfg = {
        "waveform": {"n": 32, "m": 16, "s": 1, "c1": 5 / 64, "c2": 1 / 64, "l2": 1 / 64},
        "constellation": {"order": 64},
        "seed": 7,
        "af": {"trials": 300},
    }
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    outs = []
    for sub in ("r1", "r2"):
        out = tmp_path / sub
        assert main(["af", "--config", str(cfg_path), "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("af_surfaces.csv", "af_manifest.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    man = json.loads((outs[0] / "af_manifest.json").read_text())
    assert "timestamp" not in man


# --- figure rendering (secondary component, skipped when not installed) --------


def test_plot_renderers_cover_all_figure_families(tmp_path):
    plotkit = pytest.importorskip("plotkit")
    from pathlib import Path

    data_dir = Path(plotkit.__file__).resolve().parent / "data" / "default_run"
    if not data_dir.is_dir():
        pytest.skip("shipped default-run CSVs not present")
    written = plotkit.render_all(data_dir, tmp_path)
    assert len({w.family for w in written}) == 7
    # dropping a required column must raise, not silently render
    broken = tmp_path / "broken"
    broken.mkdir()
    src = (data_dir / "ber_sweep.csv").read_text().splitlines()
    rows = [",".join(line.split(",")[1:]) for line in src]  # drop snr_db
    (broken / "ber_sweep.csv").write_text("\n".join(rows) + "\n")
    with pytest.raises(plotkit.SchemaError):
        plotkit.render_family("ber", broken, tmp_path)
