import numpy as np
import pytest

from afdmtk.constellation import build_qam, pmf_moments, uniform_pmf
from afdmtk.pcs import (
    CommModel,
    LAMBDA1_TOL,
    evaluate_point,
    lambda2_from_weight,
    mb_pmf,
    objective_j,
    optimize_hybrid,
    pareto_sweep,
    score_pmf,
    shaped_pmf,
    single_ring_pmf,
    solve_lambda1,
)
from afdmtk.waveform import WaveformConfig

CFG = WaveformConfig(n=32, m=16, s=1, c1=5 / 64, c2=1 / 64, l2=1 / 64)
COMM = CommModel(cfg=CFG, snr_db=14.0, n_channels=10, seed=1)


def test_mb_pmf_uniform_at_zero():
    c = build_qam(64)
    assert np.allclose(mb_pmf(c, 0.0, 0.0), uniform_pmf(c))


def test_mb_pmf_extreme_lambda_guarded():
    c = build_qam(64)
    p = mb_pmf(c, -5000.0, 0.0)
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1.0) < 1e-12
    # mass collapses onto the innermost ring
    inner = c.ring_members(0)
    assert p[inner].sum() > 0.999


def test_solve_lambda1_hits_power_target():
    c = build_qam(64)
    for lam2 in (0.0, -0.5, -2.0):
        for target in (0.6, 1.0, 1.5):
            lam1 = solve_lambda1(c, lam2, target)
            got = pmf_moments(c, mb_pmf(c, lam1, lam2))[0]
            assert abs(got - target) <= LAMBDA1_TOL


def test_solve_lambda1_rejects_unreachable_power():
    c = build_qam(64)
    with pytest.raises(ValueError):
        solve_lambda1(c, 0.0, 3.0)  # above the outermost ring energy


def test_lambda2_weight_mapping():
    assert lambda2_from_weight(1.0) == 0.0
    assert lambda2_from_weight(0.5) == pytest.approx(-np.log(2.0))
    with pytest.raises(ValueError):
        lambda2_from_weight(0.0)


def test_shaping_monotone_in_weight():
    c = build_qam(64)
    mu4s = [pmf_moments(c, shaped_pmf(c, w, 1.0)[0])[2] for w in (0.25, 0.5, 0.75, 1.0)]
    assert all(a < b for a, b in zip(mu4s, mu4s[1:]))


def test_single_ring_pmf_kurtosis_floor():
    c = build_qam(64)
    p = single_ring_pmf(c)
    sigma2, _, mu4, entropy = pmf_moments(c, p)
    assert abs(mu4 - 1.0) < 1e-12
    assert entropy > 0


def test_objective_consistent_with_score():
    c = build_qam(64)
    p = shaped_pmf(c, 0.5, 1.0)[0]
    ber, thr = score_pmf(c, p, COMM)
    mu4 = pmf_moments(c, p)[2]
    j = objective_j(c, p, COMM, 0.5)
    assert np.isclose(j, -0.5 * thr + 0.5 * mu4)
    assert 0 <= ber <= 1


def test_evaluate_point_objective_recomputable():
    c = build_qam(64)
    pt = evaluate_point(c, COMM, 0.6, 1.0)
    assert np.isclose(pt.objective, -pt.omega * pt.throughput + (1 - pt.omega) * pt.mu4)
    p = mb_pmf(c, pt.lam1, pt.lam2)
    assert abs(pmf_moments(c, p)[0] - pt.sigma_x2) < 1e-9


def test_hybrid_refinement_never_worse_than_grid():
    c = build_qam(64)
    for seed in (0, 1, 2):
        comm = CommModel(cfg=CFG, snr_db=14.0, n_channels=8, seed=seed)
        grid_best = min(
            evaluate_point(c, comm, w, s).objective
            for w in (0.25, 0.5, 0.75, 1.0)
            for s in (0.7, 0.85, 1.0, 1.15)
        )
        pt = optimize_hybrid(c, comm, maxfev=40)
        assert pt.objective <= grid_best + 1e-12


def test_pareto_front_tradeoff_shape():
    c = build_qam(64)
    front = pareto_sweep(c, COMM, omegas=(0.3, 0.6, 1.0), maxfev=25)
    assert front
    front = sorted(front, key=lambda q: q.mu4)
    thr = [q.throughput for q in front]
    mu4 = [q.mu4 for q in front]
    # nondominated: throughput increases along increasing mu4
    assert all(a <= b + 1e-12 for a, b in zip(thr, thr[1:]))
    assert all(a <= b + 1e-12 for a, b in zip(mu4, mu4[1:]))


def test_fixed_omega_stays_fixed():
    c = build_qam(64)
    pt = optimize_hybrid(c, COMM, fix_omega=0.4, maxfev=20)
    assert pt.omega == 0.4
