"""Command-line experiment runner: CSV/JSON artifacts with provenance."""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .ambiguity import (
    PERIODIC,
    default_delay_axis,
    default_doppler_axis,
    expected_af_closed,
    expected_af_mc,
)
from .channel import ThreePathModel
from .comm import simulate_ber, theory_ber_random_channel
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .constellation import pmf_moments, save_pmf_csv, uniform_pmf
from .pcs import CommModel, pareto_sweep, save_pareto_csv, score_pmf, single_ring_pmf, shaped_pmf
from .sensing import (
    CfarParams,
    PointTarget,
    RadarScenario,
    detection_probability,
    mean_sidelobe_db,
    music_spectrum,
    slow_time_snapshots,
    waveform_variant,
)

EXPERIMENTS = ("af", "slices", "ber", "pcs", "cfar", "music", "runtime", "selftest")


class NumericalFailure(Exception):
    """Raised when an experiment produces non-finite or inconsistent results."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _check_finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite values in {what}")


def run_af(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("af", {})
    trials = int(blk.get("trials", 2000))
    mode = blk.get("mode", PERIODIC)
    c = cfg.constellation()
    p = cfg.pmf(c)
    mu4 = pmf_moments(c, p)[2]
    taus = default_delay_axis(cfg.waveform.n)
    nus = default_doppler_axis(cfg.waveform.n)
    emp = expected_af_mc(cfg.waveform, c, p, taus, nus, mode=mode, trials=trials, seed=cfg.seed)
    closed, t1, t2, t3 = expected_af_closed(cfg.waveform, mu4, taus, nus, mode=mode)
    _check_finite(emp, "empirical AF")
    _check_finite(closed, "closed-form AF")
    rows = []
    for name, surf in (("mc", emp), ("total", closed), ("t1", t1), ("t2", t2), ("t3", t3)):
        for i, tau in enumerate(taus):
            for j, nu in enumerate(nus):
                rows.append((tau, nu, surf[i, j], name))
    write_csv(os.path.join(out, "af_surfaces.csv"), ("tau", "nu", "value", "term"), rows)
    scale = np.sqrt(np.mean(closed**2))
    rel_rms = float(np.sqrt(np.mean((emp - closed) ** 2)) / scale)
    return {"trials": trials, "mode": mode, "rel_rms": rel_rms, "mu4": mu4}


def run_slices(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("slices", {})
    mode = blk.get("mode", PERIODIC)
    c = cfg.constellation()
    p = cfg.pmf(c)
    mu4 = pmf_moments(c, p)[2]
    taus = default_delay_axis(cfg.waveform.n)
    nus = default_doppler_axis(cfg.waveform.n)
    closed, t1, t2, t3 = expected_af_closed(cfg.waveform, mu4, taus, nus, mode=mode)
    _check_finite(closed, "closed-form AF")
    j0 = int(np.flatnonzero(nus == 0)[0])
    i0 = int(np.flatnonzero(taus == 0)[0])
    rows = []
    for name, surf in (("total", closed), ("t1", t1), ("t2", t2), ("t3", t3)):
        for i, tau in enumerate(taus):
            rows.append((tau, 0, surf[i, j0], name))
        for j, nu in enumerate(nus):
            rows.append((0, nu, surf[i0, j], name))
    write_csv(os.path.join(out, "slices_closed.csv"), ("tau", "nu", "value", "term"), rows)
    return {"mode": mode, "mu4": mu4}


def run_ber(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("ber", {})
    snrs = [float(s) for s in blk.get("snr_db", (12, 16, 20, 24))]
    n_bits = int(blk.get("n_bits", 60000))
    n_channels = int(blk.get("n_channels", 100))
    c = cfg.constellation()
    p = cfg.pmf(c)
    rows = []
    for snr in snrs:
        ring = theory_ber_random_channel(
            cfg.waveform, cfg.channel, c, p, snr, n_channels=n_channels, seed=cfg.seed
        )
        union = theory_ber_random_channel(
            cfg.waveform, cfg.channel, c, p, snr, n_channels=n_channels, seed=cfg.seed,
            form="union",
        )
        sim, n_err = simulate_ber(cfg.waveform, cfg.channel, c, p, snr, n_bits, seed=cfg.seed)
        _check_finite([ring, union, sim], "BER results")
        rows.append((snr, ring, union, sim, n_err))
    write_csv(
        os.path.join(out, "ber_sweep.csv"),
        ("snr_db", "ber_theory_ring", "ber_theory_union", "ber_sim", "n_errors"),
        rows,
    )
    return {"snr_db": snrs, "n_bits": n_bits}


def run_pcs(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("pcs", {})
    snr = float(blk.get("snr_db", 12.0))
    omegas = [float(w) for w in blk.get("omegas", (0.2, 0.4, 0.6, 0.8, 1.0))]
    n_channels = int(blk.get("n_channels", 30))
    maxfev = int(blk.get("maxfev", 60))
    c = cfg.constellation()
    comm = CommModel(cfg=cfg.waveform, snr_db=snr, model=cfg.channel,
                     n_channels=n_channels, seed=cfg.seed)
    front = pareto_sweep(c, comm, omegas, maxfev=maxfev)
    if not front:
        raise NumericalFailure("empty Pareto front")
    save_pareto_csv(os.path.join(out, "pcs_pareto.csv"), front)
    # representative operating points: comm-centric, balanced, sensing-limit
    save_pmf_csv(os.path.join(out, "pcs_pmf_comm.csv"), c, uniform_pmf(c))
    save_pmf_csv(os.path.join(out, "pcs_pmf_balanced.csv"), c, shaped_pmf(c, 0.5, 1.0)[0])
    save_pmf_csv(os.path.join(out, "pcs_pmf_sensing.csv"), c, single_ring_pmf(c))
    return {"snr_db": snr, "omegas": omegas, "front_size": len(front)}


def _cfar_setup(blk: dict):
    params = CfarParams(
        n_train=int(blk.get("n_train", 8)),
        n_guard=int(blk.get("n_guard", 2)),
        p_fa=float(blk.get("p_fa", 1e-3)),
        window=str(blk.get("window", "both")),
    )
    targets = [
        PointTarget(int(t["delay"]), int(t["doppler"]), complex(t.get("amplitude", 1.0)))
        for t in blk.get("targets", ({"delay": 20, "doppler": 5},))
    ]
    return params, targets


def run_cfar(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("cfar", {})
    snrs = [float(s) for s in blk.get("snr_db", (-20, -16, -12, -8, -4, 0))]
    trials = int(blk.get("trials", 200))
    variants = blk.get("variants", ("ofdm", "afdm", "dft-s-ofdm", "daft-s-afdm"))
    params, targets = _cfar_setup(blk)
    c = cfg.constellation()
    p = cfg.pmf(c)
    wf = cfg.waveform
    rows = []
    for name in variants:
        vcfg = waveform_variant(name, wf.n, wf.m, c1=wf.c1, c2=wf.c2, l2=wf.l2)
        for snr in snrs:
            pd = detection_probability(vcfg, c, p, targets, snr, params, trials, seed=cfg.seed)
            rows.append((name, snr, pd, trials))
    write_csv(os.path.join(out, "cfar_pd.csv"), ("variant", "snr_db", "pd", "trials"), rows)
    return {"snr_db": snrs, "trials": trials, "variants": list(variants)}


def run_music(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("music", {})
    scen = RadarScenario(
        carrier_hz=float(blk.get("carrier_hz", 77.0e9)),
        bandwidth_hz=float(blk.get("bandwidth_hz", 100.0e6)),
        n=cfg.waveform.n,
        n_frames=int(blk.get("n_frames", 32)),
    )
    velocity = float(blk.get("velocity", 20.0))
    delay = int(blk.get("delay", 20))
    snr = blk.get("snr_db", 20.0)
    snr = None if snr is None else float(snr)
    vgrid = np.linspace(
        float(blk.get("v_min", 0.0)), float(blk.get("v_max", 60.0)), int(blk.get("v_points", 241))
    )
    c = cfg.constellation()
    pmfs = {
        "comm": uniform_pmf(c),
        "balanced": shaped_pmf(c, 0.5, 1.0)[0],
        "sensing": single_ring_pmf(c),
    }
    summary = {}
    for label, p in pmfs.items():
        snaps = slow_time_snapshots(cfg.waveform, c, p, scen, velocity, delay, snr, seed=cfg.seed)
        db = music_spectrum(snaps, scen, vgrid)
        _check_finite(db, f"MUSIC spectrum ({label})")
        write_csv(
            os.path.join(out, f"music_{label}.csv"),
            ("velocity", "power_db"),
            zip(vgrid, db),
        )
        pk = int(np.argmax(db))
        summary[label] = {
            "peak_velocity": float(vgrid[pk]),
            "mean_sidelobe_db": mean_sidelobe_db(db, pk, exclusion=8),
        }
    return {"velocity": velocity, "snr_db": snr, "pmfs": summary}


def runtime_comparison(cfg: ExperimentConfig, repeats: int = 20, mc_frames: int = 3000) -> dict:
    """Median wall time of a closed-form objective evaluation vs an MC one."""
    c = cfg.constellation()
    p = cfg.pmf(c)
    comm = CommModel(cfg=cfg.waveform, snr_db=16.0, model=cfg.channel,
                     n_channels=20, seed=cfg.seed)
    _, _, _, entropy = pmf_moments(c, p)
    n_bits = mc_frames * cfg.waveform.m * c.bits_per_symbol

    closed_times, mc_times = [], []
    for _ in range(repeats):
        t0 = time.perf_counter()
        score_pmf(c, p, comm)
        closed_times.append(time.perf_counter() - t0)
    for _ in range(repeats):
        t0 = time.perf_counter()
        ber, _ = simulate_ber(cfg.waveform, cfg.channel, c, p, 16.0, n_bits, seed=cfg.seed)
        entropy * (1.0 - ber)
        mc_times.append(time.perf_counter() - t0)
    closed = float(np.median(closed_times))
    mc = float(np.median(mc_times))
    return {
        "closed_median_s": closed,
        "mc_median_s": mc,
        "mc_frames": mc_frames,
        "repeats": repeats,
        "speedup": mc / closed,
    }


def run_runtime(cfg: ExperimentConfig, out: str) -> dict:
    blk = cfg.blocks.get("runtime", {})
    res = runtime_comparison(
        cfg, repeats=int(blk.get("repeats", 20)), mc_frames=int(blk.get("mc_frames", 3000))
    )
    write_csv(
        os.path.join(out, "runtime_comparison.csv"),
        ("method", "median_seconds", "repeats"),
        [("closed_form", res["closed_median_s"], res["repeats"]),
         ("monte_carlo", res["mc_median_s"], res["repeats"])],
    )
    return res


def run_selftest(cfg: ExperimentConfig, out: str) -> dict:
    """Fast invariant sweep; raises NumericalFailure on the first violation."""
    from .ambiguity import expected_af_terms_exact, origin_expected_value
    from .comm import ber_ring_approx, ber_union_bound, qfunc
    from .constellation import build_qam
    from .waveform import WaveformConfig, modulation_matrix

    checks = {}

    wf = WaveformConfig(n=16, m=8, s=2, c1=5 / 32, c2=1 / 32, l1=0.0, l2=1 / 8)
    u = modulation_matrix(wf)
    checks["unitary_columns"] = bool(
        np.allclose(u.conj().T @ u, np.eye(wf.m), atol=1e-12)
    )

    c4 = build_qam(4)
    p4 = uniform_pmf(c4)
    mu4 = pmf_moments(c4, p4)[2]
    taus = default_delay_axis(wf.n)
    nus = default_doppler_axis(wf.n)
    closed = expected_af_closed(wf, mu4, taus, nus)[0]
    e1, e2, e3 = expected_af_terms_exact(wf, taus, nus)
    exact = e1 + e2 + (mu4 - 2.0) * e3
    checks["closed_matches_exact"] = bool(np.allclose(closed, exact, atol=1e-8))
    i0 = int(np.flatnonzero(taus == 0)[0])
    j0 = int(np.flatnonzero(nus == 0)[0])
    checks["origin_law"] = bool(
        abs(closed[i0, j0] - origin_expected_value(wf.m, mu4)) < 1e-8
    )

    es_n0 = 10 ** (10 / 10)
    ring = ber_ring_approx(c4, p4, 1.0, 1 / es_n0)
    checks["qpsk_ring_identity"] = bool(abs(ring - qfunc(np.sqrt(es_n0))) < 1e-12)
    checks["union_dominates_ring"] = bool(
        ber_union_bound(c4, p4, 1.0, 1 / es_n0) >= ring - 1e-15
    )

    c64 = cfg.constellation()
    p = cfg.pmf(c64)
    checks["pmf_valid"] = bool(abs(p.sum() - 1.0) < 1e-12 and np.all(p >= 0))

    rows = [(k, "pass" if v else "FAIL") for k, v in checks.items()]
    write_csv(os.path.join(out, "selftest_results.csv"), ("check", "status"), rows)
    if not all(checks.values()):
        failed = [k for k, v in checks.items() if not v]
        raise NumericalFailure(f"selftest failures: {failed}")
    return {"checks": {k: bool(v) for k, v in checks.items()}}


RUNNERS = {
    "af": run_af,
    "slices": run_slices,
    "ber": run_ber,
    "pcs": run_pcs,
    "cfar": run_cfar,
    "music": run_music,
    "runtime": run_runtime,
    "selftest": run_selftest,
}


def _default_config() -> dict:
    return {
        "waveform": {"n": 64, "m": 32, "s": 1, "c1": 5 / 128, "c2": 1 / 128, "l2": 1 / 128},
        "constellation": {"order": 64},
        "pmf": {"source": "uniform"},
        "seed": 0,
    }


def _limit_threads(n: int) -> None:
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="afdmtk", description="DAFT-s-AFDM ISAC experiment runner"
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="YAML experiment configuration")
    parser.add_argument("--out", default=".", help="output directory for CSV/JSON artifacts")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--threads", type=int, help="limit BLAS/FFT thread pools")
    args = parser.parse_args(argv)

    if args.threads is not None:
        _limit_threads(args.threads)

    try:
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = parse_config(_default_config())
        if args.seed is not None:
            cfg.seed = args.seed
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot prepare output directory: {exc}", file=sys.stderr)
        return 2

    try:
        summary = RUNNERS[args.experiment](cfg, args.out)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    manifest = {
        "experiment": args.experiment,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "summary": summary,
    }
    with open(os.path.join(args.out, f"{args.experiment}_manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"{args.experiment}: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
