"""Radar-side processing: range-Doppler maps, CA-CFAR, MUSIC velocity spectra.

The matched statistic is the periodic cross-ambiguity between the received
frame and the known transmitted frame; under noise-only input its squared
magnitude is exponential per cell, which is what the CA-CFAR threshold
factor assumes.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .channel import awgn_noise, snr_to_noise_var
from .constellation import Constellation, pmf_moments, validate_pmf
from .waveform import WaveformConfig, modulation_matrix

C_LIGHT = 299792458.0


def waveform_variant(name: str, n: int, m: int, c1: float, c2: float, l2: float = None) -> WaveformConfig:
    """Named degenerations used in the waveform comparisons.

    ofdm: no chirps, no spreading. afdm: chirps only. dft-s-ofdm: spreading
    only. daft-s-afdm: chirps and spreading.
    """
    if l2 is None:
        l2 = c2  # s = 1 keeps delta_lambda = 0 by default
    variants = {
        "ofdm": dict(c1=0.0, c2=0.0, l1=0.0, l2=0.0, spread=False),
        "afdm": dict(c1=c1, c2=c2, l1=0.0, l2=0.0, spread=False),
        "dft-s-ofdm": dict(c1=0.0, c2=0.0, l1=0.0, l2=0.0, spread=True),
        "daft-s-afdm": dict(c1=c1, c2=c2, l1=0.0, l2=l2, spread=True),
    }
    if name not in variants:
        raise ValueError(f"unknown variant {name!r}; expected one of {sorted(variants)}")
    return WaveformConfig(n=n, m=m, s=1, prefix="none", **variants[name])


def random_frame(cfg: WaveformConfig, c: Constellation, p: np.ndarray, rng) -> np.ndarray:
    """One modulated frame of shaped symbols (no prefix)."""
    p = validate_pmf(c, p)
    idx = rng.choice(c.order, size=cfg.m, p=p)
    return modulation_matrix(cfg) @ c.points[idx]


def range_doppler_map(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    """|cross-ambiguity|^2 on the full (delay, Doppler) grid.

    out[l, k] = |sum_n rx[n] tx*[(n - l) mod N] exp(-j2pi k n / N)|^2,
    shape (N, N) with periodic delays l = 0..N-1.
    """
    rx = np.asarray(rx)
    tx = np.asarray(tx)
    n = len(tx)
    if len(rx) != n:
        raise ValueError("rx and tx frames must have equal length")
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    prod = rx[None, :] * tx.conj()[idx]
    return np.abs(np.fft.fft(prod, axis=1)) ** 2


@dataclass(frozen=True)
class CfarParams:
    """Cell-averaging CFAR window and false-alarm target.

    n_train/n_guard are per side; window="both" trains on a 2-D ring around
    the cell, window="delay" on a 1-D strip along the delay axis at the cell
    Doppler. Training wraps around the map edges (the grid is periodic).
    """

    n_train: int = 8
    n_guard: int = 2
    p_fa: float = 1e-3
    window: str = "both"

    def __post_init__(self):
        if self.window not in ("both", "delay"):
            raise ValueError(f"unknown CFAR window {self.window!r}")

    @property
    def n_training_cells(self) -> int:
        w = 2 * (self.n_train + self.n_guard) + 1
        g = 2 * self.n_guard + 1
        if self.window == "delay":
            return w - g
        return w * w - g * g

    @property
    def threshold_factor(self) -> float:
        nt = self.n_training_cells
        return nt * (self.p_fa ** (-1.0 / nt) - 1.0)


def ca_cfar(power_map: np.ndarray, params: CfarParams) -> np.ndarray:
    """Boolean detection mask from a cell-averaging CFAR over the map."""
    z = np.asarray(power_map, dtype=float)
    if z.ndim != 2:
        raise ValueError("power map must be 2-D")
    w = 2 * (params.n_train + params.n_guard) + 1
    g = 2 * params.n_guard + 1
    size_w = (w, w) if params.window == "both" else (w, 1)
    size_g = (g, g) if params.window == "both" else (g, 1)
    if w > z.shape[0] or (params.window == "both" and w > z.shape[1]):
        raise ValueError("CFAR window larger than the map")
    outer = uniform_filter(z, size=size_w, mode="wrap") * np.prod(size_w)
    inner = uniform_filter(z, size=size_g, mode="wrap") * np.prod(size_g)
    noise = (outer - inner) / params.n_training_cells
    return z > params.threshold_factor * noise


def cfar_detections(power_map: np.ndarray, params: CfarParams) -> list:
    """Detections as (delay, doppler, value) tuples, sorted by value descending."""
    z = np.asarray(power_map, dtype=float)
    mask = ca_cfar(z, params)
    cells = np.argwhere(mask)
    out = [(int(l), int(k), float(z[l, k])) for l, k in cells]
    out.sort(key=lambda t: -t[2])
    return out


@dataclass(frozen=True)
class PointTarget:
    """Unit-power scatterer at integer (delay, Doppler) cells."""

    delay: int
    doppler: int
    amplitude: complex = 1.0 + 0j


def echo_frame(tx: np.ndarray, targets, noise_var: float, rng) -> np.ndarray:
    """Superimpose target echoes on the frame and add receiver noise."""
    n = len(tx)
    idx = np.arange(n)
    rx = np.zeros(n, dtype=complex)
    for t in targets:
        phase = np.exp(2j * np.pi * (t.doppler % n) * idx / n)
        rx += t.amplitude * np.take(tx, (idx - t.delay) % n) * phase
    if noise_var > 0:
        rx += awgn_noise(rng, n, noise_var)
    return rx


def _hit_near(mask: np.ndarray, delay: int, doppler: int, radius: int = 1) -> bool:
    n0, n1 = mask.shape
    dl = (np.arange(-radius, radius + 1) + delay) % n0
    dk = (np.arange(-radius, radius + 1) + doppler) % n1
    return bool(mask[np.ix_(dl, dk)].any())


def detection_probability(
    cfg: WaveformConfig,
    c: Constellation,
    p: np.ndarray,
    targets,
    snr_db: float,
    params: CfarParams,
    trials: int,
    seed: int = 0,
    radius: int = 0,
) -> float:
    """Fraction of trials in which every target is flagged by the CFAR.

    A target counts as detected when a cell within `radius` bins of its true
    (delay, Doppler) position crosses the threshold; the default demands the
    exact cell, so that a neighbor's sidelobe cannot stand in for a target.
    Per-trial randomness (symbols, target phases, noise) comes from a
    trial-indexed generator.
    """
    sigma2 = pmf_moments(c, p)[0]
    noise_var = snr_to_noise_var(snr_db, sigma2)
    hits = 0
    for trial in range(trials):
        rng = np.random.default_rng((seed, trial))
        tx = random_frame(cfg, c, p, rng)
        drawn = [
            PointTarget(t.delay, t.doppler, t.amplitude * np.exp(2j * np.pi * rng.random()))
            for t in targets
        ]
        rx = echo_frame(tx, drawn, noise_var, rng)
        mask = ca_cfar(range_doppler_map(rx, tx), params)
        if all(_hit_near(mask, t.delay, t.doppler, radius) for t in targets):
            hits += 1
    return hits / trials


def false_alarm_rate(
    cfg: WaveformConfig,
    c: Constellation,
    p: np.ndarray,
    params: CfarParams,
    n_cells: int,
    seed: int = 0,
) -> tuple:
    """Measured CFAR false-alarm rate on noise-only frames.

    Returns (rate, n_cells_tested); trials are added frame by frame until at
    least n_cells cells have been scored.
    """
    alarms = 0
    tested = 0
    trial = 0
    while tested < n_cells:
        rng = np.random.default_rng((seed, trial))
        tx = random_frame(cfg, c, p, rng)
        rx = awgn_noise(rng, cfg.n, 1.0)
        mask = ca_cfar(range_doppler_map(rx, tx), params)
        alarms += int(mask.sum())
        tested += mask.size
        trial += 1
    return alarms / tested, tested


@dataclass(frozen=True)
class RadarScenario:
    """Carrier/bandwidth bookkeeping for velocity axes.

    Velocity maps to an inter-frame phase progression: a radial velocity v
    gives Doppler f_d = 2 v f_c / c and per-frame phase 2 pi f_d N / fs.
    """

    carrier_hz: float = 77.0e9
    bandwidth_hz: float = 100.0e6
    n: int = 128
    n_frames: int = 32

    @property
    def frame_duration(self) -> float:
        return self.n / self.bandwidth_hz

    def phase_per_frame(self, velocity: float) -> float:
        f_d = 2.0 * velocity * self.carrier_hz / C_LIGHT
        return 2.0 * np.pi * f_d * self.frame_duration

    @property
    def max_unambiguous_velocity(self) -> float:
        return C_LIGHT / (4.0 * self.carrier_hz * self.frame_duration)

    def range_to_delay_tap(self, range_m: float) -> int:
        """Round-trip delay in fast-time samples: l = round(2R/c * fs)."""
        return int(round(2.0 * range_m * self.bandwidth_hz / C_LIGHT))

    def velocity_to_doppler_tap(self, velocity: float) -> int:
        """Fast-time Doppler bin: k = round(2 v f_c / c * N T_s)."""
        f_d = 2.0 * velocity * self.carrier_hz / C_LIGHT
        return int(round(f_d * self.frame_duration))


def slow_time_snapshots(
    cfg: WaveformConfig,
    c: Constellation,
    p: np.ndarray,
    scen: RadarScenario,
    velocity: float,
    delay: int,
    snr_db: float = None,
    seed: int = 0,
) -> np.ndarray:
    """Per-frame correlator outputs c_f = <r_f, s_f shifted by the delay>.

    The correlations are left unnormalized: the per-frame energy jitter of
    the shaped symbols (variance proportional to mu4 - 1) rides on top of
    the steering phase, which is what degrades the subspace estimate for
    high-kurtosis PMFs.
    """
    sigma2 = pmf_moments(c, p)[0]
    noise_var = 0.0 if snr_db is None else snr_to_noise_var(snr_db, sigma2)
    phi = scen.phase_per_frame(velocity)
    out = np.empty(scen.n_frames, dtype=complex)
    idx = np.arange(cfg.n)
    for f in range(scen.n_frames):
        rng = np.random.default_rng((seed, f))
        tx = random_frame(cfg, c, p, rng)
        rx = np.exp(1j * phi * f) * np.take(tx, (idx - delay) % cfg.n)
        if noise_var > 0:
            rx += awgn_noise(rng, cfg.n, noise_var)
        out[f] = rx @ np.take(tx, (idx - delay) % cfg.n).conj()
    return out


def music_spectrum(
    snapshots: np.ndarray,
    scen: RadarScenario,
    velocities: np.ndarray,
    n_sources: int = 1,
) -> np.ndarray:
    """Noise-subspace pseudospectrum in dB, peak-normalized to 0 dB.

    A single slow-time vector is turned into snapshots by forward smoothing
    with subvectors of length n_frames // 2.
    """
    x = np.asarray(snapshots, dtype=complex)
    f = len(x)
    sub = f // 2
    if sub <= n_sources:
        raise ValueError("too few frames for the requested source count")
    n_snap = f - sub + 1
    xs = np.stack([x[j : j + sub] for j in range(n_snap)], axis=1)
    r = xs @ xs.conj().T / n_snap
    _, vecs = np.linalg.eigh(r)
    noise = vecs[:, : sub - n_sources]  # eigh sorts ascending
    k = np.arange(sub)
    phases = np.array([scen.phase_per_frame(v) for v in np.atleast_1d(velocities)])
    a = np.exp(1j * np.outer(k, phases)) / np.sqrt(sub)
    denom = (np.abs(noise.conj().T @ a) ** 2).sum(axis=0)
    pseudo = 1.0 / np.maximum(denom, 1e-300)
    db = 10.0 * np.log10(pseudo)
    return db - db.max()


def music_velocity(
    rx_frames: np.ndarray,
    tx_frames: np.ndarray,
    delay: int,
    scen: RadarScenario,
    velocities: np.ndarray,
    n_sources: int = 1,
) -> np.ndarray:
    """End-to-end velocity pseudospectrum from raw frame pairs.

    Correlates each received frame against its known transmitted frame at
    the detected range cell, then runs the subspace search over the scan
    grid. Requires at least two frames and a model order below the smoothed
    subvector length.
    """
    rx_frames = np.atleast_2d(np.asarray(rx_frames, dtype=complex))
    tx_frames = np.atleast_2d(np.asarray(tx_frames, dtype=complex))
    if rx_frames.shape != tx_frames.shape:
        raise ValueError("rx and tx frame stacks must have the same shape")
    f, n = rx_frames.shape
    if f < 2:
        raise ValueError("need at least two frames")
    idx = (np.arange(n) - delay) % n
    ref = tx_frames[:, idx]
    snaps = (rx_frames * ref.conj()).sum(axis=1)
    local = RadarScenario(scen.carrier_hz, scen.bandwidth_hz, scen.n, f)
    return music_spectrum(snaps, local, velocities, n_sources)


def mean_sidelobe_db(spectrum_db: np.ndarray, peak_idx: int, exclusion: int) -> float:
    """Mean sidelobe power (in dB) outside the main-lobe exclusion zone."""
    mask = np.ones(len(spectrum_db), dtype=bool)
    lo = max(peak_idx - exclusion, 0)
    hi = min(peak_idx + exclusion + 1, len(spectrum_db))
    mask[lo:hi] = False
    if not mask.any():
        raise ValueError("exclusion zone covers the whole spectrum")
    return float(10.0 * np.log10(np.mean(10.0 ** (spectrum_db[mask] / 10.0))))


def peak_sidelobe_db(spectrum_db: np.ndarray, peak_idx: int, exclusion: int) -> float:
    """Highest spectrum value outside the main-lobe exclusion zone, in dB."""
    mask = np.ones(len(spectrum_db), dtype=bool)
    lo = max(peak_idx - exclusion, 0)
    hi = min(peak_idx + exclusion + 1, len(spectrum_db))
    mask[lo:hi] = False
    if not mask.any():
        raise ValueError("exclusion zone covers the whole spectrum")
    return float(spectrum_db[mask].max())
