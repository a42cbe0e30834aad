"""Doubly selective delay-Doppler channels and effective-channel matrices."""

from dataclasses import dataclass, field

import numpy as np

from .waveform import WaveformConfig, modulation_matrix


@dataclass(frozen=True)
class DelayDopplerChannel:
    """P discrete paths (complex gain, integer delay tap, integer Doppler tap)."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    noise_var: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gains", np.atleast_1d(np.asarray(self.gains, dtype=complex)))
        object.__setattr__(self, "delays", np.atleast_1d(np.asarray(self.delays, dtype=int)))
        object.__setattr__(self, "dopplers", np.atleast_1d(np.asarray(self.dopplers, dtype=int)))
        if not (len(self.gains) == len(self.delays) == len(self.dopplers)):
            raise ValueError("gains, delays, dopplers must have equal length")
        if len(self.gains) < 1:
            raise ValueError("channel needs at least one path")
        if np.any(self.delays < 0):
            raise ValueError("delay taps must be nonnegative")
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")

    @property
    def n_paths(self) -> int:
        return len(self.gains)

    @property
    def max_delay(self) -> int:
        return int(self.delays.max())


def identity_channel(noise_var: float = 0.0) -> DelayDopplerChannel:
    return DelayDopplerChannel(np.array([1.0 + 0j]), np.array([0]), np.array([0]), noise_var)


def awgn_noise(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    return np.sqrt(noise_var / 2.0) * (
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


def apply_channel(
    ch: DelayDopplerChannel, s: np.ndarray, rng_seed=None
) -> np.ndarray:
    """r[n] = sum_i h_i s[(n - l_i) mod N] exp(j2pi k_i n / N) + w[n].

    The delay is circular (CP operation assumed). Noise is drawn from
    default_rng(rng_seed); pass a Generator to reuse a stream. rng_seed=None
    with noise_var > 0 is rejected so results stay reproducible.
    """
    s = np.asarray(s)
    n = s.shape[-1]
    if ch.max_delay >= n:
        raise ValueError(f"delay tap {ch.max_delay} >= signal length {n}")
    idx = np.arange(n)
    r = np.zeros_like(s, dtype=complex)
    for h, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        r = r + h * np.take(s, (idx - l) % n, axis=-1) * np.exp(2j * np.pi * k * idx / n)
    if ch.noise_var > 0:
        if rng_seed is None:
            raise ValueError("noisy channel requires an rng seed or Generator")
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        r = r + awgn_noise(rng, r.shape, ch.noise_var)
    return r


def channel_matrix(ch: DelayDopplerChannel, n: int) -> np.ndarray:
    """N x N time-domain matrix H = sum_i h_i Delta(k_i) Pi(l_i)."""
    idx = np.arange(n)
    h = np.zeros((n, n), dtype=complex)
    eye = np.eye(n)
    for g, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        shift = np.roll(eye, l, axis=0)  # (Pi(l) x)[m] = x[(m - l) mod N]
        h += g * (np.exp(2j * np.pi * k * idx / n)[:, None] * shift)
    return h


def effective_channel_matrix(ch: DelayDopplerChannel, cfg: WaveformConfig) -> np.ndarray:
    """H_eff = H U, mapping symbol blocks directly to received samples."""
    return effective_channel_from_u(ch, modulation_matrix(cfg))


def effective_channel_from_u(ch: DelayDopplerChannel, u: np.ndarray) -> np.ndarray:
    """H_eff for a precomputed synthesis matrix, without forming the N x N H."""
    n = u.shape[0]
    idx = np.arange(n)
    h_eff = np.zeros_like(u)
    for g, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        h_eff += g * np.exp(2j * np.pi * k * idx / n)[:, None] * np.roll(u, l, axis=0)
    return h_eff


@dataclass(frozen=True)
class ThreePathModel:
    """Random 3-path profile used for the communication experiments.

    Delay taps are fixed, Doppler taps are drawn uniformly from
    [-max_doppler, max_doppler], and gains are i.i.d. complex Gaussian
    normalized in expectation to unit total power. The exact profile is a
    fixed convention of this toolkit; only its qualitative shape matters.
    """

    delays: tuple = (0, 1, 2)
    max_doppler: int = 1

    def sample(self, rng: np.random.Generator, noise_var: float = 0.0) -> DelayDopplerChannel:
        p = len(self.delays)
        gains = (rng.standard_normal(p) + 1j * rng.standard_normal(p)) / np.sqrt(2 * p)
        dopplers = rng.integers(-self.max_doppler, self.max_doppler + 1, size=p)
        return DelayDopplerChannel(gains, np.array(self.delays), dopplers, noise_var)


def snr_to_noise_var(snr_db: float, es: float = 1.0) -> float:
    """Noise variance for a per-sample SNR of es/sigma^2."""
    return es / 10 ** (snr_db / 10.0)
