"""DAFT-s-AFDM modulation: chirp matrices, DAFT spreading, mapping, IDAFT, prefix."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WaveformConfig:
    """All DAFT-s-AFDM parameters.

    n: block length, m: active symbols, s: mapping stride (1 for L-FDMA,
    n/m for I-FDMA). c1/c2 are the IDAFT chirp rates, l1/l2 the spreading
    DAFT chirp rates. spread=False drops the M-point DAFT (OFDM/AFDM
    degenerations). prefix is "cp" (chirp-periodic), "zp", or "none".
    """

    n: int
    m: int
    s: int = 1
    c1: float = 0.0
    c2: float = 0.0
    l1: float = 0.0
    l2: float = 0.0
    spread: bool = True
    prefix: str = "cp"
    prefix_len: int = 0

    def __post_init__(self):
        if self.m > self.n or self.m * self.s > self.n:
            raise ValueError(f"need m <= n and m*s <= n, got n={self.n} m={self.m} s={self.s}")
        if self.prefix not in ("cp", "zp", "none"):
            raise ValueError(f"unknown prefix mode {self.prefix!r}")

    @property
    def delta_lambda(self) -> float:
        return self.c2 * self.s**2 - self.l2

    @property
    def cp_equivalent(self) -> bool:
        # CPP collapses to a plain cyclic prefix when 2*n*c1 is an integer.
        v = 2 * self.n * self.c1
        return abs(v - round(v)) < 1e-9


def chirp_matrix(alpha: float, size: int) -> np.ndarray:
    """Diagonal chirp matrix with entries exp(-j*2*pi*alpha*k^2)."""
    return np.diag(chirp_phases(alpha, size))


def chirp_phases(alpha: float, size: int) -> np.ndarray:
    k = np.arange(size)
    return np.exp(-2j * np.pi * alpha * k**2)


def dft_matrix(size: int) -> np.ndarray:
    """Unitary DFT matrix (symmetric 1/sqrt(size) normalization)."""
    k = np.arange(size)
    return np.exp(-2j * np.pi * np.outer(k, k) / size) / np.sqrt(size)


def mapping_matrix(cfg: WaveformConfig) -> np.ndarray:
    """N x M 0/1 selection matrix placing symbol m on subcarrier m*s."""
    gamma = np.zeros((cfg.n, cfg.m))
    gamma[np.arange(cfg.m) * cfg.s, np.arange(cfg.m)] = 1.0
    return gamma


def modulation_matrix(cfg: WaveformConfig) -> np.ndarray:
    """The full N x M synthesis matrix U; columns are the subcarrier basis."""
    gamma = mapping_matrix(cfg)
    if cfg.spread:
        # l1 sits at the symbol index and l2 at the spread index, so that the
        # element-wise basis carries exp(-j2pi*l1*m^2) and delta_lambda = c2*s^2 - l2.
        spread = (
            np.diag(chirp_phases(cfg.l2, cfg.m))
            @ dft_matrix(cfg.m)
            @ np.diag(chirp_phases(cfg.l1, cfg.m))
        )
        pre = gamma @ spread
    else:
        pre = gamma
    a1 = chirp_phases(cfg.c1, cfg.n)
    a2 = chirp_phases(cfg.c2, cfg.n)
    fn = dft_matrix(cfg.n)
    return (a1.conj()[:, None] * fn.conj().T) @ (a2.conj()[:, None] * pre)


def modulate(cfg: WaveformConfig, x: np.ndarray) -> np.ndarray:
    """Map a length-M symbol block to the N-sample core signal (plus prefix if set)."""
    x = np.asarray(x)
    if x.shape[-1] != cfg.m:
        raise ValueError(f"symbol block length {x.shape[-1]} != m={cfg.m}")
    s = x @ modulation_matrix(cfg).T
    if cfg.prefix_len > 0 and cfg.prefix != "none":
        return np.concatenate([make_prefix(cfg, s), s], axis=-1)
    return s


def demodulate(cfg: WaveformConfig, s: np.ndarray) -> np.ndarray:
    """Matched (U^H) demodulation of a prefix-free N-sample core."""
    return np.asarray(s) @ modulation_matrix(cfg).conj()


def make_prefix(cfg: WaveformConfig, s: np.ndarray) -> np.ndarray:
    """Prefix samples for the core signal s (indices -prefix_len..-1).

    CPP sample at n < 0 is s[n+N]*exp(-j*2*pi*c1*(N^2 + 2*N*n)); this equals
    the plain cyclic prefix whenever 2*N*c1 is an integer (and N is even).
    """
    length = cfg.prefix_len
    if cfg.prefix == "zp":
        return np.zeros(s.shape[:-1] + (length,), dtype=complex)
    n_neg = np.arange(-length, 0)
    rot = np.exp(-2j * np.pi * cfg.c1 * (cfg.n**2 + 2 * cfg.n * n_neg))
    return s[..., n_neg + cfg.n] * rot


def strip_prefix(cfg: WaveformConfig, s: np.ndarray) -> np.ndarray:
    if cfg.prefix_len > 0 and cfg.prefix != "none":
        return s[..., cfg.prefix_len :]
    return s


def subcarrier_basis(cfg: WaveformConfig, m: int) -> np.ndarray:
    """Element-wise subcarrier waveform g_m[n] of the spread chirp carrier m.

    g_m[n] = exp(j2pi(c1 n^2 - l1 m^2))/sqrt(NM)
             * sum_l exp(j2pi[dl*l^2 + (S n/N - m/M) l]),  dl = c2 S^2 - l2.
    """
    if not 0 <= m < cfg.m:
        raise IndexError(f"subcarrier index {m} out of range [0, {cfg.m})")
    if not cfg.spread:
        raise ValueError("subcarrier basis formula assumes DAFT spreading")
    n = np.arange(cfg.n)
    l = np.arange(cfg.m)
    inner = np.exp(
        2j * np.pi * (cfg.delta_lambda * l[None, :] ** 2
                      + (cfg.s * n[:, None] / cfg.n - m / cfg.m) * l[None, :])
    ).sum(axis=1)
    outer = np.exp(2j * np.pi * (cfg.c1 * n**2 - cfg.l1 * m**2))
    return outer * inner / np.sqrt(cfg.n * cfg.m)
