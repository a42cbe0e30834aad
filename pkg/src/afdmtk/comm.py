"""Linear equalization, prior-aware MAP detection, closed-form BER, throughput.

The BER chain follows the pairwise-error analysis of the shaped MAP
receiver: a full union bound over symbol pairs, and the O(K^2) energy-ring
reduction that keeps only minimum-distance neighbors.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import (
    DelayDopplerChannel,
    ThreePathModel,
    awgn_noise,
    effective_channel_from_u,
    snr_to_noise_var,
)
from .constellation import (
    Constellation,
    hamming_matrix,
    nearest_neighbor_pairs,
    hamming_distance_matrix,
    pmf_moments,
    ring_probabilities,
    validate_pmf,
)
from .waveform import WaveformConfig, modulation_matrix

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)])


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True)
class EqualizerOutput:
    """Linear equalizer W with its effective gain/noise statistics.

    g = W @ h_eff; alpha_k = g[k, k]; sigma2_k is the aggregate per-symbol
    noise-plus-interference variance N0*||w_k||^2 + E_s*sum_{l!=k}|g_kl|^2.
    """

    w: np.ndarray
    g: np.ndarray
    alpha: np.ndarray
    sigma2: np.ndarray


def equalize(h_eff: np.ndarray, n0: float, es: float, kind: str = "mmse") -> EqualizerOutput:
    """Build a ZF or MMSE linear equalizer for the effective channel."""
    h_eff = np.asarray(h_eff)
    m = h_eff.shape[1]
    if kind == "mmse":
        gram = h_eff.conj().T @ h_eff + (n0 / es) * np.eye(m)
        w = np.linalg.solve(gram, h_eff.conj().T)
    elif kind == "zf":
        if np.linalg.matrix_rank(h_eff) < m:
            raise np.linalg.LinAlgError("effective channel is rank deficient for ZF")
        w = np.linalg.pinv(h_eff)
    else:
        raise ValueError(f"unknown equalizer kind {kind!r}")
    g = w @ h_eff
    alpha = np.diag(g).copy()
    inter = (np.abs(g) ** 2).sum(axis=1) - np.abs(alpha) ** 2
    sigma2 = n0 * (np.abs(w) ** 2).sum(axis=1) + es * inter
    return EqualizerOutput(w=w, g=g, alpha=alpha, sigma2=sigma2)


def map_detect(r, alpha, sigma2, c: Constellation, p: np.ndarray) -> np.ndarray:
    """MAP symbol decision: argmin |r - alpha*x|^2 / sigma2 - ln p(x).

    Zero-probability points are excluded from the search. Ties resolve to
    the lowest point index. Vectorized over r/alpha/sigma2.
    """
    p = validate_pmf(c, p)
    support = p > 0
    if not np.any(support):
        raise ValueError("all constellation probabilities are zero")
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    alpha = np.broadcast_to(np.asarray(alpha, dtype=complex), r.shape)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), r.shape)
    cand = c.points[support]
    metric = np.abs(r[:, None] - alpha[:, None] * cand[None, :]) ** 2 / sigma2[:, None]
    metric -= np.log(p[support])[None, :]
    return np.flatnonzero(support)[np.argmin(metric, axis=1)]


def _pair_q_arguments(c, p, alpha, sigma2):
    """Pairwise Q-function arguments of the MAP error events, with supports."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    amag = abs(alpha)
    d = amag * np.abs(c.points[:, None] - c.points[None, :])
    support = p > 0
    logratio = np.zeros((c.order, c.order))
    logratio[np.ix_(support, support)] = (
        np.log(p[support])[:, None] - np.log(p[support])[None, :]
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = (d**2 + sigma2 * logratio) / (np.sqrt(2 * sigma2) * d)
    return arg, d, support


def ber_union_bound(
    c: Constellation, p: np.ndarray, alpha, sigma2, pairs: str = "all"
) -> float:
    """Union-bound BER of the prior-aware MAP detector.

    pairs="nearest" keeps only minimum-distance pairs (the reduction the
    ring-grouped form consolidates). The bound may exceed 1 at low SNR;
    callers clamp at the reporting layer.
    """
    p = validate_pmf(c, p)
    arg, d, support = _pair_q_arguments(c, p, alpha, sigma2)
    dh = hamming_distance_matrix(c)
    mask = support[:, None] & support[None, :] & (d > 0)
    if pairs == "nearest":
        mask &= nearest_neighbor_pairs(c)
    elif pairs != "all":
        raise ValueError(f"unknown pair selection {pairs!r}")
    terms = np.where(mask, p[:, None] * dh * qfunc(np.where(mask, arg, 0.0)), 0.0)
    return float(terms.sum() / c.bits_per_symbol)


def _ring_ber_many(c: Constellation, pr: np.ndarray, alpha, sigma2) -> np.ndarray:
    """Ring-grouped BER for vectors of per-slot (alpha, sigma2)."""
    alpha = np.atleast_1d(np.asarray(alpha))
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be positive")
    cmat = hamming_matrix(c)
    sup = pr > 0
    logratio = np.zeros((c.n_rings, c.n_rings))
    logratio[np.ix_(sup, sup)] = np.log(pr[sup])[:, None] - np.log(pr[sup])[None, :]
    mask = sup[:, None] & sup[None, :] & (cmat > 0)
    amag = np.abs(alpha)[:, None, None]
    s2 = sigma2[:, None, None]
    arg = ((amag * c.d_min) ** 2 + s2 * logratio[None]) / (amag * c.d_min * np.sqrt(2 * s2))
    terms = np.where(mask[None], pr[:, None] * cmat * qfunc(arg), 0.0)
    return terms.sum(axis=(1, 2)) / c.bits_per_symbol


def ber_ring_approx(c: Constellation, p: np.ndarray, alpha, sigma2) -> float:
    """O(K^2) ring-grouped BER for ring-symmetric PMFs.

    Identical to the nearest-neighbor-truncated union bound: per-ring point
    probability times the Hamming-weight matrix times the d_min Q term.
    """
    p = validate_pmf(c, p)
    pr = ring_probabilities(c, p)  # raises if not ring-symmetric
    return float(_ring_ber_many(c, pr, alpha, sigma2)[0])


def effective_throughput(
    c: Constellation, p: np.ndarray, alpha, sigma2, ber: str = "ring"
) -> float:
    """Entropy discounted by error rate: H(P) * (1 - clamp(P_b, 0, 1))."""
    _, _, _, entropy = pmf_moments(c, p)
    if ber == "ring":
        pb = ber_ring_approx(c, p, alpha, sigma2)
    elif ber == "union":
        pb = ber_union_bound(c, p, alpha, sigma2)
    else:
        raise ValueError(f"unknown ber form {ber!r}")
    return entropy * (1.0 - min(max(pb, 0.0), 1.0))


def avg_ber_theory(eq: EqualizerOutput, c: Constellation, p: np.ndarray, form: str = "ring") -> float:
    """Per-slot closed-form BER averaged over the symbol block."""
    if form == "ring":
        p = validate_pmf(c, p)
        pr = ring_probabilities(c, p)
        return float(np.mean(_ring_ber_many(c, pr, eq.alpha, eq.sigma2)))
    return float(
        np.mean([ber_union_bound(c, p, eq.alpha[k], eq.sigma2[k]) for k in range(len(eq.alpha))])
    )


def theory_ber_random_channel(
    cfg: WaveformConfig,
    model: ThreePathModel,
    c: Constellation,
    p: np.ndarray,
    snr_db: float,
    n_channels: int = 200,
    seed: int = 0,
    form: str = "ring",
) -> float:
    """Closed-form BER averaged over random channel realizations."""
    es = pmf_moments(c, p)[0]
    n0 = snr_to_noise_var(snr_db, es)
    rng = np.random.default_rng((seed, 0x7E0))
    u = modulation_matrix(cfg)
    acc = 0.0
    for _ in range(n_channels):
        ch = model.sample(rng)
        eq = equalize(effective_channel_from_u(ch, u), n0, es)
        acc += avg_ber_theory(eq, c, p, form)
    return acc / n_channels


def simulate_ber(
    cfg: WaveformConfig,
    channel,
    c: Constellation,
    p: np.ndarray,
    snr_db: float,
    n_bits: int,
    seed: int = 0,
) -> tuple:
    """End-to-end Monte Carlo BER: shaped symbols -> modulate -> channel ->
    MMSE equalize -> MAP detect -> count bit errors against Gray labels.

    channel is a fixed DelayDopplerChannel (noise_var ignored; set by SNR)
    or a ThreePathModel resampled per frame. Returns (ber, n_errors).
    """
    p = validate_pmf(c, p)
    bits = c.bits_per_symbol
    if n_bits < bits:
        raise ValueError("need at least one symbol worth of bits")
    es = pmf_moments(c, p)[0]
    n0 = snr_to_noise_var(snr_db, es)
    u = modulation_matrix(cfg)
    n_frames = int(np.ceil(n_bits / (bits * cfg.m)))
    fixed = isinstance(channel, DelayDopplerChannel)
    if fixed:
        h_eff_fixed = effective_channel_from_u(channel, u)
        eq_fixed = equalize(h_eff_fixed, n0, es)
    errors = 0
    for frame in range(n_frames):
        rng = np.random.default_rng((seed, frame))
        if fixed:
            h_eff, eq = h_eff_fixed, eq_fixed
        else:
            ch = channel.sample(rng)
            h_eff = effective_channel_from_u(ch, u)
            eq = equalize(h_eff, n0, es)
        idx = rng.choice(c.order, size=cfg.m, p=p)
        y = h_eff @ c.points[idx]
        if n0 > 0:
            y = y + awgn_noise(rng, y.shape, n0)
        r = eq.w @ y
        det = map_detect(r, eq.alpha, eq.sigma2, c, p)
        errors += int(_POPCOUNT[c.labels[idx] ^ c.labels[det]].sum())
    total_bits = n_frames * cfg.m * bits
    return errors / total_bits, errors
