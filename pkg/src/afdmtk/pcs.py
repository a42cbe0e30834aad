"""Probabilistic constellation shaping for the comm-sensing trade-off.

The shaping family is a generalized Maxwell-Boltzmann PMF over energy rings,
p(x) proportional to exp(lam1*|x|^2 + lam2*|x|^4). lam2 steers the kurtosis
(the sensing side), lam1 is solved so the average power hits its target.
The hybrid optimizer runs a coarse grid over (omega, sigma_x^2) and refines
the best cell with Nelder-Mead on the clamped box.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize

from .channel import ThreePathModel, snr_to_noise_var
from .comm import avg_ber_theory, effective_throughput, equalize
from .channel import effective_channel_from_u
from .constellation import (
    Constellation,
    pmf_moments,
    ring_pmf_to_pointwise,
    validate_pmf,
)
from .waveform import WaveformConfig, modulation_matrix

LAMBDA1_TOL = 1e-10


@dataclass(frozen=True)
class MbParams:
    """Exponential-family shaping parameters and their power target."""

    lam1: float
    lam2: float
    sigma_x2: float


def mb_pmf(c: Constellation, lam1: float, lam2: float) -> np.ndarray:
    """Pointwise PMF p(x) ~ exp(lam1 |x|^2 + lam2 |x|^4), max-exponent guarded."""
    e2 = np.abs(c.points) ** 2
    expo = lam1 * e2 + lam2 * e2**2
    expo -= expo.max()
    w = np.exp(expo)
    return w / w.sum()


def _power_of_lam1(c: Constellation, lam1: float, lam2: float) -> float:
    return pmf_moments(c, mb_pmf(c, lam1, lam2))[0]


def solve_lambda1(c: Constellation, lam2: float, sigma_x2: float) -> float:
    """lam1 such that the shaped PMF has average power sigma_x2.

    The power is strictly increasing in lam1, so a sign change always exists
    when sigma_x2 lies strictly between the min and max ring energies.
    """
    e2 = np.abs(c.points) ** 2
    lo_e, hi_e = e2.min(), e2.max()
    if not (lo_e < sigma_x2 < hi_e):
        raise ValueError(
            f"target power {sigma_x2} outside achievable open interval ({lo_e}, {hi_e})"
        )

    def resid(lam1):
        return _power_of_lam1(c, lam1, lam2) - sigma_x2

    lo, hi = -1.0, 1.0
    for _ in range(80):
        if resid(lo) < 0 < resid(hi):
            break
        lo *= 2.0
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the power constraint")
    lam1 = brentq(resid, lo, hi, xtol=1e-14, rtol=8.9e-16)
    if abs(resid(lam1)) > LAMBDA1_TOL:
        raise RuntimeError(f"power residual {resid(lam1)} above tolerance")
    return float(lam1)


def lambda2_from_weight(omega: float) -> float:
    """Map the comm weight omega in (0, 1] to the kurtosis coefficient.

    lam2 = -(1 - omega) ln 2 / omega: zero at omega = 1 (pure comm, uniform
    family), increasingly negative as sensing dominates, which pulls the
    PMF toward a single energy ring and drives mu4 down toward 1.
    """
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    return -(1.0 - omega) * np.log(2.0) / omega


def shaped_pmf(c: Constellation, omega: float, sigma_x2: float) -> tuple:
    """Shaped PMF for a trade-off weight and power target; returns (p, params)."""
    lam2 = lambda2_from_weight(omega)
    lam1 = solve_lambda1(c, lam2, sigma_x2)
    return mb_pmf(c, lam1, lam2), MbParams(lam1=lam1, lam2=lam2, sigma_x2=sigma_x2)


def single_ring_pmf(c: Constellation) -> np.ndarray:
    """Sensing-limit PMF: all mass on the ring whose energy is nearest 1.

    This is the omega -> 0 limit of the shaping family (mu4 = 1, zero
    excess kurtosis) subject to keeping the power close to unity.
    """
    r = int(np.argmin(np.abs(c.ring_energies - 1.0)))
    ring = np.zeros(c.n_rings)
    ring[r] = 1.0
    return ring_pmf_to_pointwise(c, ring)


@dataclass(frozen=True)
class CommModel:
    """Frozen scenario over which throughput/BER are scored."""

    cfg: WaveformConfig
    snr_db: float
    model: ThreePathModel = ThreePathModel()
    n_channels: int = 50
    seed: int = 0
    ber_form: str = "ring"


def score_pmf(c: Constellation, p: np.ndarray, comm: CommModel) -> tuple:
    """Average (ber, throughput) of a PMF over the random-channel ensemble."""
    p = validate_pmf(c, p)
    sigma2, _, _, entropy = pmf_moments(c, p)
    n0 = snr_to_noise_var(comm.snr_db, sigma2)
    u = modulation_matrix(comm.cfg)
    rng = np.random.default_rng((comm.seed, 0x5C5))
    acc = 0.0
    for _ in range(comm.n_channels):
        ch = comm.model.sample(rng)
        eq = equalize(effective_channel_from_u(ch, u), n0, sigma2)
        acc += avg_ber_theory(eq, c, p, comm.ber_form)
    ber = acc / comm.n_channels
    throughput = entropy * (1.0 - min(max(ber, 0.0), 1.0))
    return ber, throughput


def objective_j(c: Constellation, p: np.ndarray, comm: CommModel, omega: float) -> float:
    """Scalarized trade-off J = -omega * throughput + (1 - omega) * mu4."""
    _, throughput = score_pmf(c, p, comm)
    mu4 = pmf_moments(c, p)[2]
    return -omega * throughput + (1.0 - omega) * mu4


@dataclass(frozen=True)
class ParetoPoint:
    """One operating point on the comm-sensing front."""

    omega: float
    sigma_x2: float
    lam1: float
    lam2: float
    entropy: float
    mu4: float
    ber: float
    throughput: float
    objective: float

    def row(self):
        return (
            self.omega,
            self.sigma_x2,
            self.lam1,
            self.lam2,
            self.entropy,
            self.mu4,
            self.ber,
            self.throughput,
            self.objective,
        )


PARETO_FIELDS = (
    "omega",
    "sigma_x2",
    "lam1",
    "lam2",
    "entropy",
    "mu4",
    "ber",
    "throughput",
    "objective",
)


def evaluate_point(c: Constellation, comm: CommModel, omega: float, sigma_x2: float) -> ParetoPoint:
    p, params = shaped_pmf(c, omega, sigma_x2)
    _, _, mu4, entropy = pmf_moments(c, p)
    ber, throughput = score_pmf(c, p, comm)
    return ParetoPoint(
        omega=float(omega),
        sigma_x2=float(sigma_x2),
        lam1=params.lam1,
        lam2=params.lam2,
        entropy=entropy,
        mu4=mu4,
        ber=ber,
        throughput=throughput,
        objective=-omega * throughput + (1.0 - omega) * mu4,
    )


def _power_box(c: Constellation) -> tuple:
    """Achievable open power interval, shrunk slightly for the solver."""
    e2 = np.abs(c.points) ** 2
    lo, hi = e2.min(), e2.max()
    pad = 1e-3 * (hi - lo)
    return lo + pad, hi - pad


def optimize_hybrid(
    c: Constellation,
    comm: CommModel,
    fix_omega: float = None,
    omega_grid=(0.25, 0.5, 0.75, 1.0),
    sigma_grid=(0.7, 0.85, 1.0, 1.15),
    maxfev: int = 200,
) -> ParetoPoint:
    """Coarse grid over (omega, sigma_x^2) followed by Nelder-Mead refinement.

    fix_omega pins the trade-off weight (only the power target is searched),
    which is how the Pareto sweep isolates one front point per weight.
    Iterates outside the box are projected back before evaluation, so the
    returned parameters always satisfy the constraints.
    """
    lo, hi = _power_box(c)
    w_lo = 1e-3

    def clamp(omega, sig):
        return min(max(omega, w_lo), 1.0), min(max(sig, lo), hi)

    if fix_omega is not None:
        grid = [(fix_omega, s) for s in sigma_grid]
    else:
        grid = [(w, s) for w in omega_grid for s in sigma_grid]
    best = None
    for w, s in grid:
        w, s = clamp(w, s)
        pt = evaluate_point(c, comm, w, s)
        if best is None or pt.objective < best.objective:
            best = pt

    if fix_omega is not None:
        def fun(z):
            _, s = clamp(fix_omega, z[0])
            return evaluate_point(c, comm, fix_omega, s).objective

        x0 = np.array([best.sigma_x2])
    else:
        def fun(z):
            w, s = clamp(z[0], z[1])
            return evaluate_point(c, comm, w, s).objective

        x0 = np.array([best.omega, best.sigma_x2])
    res = minimize(
        fun, x0, method="Nelder-Mead",
        options={"xatol": 1e-4, "fatol": 1e-10, "maxfev": maxfev},
    )
    if fix_omega is not None:
        w, s = clamp(fix_omega, res.x[0])
    else:
        w, s = clamp(res.x[0], res.x[1])
    refined = evaluate_point(c, comm, w, s)
    return refined if refined.objective <= best.objective else best


def pareto_sweep(c: Constellation, comm: CommModel, omegas, **kwargs) -> list:
    """One optimized point per trade-off weight, dominated points dropped.

    A point dominates another when it has throughput >= and mu4 <= with at
    least one strict inequality (higher throughput is better for comm,
    lower kurtosis for sensing).
    """
    pts = [optimize_hybrid(c, comm, fix_omega=w, **kwargs) for w in omegas]
    keep = []
    for i, a in enumerate(pts):
        dominated = any(
            (b.throughput >= a.throughput and b.mu4 <= a.mu4)
            and (b.throughput > a.throughput or b.mu4 < a.mu4)
            for j, b in enumerate(pts)
            if j != i
        )
        if not dominated:
            keep.append(a)
    return keep


def save_pareto_csv(path, points) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(PARETO_FIELDS) + "\n")
        for pt in points:
            fh.write(",".join(repr(float(v)) for v in pt.row()) + "\n")
