"""Square-QAM alphabets with Gray labels, energy rings, and PMF statistics."""

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64, 256)

# Two points share an energy ring iff their squared moduli differ by less
# than this. Levels are exact odd-integer ratios, so grouping is never close.
RING_TOL = 1e-9


@dataclass(frozen=True)
class Constellation:
    """Gray-labeled square QAM alphabet, unit average power under the uniform PMF.

    points[i] is the complex symbol with integer bit label labels[i]
    (bits_per_symbol bits, I-axis Gray code in the high half, Q-axis in the
    low half). ring_index[i] gives the energy ring of point i; ring_energies
    is ascending.
    """

    order: int
    points: np.ndarray
    labels: np.ndarray
    ring_index: np.ndarray
    ring_energies: np.ndarray
    d_min: float

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def n_rings(self) -> int:
        return len(self.ring_energies)

    def label_bits(self, i: int) -> str:
        return format(int(self.labels[i]), f"0{self.bits_per_symbol}b")

    def ring_members(self, r: int) -> np.ndarray:
        return np.flatnonzero(self.ring_index == r)


def build_qam(order: int) -> Constellation:
    """Build a power-normalized square QAM constellation with Gray labels.

    Labeling is reflected Gray per axis, I bits first (MSB side), then Q.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {SUPPORTED_ORDERS}")
    side = int(round(np.sqrt(order)))
    axis_bits = int(np.log2(side))
    levels = np.arange(-(side - 1), side, 2)  # odd integers
    scale = 1.0 / np.sqrt(2.0 * (side * side - 1) / 3.0)

    points = np.empty(order, dtype=complex)
    labels = np.empty(order, dtype=np.int64)
    for ii, a in enumerate(levels):
        for qq, b in enumerate(levels):
            idx = ii * side + qq
            points[idx] = (a + 1j * b) * scale
            labels[idx] = ((ii ^ (ii >> 1)) << axis_bits) | (qq ^ (qq >> 1))

    energies = np.abs(points) ** 2
    ring_energies = []
    ring_index = np.empty(order, dtype=np.int64)
    for i in np.argsort(energies):
        e = energies[i]
        if ring_energies and abs(e - ring_energies[-1]) < RING_TOL:
            ring_index[i] = len(ring_energies) - 1
        else:
            ring_energies.append(e)
            ring_index[i] = len(ring_energies) - 1
    return Constellation(
        order=order,
        points=points,
        labels=labels,
        ring_index=ring_index,
        ring_energies=np.array(ring_energies),
        d_min=2.0 * scale,
    )


def uniform_pmf(c: Constellation) -> np.ndarray:
    return np.full(c.order, 1.0 / c.order)


def validate_pmf(c: Constellation, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (c.order,):
        raise ValueError(f"PMF length {p.shape} does not match order {c.order}")
    if np.any(p < 0):
        raise ValueError("PMF has negative entries")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"PMF sums to {p.sum()!r}, not 1")
    return p


def ring_pmf_to_pointwise(c: Constellation, ring_probs: np.ndarray) -> np.ndarray:
    """Expand per-ring probabilities to a pointwise PMF (equal split on a ring)."""
    ring_probs = np.asarray(ring_probs, dtype=float)
    if ring_probs.shape != (c.n_rings,):
        raise ValueError("ring probability vector does not match ring count")
    counts = np.bincount(c.ring_index, minlength=c.n_rings)
    return ring_probs[c.ring_index] / counts[c.ring_index]


def ring_probabilities(c: Constellation, p: np.ndarray) -> np.ndarray:
    """Per-point probability on each ring; raises if p is not ring-symmetric."""
    p = validate_pmf(c, p)
    out = np.empty(c.n_rings)
    for r in range(c.n_rings):
        vals = p[c.ring_members(r)]
        if np.ptp(vals) > 1e-12:
            raise ValueError(f"PMF is not ring-symmetric on ring {r}")
        out[r] = vals[0]
    return out


def is_ring_symmetric(c: Constellation, p: np.ndarray) -> bool:
    try:
        ring_probabilities(c, p)
    except ValueError:
        return False
    return True


def pmf_moments(c: Constellation, p: np.ndarray):
    """Return (sigma2, e4, mu4, entropy_bits) of the shaped constellation."""
    p = validate_pmf(c, p)
    e2 = np.abs(c.points) ** 2
    sigma2 = float(p @ e2)
    e4 = float(p @ e2**2)
    mu4 = e4 / sigma2**2
    nz = p > 0
    entropy = float(-(p[nz] @ np.log2(p[nz])))
    return sigma2, e4, mu4, entropy


def nearest_neighbor_pairs(c: Constellation) -> np.ndarray:
    """Boolean (order, order) matrix: True where |x_i - x_j| == d_min."""
    d = np.abs(c.points[:, None] - c.points[None, :])
    return np.abs(d - c.d_min) < RING_TOL


def hamming_distance_matrix(c: Constellation) -> np.ndarray:
    x = c.labels[:, None] ^ c.labels[None, :]
    return np.array([[bin(v).count("1") for v in row] for row in x])


def hamming_matrix(c: Constellation) -> np.ndarray:
    """Ring-to-ring total Hamming weight over nearest-neighbor pairs.

    C[r, s] sums the bit-label Hamming distances from every point on ring r
    to each of its minimum-distance neighbors on ring s.
    """
    nn = nearest_neighbor_pairs(c)
    dh = hamming_distance_matrix(c)
    k = c.n_rings
    out = np.zeros((k, k))
    for i in range(c.order):
        for j in np.flatnonzero(nn[i]):
            out[c.ring_index[i], c.ring_index[j]] += dh[i, j]
    return out


def save_pmf_csv(path, c: Constellation, p: np.ndarray) -> None:
    """Write the PMF as CSV: point_index, re, im, label_bits, ring_index, probability."""
    p = validate_pmf(c, p)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("point_index,re,im,label_bits,ring_index,probability\n")
        for i in range(c.order):
            fh.write(
                f"{i},{float(c.points[i].real)!r},{float(c.points[i].imag)!r},"
                f"{c.label_bits(i)},{c.ring_index[i]},{float(p[i])!r}\n"
            )


def load_pmf_csv(path, c: Constellation) -> np.ndarray:
    rows = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    p = np.zeros(c.order)
    p[rows["point_index"]] = rows["probability"]
    return validate_pmf(c, p)
