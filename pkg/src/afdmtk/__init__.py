"""DAFT-s-AFDM ISAC toolkit: ambiguity analysis, shaped links, waveform trade-offs."""

__version__ = "0.1.0"

from .constellation import Constellation, build_qam, uniform_pmf, pmf_moments
from .waveform import WaveformConfig, modulation_matrix, modulate, demodulate
from .channel import DelayDopplerChannel, ThreePathModel, apply_channel
from .ambiguity import expected_af_closed, expected_af_mc, empirical_af
from .comm import equalize, map_detect, ber_union_bound, ber_ring_approx, simulate_ber
from .pcs import optimize_hybrid, pareto_sweep, shaped_pmf
from .sensing import range_doppler_map, ca_cfar, music_velocity

__all__ = [
    "Constellation", "build_qam", "uniform_pmf", "pmf_moments",
    "WaveformConfig", "modulation_matrix", "modulate", "demodulate",
    "DelayDopplerChannel", "ThreePathModel", "apply_channel",
    "expected_af_closed", "expected_af_mc", "empirical_af",
    "equalize", "map_detect", "ber_union_bound", "ber_ring_approx", "simulate_ber",
    "optimize_hybrid", "pareto_sweep", "shaped_pmf",
    "range_doppler_map", "ca_cfar", "music_velocity",
]
