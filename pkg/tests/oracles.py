"""
Independent test oracles.

These deliberately re-derive results through different routes than the
library (numpy slicing instead of scan loops, quadrature instead of
special functions, frequency-domain instead of time-domain filtering) so
that agreement is evidence, not tautology.
"""

import math

import numpy as np
from scipy import integrate

from eogcycle.segment import PeakParams


def brute_force_peaks(x, params: PeakParams):
    """Exhaustive scanner: literal local-max rule, slice-based prominence,
    then greedy distance filtering by descending height."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    cands = [i for i in range(1, n - 1) if x[i - 1] < x[i] >= x[i + 1]]
    cands = [i for i in cands if x[i] >= params.height_v]

    def prominence(i):
        left = x[:i]
        higher = np.nonzero(left > x[i])[0]
        lo = left[higher[-1] + 1:] if higher.size else left
        lmin = lo.min() if lo.size else x[i]
        right = x[i + 1:]
        higher = np.nonzero(right > x[i])[0]
        ro = right[:higher[0]] if higher.size else right
        rmin = ro.min() if ro.size else x[i]
        return x[i] - max(lmin, rmin)

    cands = [i for i in cands if prominence(i) >= params.prominence_v]
    kept = []
    for i in sorted(cands, key=lambda j: (-x[j], j)):
        if all(abs(i - j) >= params.min_distance_samples for j in kept):
            kept.append(i)
    return sorted(kept)


def t_two_sided_p_by_quadrature(t, df):
    """Two-sided tail mass of the Student-t density, by numerical integration."""
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    density = lambda u: c * (1 + u * u / df) ** (-(df + 1) / 2)
    tail, _ = integrate.quad(density, abs(t), np.inf)
    return 2.0 * tail


def analytic_highpass_gain(freq_hz, cutoff_hz, order):
    """|H| of the ideal analog Butterworth high-pass (single pass)."""
    freq_hz = np.asarray(freq_hz, dtype=np.float64)
    return 1.0 / np.sqrt(1.0 + (cutoff_hz / freq_hz) ** (2 * order))


def frequency_domain_pipeline_peak(ch, fs, smooth_window, cutoff_hz, order):
    """Peak value after box smoothing + ideal zero-phase high-pass, done in
    the frequency domain (vs the library's time-domain SOS route).

    Valid for signals whose activity sits well away from the edges, where
    circular convolution effects are negligible.
    """
    ch = np.asarray(ch, dtype=np.float64)
    box = np.ones(smooth_window) / smooth_window
    smoothed = np.convolve(ch, box, mode="same")
    spectrum = np.fft.rfft(smoothed)
    freqs = np.fft.rfftfreq(ch.shape[0], d=1.0 / fs)
    gain = np.zeros_like(freqs)
    nonzero = freqs > 0
    # Forward + backward pass = squared magnitude, zero phase.
    gain[nonzero] = analytic_highpass_gain(freqs[nonzero], cutoff_hz, order) ** 2
    filtered = np.fft.irfft(spectrum * gain, n=ch.shape[0])
    filtered = filtered - np.median(filtered)
    return float(filtered.max())
