"""
Polarity-aware peak detection and fixed-length single-cycle extraction.

Peaks are detected on four searches (each raw channel and its negation) so
that positive and negative deflections are segmented separately; candidates
within the minimum peak distance are merged across searches, keeping the
largest absolute amplitude. Each surviving peak becomes the center of a
280-sample two-channel cycle. Stare trials, which carry no deflection
peaks, are tiled into fixed-stride segments instead.

The peak detector is deliberately self-contained (not scipy's): local
maxima satisfy x[i-1] < x[i] >= x[i+1] with plateaus resolved to their
leftmost sample, prominence is the standard topographic definition, and
the distance constraint keeps the highest peak among any group closer
than ``min_distance_samples`` (greedy by descending height, ties broken
toward the earlier index).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .synth import SignalRecord


class WindowError(ValueError):
    """Raised when a requested extraction window leaves the signal."""


class CycleFormatError(ValueError):
    """Raised when a cycle dump file does not parse."""


@dataclass(frozen=True)
class PeakParams:
    height_v: float = 0.10
    prominence_v: float = 0.13
    min_distance_samples: int = 140
    half_window_samples: int = 140

    def __post_init__(self) -> None:
        if self.height_v <= 0 or self.prominence_v <= 0:
            raise ValueError("height and prominence must be strictly positive")
        if self.min_distance_samples < 1:
            raise ValueError("min_distance_samples must be >= 1")
        if self.half_window_samples < 1:
            raise ValueError("half_window_samples must be >= 1")


@dataclass
class Cycle:
    """A fixed-length two-channel segment centered on a detected peak."""

    label: str
    ch_h: np.ndarray
    ch_v: np.ndarray
    peak_index_global: int
    polarity: str  # "positive" | "negative" | "none"
    peak_amplitude_v: float
    peak_channel: str  # "horizontal" | "vertical"
    trial_id: int = -1

    def __post_init__(self) -> None:
        self.ch_h = np.asarray(self.ch_h, dtype=np.float64)
        self.ch_v = np.asarray(self.ch_v, dtype=np.float64)
        if self.ch_h.shape != self.ch_v.shape:
            raise ValueError("cycle channels must have equal length")


def _local_maxima(x: np.ndarray) -> np.ndarray:
    # Literal rule x[i-1] < x[i] >= x[i+1]; a plateau's leftmost sample is
    # the only one with a strictly smaller left neighbor.
    return np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1


def peak_prominence(x: np.ndarray, index: int) -> float:
    """Topographic prominence of the sample at ``index``.

    Walk away from the peak on each side until a strictly higher sample
    (or the signal border); the side's base is the minimum over the walk.
    Prominence is peak height above the higher of the two bases.
    """
    h = x[index]
    left_min = h
    j = index - 1
    while j >= 0 and x[j] <= h:
        if x[j] < left_min:
            left_min = x[j]
        j -= 1
    right_min = h
    j = index + 1
    n = x.shape[0]
    while j < n and x[j] <= h:
        if x[j] < right_min:
            right_min = x[j]
        j += 1
    return h - max(left_min, right_min)


def _enforce_distance(indices: np.ndarray, heights: np.ndarray,
                      min_distance: int) -> np.ndarray:
    order = sorted(range(len(indices)), key=lambda k: (-heights[k], indices[k]))
    keep = np.ones(len(indices), dtype=bool)
    for k in order:
        if not keep[k]:
            continue
        close = np.abs(indices - indices[k]) < min_distance
        close[k] = False
        keep &= ~close
    return indices[keep]


def find_peaks(x: Sequence[float], params: PeakParams = PeakParams()) -> np.ndarray:
    """Indices of peaks satisfying height, prominence, and distance rules."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValueError("need at least 3 samples")
    cand = _local_maxima(x)
    cand = cand[x[cand] >= params.height_v]
    if cand.size:
        proms = np.array([peak_prominence(x, i) for i in cand])
        cand = cand[proms >= params.prominence_v]
    if cand.size:
        cand = np.sort(_enforce_distance(cand, x[cand],
                                         params.min_distance_samples))
    return cand


def extract_window(x: Sequence[float], center: int, half: int = 140) -> np.ndarray:
    """Samples [center - half, center + half); length exactly 2 * half."""
    x = np.asarray(x, dtype=np.float64)
    if center - half < 0 or center + half > x.shape[0]:
        raise WindowError(
            f"window [{center - half}, {center + half}) leaves signal "
            f"of length {x.shape[0]}")
    return x[center - half:center + half].copy()


_CHANNEL_RANK = {"vertical": 0, "horizontal": 1}


def detect_cycles(record: SignalRecord,
                  params: PeakParams = PeakParams()) -> list[Cycle]:
    """Detect deflection peaks on both channels and cut centered cycles.

    Four searches run (ch_h, ch_v, and their negations); candidates within
    ``min_distance_samples`` of a stronger candidate are merged away
    (largest |amplitude| wins; ties prefer the vertical channel, then the
    earlier index). Peaks too close to either trial edge are discarded
    rather than padded.
    """
    n = len(record)
    half = params.half_window_samples
    searches = (
        ("horizontal", record.ch_h, "positive"),
        ("vertical", record.ch_v, "positive"),
        ("horizontal", -record.ch_h, "negative"),
        ("vertical", -record.ch_v, "negative"),
    )
    candidates = []  # (index, channel, polarity, signed amplitude)
    for channel, sig, polarity in searches:
        raw = record.ch_h if channel == "horizontal" else record.ch_v
        for idx in find_peaks(sig, params):
            candidates.append((int(idx), channel, polarity, float(raw[idx])))

    candidates.sort(key=lambda c: (-abs(c[3]), _CHANNEL_RANK[c[1]], c[0]))
    kept: list[tuple[int, str, str, float]] = []
    for cand in candidates:
        if all(abs(cand[0] - k[0]) >= params.min_distance_samples for k in kept):
            kept.append(cand)
    kept.sort(key=lambda c: c[0])

    cycles = []
    for idx, channel, polarity, amplitude in kept:
        if idx < half or idx + half > n:
            continue
        cycles.append(Cycle(
            label=record.label,
            ch_h=extract_window(record.ch_h, idx, half),
            ch_v=extract_window(record.ch_v, idx, half),
            peak_index_global=idx,
            polarity=polarity,
            peak_amplitude_v=amplitude,
            peak_channel=channel,
            trial_id=record.trial_id,
        ))
    return cycles


def stare_segments(record: SignalRecord, length: int = 280,
                   stride: int = 280) -> list[Cycle]:
    """Tile a Stare trial into fixed-duration, peak-free segments."""
    if record.label != "Stare":
        raise ValueError(f"stare_segments needs a Stare trial, got {record.label!r}")
    n = len(record)
    if n < length:
        raise WindowError(f"trial of {n} samples shorter than one {length}-sample window")
    cycles = []
    for start in range(0, n - length + 1, stride):
        h = record.ch_h[start:start + length].copy()
        v = record.ch_v[start:start + length].copy()
        stacked = np.abs(np.stack([h, v]))
        ch_idx, local = np.unravel_index(int(np.argmax(stacked)), stacked.shape)
        cycles.append(Cycle(
            label=record.label,
            ch_h=h,
            ch_v=v,
            peak_index_global=start + int(local),
            polarity="none",
            peak_amplitude_v=float(stacked[ch_idx, local]),
            peak_channel="horizontal" if ch_idx == 0 else "vertical",
            trial_id=record.trial_id,
        ))
    return cycles


# ---------------------------------------------------------------------------
# Cycle dump CSV: one row per cycle with the six metadata columns followed
# by the horizontal then vertical samples (h_0..h_{L-1}, v_0..v_{L-1}).
# ---------------------------------------------------------------------------


def save_cycles(cycles: Sequence[Cycle], path: str) -> None:
    if not cycles:
        raise ValueError("no cycles to save")
    length = cycles[0].ch_h.shape[0]
    header = (["trial_id", "label", "peak_index", "polarity", "peak_channel",
               "peak_amplitude"]
              + [f"h_{i}" for i in range(length)]
              + [f"v_{i}" for i in range(length)])
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for c in cycles:
            if c.ch_h.shape[0] != length:
                raise ValueError("cycles have mixed window lengths")
            row = [str(c.trial_id), c.label, str(c.peak_index_global),
                   c.polarity, c.peak_channel, f"{c.peak_amplitude_v:.10g}"]
            row += [f"{v:.10g}" for v in c.ch_h]
            row += [f"{v:.10g}" for v in c.ch_v]
            f.write(",".join(row) + "\n")


def load_cycles(path: str) -> list[Cycle]:
    try:
        with open(path) as f:
            lines = [line.rstrip("\n") for line in f if line.strip()]
    except OSError as exc:
        raise CycleFormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise CycleFormatError(f"{path} is empty")
    header = lines[0].split(",")
    if len(header) < 8 or header[:6] != ["trial_id", "label", "peak_index",
                                         "polarity", "peak_channel",
                                         "peak_amplitude"]:
        raise CycleFormatError(f"{path}: unexpected header")
    length = (len(header) - 6) // 2
    cycles = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6 + 2 * length:
            raise CycleFormatError(f"{path}:{lineno}: wrong column count")
        samples = np.asarray(parts[6:], dtype=np.float64)
        cycles.append(Cycle(
            trial_id=int(parts[0]),
            label=parts[1],
            peak_index_global=int(parts[2]),
            polarity=parts[3],
            peak_channel=parts[4],
            peak_amplitude_v=float(parts[5]),
            ch_h=samples[:length],
            ch_v=samples[length:],
        ))
    return cycles
