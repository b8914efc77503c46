"""
Synthetic two-channel EOG trial generation.

Because no public corpus exists for the ten-class single-cycle task, this
module manufactures labeled trials whose morphology is known exactly:
raised-cosine (Hann) deflection pulses on the horizontal and/or vertical
channel, plus Gaussian sensor noise and a slow sinusoidal baseline drift.
Every trial ships with a placement log (pulse centers and amplitudes) so
downstream peak detection can be scored against ground truth.

Deflection sign conventions for the ten classes:

    Right     -> positive horizontal pulse
    Left      -> negative horizontal pulse
    Up        -> positive vertical pulse
    Down      -> negative vertical pulse
    Blink     -> short, tall positive vertical pulse (0.4x width, 1.5x amp)
    UpRight   -> +h and +v, simultaneous
    UpLeft    -> -h and +v
    DownRight -> +h and -v
    DownLeft  -> -h and -v
    Stare     -> no pulses (drift + noise only)

Generation is a pure function of (spec, label, trial_id): per-trial RNG
streams are derived from the seed, so trials can be produced in any order
or in parallel with identical results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

CLASSES = (
    "Stare",
    "Blink",
    "Up",
    "Down",
    "Left",
    "Right",
    "UpLeft",
    "UpRight",
    "DownLeft",
    "DownRight",
)

# (horizontal sign, vertical sign); 0 means the channel stays silent.
_POLARITY = {
    "Stare": (0, 0),
    "Blink": (0, +1),
    "Up": (0, +1),
    "Down": (0, -1),
    "Left": (-1, 0),
    "Right": (+1, 0),
    "UpLeft": (-1, +1),
    "UpRight": (+1, +1),
    "DownLeft": (-1, -1),
    "DownRight": (+1, -1),
}

_DIAGONALS = {"UpLeft", "UpRight", "DownLeft", "DownRight"}

# Matches the fixed cycle length used by segmentation (2 * 140 samples).
_MIN_PULSE_SPACING = 280

BLINK_WIDTH_FACTOR = 0.4
BLINK_AMP_FACTOR = 1.5


class GenSpecError(ValueError):
    """Raised when a GenSpec violates its invariants."""


@dataclass(frozen=True)
class GenSpec:
    """Parameters of the synthetic corpus.

    Defaults mirror the acquisition setup this corpus emulates: 125 Hz
    sampling, 20 s trials, pulse amplitudes safely above the 0.10 V
    peak-detection height threshold.
    """

    sampling_rate_hz: float = 125.0
    trial_length_s: float = 20.0
    classes: tuple[str, ...] = CLASSES
    trials_per_class: int = 15
    pulse_amplitude_v: tuple[float, float] = (0.3, 0.8)
    pulse_width_samples: tuple[int, int] = (60, 120)
    noise_std_v: float = 0.02
    drift_amplitude_v: float = 0.1
    drift_freq_hz: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sampling_rate_hz <= 0:
            raise GenSpecError("sampling_rate_hz must be > 0")
        if self.trials_per_class < 1:
            raise GenSpecError("trials_per_class must be >= 1")
        if self.pulse_amplitude_v[0] <= 0.10:
            raise GenSpecError(
                "pulse amplitude lower bound must exceed the 0.10 V "
                "detection height threshold"
            )
        if self.pulse_amplitude_v[0] > self.pulse_amplitude_v[1]:
            raise GenSpecError("pulse amplitude range is inverted")
        if self.pulse_width_samples[0] < 2:
            raise GenSpecError("pulse width must be at least 2 samples")
        if self.pulse_width_samples[0] > self.pulse_width_samples[1]:
            raise GenSpecError("pulse width range is inverted")
        if self.noise_std_v < 0:
            raise GenSpecError("noise_std_v must be >= 0")
        if self.n_samples < 3 * _MIN_PULSE_SPACING:
            raise GenSpecError(
                "trial too short to hold 3 pulses with 280-sample spacing"
            )
        unknown = set(self.classes) - set(CLASSES)
        if unknown:
            raise GenSpecError(f"unknown classes: {sorted(unknown)}")

    @property
    def n_samples(self) -> int:
        return int(round(self.sampling_rate_hz * self.trial_length_s))


@dataclass(frozen=True)
class Placement:
    """Ground-truth record of one generated pulse."""

    center_index: int
    amplitude_h: float
    amplitude_v: float


@dataclass
class SignalRecord:
    """A labeled two-channel sampled voltage trace."""

    label: str
    ch_h: np.ndarray
    ch_v: np.ndarray
    sampling_rate_hz: float
    trial_id: int
    placements: tuple[Placement, ...] = field(default=())

    def __post_init__(self) -> None:
        self.ch_h = np.asarray(self.ch_h, dtype=np.float64)
        self.ch_v = np.asarray(self.ch_v, dtype=np.float64)
        if self.ch_h.shape != self.ch_v.shape or self.ch_h.ndim != 1:
            raise ValueError("ch_h and ch_v must be 1-D arrays of equal length")

    def __len__(self) -> int:
        return self.ch_h.shape[0]


def _trial_rng(spec: GenSpec, label: str, trial_id: int) -> np.random.Generator:
    # Independent stream per (seed, label, trial_id): parallel generation is
    # order-independent.
    seed64 = spec.seed & ((1 << 64) - 1)
    ss = np.random.SeedSequence([seed64, CLASSES.index(label), trial_id])
    return np.random.Generator(np.random.PCG64(ss))


def _hann_lobe(width: int) -> np.ndarray:
    # Unit-peak raised-cosine lobe that starts and ends at zero.
    k = np.arange(width)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * (k + 1) / (width + 1)))


def _pulse_centers(n: int, n_pulses: int, rng: np.random.Generator) -> np.ndarray:
    # Evenly sized slots with bounded jitter keep >=280-sample spacing and
    # >=140-sample edge margins without rejection sampling.
    slot = n / n_pulses
    jitter = min(100.0, (slot - _MIN_PULSE_SPACING) / 2.0)
    jitter = max(jitter, 0.0)
    centers = slot * (np.arange(n_pulses) + 0.5)
    centers = centers + rng.uniform(-jitter, jitter, size=n_pulses)
    return np.round(centers).astype(int)


def gen_trial(label: str, spec: GenSpec, trial_id: int) -> SignalRecord:
    """Generate one labeled trial.

    Non-Stare trials contain 3 to 5 pulses with centers at least 280
    samples apart and at least 140 samples from either edge, so every
    pulse yields exactly one extractable cycle. Identical
    (seed, label, trial_id) always reproduces the identical record.
    """
    if label not in CLASSES:
        raise GenSpecError(f"unknown label: {label!r}")
    rng = _trial_rng(spec, label, trial_id)
    n = spec.n_samples
    ch_h = np.zeros(n)
    ch_v = np.zeros(n)
    placements: list[Placement] = []

    sign_h, sign_v = _POLARITY[label]
    if label != "Stare":
        max_pulses = max(3, min(5, int(n // _MIN_PULSE_SPACING)))
        n_pulses = int(rng.integers(3, max_pulses + 1))
        centers = _pulse_centers(n, n_pulses, rng)
        for center in centers:
            amp = rng.uniform(*spec.pulse_amplitude_v)
            width = int(rng.integers(spec.pulse_width_samples[0],
                                     spec.pulse_width_samples[1] + 1))
            if label == "Blink":
                width = max(2, int(round(BLINK_WIDTH_FACTOR * width)))
                amp *= BLINK_AMP_FACTOR
            lobe = _hann_lobe(width)
            start = center - width // 2
            amp_h = 0.0
            amp_v = 0.0
            if sign_v != 0:
                amp_v = sign_v * amp
            if sign_h != 0:
                if label in _DIAGONALS:
                    # Partial horizontal/vertical overlap for diagonals.
                    amp_h = sign_h * amp * rng.uniform(0.8, 1.2)
                else:
                    amp_h = sign_h * amp
            if amp_h != 0.0:
                ch_h[start:start + width] += amp_h * lobe
            if amp_v != 0.0:
                ch_v[start:start + width] += amp_v * lobe
            placements.append(Placement(int(center), amp_h, amp_v))

    t = np.arange(n) / spec.sampling_rate_hz
    for ch in (ch_h, ch_v):
        if spec.drift_amplitude_v > 0:
            phase = rng.uniform(0.0, 2.0 * np.pi)
            ch += spec.drift_amplitude_v * np.sin(
                2.0 * np.pi * spec.drift_freq_hz * t + phase)
        if spec.noise_std_v > 0:
            ch += rng.normal(0.0, spec.noise_std_v, size=n)

    return SignalRecord(
        label=label,
        ch_h=ch_h,
        ch_v=ch_v,
        sampling_rate_hz=spec.sampling_rate_hz,
        trial_id=trial_id,
        placements=tuple(placements),
    )


def gen_dataset(spec: GenSpec) -> list[SignalRecord]:
    """Generate trials_per_class trials for every class in spec.classes."""
    records = []
    for label in spec.classes:
        for trial_id in range(spec.trials_per_class):
            records.append(gen_trial(label, spec, trial_id))
    return records


# ---------------------------------------------------------------------------
# Trial CSV serialization
#
# Per trial, three files keyed by a shared stem "trial_<label>_<id>":
#   <stem>.csv            header `index,ch_h,ch_v`, volts, 9+ significant digits
#   <stem>.meta           key=value lines: label, trial_id, sampling_rate_hz, seed
#   <stem>.placement.csv  header `center_index,amplitude_h,amplitude_v`
# ---------------------------------------------------------------------------


class TrialFormatError(ValueError):
    """Raised when a trial file does not parse."""


def trial_stem(label: str, trial_id: int) -> str:
    return f"trial_{label}_{trial_id:04d}"


def save_trial(record: SignalRecord, out_dir: str, seed: int | None = None) -> str:
    """Write the trial CSV, its metadata sidecar, and the placement log.

    Returns the shared file stem (path without extension).
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, trial_stem(record.label, record.trial_id))
    with open(stem + ".csv", "w") as f:
        f.write("index,ch_h,ch_v\n")
        for i, (h, v) in enumerate(zip(record.ch_h, record.ch_v)):
            f.write(f"{i},{h:.10g},{v:.10g}\n")
    with open(stem + ".meta", "w") as f:
        f.write(f"label={record.label}\n")
        f.write(f"trial_id={record.trial_id}\n")
        f.write(f"sampling_rate_hz={record.sampling_rate_hz:.10g}\n")
        f.write(f"seed={'' if seed is None else seed}\n")
    with open(stem + ".placement.csv", "w") as f:
        f.write("center_index,amplitude_h,amplitude_v\n")
        for p in record.placements:
            f.write(f"{p.center_index},{p.amplitude_h:.10g},{p.amplitude_v:.10g}\n")
    return stem


def load_trial(stem: str) -> SignalRecord:
    """Load a trial previously written by save_trial (stem without extension)."""
    meta: dict[str, str] = {}
    try:
        with open(stem + ".meta") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                key, _, value = line.partition("=")
                meta[key] = value
        data = np.loadtxt(stem + ".csv", delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise TrialFormatError(f"cannot read trial files for {stem}: {exc}") from exc
    if data.shape[1] != 3:
        raise TrialFormatError(f"{stem}.csv: expected 3 columns, got {data.shape[1]}")
    for key in ("label", "trial_id", "sampling_rate_hz"):
        if key not in meta:
            raise TrialFormatError(f"{stem}.meta: missing key {key!r}")
    placements: list[Placement] = []
    if os.path.exists(stem + ".placement.csv"):
        rows = np.loadtxt(stem + ".placement.csv", delimiter=",", skiprows=1, ndmin=2)
        for row in rows:
            if row.size:
                placements.append(Placement(int(row[0]), float(row[1]), float(row[2])))
    return SignalRecord(
        label=meta["label"],
        ch_h=data[:, 1],
        ch_v=data[:, 2],
        sampling_rate_hz=float(meta["sampling_rate_hz"]),
        trial_id=int(meta["trial_id"]),
        placements=tuple(placements),
    )


def list_trial_stems(in_dir: str) -> list[str]:
    """Sorted stems of all trials in a directory."""
    stems = []
    for name in sorted(os.listdir(in_dir)):
        if name.endswith(".meta"):
            stems.append(os.path.join(in_dir, name[:-len(".meta")]))
    return stems


def with_channels(record: SignalRecord, ch_h: np.ndarray,
                  ch_v: np.ndarray) -> SignalRecord:
    """Copy a record with replaced channel data (metadata passes through)."""
    return replace(record, ch_h=ch_h, ch_v=ch_v)
