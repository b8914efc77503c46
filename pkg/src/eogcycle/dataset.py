"""
Feature-table handling: SMOTE balancing with statistical validation,
cascade segmentation, stratified splitting, and standardization.

The cascade's three training segments:

    cardinal  all rows; the six lateral/diagonal classes collapse to "Lateral"
    right     lateral rows only; {Left, DownLeft, UpLeft} collapse to "LeftGroup"
    left      the three left-family classes, labels unchanged

Every row carries a provenance flag ("original" or "synthetic") so that
SMOTE output can be audited feature-by-feature with Welch's t-test.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special as _special

from .features import FEATURE_NAMES
from .synth import CLASSES

LATERAL_CLASSES = ("Left", "Right", "UpLeft", "UpRight", "DownLeft", "DownRight")
LEFT_FAMILY = ("Left", "DownLeft", "UpLeft")

CARDINAL_CLASSES = ("Stare", "Blink", "Up", "Down", "Lateral")
RIGHT_SEGMENT_CLASSES = ("Right", "UpRight", "DownRight", "LeftGroup")
LEFT_SEGMENT_CLASSES = ("Left", "UpLeft", "DownLeft")

ORIGINAL = "original"
SYNTHETIC = "synthetic"


class DatasetError(ValueError):
    """Raised for malformed datasets or infeasible resampling requests."""


class FeatureFormatError(ValueError):
    """Raised when a feature CSV does not parse."""


@dataclass
class Dataset:
    features: np.ndarray    # (n, 26)
    labels: np.ndarray      # (n,) str
    provenance: np.ndarray = field(default=None)  # (n,) str

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=object)
        if self.provenance is None:
            self.provenance = np.full(self.labels.shape, ORIGINAL, dtype=object)
        else:
            self.provenance = np.asarray(self.provenance, dtype=object)
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.provenance.shape != (n,):
            raise DatasetError("features, labels, and provenance must align")
        if not np.all(np.isfinite(self.features)):
            raise DatasetError("features contain non-finite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    def classes(self) -> list[str]:
        present = set(self.labels.tolist())
        ordered = [c for c in CLASSES if c in present]
        ordered += sorted(present - set(CLASSES))
        return ordered

    def class_counts(self) -> dict[str, int]:
        return {c: int(np.sum(self.labels == c)) for c in self.classes()}

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.features[mask], self.labels[mask],
                       self.provenance[mask])


def concat(parts: Sequence[Dataset]) -> Dataset:
    return Dataset(np.concatenate([p.features for p in parts]),
                   np.concatenate([p.labels for p in parts]),
                   np.concatenate([p.provenance for p in parts]))


# ---------------------------------------------------------------------------
# SMOTE
# ---------------------------------------------------------------------------


def smote(data: Dataset, target_per_class: int = 200, k_neighbors: int = 5,
          seed: int = 0) -> Dataset:
    """Oversample every class to ``target_per_class`` rows.

    Each synthetic row interpolates x + u * (z - x) between a random
    original row x and one of its k nearest original same-class neighbors
    z, with u uniform on [0, 1]. Original rows are never modified; the
    synthetic rows are appended with provenance "synthetic". Per-class RNG
    streams are derived from the seed, so results do not depend on class
    processing order.
    """
    classes = data.classes()
    new_rows = []
    new_labels = []
    for class_index, cls in enumerate(classes):
        mask = data.labels == cls
        count = int(np.sum(mask))
        orig_mask = mask & (data.provenance == ORIGINAL)
        originals = data.features[orig_mask]
        if originals.shape[0] < 2:
            raise DatasetError(f"class {cls!r} has fewer than 2 original samples")
        if target_per_class < count:
            raise DatasetError(
                f"class {cls!r} already has {count} rows, above the target "
                f"{target_per_class}")
        deficit = target_per_class - count
        if deficit == 0:
            continue
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed & ((1 << 64) - 1), class_index])))
        k_eff = min(k_neighbors, originals.shape[0] - 1)
        # Pairwise distances among originals; self excluded via argsort[1:].
        diffs = originals[:, None, :] - originals[None, :, :]
        dist = np.sqrt(np.sum(diffs ** 2, axis=2))
        np.fill_diagonal(dist, np.inf)
        neighbor_idx = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]
        for _ in range(deficit):
            i = int(rng.integers(originals.shape[0]))
            z = originals[neighbor_idx[i][int(rng.integers(k_eff))]]
            u = rng.uniform()
            new_rows.append(originals[i] + u * (z - originals[i]))
            new_labels.append(cls)
    if not new_rows:
        return Dataset(data.features.copy(), data.labels.copy(),
                       data.provenance.copy())
    synth = Dataset(np.asarray(new_rows), np.asarray(new_labels, dtype=object),
                    np.full(len(new_rows), SYNTHETIC, dtype=object))
    return concat([data, synth])


# ---------------------------------------------------------------------------
# Welch's t-test and SMOTE validation
# ---------------------------------------------------------------------------


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of Welch's unequal-variance t-test.

    The Student-t CDF is evaluated through the regularized incomplete
    beta function. Two zero-variance samples compare by mean: p = 1 when
    equal, 0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("both samples need at least 2 values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = a.shape[0], b.shape[0]
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return 1.0 if a.mean() == b.mean() else 0.0
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return float(_special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def validate_smote(orig: Dataset, augmented: Dataset) -> dict[str, float]:
    """Per-class mean of the Welch p-values across all features.

    Compares original rows against the synthetic rows of ``augmented``;
    classes without synthetic rows are omitted. The §-style acceptance
    gate is mean p > 0.05 for every class.
    """
    result: dict[str, float] = {}
    for cls in augmented.classes():
        orig_rows = orig.features[(orig.labels == cls)
                                  & (orig.provenance == ORIGINAL)]
        synth_rows = augmented.features[(augmented.labels == cls)
                                        & (augmented.provenance == SYNTHETIC)]
        if synth_rows.shape[0] < 2 or orig_rows.shape[0] < 2:
            continue
        pvals = [welch_ttest(orig_rows[:, j], synth_rows[:, j])
                 for j in range(orig_rows.shape[1])]
        result[cls] = float(np.mean(pvals))
    return result


# ---------------------------------------------------------------------------
# Cascade segmentation and splitting
# ---------------------------------------------------------------------------


def segment_dataset(data: Dataset) -> tuple[Dataset, Dataset, Dataset]:
    """(cardinal, right, left) datasets with remapped labels."""
    known = set(CLASSES)
    unknown = set(data.labels.tolist()) - known
    if unknown:
        raise DatasetError(f"unknown labels: {sorted(unknown)}")

    cardinal_labels = np.array(
        ["Lateral" if lab in LATERAL_CLASSES else lab for lab in data.labels],
        dtype=object)
    cardinal = Dataset(data.features.copy(), cardinal_labels,
                       data.provenance.copy())

    lateral_mask = np.isin(data.labels.astype(str), LATERAL_CLASSES)
    right = data.subset(lateral_mask)
    right = Dataset(right.features,
                    np.array(["LeftGroup" if lab in LEFT_FAMILY else lab
                              for lab in right.labels], dtype=object),
                    right.provenance)

    left_mask = np.isin(data.labels.astype(str), LEFT_FAMILY)
    left = data.subset(left_mask)
    return cardinal, right, left


def stratified_split(data: Dataset, train_fraction: float = 0.8,
                     seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per-class shuffled split; train counts use round-half-up."""
    if not (0.0 < train_fraction < 1.0):
        raise DatasetError("train_fraction must lie in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed & ((1 << 64) - 1))))
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in data.classes():
        idx = np.nonzero(data.labels == cls)[0]
        if idx.shape[0] < 2:
            raise DatasetError(f"class {cls!r} too small to split")
        rng.shuffle(idx)
        n_train = int(math.floor(train_fraction * idx.shape[0] + 0.5))
        n_train = min(max(n_train, 1), idx.shape[0] - 1)
        train_idx.extend(idx[:n_train])
        test_idx.extend(idx[n_train:])
    return data.subset(np.asarray(train_idx)), data.subset(np.asarray(test_idx))


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray  # zero-variance columns carry the surrogate 1.0

    def to_lists(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @staticmethod
    def from_lists(d: dict) -> "ScalerParams":
        return ScalerParams(np.asarray(d["means"], dtype=np.float64),
                            np.asarray(d["stds"], dtype=np.float64))


def fit_scaler(train: Dataset) -> ScalerParams:
    if len(train) == 0:
        raise DatasetError("cannot fit a scaler on an empty dataset")
    means = train.features.mean(axis=0)
    stds = train.features.std(axis=0)
    stds = np.where(stds == 0.0, 1.0, stds)
    return ScalerParams(means=means, stds=stds)


def apply_scaler(params: ScalerParams, data: Dataset) -> Dataset:
    scaled = (data.features - params.means) / params.stds
    return Dataset(scaled, data.labels.copy(), data.provenance.copy())


def scale_matrix(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - params.means) / params.stds


# ---------------------------------------------------------------------------
# Feature CSV: the 26 frozen names + label, with an optional trailing
# origin column for provenance round trips.
# ---------------------------------------------------------------------------


def save_features(data: Dataset, path: str, with_origin: bool = True) -> None:
    header = list(FEATURE_NAMES) + ["label"] + (["origin"] if with_origin else [])
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row, label, origin in zip(data.features, data.labels, data.provenance):
            cells = [f"{v:.10g}" for v in row] + [str(label)]
            if with_origin:
                cells.append(str(origin))
            f.write(",".join(cells) + "\n")


def load_features(path: str) -> Dataset:
    try:
        with open(path) as f:
            lines = [line.rstrip("\n") for line in f if line.strip()]
    except OSError as exc:
        raise FeatureFormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise FeatureFormatError(f"{path} is empty")
    header = lines[0].split(",")
    d = len(FEATURE_NAMES)
    if header[:d] != list(FEATURE_NAMES) or header[d:d + 1] != ["label"]:
        raise FeatureFormatError(
            f"{path}: header does not match the frozen feature-name contract")
    has_origin = len(header) > d + 1 and header[d + 1] == "origin"
    feats, labels, origins = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        expected = d + 1 + (1 if has_origin else 0)
        if len(parts) != expected:
            raise FeatureFormatError(f"{path}:{lineno}: wrong column count")
        try:
            feats.append([float(v) for v in parts[:d]])
        except ValueError as exc:
            raise FeatureFormatError(f"{path}:{lineno}: {exc}") from exc
        labels.append(parts[d])
        origins.append(parts[d + 1] if has_origin else ORIGINAL)
    return Dataset(np.asarray(feats), np.asarray(labels, dtype=object),
                   np.asarray(origins, dtype=object))
