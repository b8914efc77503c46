"""
Per-cycle feature extraction and linear analyses.

Thirteen features per channel: seven statistical (mean absolute amplitude,
max, min, sample standard deviation, skewness, excess kurtosis, mean FFT
magnitude) and six gradient-based (rising/falling gradients at 40%, 60%,
and 80% of the peak amplitude). Channel 1 is horizontal, channel 2
vertical; the 26-entry name order below is a frozen public contract.

Gradients: for peak amplitude A at sample t_peak and fraction p, the
rising gradient is p*A / ((t_peak - t_Rp)/fs) where t_Rp is the last
crossing of p*A before the peak (sub-sample, linearly interpolated);
falling gradients mirror this after the peak. Negative-polarity cycles
are rectified (|x|) first, so gradient values match the mirrored positive
case exactly; the signed peak amplitude lives in the cycle metadata.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg as _linalg

from .segment import Cycle

_PER_CHANNEL = ("mean_abs", "max", "min", "std", "skew", "kurt", "mean_fft",
                "rg40", "rg60", "rg80", "fg40", "fg60", "fg80")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"ch{c}_{name}" for c in (1, 2) for name in _PER_CHANNEL)

GRADIENT_FRACTIONS = (0.40, 0.60, 0.80)

_DEGENERATE_STD = 1e-12


@dataclass
class FeatureVector:
    values: np.ndarray  # 26 floats in FEATURE_NAMES order
    label: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")


def stat_features(x: Sequence[float]) -> np.ndarray:
    """(mean |x|, max, min, sample std, skewness, excess kurtosis, mean FFT).

    Std uses the n-1 denominator. Skewness is Fisher-Pearson g1 and
    kurtosis is excess kurtosis; both are 0 by convention when the sample
    std falls below 1e-12. Mean FFT magnitude averages |DFT(x)| over the
    one-sided bins 0..floor(N/2) of the unnormalized DFT.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        raise ValueError("need at least 4 samples")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d ** 2))
    std = float(np.sqrt(np.sum(d ** 2) / (n - 1)))
    if std < _DEGENERATE_STD:
        skew = 0.0
        kurt = 0.0
    else:
        skew = float(np.mean(d ** 3) / m2 ** 1.5)
        kurt = float(np.mean(d ** 4) / m2 ** 2 - 3.0)
    mean_fft = float(np.mean(np.abs(np.fft.rfft(x))))
    return np.array([float(np.mean(np.abs(x))), float(np.max(x)),
                     float(np.min(x)), std, skew, kurt, mean_fft])


class GradientResult(NamedTuple):
    values: np.ndarray  # (RG40, RG60, RG80, FG40, FG60, FG80) in V/s
    valid: np.ndarray   # False where a crossing was missing (value forced 0)


def _crossing_before(work: np.ndarray, peak: int, thr: float) -> float | None:
    j = peak - 1
    while j >= 0:
        if work[j] < thr:
            return j + (thr - work[j]) / (work[j + 1] - work[j])
        j -= 1
    return None


def _crossing_after(work: np.ndarray, peak: int, thr: float) -> float | None:
    n = work.shape[0]
    j = peak + 1
    while j < n:
        if work[j] < thr:
            return (j - 1) + (work[j - 1] - thr) / (work[j - 1] - work[j])
        j += 1
    return None


def gradient_features(x: Sequence[float], peak_local_index: int,
                      polarity: str, fs: float) -> GradientResult:
    """Rising/falling gradients at the 40/60/80% amplitude levels.

    A side that never returns to the threshold within the window yields a
    0 gradient with its validity flag cleared.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not (0 < peak_local_index < n - 1):
        raise ValueError("peak must lie strictly inside the window")
    if polarity == "positive":
        if x[peak_local_index] <= 0:
            raise ValueError("positive polarity requires a positive peak sample")
        work = x
    elif polarity == "negative":
        if x[peak_local_index] >= 0:
            raise ValueError("negative polarity requires a negative peak sample")
        work = np.abs(x)
    else:
        raise ValueError(f"polarity must be positive or negative, got {polarity!r}")

    amp = work[peak_local_index]
    values = np.zeros(6)
    valid = np.zeros(6, dtype=bool)
    for i, p in enumerate(GRADIENT_FRACTIONS):
        thr = p * amp
        t_r = _crossing_before(work, peak_local_index, thr)
        if t_r is not None:
            values[i] = thr / ((peak_local_index - t_r) / fs)
            valid[i] = True
        t_f = _crossing_after(work, peak_local_index, thr)
        if t_f is not None:
            values[3 + i] = thr / ((t_f - peak_local_index) / fs)
            valid[3 + i] = True
    return GradientResult(values, valid)


def _channel_features(ch: np.ndarray, polarity: str, is_owner: bool,
                      fs: float) -> np.ndarray:
    stats = stat_features(ch)
    if polarity == "none":
        return np.concatenate([stats, np.zeros(6)])
    if is_owner:
        anchor = int(np.argmax(ch)) if polarity == "positive" else int(np.argmin(ch))
        ch_polarity = polarity
    else:
        # Non-owner channel anchors on its own extremum.
        anchor = int(np.argmax(np.abs(ch)))
        ch_polarity = "positive" if ch[anchor] >= 0 else "negative"
    if ch[anchor] == 0.0 or anchor == 0 or anchor == ch.shape[0] - 1:
        grads = np.zeros(6)
    else:
        grads = gradient_features(ch, anchor, ch_polarity, fs).values
    return np.concatenate([stats, grads])


def featurize(cycle: Cycle, fs: float) -> FeatureVector:
    """The 26-entry feature vector of one cycle (ch1 = horizontal).

    The owner channel anchors its gradients on the polarity-consistent
    extremum (the window center for cycles cut by detect_cycles); the
    other channel uses its own extremum. Stare cycles (polarity "none")
    zero all twelve gradient features.
    """
    owner_h = cycle.peak_channel == "horizontal"
    values = np.concatenate([
        _channel_features(cycle.ch_h, cycle.polarity, owner_h, fs),
        _channel_features(cycle.ch_v, cycle.polarity, not owner_h, fs),
    ])
    return FeatureVector(values=values, label=cycle.label)


# ---------------------------------------------------------------------------
# Correlation, PCA, LDA
# ---------------------------------------------------------------------------


@dataclass
class ProjectionResult:
    components: np.ndarray               # (k, d) rows
    explained_variance_ratio: np.ndarray  # (k,)
    projected: np.ndarray                 # (n, k)


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson correlation of feature columns; zero-variance columns get a
    zero row/column with a unit diagonal."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need an (n >= 3, d) matrix")
    d = X.shape[1]
    stds = X.std(axis=0)
    live = stds > 0
    corr = np.zeros((d, d))
    if np.any(live):
        sub = np.corrcoef(X[:, live], rowvar=False)
        sub = np.atleast_2d(sub)
        corr[np.ix_(live, live)] = sub
    np.fill_diagonal(corr, 1.0)
    return corr


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # Deterministic orientation: the largest-magnitude loading is positive.
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def pca(X: np.ndarray, k: int) -> ProjectionResult:
    """Top-k principal components of the mean-centered covariance."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not (1 <= k <= min(n - 1, d)):
        raise ValueError(f"k={k} out of range for shape {X.shape}")
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = _fix_signs(eigvecs[:, order[:k]].T)
    total = float(eigvals.sum())
    ratios = eigvals[:k] / total if total > 0 else np.zeros(k)
    return ProjectionResult(components=components,
                            explained_variance_ratio=ratios,
                            projected=Xc @ components.T)


def lda(X: np.ndarray, labels: Sequence[str], k: int) -> ProjectionResult:
    """Top-k discriminants of S_b v = lambda (S_w + eps I) v.

    The ridge term eps = 1e-6 * trace(S_w) / d keeps the within-class
    scatter invertible. Components are unit-norm rows.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    for c in classes:
        if np.sum(labels == c) < 2:
            raise ValueError(f"class {c!r} has fewer than 2 samples")
    if not (1 <= k <= len(classes) - 1):
        raise ValueError(f"k={k} exceeds classes-1={len(classes) - 1}")
    n, d = X.shape
    mu = X.mean(axis=0)
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for c in classes:
        Xc = X[labels == c]
        mu_c = Xc.mean(axis=0)
        centered = Xc - mu_c
        s_w += centered.T @ centered
        gap = (mu_c - mu)[:, None]
        s_b += Xc.shape[0] * (gap @ gap.T)
    eps = 1e-6 * np.trace(s_w) / d
    if eps <= 0:
        eps = 1e-12
    eigvals, eigvecs = _linalg.eigh(s_b, s_w + eps * np.eye(d))
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    vecs = eigvecs[:, order[:k]].T
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    components = _fix_signs(vecs / norms)
    total = float(eigvals.sum())
    ratios = eigvals[:k] / total if total > 0 else np.zeros(k)
    return ProjectionResult(components=components,
                            explained_variance_ratio=ratios,
                            projected=(X - mu) @ components.T)
