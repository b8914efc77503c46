"""
Evaluation framework: confusion-matrix metrics, stratified k-fold
cross-validation, the chance-corrected Classification Index and the
latency-aware Figure of Merit, plus a wall-clock latency harness for
end-to-end single-cycle inference.

    CI  = k * (accuracy - 1/k) / (1 - 1/k)
    FoM = CI * min(1, 250 ms / t_sys)

CI is 0 at chance level and k at perfect accuracy; FoM equals CI whenever
the system answers within the 250 ms human-reaction-time budget and decays
proportionally beyond it. t_sys is the overall mean latency.

The latency harness times preprocess -> segment -> featurize -> scale ->
predict for one raw 280-sample window with a monotonic clock, after a
mandatory warm-up; model construction and file I/O are never timed.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import dsp
from .dataset import Dataset, ScalerParams, scale_matrix
from .features import featurize
from .segment import Cycle, PeakParams, find_peaks
from .synth import CLASSES, SignalRecord

REACTION_TIME_MS = 250.0


class EvalError(ValueError):
    pass


def confusion_matrix(true: Sequence[str], pred: Sequence[str],
                     class_order: Sequence[str]) -> np.ndarray:
    """Counts with entry (i, j) = true class i predicted as class j."""
    if len(true) != len(pred):
        raise EvalError("true and pred must have equal length")
    index = {c: i for i, c in enumerate(class_order)}
    matrix = np.zeros((len(class_order), len(class_order)), dtype=np.int64)
    for t, p in zip(true, pred):
        if t not in index or p not in index:
            raise EvalError(f"label outside class order: {t!r}/{p!r}")
        matrix[index[t], index[p]] += 1
    return matrix


def metrics(confusion: np.ndarray):
    """(accuracy, precision, recall, f1, per_class) from a confusion matrix.

    Aggregates are support-weighted; a class with no predicted (or no
    true) instances contributes precision (recall) 0 instead of dividing
    by zero.
    """
    confusion = np.asarray(confusion)
    total = confusion.sum()
    if total == 0:
        raise EvalError("empty confusion matrix")
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    diag = np.diag(confusion).astype(np.float64)
    precision = np.divide(diag, predicted, out=np.zeros_like(diag),
                          where=predicted > 0)
    recall = np.divide(diag, support, out=np.zeros_like(diag),
                       where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag),
                   where=denom > 0)
    weights = support / total
    per_class = [{"precision": float(p), "recall": float(r), "f1": float(g),
                  "support": int(s)}
                 for p, r, g, s in zip(precision, recall, f1, support)]
    accuracy = float(diag.sum() / total)
    return (accuracy, float(np.sum(weights * precision)),
            float(np.sum(weights * recall)), float(np.sum(weights * f1)),
            per_class)


def classification_index(accuracy: float, k: int) -> float:
    """Chance-corrected, class-count-compensated accuracy."""
    if k < 2:
        raise EvalError("k must be >= 2")
    if not (0.0 <= accuracy <= 1.0):
        raise EvalError("accuracy must lie in [0, 1]")
    return k * (accuracy - 1.0 / k) / (1.0 - 1.0 / k)


def figure_of_merit(ci: float, t_sys_ms: float) -> float:
    """CI scaled by min(1, 250 / t_sys); penalizes slow systems only."""
    if t_sys_ms <= 0:
        raise EvalError("latency must be positive")
    return ci * min(1.0, REACTION_TIME_MS / t_sys_ms)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class LatencyStats:
    mean: float
    p50: float
    p95: float
    max: float

    @staticmethod
    def of(values_ms: Sequence[float]) -> "LatencyStats":
        arr = np.asarray(values_ms, dtype=np.float64)
        return LatencyStats(float(arr.mean()), float(np.percentile(arr, 50)),
                            float(np.percentile(arr, 95)), float(arr.max()))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "p50": self.p50, "p95": self.p95,
                "max": self.max}


@dataclass
class LatencySample:
    label: str
    elapsed_ms: float
    stages_invoked: int

    def __post_init__(self) -> None:
        if self.elapsed_ms <= 0:
            raise EvalError("elapsed_ms must be positive")


@dataclass
class LatencyReport:
    per_class: dict            # label -> LatencyStats
    overall: LatencyStats      # across all samples; .max labels the max reading
    stage_means: dict          # "Stage-1"... -> mean ms (cascades only)
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "per_class": {k: v.to_dict() for k, v in self.per_class.items()},
            "overall": self.overall.to_dict(),
            "stage_means": dict(self.stage_means),
            "n_samples": self.n_samples,
        }


@dataclass
class EvalReport:
    class_order: tuple
    confusion: np.ndarray
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: list
    k: int
    ci: float
    fom: float | None = None
    t_sys_ms: float | None = None
    latency: LatencyReport | None = None


def build_report(true: Sequence[str], pred: Sequence[str],
                 class_order: Sequence[str],
                 latency: LatencyReport | None = None) -> EvalReport:
    conf = confusion_matrix(true, pred, class_order)
    accuracy, precision, recall, f1, per_class = metrics(conf)
    k = len(class_order)
    ci = classification_index(accuracy, k)
    fom = None
    t_sys = None
    if latency is not None:
        t_sys = latency.overall.mean
        fom = figure_of_merit(ci, t_sys)
    return EvalReport(class_order=tuple(class_order), confusion=conf,
                      accuracy=accuracy, precision=precision, recall=recall,
                      f1=f1, per_class=per_class, k=k, ci=ci, fom=fom,
                      t_sys_ms=t_sys, latency=latency)


def report_to_dict(report: EvalReport) -> dict:
    out = {
        "class_order": list(report.class_order),
        "confusion": report.confusion.tolist(),
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "per_class": report.per_class,
        "k": report.k,
        "ci": report.ci,
        "fom": report.fom,
        "t_sys_ms": report.t_sys_ms,
        "latency": report.latency.to_dict() if report.latency else None,
    }
    return out


def report_from_dict(d: dict) -> EvalReport:
    latency = None
    if d.get("latency"):
        ld = d["latency"]
        latency = LatencyReport(
            per_class={k: LatencyStats(**v) for k, v in ld["per_class"].items()},
            overall=LatencyStats(**ld["overall"]),
            stage_means=dict(ld["stage_means"]),
            n_samples=ld["n_samples"],
        )
    return EvalReport(
        class_order=tuple(d["class_order"]),
        confusion=np.asarray(d["confusion"], dtype=np.int64),
        accuracy=d["accuracy"], precision=d["precision"], recall=d["recall"],
        f1=d["f1"], per_class=d["per_class"], k=d["k"], ci=d["ci"],
        fom=d.get("fom"), t_sys_ms=d.get("t_sys_ms"), latency=latency)


def write_report(report: EvalReport, out_dir: str,
                 stem: str = "report") -> tuple[str, str]:
    """Write the machine-readable JSON and the aligned text table.

    Returns (json_path, text_path). Re-parsing the JSON reproduces every
    number exactly (floats round-trip through repr).
    """
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, stem + ".json")
    text_path = os.path.join(out_dir, stem + ".txt")
    with open(json_path, "w") as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(text_path, "w") as f:
        f.write(render_report(report))
    return json_path, text_path


def load_report(json_path: str) -> EvalReport:
    with open(json_path) as f:
        return report_from_dict(json.load(f))


def render_report(report: EvalReport) -> str:
    lines = []
    lines.append(f"classes: {report.k}")
    lines.append(f"accuracy:  {report.accuracy:.4f}")
    lines.append(f"precision: {report.precision:.4f} (weighted)")
    lines.append(f"recall:    {report.recall:.4f} (weighted)")
    lines.append(f"f1:        {report.f1:.4f} (weighted)")
    lines.append(f"CI:        {report.ci:.4f}")
    if report.fom is not None:
        lines.append(f"FoM:       {report.fom:.4f} (t_sys mean {report.t_sys_ms:.3f} ms)")
    lines.append("")
    width = max(len(c) for c in report.class_order) + 2
    lines.append(f"{'class':<{width}}{'precision':>10}{'recall':>10}"
                 f"{'f1':>10}{'support':>9}" +
                 ("" if report.latency is None else
                  f"{'mean ms':>10}{'p50':>9}{'p95':>9}{'max':>9}"))
    for i, cls in enumerate(report.class_order):
        pc = report.per_class[i]
        row = (f"{cls:<{width}}{pc['precision']:>10.4f}{pc['recall']:>10.4f}"
               f"{pc['f1']:>10.4f}{pc['support']:>9d}")
        if report.latency is not None and cls in report.latency.per_class:
            st = report.latency.per_class[cls]
            row += f"{st.mean:>10.3f}{st.p50:>9.3f}{st.p95:>9.3f}{st.max:>9.3f}"
        lines.append(row)
    if report.latency is not None:
        for stage, mean in report.latency.stage_means.items():
            lines.append(f"{stage:<{width}}{'':>39}{mean:>10.3f}")
        ov = report.latency.overall
        lines.append(f"{'Overall (mean)':<{width}}{'':>39}{ov.mean:>10.3f}")
        lines.append(f"{'Overall (max)':<{width}}{'':>39}{ov.max:>10.3f}")
    lines.append("")
    lines.append("confusion matrix (rows = true, cols = predicted):")
    for i, cls in enumerate(report.class_order):
        row = " ".join(f"{v:>5d}" for v in report.confusion[i])
        lines.append(f"  {cls:<{width}}{row}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Stratified k-fold cross-validation
# ---------------------------------------------------------------------------


class FoldModel(Protocol):
    def fit(self, train: Dataset) -> None: ...
    def predict(self, features: np.ndarray) -> np.ndarray: ...


def stratified_folds(labels: np.ndarray, folds: int,
                     seed: int) -> list[np.ndarray]:
    """Disjoint, exhaustive fold index sets; per-class counts differ <= 1."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed & ((1 << 64) - 1))))
    assignments: list[list[int]] = [[] for _ in range(folds)]
    order = [c for c in CLASSES if c in set(labels.tolist())]
    order += sorted(set(labels.tolist()) - set(CLASSES))
    for cls in order:
        idx = np.nonzero(labels == cls)[0]
        if idx.shape[0] < folds:
            raise EvalError(f"class {cls!r} smaller than fold count {folds}")
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            assignments[i % folds].append(int(j))
    return [np.asarray(sorted(a)) for a in assignments]


def kfold_cv(data: Dataset, model_factory: Callable[[], FoldModel],
             folds: int = 5, seed: int = 0):
    """Per-fold EvalReports plus a mean/std accuracy summary."""
    fold_sets = stratified_folds(data.labels, folds, seed)
    class_order = tuple(data.classes())
    reports = []
    for i, val_idx in enumerate(fold_sets):
        mask = np.ones(len(data), dtype=bool)
        mask[val_idx] = False
        model = model_factory()
        model.fit(data.subset(mask))
        pred = model.predict(data.features[val_idx])
        reports.append(build_report(data.labels[val_idx].tolist(),
                                    list(pred), class_order))
    accs = np.asarray([r.accuracy for r in reports])
    summary = {
        "folds": folds,
        "mean_accuracy": float(accs.mean()),
        "std_accuracy": float(accs.std()),
        "mean_f1": float(np.mean([r.f1 for r in reports])),
        "mean_ci": float(np.mean([r.ci for r in reports])),
    }
    return reports, summary


# ---------------------------------------------------------------------------
# Latency harness
# ---------------------------------------------------------------------------


class CyclePredictor(Protocol):
    """A fully constructed model bundle that classifies one scaled vector."""

    def predict_vector(self, x: np.ndarray,
                       timer: Callable[[], float] | None) -> tuple:
        """Returns (label, stages_invoked, stage_durations)."""


class SingleCyclePipeline:
    """End-to-end single-cycle inference over one raw two-channel window.

    Construction precomputes the filter design and holds the scaler and
    model, so a timed call covers exactly: window preprocessing, in-window
    peak search, featurization, scaling, and the network forward pass.
    """

    def __init__(self, predictor: CyclePredictor, scaler: ScalerParams,
                 sampling_rate_hz: float,
                 peak_params: PeakParams = PeakParams(),
                 smooth_window: int = dsp.DEFAULT_SMOOTH_WINDOW,
                 filter_order: int = dsp.DEFAULT_FILTER_ORDER,
                 cutoff_hz: float = dsp.DEFAULT_CUTOFF_HZ):
        self.predictor = predictor
        self.scaler = scaler
        self.fs = sampling_rate_hz
        self.peak_params = peak_params
        self.smooth_window = smooth_window
        self.design = dsp.design_highpass(filter_order, cutoff_hz,
                                          sampling_rate_hz)

    def _condition(self, ch: np.ndarray) -> np.ndarray:
        smoothed = dsp.moving_average(ch, self.smooth_window)
        return dsp.median_detrend(dsp.filtfilt(self.design, smoothed))

    def infer_window(self, raw_h: np.ndarray, raw_v: np.ndarray,
                     timer: Callable[[], float] | None = None):
        """Classify one raw window; returns (label, stages, stage_times)."""
        h = self._condition(np.asarray(raw_h, dtype=np.float64))
        v = self._condition(np.asarray(raw_v, dtype=np.float64))
        best = None  # (|amp|, channel_rank, index, channel, polarity, amp)
        for channel, sig, polarity, rank in (
                ("horizontal", h, "positive", 1),
                ("vertical", v, "positive", 0),
                ("horizontal", -h, "negative", 1),
                ("vertical", -v, "negative", 0)):
            raw = h if channel == "horizontal" else v
            for idx in find_peaks(sig, self.peak_params):
                key = (-abs(raw[idx]), rank, idx)
                if best is None or key < best[0]:
                    best = (key, int(idx), channel, polarity, float(raw[idx]))
        if best is None:
            stacked = np.abs(np.stack([h, v]))
            ch_idx, local = np.unravel_index(int(np.argmax(stacked)),
                                             stacked.shape)
            cycle = Cycle(label="?", ch_h=h, ch_v=v,
                          peak_index_global=int(local), polarity="none",
                          peak_amplitude_v=float(stacked[ch_idx, local]),
                          peak_channel="horizontal" if ch_idx == 0 else "vertical")
        else:
            _, idx, channel, polarity, amp = best
            cycle = Cycle(label="?", ch_h=h, ch_v=v, peak_index_global=idx,
                          polarity=polarity, peak_amplitude_v=amp,
                          peak_channel=channel)
        vector = featurize(cycle, self.fs).values
        scaled = scale_matrix(self.scaler, vector[None, :])[0]
        return self.predictor.predict_vector(scaled, timer)


def _window_positions(record: SignalRecord, pipeline: SingleCyclePipeline,
                      window: int) -> list[int]:
    # Untimed set-up: locate cycle centers so the timed runs get realistic
    # windows. Stare trials tile; others use detected peaks on a
    # preprocessed copy, falling back to tiling when nothing is found.
    n = len(record)
    half = window // 2
    if record.label != "Stare":
        conditioned = dsp.preprocess(
            record, smooth_window=pipeline.smooth_window,
            design=pipeline.design)
        from .segment import detect_cycles
        centers = [c.peak_index_global
                   for c in detect_cycles(conditioned, pipeline.peak_params)]
        if centers:
            return [c - half for c in centers]
    return list(range(0, n - window + 1, window))


def latency_bench(pipeline: SingleCyclePipeline,
                  records: Sequence[SignalRecord], repetitions: int = 50,
                  warmup: int = 10):
    """Time end-to-end single-cycle inference with a monotonic clock.

    ``repetitions`` timed runs per class cycle round-robin over that
    class's windows, after ``warmup`` untimed runs (>= 10 enforced).
    Returns (LatencyReport, true_labels, predicted_labels).
    """
    if not records:
        raise EvalError("no records to bench")
    if repetitions < 1:
        raise EvalError("repetitions must be >= 1")
    warmup = max(warmup, 10)
    window = 2 * pipeline.peak_params.half_window_samples

    by_class: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    for record in records:
        starts = _window_positions(record, pipeline, window)
        for start in starts:
            by_class.setdefault(record.label, []).append(
                (record.ch_h[start:start + window].copy(),
                 record.ch_v[start:start + window].copy()))

    first = next(iter(by_class.values()))[0]
    for _ in range(warmup):
        pipeline.infer_window(first[0], first[1])

    clock = time.perf_counter
    samples: list[LatencySample] = []
    true_labels: list[str] = []
    pred_labels: list[str] = []
    stage_durations: dict[int, list[float]] = {}
    for label in sorted(by_class):
        windows = by_class[label]
        for rep in range(repetitions):
            raw_h, raw_v = windows[rep % len(windows)]
            t0 = clock()
            pred, stages, stage_times = pipeline.infer_window(
                raw_h, raw_v, timer=clock)
            elapsed_ms = (clock() - t0) * 1e3
            samples.append(LatencySample(label, elapsed_ms, stages))
            true_labels.append(label)
            pred_labels.append(pred)
            for si, dt in enumerate(stage_times, start=1):
                stage_durations.setdefault(si, []).append(dt * 1e3)

    per_class = {}
    for label in sorted(by_class):
        vals = [s.elapsed_ms for s in samples if s.label == label]
        per_class[label] = LatencyStats.of(vals)
    overall = LatencyStats.of([s.elapsed_ms for s in samples])
    stage_means = {f"Stage-{si}": float(np.mean(v))
                   for si, v in sorted(stage_durations.items())}
    report = LatencyReport(per_class=per_class, overall=overall,
                           stage_means=stage_means, n_samples=len(samples))
    return report, true_labels, pred_labels
