"""
End-to-end wiring: trials -> cycles -> features -> balanced dataset ->
trained model -> evaluation. The CLI is a thin front end over these
functions; tests drive them directly.

A fitted model bundle owns its scaler, so saved model files are
self-contained for inference (kind, class orders, scaler, and one or
three networks).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import dsp, neural
from .dataset import (Dataset, ORIGINAL, ScalerParams, apply_scaler,
                      fit_scaler, scale_matrix, segment_dataset)
from .features import featurize
from .neural import (CascadeModel, NetworkWeights, TrainConfig, build_ann,
                     build_cnn, build_stage_ann, cascade_predict,
                     cascade_predict_batch, forward)
from .segment import Cycle, PeakParams, detect_cycles, stare_segments
from .synth import CLASSES, SignalRecord

MODEL_KINDS = ("ann", "cnn", "cascade-ann", "cascade-cnn")


class PipelineError(ValueError):
    pass


def trials_to_cycles(records: Sequence[SignalRecord],
                     peak_params: PeakParams = PeakParams(),
                     use_wavelet: bool = False,
                     preprocessed: bool = False) -> list[Cycle]:
    """Preprocess (unless already done) and segment every trial."""
    cycles: list[Cycle] = []
    design = None
    for record in records:
        if preprocessed:
            conditioned = record
        else:
            if design is None or design.sampling_rate_hz != record.sampling_rate_hz:
                design = dsp.design_highpass(
                    sampling_rate_hz=record.sampling_rate_hz)
            conditioned = dsp.preprocess(record, use_wavelet=use_wavelet,
                                         design=design)
        if record.label == "Stare":
            window = 2 * peak_params.half_window_samples
            cycles.extend(stare_segments(conditioned, window, window))
        else:
            cycles.extend(detect_cycles(conditioned, peak_params))
    return cycles


def cycles_to_dataset(cycles: Sequence[Cycle], fs: float) -> Dataset:
    if not cycles:
        raise PipelineError("no cycles to featurize")
    vectors = [featurize(c, fs) for c in cycles]
    return Dataset(np.stack([v.values for v in vectors]),
                   np.asarray([v.label for v in vectors], dtype=object),
                   np.full(len(vectors), ORIGINAL, dtype=object))


# ---------------------------------------------------------------------------
# Fitted models
# ---------------------------------------------------------------------------


@dataclass
class FittedModel:
    kind: str
    scaler: ScalerParams
    networks: list  # [net] for standalone, [stage1, stage2, stage3] for cascades
    history: dict

    @property
    def cascade(self) -> CascadeModel | None:
        if self.kind.startswith("cascade"):
            return CascadeModel(*self.networks)
        return None

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Labels for an (n, 26) matrix of raw (unscaled) features."""
        x = scale_matrix(self.scaler, features)
        cascade = self.cascade
        if cascade is not None:
            return cascade_predict_batch(cascade, x)
        probs = forward(self.networks[0], x)
        order = self.networks[0].meta["class_order"]
        return np.asarray([order[i] for i in np.argmax(probs, axis=1)],
                          dtype=object)

    def predict_vector(self, x_scaled: np.ndarray,
                       timer: Callable[[], float] | None = None):
        """(label, stages_invoked, stage_durations) for one scaled vector.

        Used by the latency harness; standalone models report one stage
        and no per-stage timing rows.
        """
        cascade = self.cascade
        if cascade is not None:
            if timer is None:
                label, stages = cascade_predict(cascade, x_scaled)
                return label, stages, []
            return cascade_predict(cascade, x_scaled, timer=timer)
        probs = forward(self.networks[0], x_scaled)
        order = self.networks[0].meta["class_order"]
        return order[int(np.argmax(probs))], 1, []


def fit_model(kind: str, train: Dataset,
              cfg: TrainConfig = TrainConfig()) -> FittedModel:
    """Fit the scaler on ``train`` and train the requested model kind.

    Cascade kinds train three stage networks on the cardinal/right/left
    segment remappings of the same training rows.
    """
    if kind not in MODEL_KINDS:
        raise PipelineError(f"unknown model kind {kind!r}; "
                            f"choose from {MODEL_KINDS}")
    scaler = fit_scaler(train)
    scaled = apply_scaler(scaler, train)
    history: dict = {}
    networks: list[NetworkWeights] = []
    if kind in ("ann", "cnn"):
        spec = build_ann() if kind == "ann" else build_cnn(len(CLASSES))
        weights, hist = neural.train(spec, scaled.features, scaled.labels,
                                     CLASSES, cfg)
        networks.append(weights)
        history["standalone"] = hist
    else:
        conv = kind == "cascade-cnn"
        cardinal, right, left = segment_dataset(scaled)
        stage_sets = (
            ("stage1", cardinal, neural.STAGE1_CLASSES),
            ("stage2", right, neural.STAGE2_CLASSES),
            ("stage3", left, neural.STAGE3_CLASSES),
        )
        for name, subset, order in stage_sets:
            spec = build_cnn(len(order)) if conv else build_stage_ann(len(order))
            weights, hist = neural.train(spec, subset.features, subset.labels,
                                         order, cfg)
            networks.append(weights)
            history[name] = hist
    return FittedModel(kind=kind, scaler=scaler, networks=networks,
                       history=history)


def save_model(path: str, model: FittedModel) -> None:
    meta = {
        "kind": model.kind,
        "scaler": model.scaler.to_lists(),
        "class_orders": [w.meta.get("class_order") for w in model.networks],
        "train_meta": [dict(w.meta) for w in model.networks],
    }
    neural.save_networks(path, model.networks, meta)


def load_model(path: str) -> FittedModel:
    networks, meta = neural.load_networks(path)
    if "kind" not in meta or "scaler" not in meta:
        raise neural.WeightsFormatError(f"{path}: not a model bundle")
    for w, order, tm in zip(networks, meta["class_orders"], meta["train_meta"]):
        w.meta = dict(tm)
        w.meta["class_order"] = order
    return FittedModel(kind=meta["kind"],
                       scaler=ScalerParams.from_lists(meta["scaler"]),
                       networks=networks, history={})


class ModelTrainer:
    """kfold_cv adapter: a fresh model of a fixed kind per fold."""

    def __init__(self, kind: str, cfg: TrainConfig = TrainConfig()):
        self.kind = kind
        self.cfg = cfg
        self.model: FittedModel | None = None

    def fit(self, train: Dataset) -> None:
        self.model = fit_model(self.kind, train, self.cfg)

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise PipelineError("fit before predict")
        return self.model.predict(features)
