"""
From-scratch dense and 1-D convolutional networks in numpy.

Architectures:

    standalone ANN   Dense 26-128-64-32-10, ReLU between hidden layers
    stage ANNs       Dense 26-64-32-C with C = 5 / 4 / 3
    CNN              Conv1D(1->32, k3, same) -> ReLU -> Conv1D(32->64, k3, same)
                     -> ReLU -> Flatten(1664) -> Dense 64 -> ReLU -> Dense C
    (softmax output everywhere)

Training is mini-batch backpropagation on cross-entropy with Adam or SGD.
Hidden (ReLU-fed) layers use He initialization; the softmax head starts
at zero so a fresh network predicts the uniform distribution and the
initial loss equals the ln(C) random-logit baseline. Everything is
deterministic under TrainConfig.seed.

Weights file layout (little-endian), shared by single nets and cascades:

    8 bytes   magic b"EOGCWGTS"
    u32       format version (1)
    32 bytes  sha256 over the concatenated architecture strings
    u32, ...  metadata: byte length + UTF-8 JSON
    u32       network count
    per network:
        u32, ...  architecture string: byte length + UTF-8
        u32       array count
        per array: u32 ndim, u64 per dim, float64 data

A file that ends early, fails the magic/digest, or disagrees with an
expected spec raises before any weights object is produced.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dataset import (CARDINAL_CLASSES, LEFT_SEGMENT_CLASSES,
                      RIGHT_SEGMENT_CLASSES)
from .synth import CLASSES

WEIGHTS_MAGIC = b"EOGCWGTS"
WEIGHTS_VERSION = 1


class NetworkSpecError(ValueError):
    """Raised when layer shapes do not compose."""


class TrainingError(RuntimeError):
    """Raised when training cannot proceed (empty data, NaN loss, ...)."""


class WeightsFormatError(ValueError):
    """Base error for weights-file problems."""


class CorruptWeightsError(WeightsFormatError):
    pass


class VersionMismatchError(WeightsFormatError):
    pass


class ShapeMismatchError(WeightsFormatError):
    pass


# ---------------------------------------------------------------------------
# Layer descriptors and specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class Conv1D:
    in_channels: int
    out_channels: int
    kernel: int  # stride 1, same (zero) padding


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple  # (features,) for dense input, (channels, length) for conv

    def __post_init__(self) -> None:
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                if len(shape) != 1 or shape[0] != layer.in_dim:
                    raise NetworkSpecError(
                        f"layer {i}: Dense expects ({layer.in_dim},), got {shape}")
                shape = (layer.out_dim,)
            elif isinstance(layer, Conv1D):
                if len(shape) != 2 or shape[0] != layer.in_channels:
                    raise NetworkSpecError(
                        f"layer {i}: Conv1D expects ({layer.in_channels}, L), "
                        f"got {shape}")
                shape = (layer.out_channels, shape[1])
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, (Relu, Softmax)):
                pass
            else:
                raise NetworkSpecError(f"unknown layer {layer!r}")
        if len(shape) != 1:
            raise NetworkSpecError("network must end with a vector output")
        if not isinstance(self.layers[-1], Softmax):
            raise NetworkSpecError("network must end with Softmax")

    @property
    def n_classes(self) -> int:
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.out_dim
        raise NetworkSpecError("no Dense layer found")

    def arch_string(self) -> str:
        parts = ["in:" + "x".join(str(d) for d in self.input_shape)]
        for layer in self.layers:
            if isinstance(layer, Dense):
                parts.append(f"dense:{layer.in_dim}>{layer.out_dim}")
            elif isinstance(layer, Conv1D):
                parts.append(f"conv1d:{layer.in_channels}>{layer.out_channels}k{layer.kernel}")
            elif isinstance(layer, Flatten):
                parts.append("flatten")
            elif isinstance(layer, Relu):
                parts.append("relu")
            else:
                parts.append("softmax")
        return ";".join(parts)

    def parameter_count(self) -> int:
        total = 0
        for layer in self.layers:
            if isinstance(layer, Dense):
                total += layer.in_dim * layer.out_dim + layer.out_dim
            elif isinstance(layer, Conv1D):
                total += (layer.out_channels * layer.in_channels * layer.kernel
                          + layer.out_channels)
        return total


def spec_from_arch_string(arch: str) -> NetworkSpec:
    parts = arch.split(";")
    if not parts or not parts[0].startswith("in:"):
        raise CorruptWeightsError(f"bad architecture string {arch!r}")
    input_shape = tuple(int(d) for d in parts[0][3:].split("x"))
    layers: list = []
    for part in parts[1:]:
        if part.startswith("dense:"):
            a, b = part[len("dense:"):].split(">")
            layers.append(Dense(int(a), int(b)))
        elif part.startswith("conv1d:"):
            a, rest = part[len("conv1d:"):].split(">")
            b, k = rest.split("k")
            layers.append(Conv1D(int(a), int(b), int(k)))
        elif part == "flatten":
            layers.append(Flatten())
        elif part == "relu":
            layers.append(Relu())
        elif part == "softmax":
            layers.append(Softmax())
        else:
            raise CorruptWeightsError(f"bad layer token {part!r}")
    return NetworkSpec(tuple(layers), input_shape)


def build_ann() -> NetworkSpec:
    """Standalone 10-class classifier: Dense 26-128-64-32-10."""
    return NetworkSpec((
        Dense(26, 128), Relu(),
        Dense(128, 64), Relu(),
        Dense(64, 32), Relu(),
        Dense(32, 10), Softmax(),
    ), input_shape=(26,))


def build_stage_ann(n_classes: int) -> NetworkSpec:
    """Cascade stage classifier: Dense 26-64-32-C."""
    return NetworkSpec((
        Dense(26, 64), Relu(),
        Dense(64, 32), Relu(),
        Dense(32, n_classes), Softmax(),
    ), input_shape=(26,))


def build_cnn(n_classes: int) -> NetworkSpec:
    """1-D CNN over the 26-entry vector treated as a 1-channel sequence."""
    return NetworkSpec((
        Conv1D(1, 32, 3), Relu(),
        Conv1D(32, 64, 3), Relu(),
        Flatten(),
        Dense(26 * 64, 64), Relu(),
        Dense(64, n_classes), Softmax(),
    ), input_shape=(1, 26))


# ---------------------------------------------------------------------------
# Parameters, forward, backward
# ---------------------------------------------------------------------------


@dataclass
class NetworkWeights:
    spec: NetworkSpec
    params: list  # per layer: {"W": ..., "b": ...} or None
    meta: dict = field(default_factory=dict)

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(
            self.spec,
            [None if p is None else {"W": p["W"].copy(), "b": p["b"].copy()}
             for p in self.params],
            dict(self.meta))


def init_weights(spec: NetworkSpec, rng: np.random.Generator,
                 meta: dict | None = None) -> NetworkWeights:
    """He init for hidden layers; the final (softmax head) layer is zeros."""
    parametric = [i for i, l in enumerate(spec.layers)
                  if isinstance(l, (Dense, Conv1D))]
    head = parametric[-1]
    params: list = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Dense):
            shape = (layer.in_dim, layer.out_dim)
            fan_in = layer.in_dim
            b_shape = (layer.out_dim,)
        elif isinstance(layer, Conv1D):
            shape = (layer.out_channels, layer.in_channels, layer.kernel)
            fan_in = layer.in_channels * layer.kernel
            b_shape = (layer.out_channels,)
        else:
            params.append(None)
            continue
        if i == head:
            w = np.zeros(shape)
        else:
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        params.append({"W": w, "b": np.zeros(b_shape)})
    return NetworkWeights(spec, params, meta or {})


def _as_batch(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if len(spec.input_shape) == 2:
        x = x.reshape(x.shape[0], *spec.input_shape)
    elif x.shape[1] != spec.input_shape[0]:
        raise NetworkSpecError(
            f"input width {x.shape[1]} does not match spec {spec.input_shape}")
    return x


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = w.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, k - 1 - pad)))
    windows = sliding_window_view(xp, k, axis=2)  # (B, C, L, K)
    return np.einsum("bclk,ock->bol", windows, w, optimize=True) + b[None, :, None]


def _forward_cached(spec: NetworkSpec, params: list, x: np.ndarray):
    inputs = []
    a = x
    for layer, p in zip(spec.layers, params):
        inputs.append(a)
        if isinstance(layer, Dense):
            a = a @ p["W"] + p["b"]
        elif isinstance(layer, Conv1D):
            a = _conv_forward(a, p["W"], p["b"])
        elif isinstance(layer, Flatten):
            a = a.reshape(a.shape[0], -1)
        elif isinstance(layer, Relu):
            a = np.maximum(a, 0.0)
        else:  # Softmax, numerically stabilized
            z = a - a.max(axis=1, keepdims=True)
            e = np.exp(z)
            a = e / e.sum(axis=1, keepdims=True)
    return inputs, a


def forward(weights: NetworkWeights, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a single 26-vector or an (n, 26) batch."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    single = x.ndim == 1
    batch = _as_batch(weights.spec, x)
    _, probs = _forward_cached(weights.spec, weights.params, batch)
    return probs[0] if single else probs


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    p = np.clip(probs[np.arange(targets.shape[0]), targets], 1e-12, None)
    return float(-np.mean(np.log(p)))


def loss_and_grads(weights: NetworkWeights, x: np.ndarray,
                   targets: np.ndarray):
    """Cross-entropy loss and its gradients for every parameter array."""
    spec = weights.spec
    batch = _as_batch(spec, x)
    inputs, probs = _forward_cached(spec, weights.params, batch)
    n = batch.shape[0]
    loss = cross_entropy(probs, targets)

    delta = probs.copy()
    delta[np.arange(n), targets] -= 1.0
    delta /= n

    grads: list = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        a_in = inputs[i]
        if isinstance(layer, Softmax):
            continue  # folded into the initial delta
        if isinstance(layer, Dense):
            grads[i] = {"W": a_in.T @ delta, "b": delta.sum(axis=0)}
            delta = delta @ weights.params[i]["W"].T
        elif isinstance(layer, Conv1D):
            w = weights.params[i]["W"]
            k = w.shape[2]
            pad = (k - 1) // 2
            xp = np.pad(a_in, ((0, 0), (0, 0), (pad, k - 1 - pad)))
            windows = sliding_window_view(xp, k, axis=2)
            grads[i] = {
                "W": np.einsum("bol,bclk->ock", delta, windows, optimize=True),
                "b": delta.sum(axis=(0, 2)),
            }
            # Input gradient: full correlation with the flipped kernel.
            dp = np.pad(delta, ((0, 0), (0, 0), (k - 1 - pad, pad)))
            dwin = sliding_window_view(dp, k, axis=2)
            delta = np.einsum("bolk,ock->bcl", dwin, w[:, :, ::-1], optimize=True)
        elif isinstance(layer, Flatten):
            delta = delta.reshape(a_in.shape)
        elif isinstance(layer, Relu):
            delta = delta * (a_in > 0)
    return loss, grads


def evaluate(weights: NetworkWeights, x: np.ndarray,
             targets: np.ndarray) -> tuple[float, float]:
    """(cross-entropy loss, accuracy) on a labeled batch."""
    probs = forward(weights, x)
    loss = cross_entropy(probs, targets)
    acc = float(np.mean(np.argmax(probs, axis=1) == targets))
    return loss, acc


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_patience: int = 20
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, params: list, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [None if p is None else {k: np.zeros_like(v) for k, v in p.items()}
                  for p in params]
        self.v = [None if p is None else {k: np.zeros_like(v) for k, v in p.items()}
                  for p in params]

    def step(self, params: list, grads: list) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if p is None:
                continue
            for key in p:
                m[key] = cfg.beta1 * m[key] + (1 - cfg.beta1) * g[key]
                v[key] = cfg.beta2 * v[key] + (1 - cfg.beta2) * g[key] ** 2
                p[key] -= cfg.learning_rate * (m[key] / bc1) / (
                    np.sqrt(v[key] / bc2) + cfg.eps)


class _SGD:
    def __init__(self, params: list, cfg: TrainConfig):
        self.cfg = cfg

    def step(self, params: list, grads: list) -> None:
        for p, g in zip(params, grads):
            if p is None:
                continue
            for key in p:
                p[key] -= self.cfg.learning_rate * g[key]


def _stratified_val_split(targets: np.ndarray, val_fraction: float,
                          rng: np.random.Generator):
    train_idx, val_idx = [], []
    for cls in np.unique(targets):
        idx = np.nonzero(targets == cls)[0]
        rng.shuffle(idx)
        n_val = min(max(int(round(val_fraction * idx.shape[0])), 1),
                    idx.shape[0] - 1)
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.asarray(train_idx), np.asarray(val_idx)


def train(spec: NetworkSpec, x: np.ndarray, labels: Sequence[str],
          class_order: Sequence[str], cfg: TrainConfig = TrainConfig()
          ) -> tuple[NetworkWeights, dict]:
    """Train a network on scaled features; returns (weights, history).

    A stratified ``val_fraction`` slice is held out to drive early
    stopping (patience on validation loss, best weights restored).
    History records per-epoch train/validation loss and accuracy. The
    whole procedure is a pure function of (spec, data, cfg.seed).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise TrainingError("empty training data")
    class_order = tuple(class_order)
    index = {c: i for i, c in enumerate(class_order)}
    try:
        targets = np.asarray([index[l] for l in labels], dtype=np.int64)
    except KeyError as exc:
        raise TrainingError(f"label {exc} not in class order {class_order}") from exc

    # Canonical row order (content-based) before any seeded shuffling, so
    # training is invariant to the permutation the rows arrive in.
    perm = np.lexsort(np.vstack([x.T, targets[None, :].astype(np.float64)]))
    x = x[perm]
    targets = targets[perm]

    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(cfg.seed & ((1 << 64) - 1))))
    weights = init_weights(spec, rng)
    optimizer = (_Adam if cfg.optimizer == "adam" else _SGD)(weights.params, cfg)

    tr_idx, val_idx = _stratified_val_split(targets, cfg.val_fraction, rng)
    x_tr, y_tr = x[tr_idx], targets[tr_idx]
    x_val, y_val = x[val_idx], targets[val_idx]

    history = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
    best_val = math.inf
    best_params = None
    best_epoch = -1
    stale = 0
    order = np.arange(x_tr.shape[0])
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        batch_losses = []
        batch_accs = []
        for start in range(0, order.shape[0], cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(weights, x_tr[sel], y_tr[sel])
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}; "
                    f"lr={cfg.learning_rate}, optimizer={cfg.optimizer}")
            probs = forward(weights, x_tr[sel])
            batch_accs.append(float(np.mean(np.argmax(probs, axis=1) == y_tr[sel])))
            optimizer.step(weights.params, grads)
            batch_losses.append(loss)
        val_loss, val_acc = evaluate(weights, x_val, y_val)
        history["train_loss"].append(float(np.mean(batch_losses)))
        history["train_acc"].append(float(np.mean(batch_accs)))
        history["val_loss"].append(val_loss)
        history["val_acc"].append(val_acc)
        if val_loss < best_val:
            best_val = val_loss
            best_params = [None if p is None else
                           {k: v.copy() for k, v in p.items()}
                           for p in weights.params]
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.early_stop_patience:
                break
    if best_params is not None:
        weights.params = best_params
    weights.meta = {
        "class_order": list(class_order),
        "seed": cfg.seed,
        "epochs_run": len(history["train_loss"]),
        "best_epoch": best_epoch,
        "final_train_loss": history["train_loss"][-1],
        "final_val_loss": history["val_loss"][-1],
    }
    return weights, history


# ---------------------------------------------------------------------------
# Cascade
# ---------------------------------------------------------------------------

STAGE1_CLASSES = CARDINAL_CLASSES
STAGE2_CLASSES = RIGHT_SEGMENT_CLASSES
STAGE3_CLASSES = LEFT_SEGMENT_CLASSES


@dataclass
class CascadeModel:
    stage1: NetworkWeights  # 5-class: Stare, Blink, Up, Down, Lateral
    stage2: NetworkWeights  # 4-class: Right, UpRight, DownRight, LeftGroup
    stage3: NetworkWeights  # 3-class: Left, UpLeft, DownLeft

    def __post_init__(self) -> None:
        for stage, n in ((self.stage1, 5), (self.stage2, 4), (self.stage3, 3)):
            if stage.spec.n_classes != n:
                raise NetworkSpecError(
                    f"cascade stage expected {n} classes, got "
                    f"{stage.spec.n_classes}")


def cascade_predict(model: CascadeModel, x: np.ndarray,
                    timer: Callable[[], float] | None = None):
    """Route one scaled 26-vector through the cascade.

    Returns (label, stages_invoked) or, when ``timer`` is provided,
    (label, stages_invoked, per-stage durations). Ties in any stage's
    argmax resolve to the lowest class index.
    """
    durations = []

    def run(stage: NetworkWeights, order):
        if timer is None:
            probs = forward(stage, x)
        else:
            t0 = timer()
            probs = forward(stage, x)
            durations.append(timer() - t0)
        return order[int(np.argmax(probs))]

    label = run(model.stage1, STAGE1_CLASSES)
    stages = 1
    if label == "Lateral":
        label = run(model.stage2, STAGE2_CLASSES)
        stages = 2
        if label == "LeftGroup":
            label = run(model.stage3, STAGE3_CLASSES)
            stages = 3
    if timer is None:
        return label, stages
    return label, stages, durations


def cascade_predict_batch(model: CascadeModel, x: np.ndarray) -> np.ndarray:
    """Vectorized cascade routing for an (n, 26) matrix of scaled features."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape[0], dtype=object)
    s1 = np.argmax(forward(model.stage1, x), axis=1)
    for i, cls in enumerate(STAGE1_CLASSES):
        if cls != "Lateral":
            out[s1 == i] = cls
    lateral = np.nonzero(s1 == STAGE1_CLASSES.index("Lateral"))[0]
    if lateral.size:
        s2 = np.argmax(forward(model.stage2, x[lateral]), axis=1)
        for i, cls in enumerate(STAGE2_CLASSES):
            if cls != "LeftGroup":
                out[lateral[s2 == i]] = cls
        leftish = lateral[s2 == STAGE2_CLASSES.index("LeftGroup")]
        if leftish.size:
            s3 = np.argmax(forward(model.stage3, x[leftish]), axis=1)
            for i, cls in enumerate(STAGE3_CLASSES):
                out[leftish[s3 == i]] = cls
    return out


# ---------------------------------------------------------------------------
# Weights file
# ---------------------------------------------------------------------------


def _digest(arch_strings: Sequence[str]) -> bytes:
    return hashlib.sha256("|".join(arch_strings).encode()).digest()


def save_networks(path: str, networks: Sequence[NetworkWeights],
                  meta: dict | None = None) -> None:
    """Serialize one or more networks atomically (temp file + rename)."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    arch_strings = [w.spec.arch_string() for w in networks]
    blob = bytearray()
    blob += WEIGHTS_MAGIC
    blob += struct.pack("<I", WEIGHTS_VERSION)
    blob += _digest(arch_strings)
    blob += struct.pack("<I", len(meta_bytes)) + meta_bytes
    blob += struct.pack("<I", len(networks))
    for w, arch in zip(networks, arch_strings):
        arch_b = arch.encode()
        blob += struct.pack("<I", len(arch_b)) + arch_b
        arrays = []
        for p in w.params:
            if p is not None:
                arrays.extend([p["W"], p["b"]])
        blob += struct.pack("<I", len(arrays))
        for arr in arrays:
            arr = np.ascontiguousarray(arr, dtype="<f8")
            blob += struct.pack("<I", arr.ndim)
            for dim in arr.shape:
                blob += struct.pack("<Q", dim)
            blob += arr.tobytes()
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(bytes(blob))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise CorruptWeightsError(f"{self.path}: truncated weights file")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_networks(path: str) -> tuple[list[NetworkWeights], dict]:
    """Parse a weights file; no partial results on corruption."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise CorruptWeightsError(f"cannot read {path}: {exc}") from exc
    r = _Reader(data, path)
    if r.take(len(WEIGHTS_MAGIC)) != WEIGHTS_MAGIC:
        raise CorruptWeightsError(f"{path}: bad magic")
    version = r.u32()
    if version != WEIGHTS_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {WEIGHTS_VERSION}")
    digest = r.take(32)
    meta = json.loads(r.take(r.u32()).decode())
    n_networks = r.u32()
    networks = []
    arch_strings = []
    for _ in range(n_networks):
        arch = r.take(r.u32()).decode()
        arch_strings.append(arch)
        spec = spec_from_arch_string(arch)
        n_arrays = r.u32()
        arrays = []
        for _ in range(n_arrays):
            ndim = r.u32()
            shape = tuple(r.u64() for _ in range(ndim))
            count = int(np.prod(shape)) if shape else 1
            arrays.append(np.frombuffer(r.take(8 * count),
                                        dtype="<f8").reshape(shape).copy())
        params: list = []
        ai = 0
        for layer in spec.layers:
            if isinstance(layer, (Dense, Conv1D)):
                if ai + 2 > len(arrays):
                    raise CorruptWeightsError(f"{path}: missing arrays")
                params.append({"W": arrays[ai], "b": arrays[ai + 1]})
                ai += 2
            else:
                params.append(None)
        if ai != len(arrays):
            raise CorruptWeightsError(f"{path}: array count mismatch")
        networks.append(NetworkWeights(spec, params, dict(meta)))
    if _digest(arch_strings) != digest:
        raise CorruptWeightsError(f"{path}: architecture digest mismatch")
    _validate_shapes(networks, path)
    return networks, meta


def _validate_shapes(networks: Sequence[NetworkWeights], path: str) -> None:
    for w in networks:
        for i, (layer, p) in enumerate(zip(w.spec.layers, w.params)):
            if isinstance(layer, Dense):
                want = (layer.in_dim, layer.out_dim)
            elif isinstance(layer, Conv1D):
                want = (layer.out_channels, layer.in_channels, layer.kernel)
            else:
                continue
            if p["W"].shape != want:
                raise ShapeMismatchError(
                    f"{path}: layer {i} ({layer}) expects W{want}, "
                    f"file has {p['W'].shape}")


def save_weights(path: str, weights: NetworkWeights) -> None:
    """Single-network convenience wrapper around save_networks."""
    save_networks(path, [weights], weights.meta)


def load_weights(path: str, expect: NetworkSpec | None = None) -> NetworkWeights:
    """Load a single network; optionally validate it against a spec.

    With ``expect``, the first layer whose shape disagrees is named in
    the raised ShapeMismatchError.
    """
    networks, meta = load_networks(path)
    if len(networks) != 1:
        raise WeightsFormatError(
            f"{path}: expected a single network, found {len(networks)}")
    w = networks[0]
    if expect is not None:
        got = w.spec.layers
        want = expect.layers
        for i in range(max(len(got), len(want))):
            g = got[i] if i < len(got) else None
            e = want[i] if i < len(want) else None
            if g != e:
                raise ShapeMismatchError(
                    f"{path}: layer {i} mismatch: file has {g}, spec wants {e}")
    w.meta = dict(meta)
    return w
