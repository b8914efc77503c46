"""
Command-line front end for the full pipeline:

    generate -> preprocess -> segment -> featurize -> balance -> train
             -> eval / crossval / bench, plus `metrics` scalar helpers
             and a `run-all` convenience chain.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 validation failure (e.g. the SMOTE t-test gate), 5 internal error.
Diagnostics go to stderr; every command writes the fully resolved
configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dsp, evalbench, pipeline, synth
from .config import ConfigError, DEFAULTS, dump_config, load_config
from .dataset import (DatasetError, FeatureFormatError, load_features,
                      save_features, smote, stratified_split, validate_smote)
from .dsp import WaveletConfig
from .neural import TrainConfig, WeightsFormatError
from .segment import CycleFormatError, PeakParams, load_cycles, save_cycles
from .synth import CLASSES, GenSpec, GenSpecError, TrialFormatError


class ValidationFailure(RuntimeError):
    """A data-quality gate failed (exit code 4)."""


def _eprint(*args) -> None:
    print(*args, file=sys.stderr)


def _gen_spec(cfg: dict) -> GenSpec:
    return GenSpec(
        sampling_rate_hz=cfg["gen.sampling_rate_hz"],
        trial_length_s=cfg["gen.trial_length_s"],
        trials_per_class=cfg["gen.trials_per_class"],
        pulse_amplitude_v=(cfg["gen.pulse_amplitude_min_v"],
                           cfg["gen.pulse_amplitude_max_v"]),
        pulse_width_samples=(cfg["gen.pulse_width_min"],
                             cfg["gen.pulse_width_max"]),
        noise_std_v=cfg["gen.noise_std_v"],
        drift_amplitude_v=cfg["gen.drift_amplitude_v"],
        drift_freq_hz=cfg["gen.drift_freq_hz"],
        seed=cfg["gen.seed"],
    )


def _peak_params(cfg: dict) -> PeakParams:
    return PeakParams(height_v=cfg["peaks.height_v"],
                      prominence_v=cfg["peaks.prominence_v"],
                      min_distance_samples=cfg["peaks.min_distance_samples"],
                      half_window_samples=cfg["peaks.half_window_samples"])


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(epochs=cfg["train.epochs"],
                       batch_size=cfg["train.batch_size"],
                       learning_rate=cfg["train.learning_rate"],
                       optimizer=cfg["train.optimizer"],
                       early_stop_patience=cfg["train.early_stop_patience"],
                       val_fraction=cfg["train.val_fraction"],
                       seed=cfg["train.seed"])


def _wavelet_config(cfg: dict) -> WaveletConfig:
    return WaveletConfig(basis=cfg["wavelet.basis"],
                         levels=cfg["wavelet.levels"],
                         threshold_rule=cfg["wavelet.threshold_rule"],
                         threshold_value=cfg["wavelet.threshold_value"],
                         mode=cfg["wavelet.mode"])


def _write_config(cfg: dict, target: str) -> None:
    # DIR/resolved.config for directory outputs, <file>.config otherwise.
    if os.path.isdir(target):
        dump_config(cfg, os.path.join(target, "resolved.config"))
    else:
        dump_config(cfg, target + ".config")


# ---------------------------------------------------------------------------
# Command implementations (shared by the subcommands and run-all)
# ---------------------------------------------------------------------------


def _do_generate(cfg: dict, out_dir: str, threads: int) -> None:
    spec = _gen_spec(cfg)
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(label, trial_id) for label in spec.classes
            for trial_id in range(spec.trials_per_class)]

    def one(job):
        label, trial_id = job
        record = synth.gen_trial(label, spec, trial_id)
        synth.save_trial(record, out_dir, seed=spec.seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, jobs))
    else:
        for job in jobs:
            one(job)
    _write_config(cfg, out_dir)
    _eprint(f"generated {len(jobs)} trials in {out_dir}")


def _do_preprocess(cfg: dict, in_dir: str, out_dir: str, use_wavelet: bool,
                   threads: int) -> None:
    stems = synth.list_trial_stems(in_dir)
    if not stems:
        raise TrialFormatError(f"no trials found in {in_dir}")
    os.makedirs(out_dir, exist_ok=True)
    wavelet_cfg = _wavelet_config(cfg)
    design = None

    def one(stem):
        nonlocal design
        record = synth.load_trial(stem)
        if design is None:
            design = dsp.design_highpass(cfg["filter.order"],
                                         cfg["filter.cutoff_hz"],
                                         record.sampling_rate_hz)
        conditioned = dsp.preprocess(record, use_wavelet=use_wavelet,
                                     smooth_window=cfg["smooth.window"],
                                     wavelet_cfg=wavelet_cfg, design=design)
        synth.save_trial(conditioned, out_dir, seed=cfg["gen.seed"])

    if threads > 1:
        one(stems[0])  # build the shared design before going parallel
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, stems[1:]))
    else:
        for stem in stems:
            one(stem)
    _write_config(cfg, out_dir)
    _eprint(f"preprocessed {len(stems)} trials into {out_dir}")


def _do_segment(cfg: dict, in_dir: str, out_csv: str) -> None:
    stems = synth.list_trial_stems(in_dir)
    if not stems:
        raise TrialFormatError(f"no trials found in {in_dir}")
    records = [synth.load_trial(stem) for stem in stems]
    cycles = pipeline.trials_to_cycles(records, _peak_params(cfg),
                                       preprocessed=True)
    if not cycles:
        raise ValidationFailure("no cycles detected in any trial")
    save_cycles(cycles, out_csv)
    _write_config(cfg, out_csv)
    _eprint(f"wrote {len(cycles)} cycles to {out_csv}")


def _do_featurize(cfg: dict, in_csv: str, out_csv: str) -> None:
    cycles = load_cycles(in_csv)
    data = pipeline.cycles_to_dataset(cycles, cfg["gen.sampling_rate_hz"])
    save_features(data, out_csv)
    _write_config(cfg, out_csv)
    _eprint(f"wrote {len(data)} feature rows to {out_csv}")


def _do_balance(cfg: dict, in_csv: str, out_csv: str, target: int) -> None:
    data = load_features(in_csv)
    balanced = smote(data, target_per_class=target,
                     k_neighbors=cfg["smote.k_neighbors"],
                     seed=cfg["smote.seed"])
    mean_p = validate_smote(data, balanced)
    save_features(balanced, out_csv)
    _write_config(cfg, out_csv)
    for cls in sorted(mean_p):
        _eprint(f"  {cls:<12} mean p = {mean_p[cls]:.4f}"
                f" {'ok' if mean_p[cls] > 0.05 else 'FAIL'}")
    failing = [c for c, p in mean_p.items() if p <= 0.05]
    if failing:
        raise ValidationFailure(
            f"SMOTE t-test gate failed for: {', '.join(sorted(failing))}")
    _eprint(f"balanced dataset written to {out_csv} "
            f"({len(balanced)} rows, gate passed)")


def _do_train(cfg: dict, kind: str, in_csv: str, out_path: str,
              smote_after_split: bool) -> None:
    data = load_features(in_csv)
    train_part, test_part = stratified_split(
        data, cfg["split.train_fraction"], cfg["split.seed"])
    if smote_after_split:
        # Hygiene-first mode: balance only the training rows, after the
        # split, so no synthetic point can leak test-set information.
        train_part = smote(train_part,
                           target_per_class=cfg["smote.target_per_class"],
                           k_neighbors=cfg["smote.k_neighbors"],
                           seed=cfg["smote.seed"])
    model = pipeline.fit_model(kind, train_part, _train_config(cfg))
    pipeline.save_model(out_path, model)
    with open(out_path + ".history.json", "w") as f:
        json.dump(model.history, f, indent=2, sort_keys=True)
    heldout = out_path + ".heldout.csv"
    save_features(test_part, heldout)
    _write_config(cfg, out_path)
    _eprint(f"trained {kind} on {len(train_part)} rows; model -> {out_path}; "
            f"held-out test rows -> {heldout}")


def _do_eval(cfg: dict, model_path: str, in_csv: str, report_dir: str) -> None:
    model = pipeline.load_model(model_path)
    data = load_features(in_csv)
    pred = model.predict(data.features)
    report = evalbench.build_report(data.labels.tolist(), list(pred), CLASSES)
    json_path, text_path = evalbench.write_report(report, report_dir)
    _write_config(cfg, report_dir)
    print(f"accuracy={report.accuracy:.4f} ci={report.ci:.4f} "
          f"({json_path}, {text_path})")


def _do_crossval(cfg: dict, kind: str, in_csv: str, folds: int,
                 report_dir: str | None) -> None:
    data = load_features(in_csv)
    factory = lambda: pipeline.ModelTrainer(kind, _train_config(cfg))
    reports, summary = evalbench.kfold_cv(data, factory, folds,
                                          cfg["cv.seed"])
    if report_dir:
        os.makedirs(report_dir, exist_ok=True)
        for i, rep in enumerate(reports, start=1):
            evalbench.write_report(rep, report_dir, stem=f"fold{i}")
        with open(os.path.join(report_dir, "summary.json"), "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
        _write_config(cfg, report_dir)
    print(f"{folds}-fold accuracy: mean={summary['mean_accuracy']:.4f} "
          f"std={summary['std_accuracy']:.4f}")


def _do_bench(cfg: dict, model_path: str, trials_dir: str, reps: int,
              report_dir: str | None) -> None:
    model = pipeline.load_model(model_path)
    stems = synth.list_trial_stems(trials_dir)
    if not stems:
        raise TrialFormatError(f"no trials found in {trials_dir}")
    records = [synth.load_trial(stem) for stem in stems]
    bench_pipeline = evalbench.SingleCyclePipeline(
        model, model.scaler, records[0].sampling_rate_hz,
        peak_params=_peak_params(cfg), smooth_window=cfg["smooth.window"],
        filter_order=cfg["filter.order"], cutoff_hz=cfg["filter.cutoff_hz"])
    latency, true_labels, pred_labels = evalbench.latency_bench(
        bench_pipeline, records, repetitions=reps,
        warmup=cfg["bench.warmup"])
    report = evalbench.build_report(true_labels, pred_labels, CLASSES,
                                    latency=latency)
    if report_dir:
        evalbench.write_report(report, report_dir)
        _write_config(cfg, report_dir)
    print(f"overall mean latency {latency.overall.mean:.3f} ms "
          f"(max {latency.overall.max:.3f} ms), accuracy "
          f"{report.accuracy:.4f}, CI {report.ci:.2f}, FoM {report.fom:.2f}")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eogcycle",
        description="Single-cycle ten-class EOG classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="key=value config file (dotted keys)")

    p = sub.add_parser("generate", help="synthesize labeled trials")
    add_config(p)
    p.add_argument("--out", required=True, help="output trial directory")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("preprocess", help="condition trials")
    add_config(p)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--wavelet", action="store_true",
                   help="replace the moving average with wavelet denoising")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("segment", help="detect peaks and cut cycles")
    add_config(p)
    p.add_argument("--in", dest="in_dir", required=True,
                   help="directory of preprocessed trials")
    p.add_argument("--out", required=True, help="cycles CSV path")

    p = sub.add_parser("featurize", help="extract the 26 features per cycle")
    add_config(p)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("balance", help="SMOTE + t-test validation gate")
    add_config(p)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target", type=int, default=None,
                   help="rows per class after balancing")

    p = sub.add_parser("train", help="train a model on balanced features")
    add_config(p)
    p.add_argument("--model", required=True, choices=pipeline.MODEL_KINDS)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--smote-after-split", action="store_true",
                   help="expect unbalanced input; split first, then balance "
                        "only the training rows (no synthetic leakage)")

    p = sub.add_parser("eval", help="evaluate a model on a feature CSV")
    add_config(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--report", required=True, help="report output directory")

    p = sub.add_parser("crossval", help="stratified k-fold cross-validation")
    add_config(p)
    p.add_argument("--model", required=True, choices=pipeline.MODEL_KINDS)
    p.add_argument("--in", dest="in_csv", required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--report", default=None)

    p = sub.add_parser("bench", help="latency benchmark with CI/FoM")
    add_config(p)
    p.add_argument("--model", required=True)
    p.add_argument("--trials", required=True, help="directory of raw trials")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--report", default=None)

    p = sub.add_parser("metrics", help="print CI or FoM scalars")
    msub = p.add_subparsers(dest="metric", required=True)
    pci = msub.add_parser("ci")
    pci.add_argument("--accuracy", type=float, required=True)
    pci.add_argument("--classes", type=int, required=True)
    pfom = msub.add_parser("fom")
    pfom.add_argument("--ci", type=float, required=True)
    pfom.add_argument("--latency", type=float, required=True,
                      help="system latency in ms")

    p = sub.add_parser("run-all", help="generate through eval in one go")
    add_config(p)
    p.add_argument("--out", required=True, help="working directory")
    p.add_argument("--model", default="ann", choices=pipeline.MODEL_KINDS)
    p.add_argument("--threads", type=int, default=1)

    return parser


def run(args: argparse.Namespace) -> int:
    cfg = load_config(getattr(args, "config", None))
    cmd = args.command
    if cmd == "generate":
        _do_generate(cfg, args.out, args.threads)
    elif cmd == "preprocess":
        _do_preprocess(cfg, args.in_dir, args.out, args.wavelet, args.threads)
    elif cmd == "segment":
        _do_segment(cfg, args.in_dir, args.out)
    elif cmd == "featurize":
        _do_featurize(cfg, args.in_csv, args.out)
    elif cmd == "balance":
        target = args.target if args.target is not None else cfg["smote.target_per_class"]
        _do_balance(cfg, args.in_csv, args.out, target)
    elif cmd == "train":
        _do_train(cfg, args.model, args.in_csv, args.out,
                  args.smote_after_split)
    elif cmd == "eval":
        _do_eval(cfg, args.model, args.in_csv, args.report)
    elif cmd == "crossval":
        folds = args.folds if args.folds is not None else cfg["cv.folds"]
        _do_crossval(cfg, args.model, args.in_csv, folds, args.report)
    elif cmd == "bench":
        reps = args.reps if args.reps is not None else cfg["bench.repetitions"]
        _do_bench(cfg, args.model, args.trials, reps, args.report)
    elif cmd == "metrics":
        if args.metric == "ci":
            print(f"{evalbench.classification_index(args.accuracy, args.classes):.2f}")
        else:
            print(f"{evalbench.figure_of_merit(args.ci, args.latency):.2f}")
    elif cmd == "run-all":
        out = args.out
        trials = os.path.join(out, "trials")
        pre = os.path.join(out, "preprocessed")
        cycles_csv = os.path.join(out, "cycles.csv")
        features_csv = os.path.join(out, "features.csv")
        balanced_csv = os.path.join(out, "balanced.csv")
        model_path = os.path.join(out, "model.bin")
        report_dir = os.path.join(out, "report")
        _do_generate(cfg, trials, args.threads)
        _do_preprocess(cfg, trials, pre, False, args.threads)
        _do_segment(cfg, pre, cycles_csv)
        _do_featurize(cfg, cycles_csv, features_csv)
        _do_balance(cfg, features_csv, balanced_csv,
                    cfg["smote.target_per_class"])
        _do_train(cfg, args.model, balanced_csv, model_path, False)
        _do_eval(cfg, model_path, model_path + ".heldout.csv", report_dir)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        _eprint(f"config error: {exc}")
        return 2
    except GenSpecError as exc:
        _eprint(f"config error: {exc}")
        return 2
    except (TrialFormatError, CycleFormatError, FeatureFormatError,
            WeightsFormatError, DatasetError) as exc:
        _eprint(f"data error: {exc}")
        return 3
    except ValidationFailure as exc:
        _eprint(f"validation failure: {exc}")
        return 4
    except Exception as exc:  # noqa: BLE001 -- CLI boundary
        _eprint(f"internal error: {type(exc).__name__}: {exc}")
        return 5


if __name__ == "__main__":
    sys.exit(main())
