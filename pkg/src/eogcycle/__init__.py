"""
eogcycle: single-cycle, ten-class EOG classification pipeline.

Submodules:

    synth      synthetic labeled two-channel trials with placement logs
    dsp        smoothing, zero-phase high-pass, wavelet denoising, SNR
    segment    polarity-aware peak detection, 280-sample cycle extraction
    features   13-per-channel feature set, correlation, PCA, LDA
    dataset    SMOTE, Welch t-test validation, segmentation, split, scaling
    neural     from-scratch ANN / 1-D CNN, training, 3-stage cascade
    evalbench  confusion metrics, CI/FoM, k-fold CV, latency harness
    pipeline   end-to-end orchestration and model bundles
    cli        command-line front end (`eogcycle --help`)
"""

from .synth import CLASSES, GenSpec, SignalRecord, gen_dataset, gen_trial
from .dsp import (FilterDesign, WaveletConfig, average_cycles, design_highpass,
                  filtfilt, median_detrend, moving_average, preprocess,
                  snr_db, wavelet_denoise)
from .segment import (Cycle, PeakParams, detect_cycles, extract_window,
                      find_peaks, stare_segments)
from .features import (FEATURE_NAMES, FeatureVector, ProjectionResult,
                       correlation_matrix, featurize, gradient_features, lda,
                       pca, stat_features)
from .dataset import (Dataset, ScalerParams, apply_scaler, fit_scaler,
                      segment_dataset, smote, stratified_split,
                      validate_smote, welch_ttest)
from .neural import (CascadeModel, NetworkSpec, NetworkWeights, TrainConfig,
                     build_ann, build_cnn, build_stage_ann, cascade_predict,
                     forward, load_weights, save_weights, train)
from .evalbench import (EvalReport, LatencySample, SingleCyclePipeline,
                        build_report, classification_index, confusion_matrix,
                        figure_of_merit, kfold_cv, latency_bench, metrics,
                        write_report)

__version__ = "0.1.0"
