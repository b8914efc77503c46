import numpy as np
import pytest

from eogcycle.dsp import preprocess
from eogcycle.features import (FEATURE_NAMES, FeatureVector, correlation_matrix,
                               featurize, gradient_features, lda, pca,
                               stat_features)
from eogcycle.pipeline import cycles_to_dataset, trials_to_cycles
from eogcycle.segment import Cycle, detect_cycles
from eogcycle.synth import GenSpec, gen_dataset, gen_trial

from oracles import frequency_domain_pipeline_peak

FS = 125.0


@pytest.fixture(scope="module")
def synthetic_features():
    spec = GenSpec(trials_per_class=4, seed=31)
    cycles = trials_to_cycles(gen_dataset(spec))
    return cycles_to_dataset(cycles, spec.sampling_rate_hz)


# ---------------------------------------------------------------------------
# stat_features
# ---------------------------------------------------------------------------


def test_stat_features_alternating():
    out = stat_features([1.0, -1.0, 1.0, -1.0])
    mean_abs, mx, mn, std, skew, kurt, _ = out
    assert mean_abs == 1.0 and mx == 1.0 and mn == -1.0
    assert abs(std - np.sqrt(4.0 / 3.0)) < 1e-12  # 1.1547, n-1 denominator
    assert skew == 0.0


def test_stat_features_constant_degenerate():
    out = stat_features(np.full(8, 3.25))
    assert out[3] == 0.0 and out[4] == 0.0 and out[5] == 0.0
    # DC-only spectrum: |DC| = 8*3.25, averaged over 5 one-sided bins
    assert abs(out[6] - 8 * 3.25 / 5) < 1e-12


def test_stat_features_mean_fft_hand_dft():
    out = stat_features(np.ones(4))
    # DFT magnitudes [4, 0, 0] over one-sided bins {0, 1, 2}
    assert abs(out[6] - 4.0 / 3.0) < 1e-12


@pytest.mark.parametrize("n", [5, 7, 9])
def test_mean_fft_dc_rule_odd_lengths(n):
    out = stat_features(np.full(n, 2.0))
    assert abs(out[6] - (2.0 * n) / (n // 2 + 1)) < 1e-12


def test_stat_features_too_short():
    with pytest.raises(ValueError):
        stat_features([1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# gradient_features
# ---------------------------------------------------------------------------


def triangle(amp, t_sec, fs=FS):
    n = int(round(t_sec * fs))
    up = amp * np.arange(n + 1) / n
    return np.concatenate([up, up[-2::-1]]), n  # peak at index n


def test_gradient_triangle_closed_form():
    amp, t_sec = 0.8, 1.0
    x, peak = triangle(amp, t_sec)
    result = gradient_features(x, peak, "positive", FS)
    rg40, rg60, rg80, fg40, fg60, fg80 = result.values
    assert np.all(result.valid)
    assert abs(rg40 - 0.4 * amp / (0.6 * t_sec)) / (0.4 * amp / 0.6) < 0.01
    assert abs(rg60 - 1.5 * amp / t_sec) / (1.5 * amp) < 0.01
    assert abs(rg80 - 4.0 * amp / t_sec) / (4.0 * amp) < 0.01
    np.testing.assert_allclose([rg40, rg60, rg80], [fg40, fg60, fg80],
                               rtol=1e-9)


def test_gradient_even_symmetry_general_pulse():
    k = np.arange(201)
    x = 0.5 * 0.5 * (1 - np.cos(2 * np.pi * k / 200))  # symmetric about 100
    result = gradient_features(x, 100, "positive", FS)
    np.testing.assert_allclose(result.values[:3], result.values[3:], rtol=1e-9)


def test_gradient_negated_pulse_matches():
    x, peak = triangle(0.5, 0.8)
    pos = gradient_features(x, peak, "positive", FS)
    neg = gradient_features(-x, peak, "negative", FS)
    np.testing.assert_allclose(pos.values, neg.values, rtol=1e-12)
    assert np.array_equal(pos.valid, neg.valid)


def test_gradient_missing_crossing_flagged():
    # Signal never falls to 40% of the peak on the right side.
    x = np.concatenate([np.linspace(0.0, 1.0, 50),
                        np.linspace(1.0, 0.9, 30)[1:]])
    result = gradient_features(x, 49, "positive", FS)
    assert result.values[3] == 0.0 and not result.valid[3]  # FG40 missing
    assert result.valid[0]  # RG40 present


def test_gradient_sub_sample_interpolation():
    # Crossing of 0.4*A on a 2-sample rise lands between samples.
    x = np.array([0.0, 0.3, 1.0, 0.3, 0.0])
    result = gradient_features(x, 2, "positive", 1.0)
    # threshold 0.4 crossed between x[1]=0.3 and x[2]=1.0 at 1 + 1/7
    expected_t = 1 + (0.4 - 0.3) / 0.7
    assert abs(result.values[0] - 0.4 / (2 - expected_t)) < 1e-12


def test_gradient_polarity_validation():
    x, peak = triangle(0.5, 0.5)
    with pytest.raises(ValueError):
        gradient_features(x, peak, "negative", FS)
    with pytest.raises(ValueError):
        gradient_features(x, 0, "positive", FS)
    with pytest.raises(ValueError):
        gradient_features(x, peak, "sideways", FS)


# ---------------------------------------------------------------------------
# featurize
# ---------------------------------------------------------------------------


def _up_cycle(noise=0.0, seed=0):
    spec = GenSpec(trials_per_class=1, noise_std_v=noise,
                   drift_amplitude_v=0.0, seed=seed)
    rec = gen_trial("Up", spec, 0)
    return rec, detect_cycles(preprocess(rec))


def test_featurize_contract(default_spec):
    rec = gen_trial("UpLeft", default_spec, 0)
    cycles = detect_cycles(preprocess(rec))
    fv = featurize(cycles[0], FS)
    assert fv.values.shape == (26,)
    assert np.all(np.isfinite(fv.values))
    assert fv.label == "UpLeft"
    assert len(FEATURE_NAMES) == 26
    assert FEATURE_NAMES[0] == "ch1_mean_abs" and FEATURE_NAMES[13] == "ch2_mean_abs"


def test_featurize_channel_independence():
    _, cycles = _up_cycle(noise=0.01)
    cycle = cycles[0]
    base = featurize(cycle, FS)
    perturbed = Cycle(label=cycle.label, ch_h=cycle.ch_h,
                      ch_v=cycle.ch_v + 0.05, peak_index_global=cycle.peak_index_global,
                      polarity=cycle.polarity, peak_amplitude_v=cycle.peak_amplitude_v,
                      peak_channel=cycle.peak_channel, trial_id=cycle.trial_id)
    after = featurize(perturbed, FS)
    np.testing.assert_array_equal(base.values[:13], after.values[:13])
    assert not np.array_equal(base.values[13:], after.values[13:])


def test_featurize_scale_covariance():
    _, cycles = _up_cycle(noise=0.01)
    cycle = cycles[0]
    lam = 2.5
    scaled = Cycle(label=cycle.label, ch_h=lam * cycle.ch_h,
                   ch_v=lam * cycle.ch_v, peak_index_global=cycle.peak_index_global,
                   polarity=cycle.polarity,
                   peak_amplitude_v=lam * cycle.peak_amplitude_v,
                   peak_channel=cycle.peak_channel, trial_id=cycle.trial_id)
    a = featurize(cycle, FS).values
    b = featurize(scaled, FS).values
    for ch in (0, 13):
        linear = [0, 1, 2, 3, 6, 7, 8, 9, 10, 11, 12]  # all but skew, kurt
        np.testing.assert_allclose(b[[ch + i for i in linear]],
                                   lam * a[[ch + i for i in linear]],
                                   rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(b[[ch + 4, ch + 5]], a[[ch + 4, ch + 5]],
                                   rtol=1e-9, atol=1e-9)


def test_featurize_stare_zeroes_gradients(default_spec):
    from eogcycle.segment import stare_segments
    rec = gen_trial("Stare", default_spec, 0)
    fv = featurize(stare_segments(rec)[0], FS)
    np.testing.assert_array_equal(fv.values[7:13], np.zeros(6))
    np.testing.assert_array_equal(fv.values[20:26], np.zeros(6))


def test_featurize_peak_survives_pipeline_vs_frequency_oracle():
    # Noiseless Up trial with a fixed pulse shape: the featurized ch2 max
    # must match an independent frequency-domain rendering of the same
    # smoothing + |H|^2 high-pass applied to the clean channel, within 2%.
    spec = GenSpec(trials_per_class=1, noise_std_v=0.0, drift_amplitude_v=0.0,
                   pulse_amplitude_v=(0.5, 0.5), pulse_width_samples=(100, 100),
                   seed=13)
    rec = gen_trial("Up", spec, 0)
    cycles = detect_cycles(preprocess(rec))
    assert cycles
    expected_peak = frequency_domain_pipeline_peak(
        rec.ch_v, spec.sampling_rate_hz, smooth_window=30, cutoff_hz=0.2,
        order=5)
    ch2_max = featurize(cycles[0], FS).values[13 + 1]
    assert abs(ch2_max - expected_peak) / expected_peak < 0.02


def test_feature_vector_validation():
    with pytest.raises(ValueError):
        FeatureVector(values=np.zeros(25), label="Up")
    with pytest.raises(ValueError):
        FeatureVector(values=np.full(26, np.nan), label="Up")


# ---------------------------------------------------------------------------
# correlation_matrix
# ---------------------------------------------------------------------------


def test_correlation_diagonal_and_symmetry(rng):
    X = rng.normal(size=(50, 6))
    corr = correlation_matrix(X)
    np.testing.assert_allclose(np.diag(corr), np.ones(6))
    np.testing.assert_allclose(corr, corr.T, atol=1e-12)


def test_correlation_anticorrelated_columns(rng):
    X = rng.normal(size=(40, 3))
    X[:, 2] = -X[:, 0]
    corr = correlation_matrix(X)
    assert abs(corr[0, 2] + 1.0) < 1e-12


def test_correlation_zero_variance_column(rng):
    X = rng.normal(size=(30, 4))
    X[:, 1] = 7.0
    corr = correlation_matrix(X)
    assert corr[1, 1] == 1.0
    assert np.all(corr[1, [0, 2, 3]] == 0.0)
    assert np.all(corr[[0, 2, 3], 1] == 0.0)


def test_correlation_needs_three_rows(rng):
    with pytest.raises(ValueError):
        correlation_matrix(rng.normal(size=(2, 5)))


def test_correlation_max_std_positive_on_synthetic(synthetic_features):
    X = synthetic_features.features
    corr = correlation_matrix(X)
    i_max = FEATURE_NAMES.index("ch1_max")
    i_std = FEATURE_NAMES.index("ch1_std")
    assert corr[i_max, i_std] > 0.5


# ---------------------------------------------------------------------------
# pca / lda
# ---------------------------------------------------------------------------


def test_pca_rank_one_data(rng):
    t = rng.normal(size=100)
    X = np.stack([2 * t, -t], axis=1)
    result = pca(X, 2)
    assert abs(result.explained_variance_ratio[0] - 1.0) < 1e-12


def test_pca_isotropic_cloud():
    X = np.random.default_rng(4).normal(size=(10000, 2))
    result = pca(X, 2)
    assert abs(result.explained_variance_ratio[0] - 0.5) < 0.03
    assert abs(result.explained_variance_ratio[1] - 0.5) < 0.03


def test_pca_orthonormal_components(synthetic_features):
    result = pca(synthetic_features.features, 5)
    gram = result.components @ result.components.T
    np.testing.assert_allclose(gram, np.eye(5), atol=1e-8)
    assert np.all(np.diff(result.explained_variance_ratio) <= 1e-12)


def test_pca_k_validation(rng):
    X = rng.normal(size=(10, 4))
    with pytest.raises(ValueError):
        pca(X, 0)
    with pytest.raises(ValueError):
        pca(X, 5)


def test_pca_deterministic_sign(rng):
    X = rng.normal(size=(60, 5))
    a = pca(X, 3)
    b = pca(X.copy(), 3)
    np.testing.assert_array_equal(a.components, b.components)
    for row in a.components:
        assert row[int(np.argmax(np.abs(row)))] > 0


def test_lda_separated_gaussians():
    g = np.random.default_rng(7)
    a = g.normal(0.0, 1.0, size=(200, 4))
    b = g.normal(0.0, 1.0, size=(200, 4))
    b[:, 0] += 10.0  # 10 sigma gap on one axis
    X = np.concatenate([a, b])
    labels = ["a"] * 200 + ["b"] * 200
    result = lda(X, labels, 1)
    proj = result.projected[:, 0]
    mu_a, mu_b = proj[:200].mean(), proj[200:].mean()
    pooled = np.sqrt(0.5 * (proj[:200].var(ddof=1) + proj[200:].var(ddof=1)))
    assert abs(mu_a - mu_b) > 5 * pooled


def test_lda_component_budget(synthetic_features):
    X = synthetic_features.features
    labels = synthetic_features.labels.tolist()
    result = lda(X, labels, 9)
    assert result.components.shape == (9, 26)
    with pytest.raises(ValueError):
        lda(X, labels, 10)  # 10 classes allow at most 9


def test_lda_identical_classes_no_separation(rng):
    base = rng.normal(size=(100, 3))
    X = np.concatenate([base, base])
    labels = ["a"] * 100 + ["b"] * 100
    result = lda(X, labels, 1)
    proj = result.projected[:, 0]
    gap = abs(proj[:100].mean() - proj[100:].mean())
    spread = proj.std()
    assert gap < 1e-6 * max(spread, 1.0)
