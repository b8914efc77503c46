import numpy as np
import pytest

from eogcycle.dsp import preprocess
from eogcycle.pipeline import cycles_to_dataset, trials_to_cycles
from eogcycle.synth import (CLASSES, GenSpec, GenSpecError, gen_dataset,
                            gen_trial, list_trial_stems, load_trial,
                            save_trial)


def test_right_trial_polarity(quiet_spec):
    rec = gen_trial("Right", quiet_spec, 0)
    assert rec.ch_h.max() > 0.10
    assert np.allclose(rec.ch_v, 0.0)  # noiseless: silent channel stays zero
    assert rec.ch_h.min() >= 0.0


def test_stare_noiseless_is_zero(quiet_spec):
    rec = gen_trial("Stare", quiet_spec, 0)
    assert np.array_equal(rec.ch_h, np.zeros(len(rec)))
    assert np.array_equal(rec.ch_v, np.zeros(len(rec)))
    assert rec.placements == ()


def test_downleft_minima_aligned_default_spec():
    # Default spec, trial 0: every pulse drives both channels below -0.10 V
    # near the logged center (checked on the raw arrays).
    spec = GenSpec(seed=0)
    rec = gen_trial("DownLeft", spec, 0)
    for p in rec.placements:
        lo = max(0, p.center_index - 60)
        hi = p.center_index + 60
        assert rec.ch_h[lo:hi].min() < -0.10
        assert rec.ch_v[lo:hi].min() < -0.10
        assert p.amplitude_h < 0 and p.amplitude_v < 0
        # aligned: both channel minima sit inside the same pulse window
        assert abs(lo + rec.ch_h[lo:hi].argmin() - p.center_index) <= 60
        assert abs(lo + rec.ch_v[lo:hi].argmin() - p.center_index) <= 60


@pytest.mark.parametrize("label,h_sign,v_sign", [
    ("Right", 1, 0), ("Left", -1, 0), ("Up", 0, 1), ("Down", 0, -1),
    ("Blink", 0, 1), ("UpLeft", -1, 1), ("UpRight", 1, 1),
    ("DownLeft", -1, -1), ("DownRight", 1, -1),
])
def test_polarity_mapping(quiet_spec, label, h_sign, v_sign):
    rec = gen_trial(label, quiet_spec, 0)
    for p in rec.placements:
        assert np.sign(p.amplitude_h) == h_sign
        assert np.sign(p.amplitude_v) == v_sign


def test_pulse_spacing_and_margins(default_spec):
    for label in CLASSES:
        if label == "Stare":
            continue
        rec = gen_trial(label, default_spec, 1)
        centers = np.array([p.center_index for p in rec.placements])
        assert len(centers) >= 3
        assert np.all(np.diff(np.sort(centers)) >= 280)
        assert centers.min() >= 140
        assert centers.max() <= len(rec) - 140


def test_blink_narrower_and_taller_than_up(quiet_spec):
    blink = gen_trial("Blink", quiet_spec, 0)
    up = gen_trial("Up", quiet_spec, 0)

    def mean_width(rec):
        # width at half maximum of each pulse on ch_v
        widths = []
        for p in rec.placements:
            seg = rec.ch_v[max(0, p.center_index - 100):p.center_index + 100]
            widths.append(np.sum(np.abs(seg) > abs(p.amplitude_v) / 2))
        return np.mean(widths)

    assert mean_width(blink) < 0.6 * mean_width(up)
    assert np.mean([abs(p.amplitude_v) for p in blink.placements]) > \
        np.mean([abs(p.amplitude_v) for p in up.placements])


def test_gen_dataset_counts():
    spec = GenSpec(trials_per_class=15, seed=3)
    records = gen_dataset(spec)
    assert len(records) == 150
    for label in CLASSES:
        assert sum(1 for r in records if r.label == label) == 15


def test_gen_dataset_paper_corpus_size():
    spec = GenSpec(trials_per_class=45, seed=3)
    assert len(gen_dataset(spec)) == 450


def test_determinism_same_seed():
    spec = GenSpec(trials_per_class=1, seed=77)
    a = gen_dataset(spec)
    b = gen_dataset(spec)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.ch_h, rb.ch_h)
        assert np.array_equal(ra.ch_v, rb.ch_v)
        assert ra.placements == rb.placements


def test_trial_id_changes_output():
    spec = GenSpec(seed=77)
    a = gen_trial("Up", spec, 0)
    b = gen_trial("Up", spec, 1)
    assert not np.array_equal(a.ch_h, b.ch_h)


def test_unknown_label_rejected(default_spec):
    with pytest.raises(GenSpecError):
        gen_trial("Sideways", default_spec, 0)


def test_spec_invariants_enforced():
    with pytest.raises(GenSpecError):
        GenSpec(pulse_amplitude_v=(0.05, 0.8))  # below detection height
    with pytest.raises(GenSpecError):
        GenSpec(trials_per_class=0)
    with pytest.raises(GenSpecError):
        GenSpec(noise_std_v=-0.1)
    with pytest.raises(GenSpecError):
        GenSpec(trial_length_s=2.0)  # cannot hold 3 spaced pulses


def test_template_prominence_exceeds_detection_threshold(quiet_spec):
    # Noise-free templates keep >= 0.13 V of prominence on the designated
    # channel(s) so segmentation thresholds are guaranteed to fire.
    for label in CLASSES:
        if label == "Stare":
            continue
        rec = gen_trial(label, quiet_spec, 0)
        for p in rec.placements:
            if p.amplitude_h != 0:
                assert abs(p.amplitude_h) > 0.13
            if p.amplitude_v != 0:
                assert abs(p.amplitude_v) > 0.13


def test_trial_csv_round_trip(tmp_path, default_spec):
    rec = gen_trial("UpRight", default_spec, 0)
    save_trial(rec, str(tmp_path), seed=default_spec.seed)
    stems = list_trial_stems(str(tmp_path))
    assert len(stems) == 1
    loaded = load_trial(stems[0])
    assert loaded.label == rec.label
    assert loaded.trial_id == rec.trial_id
    assert loaded.sampling_rate_hz == rec.sampling_rate_hz
    np.testing.assert_allclose(loaded.ch_h, rec.ch_h, rtol=0, atol=1e-9)
    np.testing.assert_allclose(loaded.ch_v, rec.ch_v, rtol=0, atol=1e-9)
    assert [p.center_index for p in loaded.placements] == \
        [p.center_index for p in rec.placements]


def test_class_conditional_stationarity():
    # Two seeds, per-class feature means: at least 95% of the class/feature
    # z-scores lie within 3 standard errors (260 comparisons, so a hard
    # all-within-3-sigma bound would be statistically wrong).
    def feature_table(seed):
        spec = GenSpec(trials_per_class=6, seed=seed)
        cycles = trials_to_cycles(gen_dataset(spec))
        return cycles_to_dataset(cycles, spec.sampling_rate_hz)

    d1 = feature_table(11)
    d2 = feature_table(23)
    checked = 0
    within = 0
    for label in CLASSES:
        a = d1.features[d1.labels == label]
        b = d2.features[d2.labels == label]
        for j in range(a.shape[1]):
            se = np.sqrt(a[:, j].var(ddof=1) / a.shape[0]
                         + b[:, j].var(ddof=1) / b.shape[0])
            diff = abs(a[:, j].mean() - b[:, j].mean())
            if se == 0:
                assert diff == 0  # e.g. Stare gradients, identically zero
                continue
            checked += 1
            within += diff <= 3 * se
    assert checked > 200
    assert within / checked >= 0.95
