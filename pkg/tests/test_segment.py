import numpy as np
import pytest

from eogcycle.dsp import preprocess
from eogcycle.segment import (Cycle, PeakParams, WindowError, detect_cycles,
                              extract_window, find_peaks, load_cycles,
                              peak_prominence, save_cycles, stare_segments)
from eogcycle.synth import GenSpec, gen_dataset, gen_trial

from oracles import brute_force_peaks


def hann_bump(n, center, width, amp):
    x = np.zeros(n)
    k = np.arange(width)
    lobe = amp * 0.5 * (1 - np.cos(2 * np.pi * (k + 1) / (width + 1)))
    x[center - width // 2:center - width // 2 + width] += lobe
    return x


def random_plateau_signal(rng, n):
    # Smoothed noise, quantized: plenty of plateaus and exact ties.
    x = rng.normal(size=n)
    kernel = np.ones(7) / 7
    x = np.convolve(x, kernel, mode="same") * 0.4
    return np.round(x, 2)


# ---------------------------------------------------------------------------
# find_peaks
# ---------------------------------------------------------------------------


def test_flat_zero_no_peaks():
    assert find_peaks(np.zeros(500)).size == 0


def test_single_bump():
    x = hann_bump(1000, 400, 81, 0.5)
    peaks = find_peaks(x)
    assert peaks.tolist() == [int(np.argmax(x))]


def test_two_close_bumps_keep_higher():
    x = hann_bump(1000, 400, 61, 0.5) + hann_bump(1000, 500, 61, 0.3)
    params = PeakParams(min_distance_samples=140)
    peaks = find_peaks(x, params)
    assert peaks.tolist() == brute_force_peaks(x, params)
    assert len(peaks) == 1
    assert abs(x[peaks[0]] - 0.5) < 0.02


def test_matches_brute_force_on_random_signals(rng):
    params = PeakParams(height_v=0.10, prominence_v=0.13,
                        min_distance_samples=25)
    for _ in range(200):
        n = int(rng.integers(50, 1200))
        x = random_plateau_signal(rng, n)
        assert find_peaks(x, params).tolist() == brute_force_peaks(x, params)


def test_plateau_resolves_leftmost():
    x = np.array([0.0, 0.5, 0.5, 0.5, 0.0])
    params = PeakParams(height_v=0.1, prominence_v=0.1, min_distance_samples=1)
    assert find_peaks(x, params).tolist() == [1]


def test_shoulder_has_zero_prominence():
    x = np.array([0.0, 0.5, 0.5, 1.0, 0.0])
    assert peak_prominence(x, 1) == 0.0
    params = PeakParams(height_v=0.1, prominence_v=0.1, min_distance_samples=1)
    assert find_peaks(x, params).tolist() == [3]


def test_min_distance_pairwise(rng):
    params = PeakParams(height_v=0.05, prominence_v=0.05,
                        min_distance_samples=40)
    for _ in range(30):
        x = random_plateau_signal(rng, 800)
        peaks = find_peaks(x, params)
        if peaks.size > 1:
            assert np.min(np.diff(peaks)) >= 40


def test_scaling_never_removes_qualified_peaks(rng):
    params = PeakParams()
    for _ in range(30):
        x = random_plateau_signal(rng, 900) * 2.0
        base = set(find_peaks(x, params).tolist())
        for lam in (1.5, 3.0):
            scaled = set(find_peaks(lam * x, params).tolist())
            assert base <= scaled


def test_find_peaks_too_short():
    with pytest.raises(ValueError):
        find_peaks(np.zeros(2))


# ---------------------------------------------------------------------------
# extract_window
# ---------------------------------------------------------------------------


def test_extract_window_identities(rng):
    x = rng.normal(size=1000)
    win = extract_window(x, 200, 140)
    assert win.shape == (280,)
    np.testing.assert_array_equal(win, x[60:340])
    assert extract_window(x, 200, 140)[140] == x[200]


def test_extract_window_rejects_out_of_range(rng):
    x = rng.normal(size=1000)
    with pytest.raises(WindowError):
        extract_window(x, 100, 140)
    with pytest.raises(WindowError):
        extract_window(x, 900, 140)


# ---------------------------------------------------------------------------
# detect_cycles
# ---------------------------------------------------------------------------


def test_noiseless_right_trial(quiet_spec):
    rec = gen_trial("Right", quiet_spec, 0)
    cycles = detect_cycles(preprocess(rec))
    assert len(cycles) == len(rec.placements) == 3
    for c in cycles:
        assert c.polarity == "positive"
        assert c.peak_channel == "horizontal"
        assert c.ch_h.shape == (280,) and c.ch_v.shape == (280,)
        assert c.label == "Right"


def test_noiseless_downleft_negative_polarity(quiet_spec):
    rec = gen_trial("DownLeft", quiet_spec, 0)
    cycles = detect_cycles(preprocess(rec))
    assert len(cycles) >= 3
    assert all(c.polarity == "negative" for c in cycles)
    assert all(c.peak_amplitude_v < 0 for c in cycles)


def test_cycle_centered_on_peak(quiet_spec):
    rec = gen_trial("Up", quiet_spec, 0)
    for c in detect_cycles(preprocess(rec)):
        assert np.argmax(c.ch_v) == 140  # peak sample at local center


def test_detection_recall_default_noise():
    spec = GenSpec(trials_per_class=3, seed=9)
    records = gen_dataset(spec)
    matched = 0
    total_pulses = 0
    false_pos = 0
    for rec in records:
        if rec.label == "Stare":
            continue
        cycles = detect_cycles(preprocess(rec))
        centers = [c.peak_index_global for c in cycles]
        truth = [p.center_index for p in rec.placements
                 if 140 <= p.center_index <= len(rec) - 140]
        total_pulses += len(truth)
        used = set()
        for t in truth:
            hits = [i for i, c in enumerate(centers)
                    if abs(c - t) <= 20 and i not in used]
            if hits:
                used.add(hits[0])
                matched += 1
        false_pos += len(centers) - len(used)
    assert matched / total_pulses >= 0.95
    assert false_pos / total_pulses <= 0.05


def test_time_reversal_symmetry(rng):
    params = PeakParams(height_v=0.05, prominence_v=0.06,
                        min_distance_samples=30, half_window_samples=30)
    for _ in range(20):
        x = np.convolve(rng.normal(size=600), np.ones(9) / 9, mode="same")
        fwd = find_peaks(x, params)
        rev = find_peaks(x[::-1], params)
        assert sorted(599 - i for i in rev) == fwd.tolist()


def test_edge_peaks_discarded(quiet_spec):
    rec = gen_trial("Up", quiet_spec, 0)
    pre = preprocess(rec)
    params = PeakParams(half_window_samples=600)  # only mid-trial peaks fit
    cycles = detect_cycles(pre, params)
    for c in cycles:
        assert 600 <= c.peak_index_global <= len(rec) - 600
        assert c.ch_h.shape == (1200,)


# ---------------------------------------------------------------------------
# stare_segments
# ---------------------------------------------------------------------------


def test_stare_tiling(default_spec):
    rec = gen_trial("Stare", default_spec, 0)
    segments = stare_segments(rec)
    assert len(segments) == len(rec) // 280 == 8
    assert all(s.polarity == "none" for s in segments)
    assert [s.ch_h.shape[0] for s in segments] == [280] * 8


def test_stare_requires_stare(quiet_spec):
    rec = gen_trial("Up", quiet_spec, 0)
    with pytest.raises(ValueError):
        stare_segments(rec)


def test_stare_amplitude_is_max_abs(default_spec):
    rec = gen_trial("Stare", default_spec, 0)
    seg = stare_segments(rec)[0]
    expected = max(np.max(np.abs(seg.ch_h)), np.max(np.abs(seg.ch_v)))
    assert seg.peak_amplitude_v == expected


def test_stare_too_short():
    rec = gen_trial("Stare", GenSpec(trials_per_class=1, seed=1), 0)
    short = rec
    short.ch_h = rec.ch_h[:100]
    short.ch_v = rec.ch_v[:100]
    with pytest.raises(WindowError):
        stare_segments(short)


# ---------------------------------------------------------------------------
# cycle CSV round trip
# ---------------------------------------------------------------------------


def test_cycle_csv_round_trip(tmp_path, quiet_spec):
    rec = gen_trial("UpRight", quiet_spec, 0)
    cycles = detect_cycles(preprocess(rec))
    path = str(tmp_path / "cycles.csv")
    save_cycles(cycles, path)
    loaded = load_cycles(path)
    assert len(loaded) == len(cycles)
    for a, b in zip(cycles, loaded):
        assert (a.label, a.polarity, a.peak_channel, a.trial_id,
                a.peak_index_global) == \
            (b.label, b.polarity, b.peak_channel, b.trial_id,
             b.peak_index_global)
        np.testing.assert_allclose(a.ch_h, b.ch_h, atol=1e-9)
        np.testing.assert_allclose(a.ch_v, b.ch_v, atol=1e-9)
