import numpy as np
import pytest

from conftest import vowel
from pitchforge.audio import Waveform
from pitchforge.errors import (
    FrameCountMismatchError,
    NoVoicedFramesError,
    SampleRateMismatchError,
)
from pitchforge.metrics import (
    AcceptancePolicy,
    delta_mean_pitch,
    envelope_mcd,
    evaluate_shift,
    mcd,
    mcd_from_cepstra,
)
from pitchforge.shift import source_filter_shift


def random_wave(rng, n=4096):
    return Waveform(rng.uniform(-0.5, 0.5, n), 22050)


def aligned(a, b):
    n = min(len(a), len(b))
    return Waveform(a.samples[:n], a.sample_rate), Waveform(b.samples[:n], b.sample_rate)


def test_mcd_zero_on_identity(cfg):
    w = vowel(200.0, 0.4)
    assert mcd(w, w, cfg) == 0.0


def test_mcd_symmetry(cfg):
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b = random_wave(rng), random_wave(rng)
        assert mcd(a, b, cfg) == pytest.approx(mcd(b, a, cfg), rel=1e-12)


def test_mcd_hand_computed_single_coefficient():
    # one nonzero difference of 0.1 in c1: (10/ln10)*sqrt(2*0.01)
    ca = np.zeros((2, 13))
    cb = np.zeros((2, 13))
    cb[:, 0] = 0.1  # c1 (c0 already excluded from these vectors)
    expected = (10.0 / np.log(10.0)) * np.sqrt(0.02)
    assert expected == pytest.approx(0.614185, abs=1e-6)
    assert mcd_from_cepstra(ca, cb) == pytest.approx(expected, abs=1e-12)


def test_mcd_non_negative(cfg):
    rng = np.random.default_rng(8)
    for _ in range(5):
        assert mcd(random_wave(rng), random_wave(rng), cfg) >= 0.0


def test_mcd_mismatch_errors(cfg):
    rng = np.random.default_rng(9)
    a = random_wave(rng)
    with pytest.raises(SampleRateMismatchError):
        mcd(a, Waveform(a.samples, 16000), cfg)
    with pytest.raises(FrameCountMismatchError):
        mcd(a, Waveform(np.concatenate([a.samples, a.samples]), 22050), cfg)


def test_delta_mean_pitch_identity(cfg):
    w = vowel(200.0, 0.5)
    assert delta_mean_pitch(w, w, cfg) == 0.0


def test_delta_mean_pitch_octave_pair(cfg):
    lo = vowel(150.0, 0.6)
    hi = vowel(300.0, 0.6)
    assert delta_mean_pitch(lo, hi, cfg) == pytest.approx(12.0, abs=0.2)


def test_delta_mean_pitch_tracks_shifter(cfg):
    w = vowel(200.0, 0.8)
    shifted = source_filter_shift(w, 3.0, cfg)
    assert delta_mean_pitch(*aligned(w, shifted), cfg) == pytest.approx(3.0, abs=0.3)


def test_delta_mean_pitch_antisymmetric(cfg):
    a = vowel(180.0, 0.5)
    b = vowel(260.0, 0.5)
    assert abs(delta_mean_pitch(a, b, cfg) + delta_mean_pitch(b, a, cfg)) <= 1e-9


def test_delta_mean_pitch_needs_voiced_frames(cfg):
    silent = Waveform(np.zeros(4096), 22050)
    with pytest.raises(NoVoicedFramesError):
        delta_mean_pitch(silent, silent, cfg)


def test_envelope_mcd_identity_and_frames(cfg):
    w = vowel(200.0, 0.5)
    assert envelope_mcd(w, w, cfg) == 0.0
    longer = Waveform(np.concatenate([w.samples, w.samples]), 22050)
    with pytest.raises(FrameCountMismatchError):
        envelope_mcd(w, longer, cfg)


def test_envelope_mcd_preserved_by_source_filter(cfg):
    w = vowel(200.0, 0.8)
    shifted = source_filter_shift(w, 3.0, cfg)
    assert envelope_mcd(*aligned(w, shifted), cfg) <= 1.5


def test_evaluate_shift_accepts_good_shift(cfg):
    w = vowel(200.0, 0.8)
    shifted = source_filter_shift(w, 3.0, cfg)
    report = evaluate_shift(*aligned(w, shifted), 3.0, AcceptancePolicy(), cfg)
    assert report.accepted
    assert report.reasons == []


def test_evaluate_shift_alpha_range(cfg):
    w = vowel(200.0, 0.8)
    shifted = source_filter_shift(w, 4.0, cfg)
    report = evaluate_shift(*aligned(w, shifted), 4.0, AcceptancePolicy(), cfg)
    assert not report.accepted
    assert "alpha_range" in report.reasons


def test_evaluate_shift_alpha_error(cfg):
    w = vowel(200.0, 0.6)
    report = evaluate_shift(w, w, 3.0, AcceptancePolicy(), cfg)
    assert not report.accepted
    assert "alpha_error" in report.reasons
    assert report.delta_p_st == pytest.approx(0.0, abs=1e-9)


def test_evaluate_shift_deterministic(cfg):
    w = vowel(200.0, 0.6)
    shifted = source_filter_shift(w, 2.0, cfg)
    pair = aligned(w, shifted)
    r1 = evaluate_shift(*pair, 2.0, AcceptancePolicy(), cfg)
    r2 = evaluate_shift(*pair, 2.0, AcceptancePolicy(), cfg)
    assert r1.to_dict() == r2.to_dict()


def test_range_only_policy_disables_metric_checks(cfg):
    w = vowel(200.0, 0.6)
    policy = AcceptancePolicy(max_alpha_error_st=None, max_envelope_mcd_db=None)
    report = evaluate_shift(w, w, 3.0, policy, cfg)
    assert report.accepted


def test_policy_json_round_trip(tmp_path):
    path = tmp_path / "policy.json"
    path.write_text('{"max_abs_alpha_st": 4.0, "max_alpha_error_st": 0.4}')
    policy = AcceptancePolicy.from_json(path)
    assert policy.max_abs_alpha_st == 4.0
    assert policy.max_alpha_error_st == 0.4
    assert policy.max_envelope_mcd_db == 1.5
