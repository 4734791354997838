import struct

import numpy as np
import pytest

from conftest import pulse, sine, vowel
from pitchforge.audio import Waveform
from pitchforge.errors import CorruptHeaderError, ShapeMismatchError, SignalTooShortError
from pitchforge.spectral import (
    AnalysisConfig,
    MelSpectrogram,
    Spectrogram,
    cepstral_envelope,
    consistency_error,
    griffin_lim,
    hann_window,
    hz_to_mel,
    interior_slice,
    istft,
    mel_filterbank,
    mel_project,
    mel_to_hz,
    read_melspec,
    stft,
    write_melspec,
)


def bin_freqs(cfg):
    return np.arange(cfg.n_bins) * cfg.sample_rate / cfg.fft_size


def test_config_validation():
    with pytest.raises(ValueError):
        AnalysisConfig(hop=128)  # window != 4*hop
    with pytest.raises(ValueError):
        AnalysisConfig(fmax=22050.0)
    assert AnalysisConfig().n_bins == 513


def test_one_second_frame_count(cfg):
    w = Waveform(np.zeros(22050), 22050)
    spec, _ = stft(w, cfg)
    assert spec.n_frames == 1 + (22050 - 1024) // 256 == 83


def test_short_signal_rejected(cfg):
    with pytest.raises(SignalTooShortError):
        stft(Waveform(np.zeros(1000), 22050), cfg)


def test_dc_signal_energy_in_bin_zero(cfg):
    spec, _ = stft(Waveform(np.ones(4096), 22050), cfg)
    assert np.all(np.argmax(spec.mags, axis=1) == 0)


def test_sine_on_bin_matches_reference_dft(cfg):
    # oracle: direct O(N^2) DFT of one Hann-windowed frame
    k = 40
    f = cfg.sample_rate * k / cfg.fft_size
    w = sine(f)
    spec, _ = stft(w, cfg)
    assert np.all(np.argmax(spec.mags, axis=1) == k)
    t = 3
    frame = w.samples[t * cfg.hop : t * cfg.hop + cfg.window] * hann_window(cfg.window)
    n = np.arange(cfg.window)
    ref = np.array(
        [abs(np.sum(frame * np.exp(-2j * np.pi * kk * n / cfg.fft_size))) for kk in range(cfg.n_bins)]
    )
    np.testing.assert_allclose(spec.mags[t], ref, atol=1e-8)


def test_istft_round_trip_interior(cfg):
    rng = np.random.default_rng(1)
    w = Waveform(rng.uniform(-0.5, 0.5, 22050), 22050)
    spec, phases = stft(w, cfg)
    rec = istft(spec, phases)
    sl = interior_slice(spec)
    err = np.sqrt(np.mean((rec.samples[sl] - w.samples[sl]) ** 2))
    assert err <= 1e-6


def test_istft_zero_magnitudes(cfg):
    spec = Spectrogram(np.zeros((5, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    out = istft(spec, np.zeros((5, cfg.n_bins)))
    assert np.all(out.samples == 0.0)


def test_istft_single_frame_ola(cfg):
    # hand formula: one frame reduces to (x*win)*win / win^2 = x where win > 0
    rng = np.random.default_rng(2)
    x = rng.uniform(-0.5, 0.5, cfg.window)
    spec, phases = stft(Waveform(x, cfg.sample_rate), cfg)
    assert spec.n_frames == 1
    out = istft(spec, phases)
    np.testing.assert_allclose(out.samples[1:], x[1:], atol=1e-9)


def test_istft_shape_mismatch(cfg):
    spec = Spectrogram(np.zeros((5, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    with pytest.raises(ShapeMismatchError):
        istft(spec, np.zeros((4, cfg.n_bins)))


def reference_filterbank(cfg, oversample=4097):
    """Dense-sampling oracle: average each triangle over each bin's span."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    width = cfg.sample_rate / cfg.fft_size
    bank = np.zeros((cfg.n_mels, cfg.n_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = edges[m : m + 3]
        k_lo = max(0, int((lo - width) / width))
        k_hi = min(cfg.n_bins - 1, int((hi + width) / width) + 1)
        for k in range(k_lo, k_hi + 1):
            f = np.linspace(k * width - width / 2, k * width + width / 2, oversample)
            tri = np.where(
                f <= center,
                (f - lo) / (center - lo),
                (hi - f) / (hi - center),
            )
            tri = np.where((f >= lo) & (f <= hi) & (f >= 0), np.clip(tri, 0, 1), 0.0)
            bank[m, k] = np.trapezoid(tri, f) / width
        if bank[m].sum() > 0:
            bank[m] /= bank[m].sum()
    return bank


def test_filterbank_matches_dense_oracle(cfg):
    bank = mel_filterbank(cfg)
    ref = reference_filterbank(cfg)
    np.testing.assert_allclose(bank, ref, atol=1e-5)


def test_filterbank_properties(cfg):
    bank = mel_filterbank(cfg)
    assert np.all(bank >= 0)
    assert np.all(bank.sum(axis=1) > 0)  # non-empty support per row
    np.testing.assert_allclose(bank.sum(axis=1), 1.0, atol=1e-12)
    covered = bank.sum(axis=0)
    in_range = bin_freqs(cfg) <= cfg.fmax
    assert np.all(covered[in_range] > 0)
    # supports are contiguous runs of bins
    for row in bank:
        nz = np.flatnonzero(row)
        assert np.all(np.diff(nz) == 1)


def test_mel_project_zero_and_white(cfg):
    zero = Spectrogram(np.zeros((3, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    assert np.all(mel_project(zero, cfg).mels == 0.0)
    white = Spectrogram(np.ones((2, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    mel = mel_project(white, cfg)
    np.testing.assert_allclose(mel.mels, mel_filterbank(cfg).sum(axis=1), atol=1e-12)


def test_mel_project_shape_check(cfg):
    bad = Spectrogram(np.ones((2, 100)), cfg.hop, cfg.sample_rate)
    with pytest.raises(ShapeMismatchError):
        mel_project(bad, cfg)


def test_griffin_lim_sine_pitch(cfg):
    from pitchforge.pitch import track_pitch

    spec, _ = stft(sine(440.0, 1.0), cfg)
    out = griffin_lim(spec, 60)
    track = track_pitch(out, cfg)
    assert abs(np.median(track.voiced_f0()) - 440.0) < 1.0


def test_griffin_lim_zero_spectrogram(cfg):
    spec = Spectrogram(np.zeros((5, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    assert np.all(griffin_lim(spec, 5).samples == 0.0)


def test_griffin_lim_consistency_non_increasing(cfg):
    from pitchforge.spectral import GRIFFIN_LIM_SEED

    spec, _ = stft(vowel(200.0, 0.6), cfg)
    phases = np.random.default_rng(GRIFFIN_LIM_SEED).uniform(-np.pi, np.pi, spec.mags.shape)
    errors = []
    for _ in range(30):
        x = istft(spec, phases)
        errors.append(consistency_error(spec, x))
        _, phases = stft(x, cfg)
    for before, after in zip(errors, errors[1:]):
        assert after <= before * (1 + 1e-12)


def test_envelope_flat_spectrum_identity(cfg):
    flat = Spectrogram(np.full((3, cfg.n_bins), 2.5), cfg.hop, cfg.sample_rate)
    env = cepstral_envelope(flat, 40)
    np.testing.assert_allclose(env.mags, 2.5, atol=1e-9)


def test_envelope_no_harmonic_ripple(cfg):
    # 200 Hz harmonic frame: envelope values at harmonics vs midpoints agree
    spec, _ = stft(pulse(200.0), cfg)
    env = cepstral_envelope(spec, 40).mags[10]
    freqs = bin_freqs(cfg)
    at_harm, at_mid = [], []
    k = 3
    while (k + 0.5) * 200 < 5000:
        at_harm.append(env[int(round(k * 200 * cfg.fft_size / cfg.sample_rate))])
        at_mid.append(env[int(round((k + 0.5) * 200 * cfg.fft_size / cfg.sample_rate))])
        k += 1
    band_mean = env[(freqs > 500) & (freqs < 5000)].mean()
    ripple = np.mean(np.abs(np.array(at_harm) - np.array(at_mid))) / band_mean
    assert ripple < 0.10


def test_envelope_idempotent_on_smooth_input(cfg):
    # band-limited log spectrum (quefrencies < lifter order) is a fixed point
    rng = np.random.default_rng(5)
    coef = np.zeros(cfg.fft_size)
    coef[0] = 0.5
    q = np.arange(1, 30)
    vals = rng.normal(0, 0.3 / (1 + q / 10.0))
    coef[q] = vals
    coef[cfg.fft_size - q] = vals
    log_spec = np.fft.rfft(coef).real[None, :].repeat(3, axis=0)
    smooth = Spectrogram(np.exp(log_spec), cfg.hop, cfg.sample_rate)
    env = cepstral_envelope(smooth, 40)
    assert np.max(np.abs(env.mags - smooth.mags)) <= 1e-6 * smooth.mags.max()


def test_envelope_bounds(cfg):
    spec, _ = stft(vowel(200.0, 0.6), cfg)
    env = cepstral_envelope(spec, 40)
    assert np.all(env.mags > 0)
    assert env.mags.max() <= np.exp(np.log(spec.mags.max()) + 1.0)


def test_envelope_lifter_order_check(cfg):
    spec = Spectrogram(np.ones((2, cfg.n_bins)), cfg.hop, cfg.sample_rate)
    with pytest.raises(ShapeMismatchError):
        cepstral_envelope(spec, cfg.n_bins)


def test_melspec_file_round_trip(tmp_path, cfg):
    rng = np.random.default_rng(3)
    mel = MelSpectrogram(rng.uniform(0, 4, (7, 80)).astype(np.float32).astype(float), 256, 22050)
    path = tmp_path / "x.mel"
    write_melspec(path, mel)
    raw = path.read_bytes()
    assert raw[:8] == b"MELSPEC1"
    n_frames, n_cols, sr, hop = struct.unpack_from("<IIII", raw, 8)
    assert (n_frames, n_cols, sr, hop) == (7, 80, 22050, 256)
    back = read_melspec(path)
    np.testing.assert_allclose(back.mels, mel.mels, atol=0)
    assert back.frame_hop == 256 and back.sample_rate == 22050


def test_melspec_rejects_garbage(tmp_path):
    path = tmp_path / "bad.mel"
    path.write_bytes(b"NOTMELSP" + b"\x00" * 32)
    with pytest.raises(CorruptHeaderError):
        read_melspec(path)
    path.write_bytes(b"MELSPEC1" + struct.pack("<IIII", 10, 10, 22050, 256) + b"\x00" * 8)
    with pytest.raises(CorruptHeaderError):
        read_melspec(path)
