"""STFT analysis/synthesis, mel projection, Griffin-Lim, and cepstral envelopes.

Conventions used throughout the package:

* frames start at sample 0 with no center padding, so frame t covers
  samples [t*hop, t*hop + window);
* the canonical spectrogram domain is linear magnitude (log is applied
  only inside envelope and cepstral-distortion computations);
* the mel scale is HTK (2595*log10(1 + f/700)) with area-normalized
  triangular filters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform
from .errors import CorruptHeaderError, ShapeMismatchError, SignalTooShortError

# envelope estimation caps the per-frame log dynamic range; deep nulls between
# harmonics otherwise dominate the liftered fit
ENVELOPE_REL_FLOOR = 1e-2
TRUE_ENVELOPE_ITERATIONS = 20


@dataclass(frozen=True)
class AnalysisConfig:
    """Shared analysis parameters; defaults match the 22.05 kHz pipeline."""

    sample_rate: int = 22050
    fft_size: int = 1024
    hop: int = 256
    window: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0

    def __post_init__(self):
        if self.window != 4 * self.hop:
            raise ValueError("window must equal 4*hop (75% overlap)")
        if self.window > self.fft_size:
            raise ValueError("window may not exceed fft_size")
        if self.fmax > self.sample_rate / 2:
            raise ValueError("fmax above Nyquist")
        if not 0 <= self.fmin < self.fmax:
            raise ValueError("need 0 <= fmin < fmax")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window:
            raise SignalTooShortError(
                f"{n_samples} samples < window {self.window}"
            )
        return 1 + (n_samples - self.window) // self.hop


DEFAULT_CONFIG = AnalysisConfig()


@dataclass
class Spectrogram:
    """Linear-frequency magnitude matrix, frame-major: [n_frames, n_bins]."""

    mags: np.ndarray
    frame_hop: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.mags.shape[0]

    @property
    def n_bins(self) -> int:
        return self.mags.shape[1]

    @property
    def fft_size(self) -> int:
        return 2 * (self.n_bins - 1)


@dataclass
class MelSpectrogram:
    """Mel-projected magnitude matrix, frame-major: [n_frames, n_mels]."""

    mels: np.ndarray
    frame_hop: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.mels.shape[0]

    @property
    def n_mels(self) -> int:
        return self.mels.shape[1]


def hann_window(length: int) -> np.ndarray:
    # periodic Hann; with 75% overlap the squared-window sum is constant
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


def frame_signal(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Slice a signal into overlapping frames of `window` samples."""
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) < window:
        raise SignalTooShortError(f"{len(samples)} samples < window {window}")
    n_frames = 1 + (len(samples) - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    return samples[idx]


def stft(w: Waveform, cfg: AnalysisConfig = DEFAULT_CONFIG) -> tuple[Spectrogram, np.ndarray]:
    """Short-time Fourier analysis.

    Returns the magnitude spectrogram together with the phase matrix, which
    istft needs for exact resynthesis.
    """
    frames = frame_signal(w.samples, cfg.window, cfg.hop)
    spectrum = np.fft.rfft(frames * hann_window(cfg.window), n=cfg.fft_size, axis=1)
    spec = Spectrogram(np.abs(spectrum), cfg.hop, w.sample_rate)
    return spec, np.angle(spectrum)


def istft(spec: Spectrogram, phases: np.ndarray, window: int | None = None) -> Waveform:
    """Weighted overlap-add synthesis with squared-window normalization.

    For an unmodified (magnitude, phase) pair from stft the reconstruction is
    exact wherever the window-energy sum is positive.
    """
    if phases.shape != spec.mags.shape:
        raise ShapeMismatchError(
            f"phases {phases.shape} vs magnitudes {spec.mags.shape}"
        )
    fft_size = spec.fft_size
    window = fft_size if window is None else window
    hop = spec.frame_hop
    frames = np.fft.irfft(spec.mags * np.exp(1j * phases), n=fft_size, axis=1)[:, :window]
    win = hann_window(window)
    out = np.zeros((spec.n_frames - 1) * hop + window)
    norm = np.zeros_like(out)
    for t in range(spec.n_frames):
        start = t * hop
        out[start : start + window] += frames[t] * win
        norm[start : start + window] += win * win
    out /= np.maximum(norm, 1e-12)
    return Waveform(out, spec.sample_rate)


def interior_slice(spec: Spectrogram, window: int | None = None) -> slice:
    """Sample range where every analysis window fully overlaps."""
    window = spec.fft_size if window is None else window
    return slice(window, max(window, (spec.n_frames - 1) * spec.frame_hop))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _ramp_integral(a: float, b: float, lo: float, hi: float, rising: bool) -> float:
    """Integral over [a, b] of the linear ramp spanning [lo, hi]."""
    u, v = max(a, lo), min(b, hi)
    if v <= u:
        return 0.0
    mid = 0.5 * (u + v)
    if rising:
        return (v - u) * (mid - lo) / (hi - lo)
    return (v - u) * (hi - mid) / (hi - lo)


def mel_filterbank(cfg: AnalysisConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Triangular HTK-mel filterbank, [n_mels, n_bins].

    Each triangle is averaged over every FFT bin's frequency span rather
    than point-sampled at bin centers, so all bins inside [fmin, fmax] get
    nonzero total weight (including DC).  Rows are normalized to unit area.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    bin_width = cfg.sample_rate / cfg.fft_size
    bank = np.zeros((cfg.n_mels, cfg.n_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        k_lo = max(0, int(np.floor((lo - bin_width / 2) / bin_width)))
        k_hi = min(cfg.n_bins - 1, int(np.ceil((hi + bin_width / 2) / bin_width)))
        for k in range(k_lo, k_hi + 1):
            a = max(k * bin_width - bin_width / 2, 0.0)
            b = k * bin_width + bin_width / 2
            area = _ramp_integral(a, b, lo, center, rising=True)
            area += _ramp_integral(a, b, center, hi, rising=False)
            bank[m, k] = area / bin_width
        total = bank[m].sum()
        if total > 0:
            bank[m] /= total
    return bank


def mel_project(spec: Spectrogram, cfg: AnalysisConfig = DEFAULT_CONFIG) -> MelSpectrogram:
    """Project a linear-magnitude spectrogram onto the mel filterbank."""
    if spec.n_bins != cfg.n_bins:
        raise ShapeMismatchError(f"{spec.n_bins} bins, config expects {cfg.n_bins}")
    return MelSpectrogram(spec.mags @ mel_filterbank(cfg).T, spec.frame_hop, spec.sample_rate)


GRIFFIN_LIM_SEED = 0


def griffin_lim(
    spec: Spectrogram,
    iterations: int = 60,
    window: int | None = None,
) -> Waveform:
    """Iterative phase reconstruction from a magnitude spectrogram.

    Starts from fixed-seed random phases; each iteration resynthesizes,
    re-analyzes, and keeps only the new phase.  The magnitude-consistency
    error is non-increasing across iterations.  (A zero-phase start makes
    the first synthesis hop-periodic and locks steady tones onto multiples
    of sample_rate/hop, so it is deliberately avoided; the fixed seed keeps
    the routine deterministic.)
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    window = spec.fft_size if window is None else window
    cfg_like = _config_for(spec, window)
    rng = np.random.default_rng(GRIFFIN_LIM_SEED)
    phases = rng.uniform(-np.pi, np.pi, spec.mags.shape)
    for _ in range(iterations):
        w = istft(spec, phases, window=window)
        _, phases = stft(w, cfg_like)
    return istft(spec, phases, window=window)


def _config_for(spec: Spectrogram, window: int) -> AnalysisConfig:
    return AnalysisConfig(
        sample_rate=spec.sample_rate,
        fft_size=spec.fft_size,
        hop=spec.frame_hop,
        window=window,
        fmax=min(8000.0, spec.sample_rate / 2),
    )


def consistency_error(spec: Spectrogram, w: Waveform, window: int | None = None) -> float:
    """Frobenius distance between |stft(w)| and a target magnitude."""
    window = spec.fft_size if window is None else window
    measured, _ = stft(w, _config_for(spec, window))
    return float(np.linalg.norm(measured.mags - spec.mags))


def _lifter(log_spec: np.ndarray, lifter_order: int) -> np.ndarray:
    """Keep quefrencies [0, lifter_order] (plus mirror) of each log spectrum."""
    fft_size = 2 * (log_spec.shape[1] - 1)
    # zero-phase half spectrum: irfft yields the (real, even) cepstrum
    cepstrum = np.fft.irfft(log_spec, n=fft_size, axis=1)
    keep = np.zeros(fft_size)
    keep[: lifter_order + 1] = 1.0
    keep[fft_size - lifter_order :] = 1.0
    return np.fft.rfft(cepstrum * keep, axis=1).real


def cepstral_envelope(spec: Spectrogram, lifter_order: int = 40) -> Spectrogram:
    """Smooth spectral envelope via low-quefrency liftering of the log spectrum.

    Per frame: log magnitude -> real cepstrum -> keep quefrencies
    [0, lifter_order] -> back to the log spectrum -> exponentiate.  The
    lifter pass is iterated on max(log spectrum, envelope) so the result
    rides the harmonic peaks instead of averaging peaks and nulls.
    Applying the operation twice is a fixed point.
    """
    if lifter_order >= spec.n_bins:
        raise ShapeMismatchError(
            f"lifter_order {lifter_order} must be < n_bins {spec.n_bins}"
        )
    floor = np.maximum(spec.mags.max(axis=1, keepdims=True) * ENVELOPE_REL_FLOOR, 1e-12)
    log_spec = np.log(np.maximum(spec.mags, floor))
    env = _lifter(log_spec, lifter_order)
    for _ in range(TRUE_ENVELOPE_ITERATIONS):
        env = _lifter(np.maximum(log_spec, env), lifter_order)
    # clamp at the floor so already-smooth inputs are exact fixed points
    env = np.maximum(env, np.log(floor))
    return Spectrogram(np.exp(env), spec.frame_hop, spec.sample_rate)


MELSPEC_MAGIC = b"MELSPEC1"


def write_melspec(path: str | Path, mel: MelSpectrogram) -> None:
    """Write the binary spectrogram interchange format (MELSPEC1)."""
    mat = np.ascontiguousarray(mel.mels, dtype="<f4")
    header = MELSPEC_MAGIC + struct.pack(
        "<IIII", mat.shape[0], mat.shape[1], mel.sample_rate, mel.frame_hop
    )
    Path(path).write_bytes(header + mat.tobytes())


def read_melspec(path: str | Path) -> MelSpectrogram:
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:8] != MELSPEC_MAGIC:
        raise CorruptHeaderError(f"{path}: bad MELSPEC1 header")
    n_frames, n_cols, sample_rate, hop = struct.unpack_from("<IIII", data, 8)
    need = 24 + 4 * n_frames * n_cols
    if len(data) < need:
        raise CorruptHeaderError(f"{path}: truncated MELSPEC1 payload")
    mat = np.frombuffer(data[24:need], dtype="<f4").reshape(n_frames, n_cols)
    return MelSpectrogram(mat.astype(np.float64), int(hop), int(sample_rate))
