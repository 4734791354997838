"""Pitch shifters.

Three methods with one dial (the semitone offset alpha):

* ``src_spectral``  — frequency-axis resampling of the full spectrogram;
  moves harmonics and the envelope together, so vocal timbre is NOT
  preserved.  This is the non-timbre-preserving baseline.
* ``source_filter`` — splits each frame into a smooth envelope (filter) and
  an excitation (source), shifts only the excitation, and recombines under
  the original envelope.  Timbre-preserving by construction.
* ``td_psola``      — time-domain pitch-synchronous overlap-add: windowed
  two-period segments respaced at period/ratio.

A waveform synthesizer seam (``VocoderAdapter``) takes the source-path and
filter-path mel inputs so a neural vocoder can replace the deterministic
Griffin-Lim implementation without touching callers.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .audio import Waveform
from .errors import AlphaOutOfRangeError, TrackMismatchError
from .pitch import PitchTrack, pitch_marks, st_to_ratio, track_pitch
from .spectral import (
    DEFAULT_CONFIG,
    AnalysisConfig,
    MelSpectrogram,
    Spectrogram,
    cepstral_envelope,
    griffin_lim,
    mel_filterbank,
    mel_project,
    stft,
)

MAX_ABS_ALPHA = 12.0
EXCITATION_FLOOR = 1e-8
GRIFFIN_LIM_ITERATIONS = 60
DEFAULT_LIFTER_ORDER = 40


class ShiftMethod(str, Enum):
    SRC_SPECTRAL = "src_spectral"
    SOURCE_FILTER = "source_filter"
    TD_PSOLA = "td_psola"


@dataclass
class ShiftRequest:
    alpha: float
    method: ShiftMethod

    def __post_init__(self):
        self.method = ShiftMethod(self.method)
        _check_alpha(self.alpha)


def _check_alpha(alpha: float) -> None:
    if not np.isfinite(alpha) or abs(alpha) > MAX_ABS_ALPHA:
        raise AlphaOutOfRangeError(f"alpha {alpha} outside +/-{MAX_ABS_ALPHA} ST")


def src_shift_spectrogram(spec: Spectrogram, alpha: float) -> Spectrogram:
    """Rescale the frequency axis of every frame by 2^(alpha/12).

    out[k] reads the input at position k/ratio by linear interpolation;
    positions past the original axis read as zero, so an upshift truncates
    the top of the spectrum and a downshift zero-extends it.  Frame count
    is unchanged: pitch moves, duration does not.
    """
    _check_alpha(alpha)
    ratio = st_to_ratio(alpha)
    n_bins = spec.n_bins
    positions = np.arange(n_bins) / ratio
    idx = np.floor(positions).astype(int)
    frac = positions - idx
    valid = positions <= n_bins - 1
    idx0 = np.clip(idx, 0, n_bins - 1)
    idx1 = np.clip(idx + 1, 0, n_bins - 1)
    out = spec.mags[:, idx0] * (1.0 - frac) + spec.mags[:, idx1] * frac
    out[:, ~valid] = 0.0
    return Spectrogram(out, spec.frame_hop, spec.sample_rate)


def excitation_split(
    spec: Spectrogram, lifter_order: int = DEFAULT_LIFTER_ORDER
) -> tuple[Spectrogram, Spectrogram]:
    """Decompose magnitudes into (excitation, envelope) with spec = exc * env."""
    env = cepstral_envelope(spec, lifter_order)
    exc = Spectrogram(
        spec.mags / np.maximum(env.mags, EXCITATION_FLOOR),
        spec.frame_hop,
        spec.sample_rate,
    )
    return exc, env


def source_filter_shift(
    w: Waveform,
    alpha: float,
    cfg: AnalysisConfig = DEFAULT_CONFIG,
    iterations: int = GRIFFIN_LIM_ITERATIONS,
    lifter_order: int = DEFAULT_LIFTER_ORDER,
) -> Waveform:
    """Shift pitch while keeping the original spectral envelope.

    Pipeline: analyze, split off the envelope, shift only the excitation,
    recombine under the unshifted envelope, reconstruct with Griffin-Lim.
    """
    _check_alpha(alpha)
    spec, _ = stft(w, cfg)
    exc, env = excitation_split(spec, lifter_order)
    shifted_exc = src_shift_spectrogram(exc, alpha)
    combined = Spectrogram(shifted_exc.mags * env.mags, cfg.hop, w.sample_rate)
    return griffin_lim(combined, iterations, window=cfg.window)


def make_vocgan_ps_inputs(
    w: Waveform, alpha: float, cfg: AnalysisConfig = DEFAULT_CONFIG
) -> tuple[MelSpectrogram, MelSpectrogram]:
    """Build the (source, filter) mel pair for a vocoder adapter.

    The filter path gets the original mel-spectrogram so the envelope is
    preserved; the source path gets the pitch-shifted one so the target
    pitch is carried in.  The shift happens on the linear-frequency axis
    before mel projection (mel bins are non-uniform, warping them directly
    would distort the ratio).
    """
    _check_alpha(alpha)
    spec, _ = stft(w, cfg)
    filter_input = mel_project(spec, cfg)
    source_input = mel_project(src_shift_spectrogram(spec, alpha), cfg)
    return source_input, filter_input


def td_psola_shift(w: Waveform, alpha: float, track: PitchTrack) -> Waveform:
    """Time-domain PSOLA pitch shift (duration unchanged).

    Hann windows of two local periods are cut at voiced pitch marks; the
    marks are respaced at period/ratio and each synthesis mark receives the
    nearest analysis segment, overlap-added with window-sum normalization.
    Unvoiced regions pass through unchanged.
    """
    _check_alpha(alpha)
    x = np.asarray(w.samples)
    n = len(x)
    if track.sample_rate != w.sample_rate:
        raise TrackMismatchError(
            f"track at {track.sample_rate} Hz, waveform at {w.sample_rate} Hz"
        )
    expected = 1 + (n - 4 * track.frame_hop) // track.frame_hop if n >= 4 * track.frame_hop else 0
    if track.n_frames != expected:
        raise TrackMismatchError(
            f"track has {track.n_frames} frames, waveform implies {expected}"
        )
    ratio = st_to_ratio(alpha)
    marks = pitch_marks(w, track)

    def is_voiced(pos: int) -> bool:
        return bool(track.voiced[min(pos // track.frame_hop, track.n_frames - 1)])

    acc = np.zeros(n)
    norm = np.zeros(n)
    synthesized = np.zeros(n, dtype=bool)
    run: list[int] = []
    runs: list[list[int]] = []
    for m in marks:
        if is_voiced(int(m)):
            run.append(int(m))
        elif run:
            runs.append(run)
            run = []
    if run:
        runs.append(run)

    for amarks in runs:
        if len(amarks) < 2:
            continue
        amarks_arr = np.asarray(amarks, dtype=float)
        count = max(2, int(round((len(amarks) - 1) * ratio)) + 1)
        smarks = np.interp(
            np.linspace(0.0, len(amarks) - 1.0, count),
            np.arange(len(amarks), dtype=float),
            amarks_arr,
        )
        span_lo, span_hi = n, 0
        for s in smarks:
            a = amarks[int(np.argmin(np.abs(amarks_arr - s)))]
            f0 = track.f0[min(a // track.frame_hop, track.n_frames - 1)]
            if f0 <= 0:
                continue
            period = int(round(w.sample_rate / f0))
            seg_lo, seg_hi = a - period, a + period
            out_lo = int(round(s)) - period
            win = np.hanning(2 * period)
            # clip segment and window consistently against both signals' edges
            lo_cut = max(0, -seg_lo, -out_lo)
            hi_cut = max(0, seg_hi - n, out_lo + 2 * period - n)
            if 2 * period - lo_cut - hi_cut <= 0:
                continue
            piece = x[seg_lo + lo_cut : seg_hi - hi_cut] * win[lo_cut : 2 * period - hi_cut]
            dst = slice(out_lo + lo_cut, out_lo + 2 * period - hi_cut)
            acc[dst] += piece
            norm[dst] += win[lo_cut : 2 * period - hi_cut]
            span_lo = min(span_lo, dst.start)
            span_hi = max(span_hi, dst.stop)
        if span_hi > span_lo:
            synthesized[span_lo:span_hi] = True

    # acc/norm is a convex combination of segment samples where norm > 0;
    # the input passes through only outside the synthesized voiced spans
    out = np.where(synthesized, acc / np.maximum(norm, 1e-12), x)
    return Waveform(out, w.sample_rate)


def shift(
    w: Waveform, req: ShiftRequest, cfg: AnalysisConfig = DEFAULT_CONFIG
) -> Waveform:
    """Dispatch to the requested shifter.

    ``src_spectral`` synthesizes straight from the shifted full spectrogram,
    i.e. the envelope moves along with the harmonics.
    """
    if req.method is ShiftMethod.SOURCE_FILTER:
        return source_filter_shift(w, req.alpha, cfg)
    if req.method is ShiftMethod.TD_PSOLA:
        return td_psola_shift(w, req.alpha, track_pitch(w, cfg))
    spec, _ = stft(w, cfg)
    shifted = src_shift_spectrogram(spec, req.alpha)
    return griffin_lim(shifted, GRIFFIN_LIM_ITERATIONS, window=cfg.window)


class VocoderAdapter(ABC):
    """Waveform synthesis seam fed by separate source-path and filter-path mels.

    Implementations must return a waveform of n_frames*hop samples, give or
    take one analysis window.
    """

    @abstractmethod
    def synthesize(
        self, source_input: MelSpectrogram, filter_input: MelSpectrogram
    ) -> Waveform:
        raise NotImplementedError


class GriffinLimVocoder(VocoderAdapter):
    """Deterministic adapter: source-filter recombination plus Griffin-Lim.

    Mel inputs are lifted back to the linear axis with the filterbank
    pseudo-inverse; the envelope comes from the filter path and the
    excitation from the source path.
    """

    def __init__(
        self,
        cfg: AnalysisConfig = DEFAULT_CONFIG,
        iterations: int = GRIFFIN_LIM_ITERATIONS,
        lifter_order: int = DEFAULT_LIFTER_ORDER,
    ):
        self.cfg = cfg
        self.iterations = iterations
        self.lifter_order = lifter_order
        self._pinv = np.linalg.pinv(mel_filterbank(cfg))

    def _to_linear(self, mel: MelSpectrogram) -> Spectrogram:
        mags = np.maximum(mel.mels @ self._pinv.T, 0.0)
        return Spectrogram(mags, mel.frame_hop, mel.sample_rate)

    def synthesize(
        self, source_input: MelSpectrogram, filter_input: MelSpectrogram
    ) -> Waveform:
        source_lin = self._to_linear(source_input)
        filter_lin = self._to_linear(filter_input)
        excitation, _ = excitation_split(source_lin, self.lifter_order)
        envelope = cepstral_envelope(filter_lin, self.lifter_order)
        combined = Spectrogram(
            excitation.mags * envelope.mags, source_lin.frame_hop, source_lin.sample_rate
        )
        return griffin_lim(combined, self.iterations, window=self.cfg.window)
