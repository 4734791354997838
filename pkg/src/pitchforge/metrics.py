"""Objective evaluation of pitch-shifted speech and the acceptance filter.

Mel-cepstral distortion uses DCT-II cepstra of natural-log mel magnitudes in
the cosine-series normalization (c_k such that the log spectrum equals
c_0 + 2*sum c_k cos(...)), order 13 with c0 excluded, frame-aligned (no DTW)
— valid here because every shifter preserves frame count.  Under that
normalization the distortion value is the RMS log-spectral distance in dB.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .audio import Waveform
from .errors import (
    FrameCountMismatchError,
    NoVoicedFramesError,
    SampleRateMismatchError,
)
from .pitch import track_pitch
from .spectral import DEFAULT_CONFIG, AnalysisConfig, cepstral_envelope, mel_project, stft

MCD_SCALE = 10.0 / np.log(10.0)
LOG_FLOOR = 1e-8
DEFAULT_MCD_ORDER = 13

# acceptance-filter reason names, reported in this order
REASON_ALPHA_RANGE = "alpha_range"
REASON_ALPHA_ERROR = "alpha_error"
REASON_ENVELOPE = "envelope_mcd"


@dataclass
class EvalReport:
    mcd_db: float
    delta_p_st: float
    envelope_mcd_db: float
    accepted: bool
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mcd_db": self.mcd_db,
            "delta_p_st": self.delta_p_st,
            "envelope_mcd_db": self.envelope_mcd_db,
            "accepted": self.accepted,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class AcceptancePolicy:
    """Thresholds for keeping a pitch-shifted sample.

    ``None`` disables an individual check, which turns the per-sample policy
    into a range-only policy.  ``max_external_score`` (pronunciation errors,
    lower is better) and ``min_quality_score`` (opinion score, higher is
    better) apply only where external scorer hooks supply values.
    """

    max_alpha_error_st: float | None = 0.5
    max_envelope_mcd_db: float | None = 1.5
    max_abs_alpha_st: float | None = 3.0
    max_external_score: float = 0.07
    min_quality_score: float = 3.0

    @classmethod
    def from_json(cls, path: str | Path) -> "AcceptancePolicy":
        raw = json.loads(Path(path).read_text())
        return cls(**raw)


def _cepstra(log_frames: np.ndarray, order: int) -> np.ndarray:
    # cosine-series coefficients: log spectrum = c0 + 2*sum_k c_k cos(...)
    n = log_frames.shape[1]
    return dct(log_frames, type=2, axis=1)[:, 1 : order + 1] / (2.0 * n)


def mel_cepstra(
    w: Waveform, cfg: AnalysisConfig = DEFAULT_CONFIG, order: int = DEFAULT_MCD_ORDER
) -> np.ndarray:
    """Per-frame mel cepstra c_1..c_order from log-mel magnitudes."""
    mel = mel_project(stft(w, cfg)[0], cfg)
    return _cepstra(np.log(np.maximum(mel.mels, LOG_FLOOR)), order)


def mcd_from_cepstra(ca: np.ndarray, cb: np.ndarray) -> float:
    """Mean over frames of (10/ln10) * sqrt(2 * sum of squared differences)."""
    ca = np.atleast_2d(ca)
    cb = np.atleast_2d(cb)
    if ca.shape != cb.shape:
        raise FrameCountMismatchError(f"cepstra shapes {ca.shape} vs {cb.shape}")
    diff = ca - cb
    return float(np.mean(MCD_SCALE * np.sqrt(2.0 * np.sum(diff * diff, axis=1))))


def mcd(
    a: Waveform,
    b: Waveform,
    cfg: AnalysisConfig = DEFAULT_CONFIG,
    order: int = DEFAULT_MCD_ORDER,
) -> float:
    """Mel-cepstral distortion between two frame-aligned waveforms, in dB."""
    if a.sample_rate != b.sample_rate:
        raise SampleRateMismatchError(f"{a.sample_rate} vs {b.sample_rate}")
    ca = mel_cepstra(a, cfg, order)
    cb = mel_cepstra(b, cfg, order)
    if ca.shape[0] != cb.shape[0]:
        raise FrameCountMismatchError(f"{ca.shape[0]} vs {cb.shape[0]} frames")
    return mcd_from_cepstra(ca, cb)


def delta_mean_pitch(
    orig: Waveform, shifted: Waveform, cfg: AnalysisConfig = DEFAULT_CONFIG
) -> float:
    """Change in average pitch in semitones, from geometric-mean voiced f0."""
    f0_orig = track_pitch(orig, cfg).voiced_f0()
    f0_shift = track_pitch(shifted, cfg).voiced_f0()
    if len(f0_orig) == 0 or len(f0_shift) == 0:
        raise NoVoicedFramesError("both signals need at least one voiced frame")
    log_ratio = np.mean(np.log(f0_shift)) - np.mean(np.log(f0_orig))
    return float(12.0 * log_ratio / np.log(2.0))


def _envelope_cepstra(w: Waveform, cfg: AnalysisConfig, order: int) -> np.ndarray:
    env = cepstral_envelope(stft(w, cfg)[0])
    return _cepstra(np.log(np.maximum(env.mags, LOG_FLOOR)), order)


def envelope_mcd(
    a: Waveform,
    b: Waveform,
    cfg: AnalysisConfig = DEFAULT_CONFIG,
    order: int = DEFAULT_MCD_ORDER,
) -> float:
    """MCD computed on smooth spectral envelopes instead of raw mels.

    Isolates timbre differences from harmonic-position differences, so it is
    the quantity the timbre-preserving shifters must keep small.
    """
    ca = _envelope_cepstra(a, cfg, order)
    cb = _envelope_cepstra(b, cfg, order)
    if ca.shape[0] != cb.shape[0]:
        raise FrameCountMismatchError(f"{ca.shape[0]} vs {cb.shape[0]} frames")
    return mcd_from_cepstra(ca, cb)


def evaluate_shift(
    orig: Waveform,
    shifted: Waveform,
    alpha: float,
    policy: AcceptancePolicy = AcceptancePolicy(),
    cfg: AnalysisConfig = DEFAULT_CONFIG,
) -> EvalReport:
    """Measure a shifted sample against its original and apply the policy.

    Accepted iff the measured pitch change matches alpha, the envelope
    distortion is within bounds, and alpha lies in the allowed range; every
    violated constraint lands in ``reasons``.
    """
    mcd_db = mcd(orig, shifted, cfg)
    delta_p = delta_mean_pitch(orig, shifted, cfg)
    env_mcd = envelope_mcd(orig, shifted, cfg)
    reasons = []
    if policy.max_abs_alpha_st is not None and abs(alpha) > policy.max_abs_alpha_st:
        reasons.append(REASON_ALPHA_RANGE)
    if (
        policy.max_alpha_error_st is not None
        and abs(delta_p - alpha) > policy.max_alpha_error_st
    ):
        reasons.append(REASON_ALPHA_ERROR)
    if (
        policy.max_envelope_mcd_db is not None
        and env_mcd > policy.max_envelope_mcd_db
    ):
        reasons.append(REASON_ENVELOPE)
    return EvalReport(mcd_db, delta_p, env_mcd, accepted=not reasons, reasons=reasons)
