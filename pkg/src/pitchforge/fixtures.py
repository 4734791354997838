"""Deterministic synthetic test signals.

These generators ship with the CLI (not just the tests) so the acceptance
numbers can be reproduced from a clean checkout without any external audio.
"""

from __future__ import annotations

import numpy as np

from .audio import Waveform

# two-resonance vowel envelope: (center Hz, bandwidth Hz)
VOWEL_RESONANCES = ((700.0, 130.0), (1220.0, 160.0))

FIXTURE_KINDS = ("sine", "pulse_train", "vowel")


def _time_axis(seconds: float, sample_rate: int) -> np.ndarray:
    n = int(round(seconds * sample_rate))
    return np.arange(n) / sample_rate


def sine(f0: float, seconds: float, sample_rate: int = 22050, amplitude: float = 0.5) -> Waveform:
    t = _time_axis(seconds, sample_rate)
    return Waveform(amplitude * np.sin(2.0 * np.pi * f0 * t), sample_rate)


def pulse_train(
    f0: float, seconds: float, sample_rate: int = 22050, amplitude: float = 0.8
) -> Waveform:
    """Band-limited impulse train: equal-amplitude cosine harmonics of f0.

    Peaks land at exact multiples of the period (not snapped to integer
    samples), which makes it the reference fixture for pitch marking.  The
    harmonic cutoff keeps pulses a few samples wide so overlap-add
    processing with integer mark placement stays well-behaved.
    """
    t = _time_axis(seconds, sample_rate)
    x = np.zeros_like(t)
    k = 1
    while k * f0 < 0.25 * sample_rate:
        x += np.cos(2.0 * np.pi * k * f0 * t)
        k += 1
    x *= amplitude / np.max(np.abs(x))
    return Waveform(x, sample_rate)


def vowel_envelope(freqs: np.ndarray) -> np.ndarray:
    """Two-resonance magnitude envelope with a gentle high-frequency rolloff."""
    freqs = np.asarray(freqs, dtype=np.float64)
    env = np.full_like(freqs, 0.05)
    for center, bandwidth in VOWEL_RESONANCES:
        env += 1.0 / (1.0 + ((freqs - center) / bandwidth) ** 2)
    env /= 1.0 + (freqs / 4500.0) ** 4
    return env


def vowel(f0: float, seconds: float, sample_rate: int = 22050, amplitude: float = 0.5) -> Waveform:
    """Harmonic source shaped by the fixed two-resonance envelope."""
    t = _time_axis(seconds, sample_rate)
    x = np.zeros_like(t)
    k = 1
    while k * f0 < 0.45 * sample_rate:
        x += vowel_envelope(np.array(k * f0))[()] * np.cos(2.0 * np.pi * k * f0 * t)
        k += 1
    x *= amplitude / np.max(np.abs(x))
    return Waveform(x, sample_rate)


def silence(seconds: float, sample_rate: int = 22050) -> Waveform:
    return Waveform(np.zeros(int(round(seconds * sample_rate))), sample_rate)


def make_fixture(
    kind: str, f0: float, seconds: float, sample_rate: int = 22050
) -> Waveform:
    """Dispatch by fixture kind name (CLI entry point)."""
    if kind == "sine":
        return sine(f0, seconds, sample_rate)
    if kind == "pulse_train":
        return pulse_train(f0, seconds, sample_rate)
    if kind == "vowel":
        return vowel(f0, seconds, sample_rate)
    raise ValueError(f"unknown fixture kind {kind!r}")
