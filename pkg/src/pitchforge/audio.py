"""WAV reading and writing for mono 16-bit PCM signals.

Only the RIFF/WAVE container with format tag 1 (integer PCM), 16 bits,
one channel is accepted.  Anything else is rejected instead of silently
converted, so every waveform in the pipeline has exact integer provenance.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptHeaderError, UnsupportedFormatError

PCM_SCALE = 32768.0


@dataclass
class Waveform:
    """Mono PCM signal: float samples in [-1, 1] plus the sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path: str | Path) -> Waveform:
    """Load a mono 16-bit PCM WAV file.

    Raises UnsupportedFormatError for any channel count, bit depth, or codec
    other than mono/16-bit/PCM, and CorruptHeaderError for malformed files.
    I/O problems surface as the usual OSError.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm_bytes = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + chunk_size > len(data):
            raise CorruptHeaderError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise CorruptHeaderError(f"{path}: fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            pcm_bytes = data[body_start : body_start + chunk_size]
        # chunks are word-aligned
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None or pcm_bytes is None:
        raise CorruptHeaderError(f"{path}: missing fmt or data chunk")

    format_tag, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if format_tag != 1:
        raise UnsupportedFormatError(
            f"{path}: format tag {format_tag}, only integer PCM (1) supported"
        )
    if channels != 1:
        raise UnsupportedFormatError(f"{path}: {channels} channels, expected mono")
    if bits != 16:
        raise UnsupportedFormatError(f"{path}: {bits}-bit samples, expected 16")
    if len(pcm_bytes) < 2:
        raise CorruptHeaderError(f"{path}: empty data chunk")

    ints = np.frombuffer(pcm_bytes[: len(pcm_bytes) // 2 * 2], dtype="<i2")
    return Waveform(ints.astype(np.float64) / PCM_SCALE, int(sample_rate))


def save_wav(path: str | Path, w: Waveform) -> None:
    """Write a waveform as mono 16-bit PCM.

    Amplitudes are clamped to the representable range and rounded
    half-away-from-zero, so a save/load round trip moves each sample by at
    most 1/32768.
    """
    samples = np.asarray(w.samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise ValueError("waveform contains non-finite amplitudes")
    clamped = np.clip(samples, -1.0, 1.0 - 1.0 / PCM_SCALE)
    scaled = clamped * PCM_SCALE
    ints = np.copysign(np.floor(np.abs(scaled) + 0.5), scaled).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(w.sample_rate)
        handle.writeframes(ints.tobytes())
