"""Exception hierarchy shared across the package."""


class PitchforgeError(Exception):
    """Base class for all package-specific errors."""


class UnsupportedFormatError(PitchforgeError):
    """Audio file is readable but violates the mono/16-bit/PCM contract."""


class CorruptHeaderError(PitchforgeError):
    """Audio or spectrogram file container is malformed or truncated."""


class SignalTooShortError(PitchforgeError):
    """Signal shorter than one analysis window."""


class ShapeMismatchError(PitchforgeError):
    """Matrix shapes disagree with each other or with the analysis config."""


class NonPositiveFrequencyError(PitchforgeError):
    """Frequency argument must be strictly positive."""


class NoVoicedFramesError(PitchforgeError):
    """Operation requires at least one voiced frame."""


class DurationMismatchError(PitchforgeError):
    """Character durations do not sum to the analysis frame count."""


class AlphaOutOfRangeError(PitchforgeError):
    """Pitch adjustment outside the supported semitone range."""


class TrackMismatchError(PitchforgeError):
    """Pitch track is not aligned to the waveform it is used with."""


class FrameCountMismatchError(PitchforgeError):
    """Two signals produced different frame counts under the same analysis."""


class SampleRateMismatchError(PitchforgeError):
    """Two signals have different sample rates."""


class EmptyResultError(PitchforgeError):
    """A filtering step accepted nothing."""


class EmptyManifestError(PitchforgeError):
    """Manifest holds no usable records."""


class ModelFailureError(PitchforgeError):
    """Model raised during training; carries epoch context."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class ExternalCommandFailedError(PitchforgeError):
    """External scorer command failed for a record."""
