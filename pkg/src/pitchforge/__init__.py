"""Timbre-preserving pitch shifting, pitch augmentation, and training scheduling."""

from .audio import Waveform, load_wav, save_wav
from .spectral import (
    AnalysisConfig,
    DEFAULT_CONFIG,
    MelSpectrogram,
    Spectrogram,
    cepstral_envelope,
    griffin_lim,
    istft,
    mel_project,
    read_melspec,
    stft,
    write_melspec,
)
from .pitch import (
    CharacterPitch,
    PitchStats,
    PitchTrack,
    char_level_pitch,
    hz_to_st,
    pitch_marks,
    pitch_stats,
    st_to_hz,
    st_to_ratio,
    track_pitch,
)
from .shift import (
    GriffinLimVocoder,
    ShiftMethod,
    ShiftRequest,
    VocoderAdapter,
    make_vocgan_ps_inputs,
    shift,
    source_filter_shift,
    src_shift_spectrogram,
    td_psola_shift,
)
from .metrics import (
    AcceptancePolicy,
    EvalReport,
    delta_mean_pitch,
    envelope_mcd,
    evaluate_shift,
    mcd,
)

__version__ = "0.1.0"
