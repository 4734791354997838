"""Alternating-epoch training scheduler and a toy differentiable model.

The scheduler alternates between the original and the pitch-augmented
dataset, one epoch each, starting with the originals.  Original epochs run
teacher-forced with the predictor heads active and update on mel, duration,
and pitch losses; augmented epochs condition on the base character pitch
plus the record's semitone offset, bypass the predictors entirely, and
update on the mel loss only, so the predictor parameters stay bitwise
frozen across every augmented epoch.

The toy model realizes the required contract at small dimension: character
embeddings, a linear encoder, scalar duration/pitch heads, a length
regulator, and a linear decoder over the upsampled hidden states
concatenated with the upsampled conditioning pitch.  Gradients are analytic
and the optimizer is plain fixed-step gradient descent.
"""

from __future__ import annotations

import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .audio import load_wav
from .augment import Manifest
from .errors import (
    DurationMismatchError,
    EmptyManifestError,
    ModelFailureError,
)
from .pitch import char_level_pitch, track_pitch
from .spectral import mel_project, stft

logger = logging.getLogger(__name__)

PARAMETER_GROUPS = ("encoder_decoder", "duration_predictor", "pitch_predictor")
ORIG_LOSSES = frozenset({"mel_loss", "duration_loss", "pitch_loss"})
AUG_LOSSES = frozenset({"mel_loss"})
MEL_LOG_FLOOR = 1e-8

# settings used for full-size model training runs; the toy model below uses
# plain fixed-step gradient descent instead
FULLSCALE_REFERENCE = {
    "optimizer": "adam",
    "learning_rate": 2e-4,
    "betas": (0.5, 0.9),
    "eps": 1e-6,
    "epochs": 300,
    "batch_size": 16,
}


@dataclass
class Sample:
    """One training item: character ids, durations, base pitch, mel target."""

    utt_id: str
    char_ids: np.ndarray
    durations: np.ndarray
    char_pitch_st: np.ndarray  # base pitch; the offset is applied at forward time
    char_voiced: np.ndarray  # offsets apply to voiced characters only
    alpha: float
    target_mel: np.ndarray


class TrainableModel(ABC):
    """Contract the scheduler drives.

    ``update`` with a loss selection that excludes the predictor losses must
    leave the predictor parameter groups bitwise unchanged.
    """

    @abstractmethod
    def forward_teacher_forced(
        self, batch: list[Sample], use_predictors: bool, pitch_offset
    ) -> dict[str, float]:
        raise NotImplementedError

    @abstractmethod
    def update(self, loss_selection: frozenset[str]) -> None:
        raise NotImplementedError

    @abstractmethod
    def parameter_fingerprint(self, group: str) -> str:
        raise NotImplementedError


def length_regulate(h: np.ndarray, durations) -> np.ndarray:
    """Repeat each character vector by its duration in frames."""
    durations = np.asarray(durations, dtype=int)
    if np.any(durations < 0):
        raise ValueError("negative duration")
    return np.repeat(np.atleast_2d(h), durations, axis=0)


GROUP_PARAMS = {
    "encoder_decoder": ("embedding", "w_enc", "b_enc", "w_dec", "b_dec"),
    "duration_predictor": ("w_dur", "b_dur"),
    "pitch_predictor": ("w_pit", "b_pit"),
}


class ToyModel(TrainableModel):
    def __init__(
        self,
        dim: int,
        seed: int,
        n_chars: int = 32,
        n_mels: int = 80,
        learning_rate: float = 0.02,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        rng = np.random.default_rng(seed)
        scale = 0.5
        # small decoder init keeps the mel-loss feedback into the encoder mild,
        # which is what makes fixed-step descent stable here
        dec_scale = 0.1
        self.dim = dim
        self.n_chars = n_chars
        self.n_mels = n_mels
        self.learning_rate = learning_rate
        self.params: dict[str, np.ndarray] = {
            "embedding": scale * rng.standard_normal((n_chars, dim)),
            "w_enc": scale * rng.standard_normal((dim, dim)),
            "b_enc": np.zeros(dim),
            "w_dur": scale * rng.standard_normal(dim),
            "b_dur": np.zeros(1),
            "w_pit": scale * rng.standard_normal(dim),
            "b_pit": np.zeros(1),
            "w_dec": dec_scale * rng.standard_normal((dim + 1, n_mels)),
            "b_dec": np.zeros(n_mels),
        }
        self._cache = None

    def forward_teacher_forced(
        self, batch: list[Sample], use_predictors: bool, pitch_offset
    ) -> dict[str, float]:
        offsets = np.broadcast_to(np.asarray(pitch_offset, dtype=float), (len(batch),))
        p = self.params
        losses = {"mel_loss": 0.0}
        if use_predictors:
            losses["duration_loss"] = 0.0
            losses["pitch_loss"] = 0.0
        cache = []
        for sample, offset in zip(batch, offsets):
            emb = p["embedding"][sample.char_ids]
            h = emb @ p["w_enc"] + p["b_enc"]
            item = {"sample": sample, "offset": float(offset), "emb": emb, "h": h}
            if use_predictors:
                # duration head works in log(1+frames), the usual well-scaled target
                item["d_hat"] = h @ p["w_dur"] + p["b_dur"][0]
                item["d_target"] = np.log1p(sample.durations.astype(float))
                item["p_hat"] = h @ p["w_pit"] + p["b_pit"][0]
                losses["duration_loss"] += float(
                    np.mean((item["d_hat"] - item["d_target"]) ** 2)
                )
                losses["pitch_loss"] += float(
                    np.mean((item["p_hat"] - sample.char_pitch_st) ** 2)
                )
            cond = np.where(sample.char_voiced, sample.char_pitch_st + offset, 0.0)
            h_up = length_regulate(h, sample.durations)
            p_up = np.repeat(cond, sample.durations)
            x = np.hstack([h_up, p_up[:, None]])
            y_hat = x @ p["w_dec"] + p["b_dec"]
            item["x"] = x
            item["y_hat"] = y_hat
            # squared error of the mel vector per frame, averaged over frames
            losses["mel_loss"] += float(
                np.mean(np.sum((y_hat - sample.target_mel) ** 2, axis=1))
            )
            cache.append(item)
        for key in losses:
            losses[key] /= len(batch)
        self._cache = {"items": cache, "use_predictors": use_predictors}
        return losses

    def gradients(self, loss_selection) -> dict[str, np.ndarray]:
        """Analytic gradients of the selected (summed) losses for all parameters."""
        if self._cache is None:
            raise RuntimeError("gradients() requires a preceding forward pass")
        loss_selection = frozenset(loss_selection)
        unknown = loss_selection - {"mel_loss", "duration_loss", "pitch_loss"}
        if unknown:
            raise ValueError(f"unknown losses {sorted(unknown)}")
        if loss_selection - AUG_LOSSES and not self._cache["use_predictors"]:
            raise ValueError("predictor losses selected but predictors were not run")
        p = self.params
        grads = {name: np.zeros_like(value) for name, value in p.items()}
        n_batch = len(self._cache["items"])
        for item in self._cache["items"]:
            sample: Sample = item["sample"]
            h = item["h"]
            dh = np.zeros_like(h)
            if "mel_loss" in loss_selection:
                dy = 2.0 * (item["y_hat"] - sample.target_mel)
                dy /= sample.target_mel.shape[0] * n_batch
                grads["w_dec"] += item["x"].T @ dy
                grads["b_dec"] += dy.sum(axis=0)
                dx = dy @ p["w_dec"].T
                # fold the per-frame hidden gradient back to characters
                bounds = np.cumsum(sample.durations)[:-1]
                for i, chunk in enumerate(np.split(dx[:, : self.dim], bounds)):
                    if len(chunk):
                        dh[i] += chunk.sum(axis=0)
            if "duration_loss" in loss_selection:
                dd = 2.0 * (item["d_hat"] - item["d_target"])
                dd /= len(sample.durations) * n_batch
                grads["w_dur"] += h.T @ dd
                grads["b_dur"] += dd.sum()
                dh += np.outer(dd, p["w_dur"])
            if "pitch_loss" in loss_selection:
                dp = 2.0 * (item["p_hat"] - sample.char_pitch_st)
                dp /= len(sample.char_pitch_st) * n_batch
                grads["w_pit"] += h.T @ dp
                grads["b_pit"] += dp.sum()
                dh += np.outer(dp, p["w_pit"])
            grads["w_enc"] += item["emb"].T @ dh
            grads["b_enc"] += dh.sum(axis=0)
            demb = dh @ p["w_enc"].T
            np.add.at(grads["embedding"], sample.char_ids, demb)
        return grads

    def update(self, loss_selection) -> None:
        grads = self.gradients(loss_selection)
        for name, grad in grads.items():
            self.params[name] -= self.learning_rate * grad

    def parameter_fingerprint(self, group: str) -> str:
        if group not in GROUP_PARAMS:
            raise ValueError(f"unknown parameter group {group!r}")
        digest = hashlib.sha256()
        for name in GROUP_PARAMS[group]:
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.params[name]).tobytes())
        return digest.hexdigest()


def toy_model(dim: int, seed: int, **kwargs) -> ToyModel:
    """Minimal differentiable stand-in model at the given hidden size."""
    return ToyModel(dim, seed, **kwargs)


@dataclass
class TrainingPlan:
    epochs: int
    d_orig: Manifest
    d_aug: Manifest
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class EpochLog:
    epoch_index: int
    dataset: str  # orig | aug
    losses_applied: list[str]
    fingerprints_before: dict[str, str]
    fingerprints_after: dict[str, str]
    mean_losses: dict[str, float]
    sample_order: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epoch_index": self.epoch_index,
            "dataset": self.dataset,
            "losses_applied": list(self.losses_applied),
            "fingerprints_before": dict(self.fingerprints_before),
            "fingerprints_after": dict(self.fingerprints_after),
            "mean_losses": dict(self.mean_losses),
            "sample_order": list(self.sample_order),
        }


def build_vocabulary(*manifests: Manifest) -> dict[str, int]:
    chars = sorted({ch for m in manifests for r in m.records for ch in r.text})
    return {ch: i for i, ch in enumerate(chars)}


def prepare_samples(manifest: Manifest, vocab: dict[str, int]) -> list[Sample]:
    """Load waveforms and build training samples with log-mel targets.

    The stored conditioning pitch of an augmented record already includes
    its alpha, so the base pitch is recovered by subtracting it; the
    scheduler re-applies the offset at forward time.
    """
    cfg = manifest.analysis
    samples = []
    for rec in manifest.records:
        if rec.durations is None:
            raise DurationMismatchError(f"record {rec.id} lacks durations")
        w = load_wav(rec.wav_path)
        mel = mel_project(stft(w, cfg)[0], cfg)
        if sum(rec.durations) != mel.n_frames:
            raise DurationMismatchError(
                f"record {rec.id}: durations sum {sum(rec.durations)} != {mel.n_frames} frames"
            )
        if rec.char_pitch_st is not None and rec.char_voiced is not None:
            st = np.asarray(rec.char_pitch_st, dtype=float)
            voiced = np.asarray(rec.char_voiced, dtype=bool)
        else:
            track = track_pitch(w, cfg)
            chars = char_level_pitch(track, rec.durations, manifest.ref_f0)
            st, voiced = chars.st, chars.voiced
        base = np.where(voiced, st - rec.alpha, 0.0)
        samples.append(
            Sample(
                utt_id=rec.id,
                char_ids=np.array([vocab[ch] for ch in rec.text], dtype=int),
                durations=np.asarray(rec.durations, dtype=int),
                char_pitch_st=base,
                char_voiced=np.asarray(voiced, dtype=bool),
                alpha=rec.alpha,
                target_mel=np.log(np.maximum(mel.mels, MEL_LOG_FLOOR)),
            )
        )
    return samples


def run_training(
    model: TrainableModel,
    plan: TrainingPlan,
    orig_samples: list[Sample] | None = None,
    aug_samples: list[Sample] | None = None,
) -> list[EpochLog]:
    """Run the alternating schedule; even epochs use D_orig, odd use D_aug.

    Sample order is a seeded permutation per epoch, recorded in the log, so
    identical plans replay exactly.
    """
    if not plan.d_orig.records or not plan.d_aug.records:
        raise EmptyManifestError("both manifests must be non-empty")
    vocab = build_vocabulary(plan.d_orig, plan.d_aug)
    if orig_samples is None:
        orig_samples = prepare_samples(plan.d_orig, vocab)
    if aug_samples is None:
        aug_samples = prepare_samples(plan.d_aug, vocab)

    logs = []
    for epoch in range(plan.epochs):
        on_orig = epoch % 2 == 0
        samples = orig_samples if on_orig else aug_samples
        losses_applied = ORIG_LOSSES if on_orig else AUG_LOSSES
        order = np.random.default_rng([plan.seed, epoch]).permutation(len(samples))
        before = {g: model.parameter_fingerprint(g) for g in PARAMETER_GROUPS}
        sums: dict[str, float] = {}
        n_batches = 0
        try:
            for start in range(0, len(order), plan.batch_size):
                batch = [samples[i] for i in order[start : start + plan.batch_size]]
                offsets = np.array([s.alpha for s in batch]) if not on_orig else 0.0
                losses = model.forward_teacher_forced(
                    batch, use_predictors=on_orig, pitch_offset=offsets
                )
                model.update(losses_applied)
                for key, value in losses.items():
                    sums[key] = sums.get(key, 0.0) + value
                n_batches += 1
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise ModelFailureError(str(exc), epoch) from exc
        after = {g: model.parameter_fingerprint(g) for g in PARAMETER_GROUPS}
        logs.append(
            EpochLog(
                epoch_index=epoch,
                dataset="orig" if on_orig else "aug",
                losses_applied=sorted(losses_applied),
                fingerprints_before=before,
                fingerprints_after=after,
                mean_losses={k: v / n_batches for k, v in sums.items()},
                sample_order=[samples[i].utt_id for i in order],
            )
        )
    return logs
