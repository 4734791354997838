"""Dataset manifests and the pitch-augmentation batch pipeline.

Manifests are JSON-lines: a header object carrying the analysis config and
reference f0, then one record per line.  Serialization is canonical (sorted
keys, fixed separators) so identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path

from .audio import load_wav, save_wav
from .errors import (
    CorruptHeaderError,
    DurationMismatchError,
    EmptyResultError,
    PitchforgeError,
)
from .metrics import AcceptancePolicy, EvalReport, evaluate_shift
from .pitch import char_level_pitch, track_pitch
from .shift import ShiftMethod, ShiftRequest, shift
from .spectral import AnalysisConfig

logger = logging.getLogger(__name__)

DEFAULT_REF_F0 = 248.0
DEFAULT_ALPHA_GRID = (-3.0, -2.0, 2.0, 3.0)


@dataclass
class UtteranceRecord:
    """One dataset row; originals have alpha = 0 and source_id = id."""

    id: str
    wav_path: str
    text: str
    durations: list[int] | None = None
    alpha: float = 0.0
    source_id: str | None = None
    char_pitch_st: list[float] | None = None
    char_voiced: list[bool] | None = None

    def __post_init__(self):
        if self.source_id is None:
            self.source_id = self.id
        if (self.alpha == 0.0) != (self.source_id == self.id):
            raise ValueError(f"record {self.id}: alpha/source_id inconsistency")

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "wav_path": self.wav_path,
            "text": self.text,
            "alpha": self.alpha,
            "source_id": self.source_id,
        }
        for key in ("durations", "char_pitch_st", "char_voiced"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "UtteranceRecord":
        return cls(**raw)


@dataclass
class Manifest:
    records: list[UtteranceRecord]
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    ref_f0: float = DEFAULT_REF_F0

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate record ids in manifest")

    def record(self, rec_id: str) -> UtteranceRecord:
        for r in self.records:
            if r.id == rec_id:
                return r
        raise KeyError(rec_id)


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    header = {
        "manifest_version": 1,
        "analysis": {
            "sample_rate": manifest.analysis.sample_rate,
            "fft_size": manifest.analysis.fft_size,
            "hop": manifest.analysis.hop,
            "window": manifest.analysis.window,
            "n_mels": manifest.analysis.n_mels,
            "fmin": manifest.analysis.fmin,
            "fmax": manifest.analysis.fmax,
        },
        "ref_f0": manifest.ref_f0,
    }
    lines = [_dumps(header)] + [_dumps(r.to_dict()) for r in manifest.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CorruptHeaderError(f"{path}: empty manifest")
    header = json.loads(lines[0])
    if "manifest_version" not in header:
        raise CorruptHeaderError(f"{path}: first line is not a manifest header")
    analysis = AnalysisConfig(**header.get("analysis", {}))
    records = [UtteranceRecord.from_dict(json.loads(ln)) for ln in lines[1:] if ln.strip()]
    return Manifest(records, analysis, float(header.get("ref_f0", DEFAULT_REF_F0)))


def derived_id(source_id: str, alpha: float) -> str:
    return f"{source_id}_st{alpha:+g}"


@dataclass
class CandidateReport:
    """Outcome for one record x alpha candidate."""

    id: str
    source_id: str
    alpha: float
    status: str  # accepted | rejected | error
    report: EvalReport | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "source_id": self.source_id,
            "alpha": self.alpha,
            "status": self.status,
        }
        if self.report is not None:
            out["report"] = self.report.to_dict()
        if self.error is not None:
            out["error"] = self.error
        return out


def build_augmented(
    manifest: Manifest,
    alphas,
    method: ShiftMethod = ShiftMethod.SOURCE_FILTER,
    policy: AcceptancePolicy = AcceptancePolicy(),
    out_dir: str | Path = ".",
    jobs: int = 1,
) -> tuple[Manifest, list[CandidateReport]]:
    """Shift every record by every alpha, filter by policy, materialize WAVs.

    Every candidate appears in the report; only accepted ones enter the
    returned manifest.  Per-record failures are recorded and do not abort
    the batch.  Output order follows input order regardless of ``jobs``.
    """
    alphas = sorted(float(a) for a in alphas)
    if any(a == 0.0 for a in alphas):
        raise ValueError("alpha grid must exclude 0")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    candidates = [(rec, alpha) for rec in manifest.records for alpha in alphas]

    def process(item):
        rec, alpha = item
        cand_id = derived_id(rec.id, alpha)
        wav_path = out_dir / f"{cand_id}.wav"
        try:
            w = load_wav(rec.wav_path)
            shifted = shift(w, ShiftRequest(alpha, method), manifest.analysis)
            report = evaluate_shift(w, shifted, alpha, policy, manifest.analysis)
            save_wav(wav_path, shifted)
        except (OSError, PitchforgeError) as exc:
            logger.warning("candidate %s failed: %s", cand_id, exc)
            return CandidateReport(cand_id, rec.id, alpha, "error", error=str(exc))
        status = "accepted" if report.accepted else "rejected"
        return CandidateReport(cand_id, rec.id, alpha, status, report=report)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(process, candidates))
    else:
        reports = [process(item) for item in candidates]

    aug_records = []
    for (rec, alpha), cand in zip(candidates, reports):
        if cand.status != "accepted":
            continue
        aug_records.append(
            UtteranceRecord(
                id=cand.id,
                wav_path=str(out_dir / f"{cand.id}.wav"),
                text=rec.text,
                durations=list(rec.durations) if rec.durations is not None else None,
                alpha=alpha,
                source_id=rec.id,
            )
        )
    if not aug_records:
        raise EmptyResultError("no candidate passed the acceptance policy")
    return Manifest(aug_records, manifest.analysis, manifest.ref_f0), reports


def attach_pitch(manifest: Manifest) -> Manifest:
    """Cache per-character semitone pitch on every record with durations.

    Originals get their own analyzed character pitch relative to the
    manifest reference f0; augmented records get the original's character
    pitch plus their alpha (the conditioning values used in training).
    Records without durations are skipped with a warning.
    """
    by_id = {r.id: r for r in manifest.records}
    out: list[UtteranceRecord] = []
    originals: dict[str, UtteranceRecord] = {}

    def analyzed(rec: UtteranceRecord) -> UtteranceRecord:
        w = load_wav(rec.wav_path)
        track = track_pitch(w, manifest.analysis)
        chars = char_level_pitch(track, rec.durations, manifest.ref_f0)
        return replace(
            rec,
            char_pitch_st=[float(v) for v in chars.st],
            char_voiced=[bool(v) for v in chars.voiced],
        )

    for rec in manifest.records:
        if rec.durations is None:
            logger.warning("record %s has no durations; skipped", rec.id)
            out.append(rec)
            continue
        try:
            if rec.alpha == 0.0:
                new = analyzed(rec)
                originals[new.id] = new
            else:
                source = originals.get(rec.source_id) or by_id.get(rec.source_id)
                if source is None or source.durations is None:
                    logger.warning(
                        "record %s: source %s unavailable; analyzing directly",
                        rec.id,
                        rec.source_id,
                    )
                    source = None
                if source is not None and source.char_pitch_st is None:
                    source = analyzed(source)
                    originals[source.id] = source
                if source is None:
                    new = analyzed(rec)
                else:
                    st = [
                        base + rec.alpha if voiced else 0.0
                        for base, voiced in zip(source.char_pitch_st, source.char_voiced)
                    ]
                    new = replace(
                        rec, char_pitch_st=st, char_voiced=list(source.char_voiced)
                    )
            out.append(new)
        except DurationMismatchError as exc:
            logger.warning("record %s: %s; skipped", rec.id, exc)
            out.append(rec)
    return Manifest(out, manifest.analysis, manifest.ref_f0)


def external_score_hook(manifest: Manifest, command_template: str) -> dict[str, float]:
    """Run an external scorer per record and collect one real number each.

    ``{wav}`` in the template is replaced by the record's wav path (a
    template without the placeholder is allowed, e.g. a stub command).
    Records whose command fails or prints no number are absent from the map.
    """
    scores: dict[str, float] = {}
    for rec in manifest.records:
        cmd = command_template.replace("{wav}", str(rec.wav_path))
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            logger.warning("scorer failed for %s (exit %d)", rec.id, proc.returncode)
            continue
        tokens = proc.stdout.split()
        try:
            scores[rec.id] = float(tokens[0])
        except (IndexError, ValueError):
            logger.warning("scorer output unparseable for %s: %r", rec.id, proc.stdout)
    return scores
