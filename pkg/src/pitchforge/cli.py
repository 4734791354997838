"""Command-line interface.

One multiplexed binary: analyze, fixture, shift, make-inputs, eval, augment,
schedule, alpha-star.  Exit codes: 0 success, 2 usage/format errors,
3 domain errors (e.g. no voiced frames), 4 empty result.  With ``--json``
every command prints a single JSON document to stdout; diagnostics go to
stderr.  PITCHFORGE_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import fixtures
from .audio import load_wav, save_wav
from .augment import (
    Manifest,
    UtteranceRecord,
    build_augmented,
    derived_id,
    external_score_hook,
    load_manifest,
    save_manifest,
)
from .errors import (
    AlphaOutOfRangeError,
    CorruptHeaderError,
    DurationMismatchError,
    EmptyManifestError,
    EmptyResultError,
    FrameCountMismatchError,
    NonPositiveFrequencyError,
    NoVoicedFramesError,
    SampleRateMismatchError,
    ShapeMismatchError,
    SignalTooShortError,
    TrackMismatchError,
    UnsupportedFormatError,
)
from .metrics import AcceptancePolicy, evaluate_shift
from .pitch import pitch_stats, track_pitch, write_pitch_csv
from .shift import ShiftMethod, ShiftRequest, make_vocgan_ps_inputs, shift
from .spectral import AnalysisConfig, mel_project, stft, write_melspec
from .training import ToyModel, TrainingPlan, build_vocabulary, run_training

logger = logging.getLogger("pitchforge")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_EMPTY = 4

USAGE_ERRORS = (
    UnsupportedFormatError,
    CorruptHeaderError,
    AlphaOutOfRangeError,
    ShapeMismatchError,
    OSError,
    ValueError,
    json.JSONDecodeError,
)
DOMAIN_ERRORS = (
    SignalTooShortError,
    NoVoicedFramesError,
    DurationMismatchError,
    TrackMismatchError,
    FrameCountMismatchError,
    SampleRateMismatchError,
    NonPositiveFrequencyError,
)
EMPTY_ERRORS = (EmptyResultError, EmptyManifestError)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif human:
        print(human)


def _load_config(args) -> AnalysisConfig:
    if args.config is None:
        return AnalysisConfig()
    raw = json.loads(Path(args.config).read_text())
    return AnalysisConfig(**raw)


def _load_policy(path: str | None) -> AcceptancePolicy:
    return AcceptancePolicy() if path is None else AcceptancePolicy.from_json(path)


def _parse_alphas(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad alpha list {text!r}") from exc


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    wav_path = Path(args.wav)
    out_dir = Path(args.out_dir) if args.out_dir else wav_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    w = load_wav(wav_path)
    spec, _ = stft(w, cfg)
    mel = mel_project(spec, cfg)
    track = track_pitch(w, cfg)
    stats = pitch_stats([track])  # NoVoicedFramesError on silence -> exit 3
    stem = out_dir / wav_path.stem
    mel_path = Path(f"{stem}.mel")
    csv_path = Path(f"{stem}.pitch.csv")
    stats_path = Path(f"{stem}.stats.json")
    write_melspec(mel_path, mel)
    write_pitch_csv(csv_path, track)
    stats_dict = {
        "mean_f0": stats.mean_f0,
        "st_mean": stats.st_mean,
        "st_std": stats.st_std,
        "n_frames": track.n_frames,
        "voiced_frames": int(track.voiced.sum()),
    }
    stats_path.write_text(json.dumps(stats_dict, sort_keys=True) + "\n")
    _emit(
        args,
        {"mel": str(mel_path), "pitch_csv": str(csv_path), "stats": stats_dict},
        f"wrote {mel_path}, {csv_path}, {stats_path}",
    )
    return EXIT_OK


def cmd_fixture(args) -> int:
    if not 50.0 <= args.f0 <= 600.0:
        raise ValueError(f"f0 {args.f0} outside [50, 600] Hz")
    if args.kind not in fixtures.FIXTURE_KINDS:
        raise ValueError(f"unknown fixture kind {args.kind!r}")
    cfg = _load_config(args)
    w = fixtures.make_fixture(args.kind, args.f0, args.seconds, cfg.sample_rate)
    save_wav(args.out, w)
    _emit(
        args,
        {"path": args.out, "samples": len(w), "sample_rate": w.sample_rate},
        f"wrote {args.out} ({len(w)} samples at {w.sample_rate} Hz)",
    )
    return EXIT_OK


def cmd_shift(args) -> int:
    cfg = _load_config(args)
    w = load_wav(args.infile)
    out = shift(w, ShiftRequest(args.alpha, ShiftMethod(args.method)), cfg)
    save_wav(args.outfile, out)
    _emit(
        args,
        {"path": args.outfile, "alpha": args.alpha, "method": args.method},
        f"wrote {args.outfile}",
    )
    return EXIT_OK


def cmd_make_inputs(args) -> int:
    cfg = _load_config(args)
    w = load_wav(args.infile)
    source_input, filter_input = make_vocgan_ps_inputs(w, args.alpha, cfg)
    write_melspec(args.source_out, source_input)
    write_melspec(args.filter_out, filter_input)
    _emit(
        args,
        {
            "source": args.source_out,
            "filter": args.filter_out,
            "n_frames": source_input.n_frames,
        },
        f"wrote {args.source_out} and {args.filter_out}",
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    policy = _load_policy(args.policy)
    orig = load_wav(args.orig)
    shifted = load_wav(args.shifted)
    report = evaluate_shift(orig, shifted, args.alpha, policy, cfg)
    _emit(
        args,
        report.to_dict(),
        f"mcd={report.mcd_db:.3f} dB  delta_p={report.delta_p_st:+.3f} ST  "
        f"envelope_mcd={report.envelope_mcd_db:.3f} dB  accepted={report.accepted}"
        + (f"  reasons={','.join(report.reasons)}" if report.reasons else ""),
    )
    return EXIT_OK


def cmd_augment(args) -> int:
    manifest = load_manifest(args.manifest)
    policy = _load_policy(args.policy)
    out_dir = Path(args.out_dir)
    aug_manifest, reports = build_augmented(
        manifest,
        _parse_alphas(args.alphas),
        ShiftMethod(args.method),
        policy,
        out_dir,
        jobs=args.jobs,
    )
    manifest_path = out_dir / "augmented.jsonl"
    report_path = out_dir / "report.jsonl"
    save_manifest(aug_manifest, manifest_path)
    report_path.write_text(
        "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in reports)
    )
    accepted = sum(1 for r in reports if r.status == "accepted")
    _emit(
        args,
        {
            "manifest": str(manifest_path),
            "report": str(report_path),
            "candidates": len(reports),
            "accepted": accepted,
        },
        f"{accepted}/{len(reports)} candidates accepted; wrote {manifest_path}",
    )
    return EXIT_OK


def cmd_schedule(args) -> int:
    d_orig = load_manifest(args.orig)
    d_aug = load_manifest(args.aug)
    plan = TrainingPlan(
        epochs=args.epochs,
        d_orig=d_orig,
        d_aug=d_aug,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    vocab = build_vocabulary(d_orig, d_aug)
    model = ToyModel(args.dim, seed=args.seed, n_chars=max(len(vocab), 1))
    logs = run_training(model, plan)
    Path(args.log).write_text(
        "".join(json.dumps(log.to_dict(), sort_keys=True) + "\n" for log in logs)
    )
    final = logs[-1].mean_losses
    _emit(
        args,
        {"log": args.log, "epochs": len(logs), "final_losses": final},
        f"ran {len(logs)} epochs; final losses {final}; wrote {args.log}",
    )
    return EXIT_OK


def cmd_alpha_star(args) -> int:
    manifest = load_manifest(args.manifest)
    policy = _load_policy(args.policy)
    grid = _parse_alphas(args.alphas)
    if not grid:
        raise EmptyResultError("empty alpha grid")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    method = ShiftMethod(args.method)

    per_alpha: dict[float, dict] = {}
    for alpha in sorted(grid, key=abs):
        shifted_records = []
        all_accepted = True
        for rec in manifest.records:
            w = load_wav(rec.wav_path)
            shifted = shift(w, ShiftRequest(alpha, method), manifest.analysis)
            report = evaluate_shift(w, shifted, alpha, policy, manifest.analysis)
            out_path = out_dir / f"{derived_id(rec.id, alpha)}.wav"
            save_wav(out_path, shifted)
            shifted_records.append((rec.id, str(out_path)))
            all_accepted = all_accepted and report.accepted
        score_manifest = Manifest(
            [
                UtteranceRecord(
                    id=derived_id(rid, alpha),
                    wav_path=path,
                    text="",
                    alpha=alpha,
                    source_id=rid,
                )
                for rid, path in shifted_records
            ],
            manifest.analysis,
            manifest.ref_f0,
        )
        scores = external_score_hook(score_manifest, args.scorer)
        scores_ok = len(scores) == len(shifted_records) and all(
            s <= policy.max_external_score for s in scores.values()
        )
        per_alpha[alpha] = {
            "accepted": all_accepted,
            "scores_ok": scores_ok,
            "scores": {k: scores.get(k) for k in sorted(scores)},
            "qualified": all_accepted and scores_ok,
        }

    qualified_abs = set()
    for magnitude in sorted({abs(a) for a in grid}):
        group = [a for a in grid if abs(a) == magnitude]
        if all(per_alpha[a]["qualified"] for a in group):
            qualified_abs.add(magnitude)
        else:
            break  # contiguity: stop at the first failing magnitude
    if not qualified_abs:
        raise EmptyResultError("no alpha magnitude qualifies")
    alpha_star = max(qualified_abs)
    _emit(
        args,
        {
            "alpha_star": alpha_star,
            "per_alpha": {f"{a:+g}": v for a, v in sorted(per_alpha.items())},
        },
        f"alpha_star = {alpha_star}",
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchforge",
        description="Timbre-preserving pitch shifting, augmentation, and training tools",
    )
    parser.add_argument("--config", help="JSON file with analysis config overrides")
    parser.add_argument("--json", action="store_true", help="emit one JSON document on stdout")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for batch commands")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="write mel, pitch CSV, and pitch stats for a wav")
    p.add_argument("wav")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fixture", help="generate a deterministic test signal")
    p.add_argument("--kind", required=True, choices=fixtures.FIXTURE_KINDS)
    p.add_argument("--f0", type=float, required=True)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("out")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("shift", help="pitch-shift a wav")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument(
        "--method",
        default=ShiftMethod.SOURCE_FILTER.value,
        choices=[m.value for m in ShiftMethod],
    )
    p.add_argument("infile")
    p.add_argument("outfile")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("make-inputs", help="emit source/filter mel inputs (MELSPEC1)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("infile")
    p.add_argument("source_out")
    p.add_argument("filter_out")
    p.set_defaults(func=cmd_make_inputs)

    p = sub.add_parser("eval", help="evaluate a shifted wav against its original")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--policy")
    p.add_argument("orig")
    p.add_argument("shifted")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="build a pitch-augmented dataset from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alphas", required=True, help="comma-separated semitone offsets")
    p.add_argument(
        "--method",
        default=ShiftMethod.SOURCE_FILTER.value,
        choices=[m.value for m in ShiftMethod],
    )
    p.add_argument("--out-dir", required=True)
    p.add_argument("--policy")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("schedule", help="run the alternating-epoch toy training")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--orig", required=True)
    p.add_argument("--aug", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--log", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("alpha-star", help="find the largest usable pitch adjustment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--scorer", required=True, help="command template; {wav} is substituted")
    p.add_argument("--policy")
    p.add_argument(
        "--method",
        default=ShiftMethod.SOURCE_FILTER.value,
        choices=[m.value for m in ShiftMethod],
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_alpha_star)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("PITCHFORGE_LOG", "WARNING").upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except EMPTY_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
