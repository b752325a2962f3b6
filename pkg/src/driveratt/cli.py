"""Command-line front end.

Subcommands: synth | label | features | pipeline | stats | report.
Exit codes: 0 success, 2 config, 3 I/O, 4 data/statistical precondition,
5 internal validation. Every writing command drops a manifest.json with the
config hash, master seed, library versions, and output digests, enough to
replay the run bit for bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .atdr import load_recordings_dir, save_atdr
from .config import RunConfig, load_config
from .errors import (
    AllZeroDifferences,
    ConfigInvalid,
    EmptyDataset,
    FormatError,
    PipelineError,
    SingleClassInput,
    SubjectMismatch,
    TooFewPairs,
    TooFewSubjects,
    TooFewTrials,
)
from .evaluation import report_from_csv, report_to_csv, render_report, stats_block
from .persist import KIND_EEGNET_BANDS, KIND_EEGNET_RAW, save_eegnet, save_svm
from .pipeline import MODEL_KINDS, run_pipeline
from .recording import Recording, Session, compute_reaction_times, build_labeled_set
from .spectral import features_from_epochs, features_to_csv
from .stats import pearson, rt_dispersion, wilcoxon_signed_ranks
from .synth import generate_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_INTERNAL = 5

_DATA_ERRORS = (
    SingleClassInput,
    EmptyDataset,
    AllZeroDifferences,
    SubjectMismatch,
    TooFewPairs,
    TooFewSubjects,
    TooFewTrials,
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PipelineError, ValueError, FloatingPointError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(
        prog="driveratt",
        description="EEG driver-attention classification pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate synthetic recordings with ground truth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", parents=[common],
                       help="per-session label counts for a recordings directory")
    p.add_argument("--recordings", type=Path, required=True)
    p.add_argument("--session", choices=["kplus", "kminus"])
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("features", parents=[common],
                       help="export band-power features as CSV")
    p.add_argument("--recordings", type=Path, required=True)
    p.add_argument("--session", choices=["kplus", "kminus"])
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("pipeline", parents=[common],
                       help="train and evaluate one report cell")
    p.add_argument("--recordings", type=Path, required=True)
    p.add_argument("--model", choices=list(MODEL_KINDS), required=True)
    p.add_argument("--protocol", choices=["mixed", "loso"], required=True)
    p.add_argument("--session", choices=["kplus", "kminus"], required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("stats", parents=[common],
                       help="compare two leave-one-subject-out reports")
    p.add_argument("report_a", type=Path)
    p.add_argument("report_b", type=Path)
    p.add_argument("--recordings", type=Path,
                   help="compute per-subject RT dispersion for Pearson")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", parents=[common],
                       help="render a report CSV as text")
    p.add_argument("report_csv", type=Path)
    p.add_argument("--reference", action="store_true",
                   help="include the published reference grid")
    p.set_defaults(func=cmd_report)

    return parser


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.synth = replace(cfg.synth, seed=args.seed)
    return cfg


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigInvalid("--out DIR is required for this command")
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig,
                    params: dict, outputs: list[Path]) -> None:
    digests = {}
    for p in sorted(outputs):
        digests[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "params": params,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "versions": {"driveratt": __version__, "numpy": np.__version__},
        "outputs": digests,
    }
    _atomic_write_text(out_dir / "manifest.json",
                       json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _select_recordings(args) -> list[Recording]:
    recs = load_recordings_dir(args.recordings)
    if not recs:
        raise EmptyDataset(f"no .atdr files in {args.recordings}")
    if getattr(args, "session", None):
        wanted = Session.from_token(args.session)
        recs = [r for r in recs if r.session is wanted]
        if not recs:
            raise EmptyDataset(f"no recordings for session {args.session}")
    return recs


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_run_config(args)
    out = _require_out(args)
    recordings, gt = generate_dataset(cfg.synth)
    written = []
    for rec in recordings:
        path = out / f"sub{rec.subject_id:02d}_{rec.session.token}.atdr"
        save_atdr(rec, path)
        written.append(path)
    gt_path = out / "ground_truth.csv"
    _atomic_write_text(gt_path, gt.to_csv())
    written.append(gt_path)
    _write_manifest(out, "synth", cfg, {}, written)
    _say(args, f"wrote {len(recordings)} recordings to {out}")
    return EXIT_OK


def cmd_label(args) -> int:
    cfg = _load_run_config(args)
    recs = _select_recordings(args)
    labeled = build_labeled_set(recs, cfg.policy)
    header = f"{'subject':>7s} {'session':>7s} {'events':>6s} {'att':>5s} {'inatt':>5s} {'excl':>5s} {'oob':>5s}"
    lines = [header]
    for c in labeled.counts:
        lines.append(
            f"{c.subject_id:7d} {c.session.token:>7s} {c.n_events:6d} "
            f"{c.n_attentive:5d} {c.n_inattentive:5d} {c.n_excluded:5d} {c.n_out_of_bounds:5d}"
        )
    lines.append(
        f"total epochs: {len(labeled.epochs)} "
        f"(skipped event-less recordings: {labeled.n_skipped_recordings})"
    )
    text = "\n".join(lines)
    print(text)
    if args.out is not None:
        out = _require_out(args)
        _atomic_write_text(out / "labels.txt", text + "\n")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _load_run_config(args)
    out = _require_out(args)
    recs = _select_recordings(args)
    fs_set = {r.sample_rate_hz for r in recs}
    if len(fs_set) != 1:
        raise ConfigInvalid(f"recordings mix sample rates: {sorted(fs_set)}")
    labeled = build_labeled_set(recs, cfg.policy)
    if not labeled.epochs:
        raise EmptyDataset("no labeled epochs to featurize")
    feats = features_from_epochs(labeled.epochs, fs_set.pop(), cfg.bands)
    path = out / "features.csv"
    _atomic_write_text(path, features_to_csv(feats, cfg.bands))
    _write_manifest(out, "features", cfg,
                    {"session": getattr(args, "session", None)}, [path])
    _say(args, f"wrote {len(feats)} feature rows to {path}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load_run_config(args)
    out = _require_out(args)
    recs = load_recordings_dir(args.recordings)
    if not recs:
        raise EmptyDataset(f"no .atdr files in {args.recordings}")
    session = Session.from_token(args.session)
    result = run_pipeline(recs, cfg, args.model, args.protocol, session)

    written = []
    provenance = {
        "model": args.model,
        "protocol": args.protocol,
        "session": args.session,
        "seeds": result.seeds,
    }
    net_kind = KIND_EEGNET_BANDS if args.model == "eegnet-bands" else KIND_EEGNET_RAW
    for i, model in enumerate(result.models):
        suffix = f"_fold{i:02d}" if args.protocol == "loso" else ""
        path = out / f"model{suffix}.datm"
        if args.model == "svm":
            save_svm(model, path, provenance=provenance)
        else:
            save_eegnet(model, path, kind=net_kind, provenance=provenance)
        written.append(path)

    csv_path = out / "report.csv"
    _atomic_write_text(csv_path, report_to_csv(result.report))
    written.append(csv_path)
    txt_path = out / "report.txt"
    _atomic_write_text(txt_path, render_report(result.report))
    written.append(txt_path)
    _write_manifest(out, "pipeline", cfg, provenance, written)
    _say(
        args,
        f"{args.model} {args.protocol} {args.session}: "
        f"accuracy {result.cell.accuracy * 100:.2f}% "
        f"(train {result.n_train}, test {result.n_test})",
    )
    return EXIT_OK


def _loso_cell(report, path):
    loso_keys = [k for k in report.cells if k[3] == "loso"]
    if len(loso_keys) != 1:
        raise ConfigInvalid(f"{path}: expected exactly one loso cell, found {len(loso_keys)}")
    return loso_keys[0], report.cells[loso_keys[0]]


def cmd_stats(args) -> int:
    report_a = report_from_csv(args.report_a.read_text(encoding="utf-8"))
    report_b = report_from_csv(args.report_b.read_text(encoding="utf-8"))
    key_a, cell_a = _loso_cell(report_a, args.report_a)
    key_b, cell_b = _loso_cell(report_b, args.report_b)
    acc_a = {f.subject_id: f.accuracy for f in cell_a.folds}
    acc_b = {f.subject_id: f.accuracy for f in cell_b.folds}
    if set(acc_a) != set(acc_b):
        raise SubjectMismatch(
            f"subject sets differ: {sorted(set(acc_a) ^ set(acc_b))}"
        )
    subjects = sorted(acc_a)
    a = [acc_a[s] for s in subjects]
    b = [acc_b[s] for s in subjects]
    wil = wilcoxon_signed_ranks(a, b)
    entries = [
        ("report_a", "_".join(key_a)),
        ("report_b", "_".join(key_b)),
        ("wilcoxon_z", f"{wil.statistic:.6g}"),
        ("wilcoxon_p", f"{wil.p_value:.6g}"),
        ("n", wil.n),
    ]
    if args.recordings is not None:
        recs = load_recordings_dir(args.recordings)
        for tag, key, acc in (("a", key_a, acc_a), ("b", key_b, acc_b)):
            session = Session.from_token(key[2])
            disp = {}
            for s in subjects:
                rts = []
                for rec in recs:
                    if rec.subject_id == s and rec.session is session:
                        rts.extend(compute_reaction_times(rec))
                if len(rts) >= 2:
                    disp[s] = rt_dispersion(rts)
            usable = [s for s in subjects if s in disp]
            if len(usable) >= 3:
                pea = pearson([disp[s] for s in usable], [acc[s] for s in usable])
                entries.append((f"pearson_r_{tag}", f"{pea.statistic:.6g}"))
                entries.append((f"pearson_p_{tag}", f"{pea.p_value:.6g}"))
    block = stats_block(entries)
    print(block, end="")
    if args.out is not None:
        out = _require_out(args)
        _atomic_write_text(out / "stats.txt", block)
    return EXIT_OK


def cmd_report(args) -> int:
    report = report_from_csv(args.report_csv.read_text(encoding="utf-8"))
    text = render_report(report, include_reference=args.reference)
    print(text, end="")
    if args.out is not None:
        out = _require_out(args)
        _atomic_write_text(out / "report.txt", text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
