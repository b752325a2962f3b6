"""Mixed-subject and leave-one-subject-out protocols, and report shaping.

A report cell is keyed by (model family, input type, session condition,
protocol). The published reference grid for the original 14-subject driving
dataset is available for side-by-side rendering; those numbers are context,
not reproduction targets, since that dataset is not bundled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataset,
    EmptyInput,
    LengthMismatch,
    MissingCell,
    TooFewSubjects,
)
from .recording import LabeledEpoch, TrialLabel, balance_classes
from .seeds import mix_seed
from .stats import StatResult

MODELS = ("svm", "eegnet")
INPUTS = ("bands", "raw")
SESSIONS = ("kplus", "kminus")
PROTOCOLS = ("mixed", "loso")

# Published accuracies (percent) for the original driving dataset,
# keyed (model, input, session, protocol). Reference display only.
REFERENCE_ACCURACY_PCT = {
    ("svm", "bands", "kplus", "mixed"): 82.46,
    ("svm", "bands", "kminus", "mixed"): 85.71,
    ("svm", "bands", "kplus", "loso"): 69.73,
    ("svm", "bands", "kminus", "loso"): 77.20,
    ("eegnet", "bands", "kplus", "mixed"): 83.12,
    ("eegnet", "bands", "kminus", "mixed"): 80.52,
    ("eegnet", "bands", "kplus", "loso"): 68.80,
    ("eegnet", "bands", "kminus", "loso"): 71.75,
    ("eegnet", "raw", "kplus", "mixed"): 88.96,
    ("eegnet", "raw", "kminus", "mixed"): 81.82,
    ("eegnet", "raw", "kplus", "loso"): 75.51,
    ("eegnet", "raw", "kminus", "loso"): 69.35,
}


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches."""
    p = np.asarray(predictions).ravel()
    y = np.asarray(labels).ravel()
    if p.size == 0:
        raise EmptyInput("accuracy of empty vectors")
    if p.size != y.size:
        raise LengthMismatch(f"{p.size} predictions for {y.size} labels")
    return float(np.mean(p == y))


@dataclass(frozen=True)
class SplitPlan:
    train: np.ndarray
    test: np.ndarray
    seed: int
    strategy: str

    def __post_init__(self) -> None:
        overlap = set(self.train.tolist()) & set(self.test.tolist())
        if overlap:
            raise ValueError(f"train/test overlap: {sorted(overlap)[:5]}...")


def split_mixed(epochs: list[LabeledEpoch], train_frac: float = 0.9,
                seed: int = 0) -> SplitPlan:
    """Seeded stratified split of a balanced dataset.

    Each class is shuffled independently and contributes
    round(n_class * train_frac) indices to the training side (half-up
    rounding), so both partitions stay balanced.
    """
    if not epochs:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    train: list[int] = []
    test: list[int] = []
    for label in (TrialLabel.ATTENTIVE, TrialLabel.INATTENTIVE):
        idx = np.array([i for i, e in enumerate(epochs) if e.label is label], dtype=np.int64)
        if idx.size == 0:
            continue
        order = np.random.default_rng(mix_seed(seed, label is TrialLabel.INATTENTIVE)).permutation(idx.size)
        n_train = int(math.floor(idx.size * train_frac + 0.5))
        shuffled = idx[order]
        train.extend(shuffled[:n_train].tolist())
        test.extend(shuffled[n_train:].tolist())
    return SplitPlan(
        train=np.array(sorted(train), dtype=np.int64),
        test=np.array(sorted(test), dtype=np.int64),
        seed=seed,
        strategy=f"mixed(train_frac={train_frac})",
    )


@dataclass(frozen=True)
class FoldResult:
    fold: int
    subject_id: int
    accuracy: float
    n_test: int


@dataclass
class LosoResult:
    folds: list[FoldResult]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    @property
    def per_subject(self) -> dict[int, float]:
        return {f.subject_id: f.accuracy for f in self.folds}


def run_loso(epochs: list[LabeledEpoch], fit_predict, seed: int = 0) -> LosoResult:
    """Leave-one-subject-out evaluation.

    One fold per subject: the held-out subject's epochs are the test set,
    everything else is balanced (seeded per fold) and passed to
    fit_predict(train_epochs, test_epochs) -> predicted 0/1 labels. The
    summary accuracy is the plain mean over folds.
    """
    subjects = sorted({e.subject_id for e in epochs})
    if len(subjects) < 2:
        raise TooFewSubjects(f"LOSO needs >= 2 subjects, got {len(subjects)}")
    folds = []
    for k, held_out in enumerate(subjects):
        train_epochs = [e for e in epochs if e.subject_id != held_out]
        test_epochs = [e for e in epochs if e.subject_id == held_out]
        train_epochs = balance_classes(train_epochs, seed=mix_seed(seed, k, held_out))
        assert all(e.subject_id != held_out for e in train_epochs)
        preds = np.asarray(fit_predict(train_epochs, test_epochs)).ravel()
        truth = np.array([1 if e.label is TrialLabel.INATTENTIVE else 0 for e in test_epochs])
        folds.append(
            FoldResult(fold=k, subject_id=held_out,
                       accuracy=accuracy(preds, truth), n_test=len(test_epochs))
        )
    return LosoResult(folds=folds)


# ---------------------------------------------------------------------------
# report container and rendering
# ---------------------------------------------------------------------------


@dataclass
class CellResult:
    accuracy: float  # fraction in [0, 1]
    folds: list[FoldResult] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.folds:
            mean = float(np.mean([f.accuracy for f in self.folds]))
            if abs(mean - self.accuracy) > 1e-9:
                raise ValueError(
                    f"cell accuracy {self.accuracy} != mean of folds {mean}"
                )


CellKey = tuple[str, str, str, str]  # (model, input, session, protocol)


@dataclass
class EvalReport:
    cells: dict[CellKey, CellResult] = field(default_factory=dict)
    stats: list[StatResult] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)

    def add_cell(self, key: CellKey, result: CellResult) -> None:
        model, inp, session, protocol = key
        if model not in MODELS or inp not in INPUTS or session not in SESSIONS \
                or protocol not in PROTOCOLS:
            raise ValueError(f"bad cell key {key}")
        self.cells[key] = result

    def cell(self, key: CellKey) -> CellResult:
        if key not in self.cells:
            raise MissingCell(f"no result for cell {key}")
        return self.cells[key]


def report_to_csv(report: EvalReport) -> str:
    """Cell and fold rows; fold/subject are blank on summary rows.

    Accuracy is written at full precision so re-parsing reproduces the grid
    exactly; the rendered text table rounds to 2 decimals instead.
    """
    lines = ["model,input,session,protocol,accuracy_pct,fold,subject_id"]
    for key in sorted(report.cells):
        cell = report.cells[key]
        model, inp, session, protocol = key
        lines.append(f"{model},{inp},{session},{protocol},{cell.accuracy * 100!r},,")
        for f in cell.folds:
            lines.append(
                f"{model},{inp},{session},{protocol},{f.accuracy * 100!r},{f.fold},{f.subject_id}"
            )
    return "\n".join(lines) + "\n"


def report_from_csv(text: str) -> EvalReport:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0] != "model,input,session,protocol,accuracy_pct,fold,subject_id":
        raise ValueError("not a report CSV")
    report = EvalReport()
    folds: dict[CellKey, list[FoldResult]] = {}
    summary: dict[CellKey, float] = {}
    for ln in lines[1:]:
        model, inp, session, protocol, acc_pct, fold, subject = ln.split(",")
        key = (model, inp, session, protocol)
        if fold == "":
            summary[key] = float(acc_pct) / 100.0
        else:
            folds.setdefault(key, []).append(
                FoldResult(fold=int(fold), subject_id=int(subject),
                           accuracy=float(acc_pct) / 100.0, n_test=0)
            )
    for key, acc in summary.items():
        report.add_cell(key, CellResult(accuracy=acc, folds=folds.get(key, [])))
    return report


def stats_block(entries: list[tuple[str, object]]) -> str:
    return "\n".join(f"{k}={v}" for k, v in entries) + "\n"


def render_report(report: EvalReport, include_reference: bool = False) -> str:
    """Text rendering: the model x condition x protocol grid (2-decimal
    percentages), per-subject LOSO breakdowns, and any statistics."""
    out = []
    header = f"{'model':22s} {'K+ mixed':>9s} {'K- mixed':>9s} {'K+ loso':>9s} {'K- loso':>9s}"
    out.append(header)
    out.append("-" * len(header))
    rows = [("svm", "bands"), ("eegnet", "bands"), ("eegnet", "raw")]
    for model, inp in rows:
        cells = []
        for protocol in ("mixed", "loso"):
            for session in ("kplus", "kminus"):
                key = (model, inp, session, protocol)
                if key in report.cells:
                    cells.append(f"{report.cells[key].accuracy * 100:9.2f}")
                else:
                    cells.append(f"{'-':>9s}")
        out.append(f"{model + ' on ' + inp:22s} {cells[0]} {cells[1]} {cells[2]} {cells[3]}")
    if include_reference:
        out.append("")
        out.append("reference (original driving dataset, not reproduced here):")
        for model, inp in rows:
            vals = [
                REFERENCE_ACCURACY_PCT[(model, inp, session, protocol)]
                for protocol in ("mixed", "loso")
                for session in ("kplus", "kminus")
            ]
            out.append(
                f"{model + ' on ' + inp:22s} "
                + " ".join(f"{v:9.2f}" for v in vals)
            )
    loso_cells = {k: v for k, v in report.cells.items() if k[3] == "loso" and v.folds}
    if loso_cells:
        out.append("")
        out.append("per-subject accuracies (loso):")
        for key in sorted(loso_cells):
            cell = loso_cells[key]
            out.append(f"  {key[0]} on {key[1]}, {key[2]}:")
            for f in cell.folds:
                out.append(f"    subject {f.subject_id:3d}: {f.accuracy * 100:6.2f}")
    if report.stats:
        out.append("")
        out.append("statistics:")
        for s in report.stats:
            out.append(f"  {s.kind}: statistic={s.statistic:.4f} p={s.p_value:.4f} n={s.n}")
    if report.seeds:
        out.append("")
        out.append("seeds: " + ", ".join(f"{k}={v}" for k, v in sorted(report.seeds.items())))
    return "\n".join(out) + "\n"


def emit_report(report: EvalReport, required: list[CellKey] | None = None,
                include_reference: bool = False) -> tuple[str, str]:
    """(rendered text, CSV). Raises MissingCell if a required cell is absent."""
    if required is not None:
        if not required:
            raise MissingCell("empty cell request")
        for key in required:
            if key not in report.cells:
                raise MissingCell(f"requested cell {key} is absent")
    return render_report(report, include_reference), report_to_csv(report)
