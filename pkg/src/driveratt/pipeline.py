"""End-to-end orchestration: label -> epoch -> features -> balance ->
split/folds -> train -> evaluate -> report.

One invocation fills one report cell (model family x input x session
condition x protocol). Every stage seed derives from the run's master seed,
and the returned artifacts carry those seeds so any run can be replayed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import EmptyDataset, SingleClassInput
from .eegnet.model import EEGNetModel
from .eegnet.training import bands_config, bands_to_tensor, epochs_to_tensor, train
from .evaluation import (
    CellResult,
    EvalReport,
    LosoResult,
    accuracy,
    run_loso,
    split_mixed,
)
from .recording import LabeledEpoch, Recording, Session, TrialLabel, balance_classes, build_labeled_set
from .seeds import mix_seed
from .spectral import band_powers
from .svm import svm_train

MODEL_KINDS = ("svm", "eegnet-raw", "eegnet-bands")

# seed-derivation tags, one per pipeline stage
_TAG_BALANCE = 101
_TAG_SPLIT = 102
_TAG_TRAIN = 103
_TAG_INIT = 104
_TAG_LOSO = 105


@dataclass
class PipelineResult:
    cell_key: tuple[str, str, str, str]
    cell: CellResult
    report: EvalReport
    models: list[object]  # trained model objects, one per fold for loso
    seeds: dict[str, int]
    n_train: int
    n_test: int


def epoch_labels(epochs: list[LabeledEpoch]) -> np.ndarray:
    return np.array([1 if e.label is TrialLabel.INATTENTIVE else 0 for e in epochs])


def _epoch_features(epochs: list[LabeledEpoch], fs: float, bands) -> np.ndarray:
    return np.stack([band_powers(e.data, fs, bands) for e in epochs])


class SvmTrainer:
    """Band-power features -> standardize -> SMO; labels map to -1/+1."""

    def __init__(self, cfg: RunConfig, fs: float, seed: int):
        self.cfg = cfg
        self.fs = fs
        self.seed = seed
        self.model = None

    def fit_predict(self, train_epochs, test_epochs) -> np.ndarray:
        x_tr = _epoch_features(train_epochs, self.fs, self.cfg.bands)
        y_tr = np.where(epoch_labels(train_epochs) == 1, 1.0, -1.0)
        self.model = svm_train(x_tr, y_tr, self.cfg.svm,
                               seed=mix_seed(self.seed, _TAG_TRAIN))
        x_te = _epoch_features(test_epochs, self.fs, self.cfg.bands)
        return (self.model.predict(x_te) > 0).astype(np.int64)


class EEGNetRawTrainer:
    """Raw windows straight into the network."""

    def __init__(self, cfg: RunConfig, fs: float, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.model = None

    def fit_predict(self, train_epochs, test_epochs) -> np.ndarray:
        x_tr, y_tr = epochs_to_tensor(train_epochs)
        net_cfg = self.cfg.eegnet_config(
            n_channels=x_tr.shape[1], n_timepoints=x_tr.shape[2]
        )
        self.model = EEGNetModel(net_cfg, seed=mix_seed(self.seed, _TAG_INIT))
        train(self.model, x_tr, y_tr, seed=mix_seed(self.seed, _TAG_TRAIN))
        x_te, _ = epochs_to_tensor(test_epochs)
        return self.model.predict(x_te)


class EEGNetBandsTrainer:
    """Band-power features reshaped to a (channels x bands) image."""

    def __init__(self, cfg: RunConfig, fs: float, seed: int):
        self.cfg = cfg
        self.fs = fs
        self.seed = seed
        self.model = None

    def fit_predict(self, train_epochs, test_epochs) -> np.ndarray:
        from dataclasses import replace

        n_channels = train_epochs[0].data.shape[0]
        n_bands = len(self.cfg.bands)
        feats = _epoch_features(train_epochs, self.fs, self.cfg.bands)
        x_tr = bands_to_tensor(feats, n_channels, n_bands)
        y_tr = epoch_labels(train_epochs)
        base = self.cfg.eegnet_config(n_channels=n_channels, n_timepoints=n_bands)
        net_cfg = bands_config(base, n_channels, n_bands)
        if self.cfg.eegnet_bands:
            net_cfg = replace(net_cfg, **self.cfg.eegnet_bands)
        self.model = EEGNetModel(net_cfg, seed=mix_seed(self.seed, _TAG_INIT))
        train(self.model, x_tr, y_tr, seed=mix_seed(self.seed, _TAG_TRAIN))
        x_te = bands_to_tensor(
            _epoch_features(test_epochs, self.fs, self.cfg.bands), n_channels, n_bands
        )
        return self.model.predict(x_te)


_TRAINERS = {
    "svm": SvmTrainer,
    "eegnet-raw": EEGNetRawTrainer,
    "eegnet-bands": EEGNetBandsTrainer,
}


def cell_key_for(model_kind: str, session: Session, protocol: str) -> tuple[str, str, str, str]:
    family = "svm" if model_kind == "svm" else "eegnet"
    inp = "bands" if model_kind in ("svm", "eegnet-bands") else "raw"
    return (family, inp, session.token, protocol)


def run_pipeline(
    recordings: list[Recording],
    cfg: RunConfig,
    model_kind: str,
    protocol: str,
    session: Session,
) -> PipelineResult:
    """Fill one report cell from raw recordings."""
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"model must be one of {MODEL_KINDS}, got {model_kind!r}")
    if protocol not in ("mixed", "loso"):
        raise ValueError(f"protocol must be mixed or loso, got {protocol!r}")
    selected = [r for r in recordings if r.session is session]
    if not selected:
        raise EmptyDataset(f"no recordings for session {session.token}")
    fs_set = {r.sample_rate_hz for r in selected}
    if len(fs_set) != 1:
        raise ValueError(f"recordings mix sample rates: {sorted(fs_set)}")
    fs = fs_set.pop()

    labeled = build_labeled_set(selected, cfg.policy)
    n_att = labeled.count(TrialLabel.ATTENTIVE)
    n_inatt = labeled.count(TrialLabel.INATTENTIVE)
    if n_att == 0 or n_inatt == 0:
        raise SingleClassInput(
            f"a class is empty after labeling: {n_att} attentive, {n_inatt} inattentive"
        )

    seeds = {
        "master": cfg.seed,
        "balance": mix_seed(cfg.seed, _TAG_BALANCE),
        "split": mix_seed(cfg.seed, _TAG_SPLIT),
        "train": mix_seed(cfg.seed, _TAG_TRAIN),
        "loso": mix_seed(cfg.seed, _TAG_LOSO),
    }
    trainer_cls = _TRAINERS[model_kind]
    key = cell_key_for(model_kind, session, protocol)
    report = EvalReport(seeds=dict(seeds))
    models: list[object] = []

    if protocol == "mixed":
        balanced = balance_classes(labeled.epochs, seed=seeds["balance"])
        plan = split_mixed(balanced, train_frac=cfg.train_frac, seed=seeds["split"])
        train_epochs = [balanced[i] for i in plan.train]
        test_epochs = [balanced[i] for i in plan.test]
        trainer = trainer_cls(cfg, fs, seeds["train"])
        preds = trainer.fit_predict(train_epochs, test_epochs)
        acc = accuracy(preds, epoch_labels(test_epochs))
        cell = CellResult(accuracy=acc)
        models.append(trainer.model)
        n_train, n_test = len(train_epochs), len(test_epochs)
    else:
        trainers: list[object] = []

        def fit_predict(train_epochs, test_epochs):
            trainer = trainer_cls(cfg, fs, seeds["train"])
            preds = trainer.fit_predict(train_epochs, test_epochs)
            trainers.append(trainer)
            return preds

        loso: LosoResult = run_loso(labeled.epochs, fit_predict, seed=seeds["loso"])
        cell = CellResult(accuracy=loso.mean_accuracy, folds=loso.folds)
        models.extend(t.model for t in trainers)
        n_train = len(labeled.epochs)
        n_test = sum(f.n_test for f in loso.folds)

    report.add_cell(key, cell)
    return PipelineResult(
        cell_key=key,
        cell=cell,
        report=report,
        models=models,
        seeds=seeds,
        n_train=n_train,
        n_test=n_test,
    )
