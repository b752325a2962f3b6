"""Training loop, k-fold random search, and the band-feature input adapter."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import EmptyDataset, EmptySpace, LengthMismatch
from ..seeds import mix_seed
from .model import EEGNetConfig, EEGNetModel, TrainHistory, bce_loss


def train(
    model: EEGNetModel,
    x: np.ndarray,
    y: np.ndarray,
    val: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int = 0,
) -> TrainHistory:
    """Run config.epochs of seeded mini-batch training, in place.

    Each epoch shuffles with a seed derived from (seed, epoch); the final
    partial batch is trained on. Per-epoch loss/accuracy come from the
    training-mode forward passes themselves. Identical seeds give identical
    histories and bit-identical final parameters.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] == 0:
        raise EmptyDataset("empty training set")
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} samples but {y.shape[0]} labels")
    history = TrainHistory()
    bs = model.config.batch_size
    n = x.shape[0]
    for epoch in range(model.config.epochs):
        order = np.random.default_rng(mix_seed(seed, epoch)).permutation(n)
        losses = []
        correct = 0
        for step, start in enumerate(range(0, n, bs)):
            idx = order[start : start + bs]
            xb, yb = x[idx], y[idx]
            probs = model.forward(xb, training=True,
                                  seed=mix_seed(seed, epoch, step, 1))
            loss = bce_loss(probs, yb)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch} step {step}")
            grads = model.backward(yb)
            model.adam_step(grads)
            losses.append(loss * len(idx))
            correct += int(np.sum((probs.ravel() >= 0.5) == (yb >= 0.5)))
        history.loss.append(sum(losses) / n)
        history.accuracy.append(correct / n)
        if val is not None:
            xv, yv = val
            pv = model.predict_proba(xv)
            history.val_loss.append(bce_loss(pv, yv))
            history.val_accuracy.append(
                float(np.mean((pv.ravel() >= 0.5) == (np.asarray(yv).ravel() >= 0.5)))
            )
    return history


def epochs_to_tensor(epochs) -> tuple[np.ndarray, np.ndarray]:
    """Stack labeled epochs into (B, C, T, 1) and 0/1 labels
    (attentive = 0, inattentive = 1)."""
    from ..recording import TrialLabel

    if not epochs:
        raise EmptyDataset("no epochs to stack")
    x = np.stack([e.data for e in epochs]).astype(np.float64)[..., None]
    y = np.array([1 if e.label is TrialLabel.INATTENTIVE else 0 for e in epochs])
    return x, y


def bands_to_tensor(values: np.ndarray, n_channels: int, n_bands: int = 5) -> np.ndarray:
    """Reshape a (B, n_channels * n_bands) feature batch into the
    (B, n_channels, n_bands, 1) image the band-input network consumes."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.shape[1] != n_channels * n_bands:
        raise LengthMismatch(
            f"feature length {v.shape[1]} != {n_channels} channels x {n_bands} bands"
        )
    return v.reshape(v.shape[0], n_channels, n_bands, 1)


def bands_config(base: EEGNetConfig, n_channels: int, n_bands: int = 5) -> EEGNetConfig:
    """Config for the band-feature variant: a (channels x bands) input image
    with kernel and pool sizes shrunk to fit the 5-wide time axis. Every
    field can still be overridden afterwards."""
    return replace(
        base,
        n_channels=n_channels,
        n_timepoints=n_bands,
        temporal_len=3,
        pool1=2,
        sep_len=3,
        pool2=2,
    )


def kfold_indices(n: int, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffle, then `folds` near-equal contiguous validation chunks."""
    order = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(order, folds)
    out = []
    for i, chunk in enumerate(chunks):
        rest = np.concatenate([c for j, c in enumerate(chunks) if j != i]) if folds > 1 else chunk
        out.append((rest, chunk))
    return out


def default_evaluator(cfg: EEGNetConfig, x_tr, y_tr, x_va, y_va, seed: int) -> float:
    model = EEGNetModel(cfg, seed=mix_seed(seed, 17))
    train(model, x_tr, y_tr, seed=mix_seed(seed, 23))
    pred = model.predict(x_va)
    return float(np.mean(pred == np.asarray(y_va).ravel()))


def random_search(
    space: dict[str, list],
    x: np.ndarray,
    y: np.ndarray,
    base: EEGNetConfig,
    folds: int = 5,
    budget: int = 10,
    seed: int = 0,
    evaluate=default_evaluator,
) -> EEGNetConfig:
    """Random-search hyperparameter tuning by k-fold cross-validation.

    Draws `budget` candidate configs (each field sampled uniformly from its
    candidate list, seeded), scores each by mean CV accuracy on (x, y) only,
    and returns the argmax; ties go to the earlier sample.
    """
    if not space or any(len(v) == 0 for v in space.values()):
        raise EmptySpace("every searched field needs at least one candidate")
    unknown = set(space) - set(base.to_dict())
    if unknown:
        raise EmptySpace(f"unknown config fields in search space: {sorted(unknown)}")
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    x = np.asarray(x)
    y = np.asarray(y).ravel()
    if x.shape[0] == 0:
        raise EmptyDataset("empty tuning set")
    rng = np.random.default_rng(mix_seed(seed, 5))
    splits = kfold_indices(x.shape[0], folds, mix_seed(seed, 7))
    best_cfg = None
    best_score = -1.0
    for i in range(budget):
        picks = {k: v[rng.integers(len(v))] for k, v in sorted(space.items())}
        cfg = replace(base, **picks)
        scores = [
            evaluate(cfg, x[tr], y[tr], x[va], y[va], seed=mix_seed(seed, i, fold))
            for fold, (tr, va) in enumerate(splits)
        ]
        score = float(np.mean(scores))
        if score > best_score:
            best_score = score
            best_cfg = cfg
    return best_cfg
