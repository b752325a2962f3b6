"""Recordings, reaction-time labeling, epoch extraction, and class balancing.

A Recording is one subject-session of multichannel EEG plus the lane-deviation
event markers. Reaction times (response onset minus deviation onset) drive a
two-threshold labeling rule: trials faster than the session's alert percentile
are attentive, trials slower than a fixed cutoff are inattentive, everything in
between is excluded. Classifier input is the fixed-length window ending at each
deviation onset.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, SingleClassInput, WindowOutOfBounds


class Session(enum.Enum):
    """Feedback condition of a driving session."""

    KMINUS = 0  # no kinesthetic feedback
    KPLUS = 1  # kinesthetic feedback

    @property
    def token(self) -> str:
        return "kplus" if self is Session.KPLUS else "kminus"

    @property
    def display(self) -> str:
        return "K+" if self is Session.KPLUS else "K-"

    @classmethod
    def from_token(cls, token: str) -> "Session":
        table = {"kplus": cls.KPLUS, "kminus": cls.KMINUS, "k+": cls.KPLUS, "k-": cls.KMINUS}
        key = token.strip().lower()
        if key not in table:
            raise ValueError(f"unknown session token {token!r}")
        return table[key]


class TrialLabel(enum.Enum):
    ATTENTIVE = "attentive"
    INATTENTIVE = "inattentive"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class DeviationEvent:
    """Sample indices of one lane-deviation trial."""

    deviation_onset: int
    response_onset: int
    response_offset: int

    def __post_init__(self) -> None:
        if not (0 <= self.deviation_onset <= self.response_onset <= self.response_offset):
            raise ValueError(
                f"event indices must satisfy 0 <= deviation_onset <= response_onset "
                f"<= response_offset, got ({self.deviation_onset}, "
                f"{self.response_onset}, {self.response_offset})"
            )


@dataclass(frozen=True)
class LabelPolicy:
    """Thresholds of the reaction-time labeling rule.

    alert_percentile: percentile of the session's RT distribution used as the
        attentive cutoff (strictly-below wins the label).
    slow_threshold_s: global cutoff; RTs strictly above it are inattentive.
    window_s: length of the pre-deviation window fed to the classifiers.
    """

    alert_percentile: float = 20.0
    slow_threshold_s: float = 2.1
    window_s: float = 3.0

    def __post_init__(self) -> None:
        if not 0.0 < self.alert_percentile < 100.0:
            raise ValueError(f"alert_percentile must be in (0, 100), got {self.alert_percentile}")
        if self.slow_threshold_s <= 0.0:
            raise ValueError(f"slow_threshold_s must be positive, got {self.slow_threshold_s}")
        if self.window_s <= 0.0:
            raise ValueError(f"window_s must be positive, got {self.window_s}")

    def window_samples(self, sample_rate_hz: float) -> int:
        """Width of the extracted window in samples (both endpoints kept)."""
        return int(round(self.window_s * sample_rate_hz)) + 1


@dataclass
class Recording:
    """One subject-session of EEG with its deviation events.

    samples is channel-major (n_channels x n_samples), in microvolts.
    """

    subject_id: int
    session: Session
    sample_rate_hz: float
    channel_names: list[str]
    samples: np.ndarray
    events: list[DeviationEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {self.samples.shape}")
        if self.samples.shape[0] != len(self.channel_names):
            raise ValueError(
                f"samples has {self.samples.shape[0]} channels but "
                f"{len(self.channel_names)} channel names were given"
            )
        if self.sample_rate_hz <= 0.0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        n = self.samples.shape[1]
        for ev in self.events:
            if ev.response_offset >= n:
                raise ValueError(
                    f"event {ev} extends past the last sample index {n - 1}"
                )
        onsets = [ev.deviation_onset for ev in self.events]
        if onsets != sorted(onsets):
            raise ValueError("events must be sorted by deviation_onset")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class LabeledEpoch:
    """A pre-deviation window tagged attentive or inattentive."""

    subject_id: int
    session: Session
    label: TrialLabel
    data: np.ndarray  # n_channels x window_len
    rt_s: float

    def __post_init__(self) -> None:
        if self.label is TrialLabel.EXCLUDED:
            raise ValueError("a LabeledEpoch is never Excluded")
        if self.data.ndim != 2:
            raise ValueError(f"epoch data must be 2-D, got shape {self.data.shape}")


@dataclass(frozen=True)
class SessionCounts:
    """Per-session bookkeeping for the labeling stage.

    The four categories partition the session's events: Excluded is decided
    first (from the RT alone), then non-Excluded trials whose window precedes
    sample 0 count as out-of-bounds, and the rest become labeled epochs.
    """

    subject_id: int
    session: Session
    n_events: int
    n_attentive: int
    n_inattentive: int
    n_excluded: int
    n_out_of_bounds: int


@dataclass
class LabeledSet:
    epochs: list[LabeledEpoch]
    counts: list[SessionCounts]
    n_skipped_recordings: int = 0

    def count(self, label: TrialLabel) -> int:
        return sum(1 for e in self.epochs if e.label is label)


def compute_reaction_times(rec: Recording) -> list[float]:
    """Reaction time in seconds for each event, in event order."""
    fs = rec.sample_rate_hz
    return [(ev.response_onset - ev.deviation_onset) / fs for ev in rec.events]


def percentile_nearest_rank(values: list[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th order statistic.

    Deterministic and always equal to one of the input values.
    """
    if not values:
        raise EmptyInput("percentile of an empty list")
    if not 0.0 < p <= 100.0:
        raise ValueError(f"percentile must be in (0, 100], got {p}")
    ordered = sorted(values)
    rank = math.ceil(p / 100.0 * len(ordered))  # 1-indexed
    return ordered[rank - 1]


def label_trials(rts: list[float], policy: LabelPolicy) -> list[TrialLabel]:
    """Apply the two-threshold rule to one session's reaction times.

    The attentive cutoff is min(percentile, slow_threshold) so the two label
    sets stay disjoint even when the percentile lands above the slow cutoff.
    Both comparisons are strict; ties at either threshold are excluded.
    Thresholds are per input list, never pooled across sessions.
    """
    if not rts:
        raise EmptyInput("cannot label an empty RT list")
    theta = percentile_nearest_rank(rts, policy.alert_percentile)
    alert_cut = min(theta, policy.slow_threshold_s)
    labels = []
    for rt in rts:
        if rt < alert_cut:
            labels.append(TrialLabel.ATTENTIVE)
        elif rt > policy.slow_threshold_s:
            labels.append(TrialLabel.INATTENTIVE)
        else:
            labels.append(TrialLabel.EXCLUDED)
    return labels


def extract_epoch(rec: Recording, event: DeviationEvent, policy: LabelPolicy) -> np.ndarray:
    """Pre-deviation window, inclusive of both endpoints.

    Returns samples at indices [deviation_onset - W, deviation_onset] for
    every channel, where W = round(window_s * fs); width W + 1.
    """
    w = int(round(policy.window_s * rec.sample_rate_hz))
    start = event.deviation_onset - w
    if start < 0:
        raise WindowOutOfBounds(
            f"window of {w} samples before onset {event.deviation_onset} "
            f"precedes sample 0"
        )
    return np.array(rec.samples[:, start : event.deviation_onset + 1], dtype=np.float64)


def build_labeled_set(recordings: list[Recording], policy: LabelPolicy) -> LabeledSet:
    """Label every recording independently and extract the usable epochs.

    Per session: compute RTs, label, and emit one LabeledEpoch per
    non-Excluded trial whose window fits; Excluded trials and (non-Excluded)
    out-of-bounds trials are dropped and counted. Event-less recordings are
    skipped with a count rather than raising.
    """
    epochs: list[LabeledEpoch] = []
    counts: list[SessionCounts] = []
    skipped = 0
    for rec in recordings:
        if not rec.events:
            skipped += 1
            continue
        rts = compute_reaction_times(rec)
        labels = label_trials(rts, policy)
        n_att = n_inatt = n_exc = n_oob = 0
        for ev, rt, lab in zip(rec.events, rts, labels):
            if lab is TrialLabel.EXCLUDED:
                n_exc += 1
                continue
            try:
                data = extract_epoch(rec, ev, policy)
            except WindowOutOfBounds:
                n_oob += 1
                continue
            epochs.append(
                LabeledEpoch(
                    subject_id=rec.subject_id,
                    session=rec.session,
                    label=lab,
                    data=data,
                    rt_s=rt,
                )
            )
            if lab is TrialLabel.ATTENTIVE:
                n_att += 1
            else:
                n_inatt += 1
        counts.append(
            SessionCounts(
                subject_id=rec.subject_id,
                session=rec.session,
                n_events=len(rec.events),
                n_attentive=n_att,
                n_inattentive=n_inatt,
                n_excluded=n_exc,
                n_out_of_bounds=n_oob,
            )
        )
    return LabeledSet(epochs=epochs, counts=counts, n_skipped_recordings=skipped)


def balance_classes(epochs: list[LabeledEpoch], seed: int) -> list[LabeledEpoch]:
    """Downsample the majority class to the minority count, seeded.

    The minority class is untouched; majority members are drawn uniformly
    without replacement. Output preserves the input's relative order.
    """
    att_idx = [i for i, e in enumerate(epochs) if e.label is TrialLabel.ATTENTIVE]
    inatt_idx = [i for i, e in enumerate(epochs) if e.label is TrialLabel.INATTENTIVE]
    if not att_idx or not inatt_idx:
        raise SingleClassInput(
            f"both classes required, got {len(att_idx)} attentive / "
            f"{len(inatt_idx)} inattentive"
        )
    if len(att_idx) == len(inatt_idx):
        return list(epochs)
    minority, majority = sorted((att_idx, inatt_idx), key=len)
    rng = np.random.default_rng(seed)
    kept = rng.choice(len(majority), size=len(minority), replace=False)
    keep = set(minority) | {majority[i] for i in kept}
    return [e for i, e in enumerate(epochs) if i in keep]
