"""Seeded synthetic driving sessions with ground-truth attention states.

Stands in for the (unbundled) experimental dataset. Per trial a latent
alert/drowsy state is drawn; reaction times come from the state's lognormal
mode, and drowsy trials get alpha- and theta-range tones added on posterior
channels inside the pre-deviation window, riding on band-limited (1-50 Hz)
noise that is spectrally flat by construction. Kinesthetic-feedback sessions
carry extra broadband noise; subjects differ by per-channel gains and by
their individual tone frequencies, so inter-subject transfer is genuinely
harder than mixed-subject evaluation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, EmptyInput, LengthMismatch
from .recording import (
    DeviationEvent,
    LabelPolicy,
    Recording,
    Session,
    TrialLabel,
    label_trials,
)
from .seeds import mix_seed, subject_seed
from .spectral import idft, next_pow2

ALERT = "alert"
DROWSY = "drowsy"


@dataclass(frozen=True)
class RtParams:
    """Lognormal RT modes for the two latent states (medians in seconds)."""

    fast_median_s: float = 0.7
    fast_sigma: float = 0.25
    slow_median_s: float = 2.8
    slow_sigma: float = 0.2


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 14
    trials_per_session: int = 12
    sample_rate_hz: float = 500.0
    n_channels: int = 30
    effect_size: float = 3.0
    rt_params: RtParams = field(default_factory=RtParams)
    posterior_channels: tuple[int, ...] | None = None  # default: last 8
    seed: int = 0
    noise_sigma_uv: float = 10.0
    alpha_tone_hz: float = 10.0
    theta_tone_hz: float = 5.0
    tone_jitter_hz: float = 0.75  # per-subject frequency spread
    subject_gain_sd: float = 0.2  # lognormal sd of per-channel gains
    kplus_noise_factor: float = 1.2
    window_s: float = 3.0
    gap_s: float = 0.2
    noise_lo_hz: float = 1.0
    noise_hi_hz: float = 50.0

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ConfigInvalid(f"n_subjects must be >= 1, got {self.n_subjects}")
        if self.trials_per_session < 5:
            raise ConfigInvalid(
                f"trials_per_session must be >= 5, got {self.trials_per_session}"
            )
        if self.effect_size < 0:
            raise ConfigInvalid(f"effect_size must be >= 0, got {self.effect_size}")
        if self.sample_rate_hz <= 2 * self.noise_hi_hz:
            raise ConfigInvalid(
                f"sample rate {self.sample_rate_hz} too low for the "
                f"{self.noise_hi_hz} Hz noise band"
            )
        if self.n_channels < 1:
            raise ConfigInvalid("n_channels must be >= 1")
        chans = self.resolved_posterior()
        if any(c < 0 or c >= self.n_channels for c in chans):
            raise ConfigInvalid(
                f"posterior_channels {chans} outside [0, {self.n_channels})"
            )

    def resolved_posterior(self) -> tuple[int, ...]:
        if self.posterior_channels is not None:
            return tuple(self.posterior_channels)
        k = min(8, self.n_channels)
        return tuple(range(self.n_channels - k, self.n_channels))


@dataclass(frozen=True)
class GtTrial:
    subject_id: int
    session: Session
    trial: int
    latent_state: str  # "alert" | "drowsy"
    rt_s: float


@dataclass
class GroundTruth:
    trials: list[GtTrial] = field(default_factory=list)

    def for_session(self, subject_id: int, session: Session) -> list[GtTrial]:
        return [t for t in self.trials
                if t.subject_id == subject_id and t.session is session]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subject", "session", "trial", "latent_state", "rt_s"])
        for t in self.trials:
            w.writerow([t.subject_id, t.session.token, t.trial, t.latent_state,
                        repr(t.rt_s)])
        return buf.getvalue()


def _band_limited_noise(rng: np.random.Generator, n_channels: int, n_samples: int,
                        fs: float, lo_hz: float, hi_hz: float) -> np.ndarray:
    """Flat-spectrum noise strictly inside [lo_hz, hi_hz], unit variance rows.

    Built directly in the frequency domain (random phases on the in-band
    bins, Hermitian-completed), so out-of-band leakage is exactly zero.
    """
    n = n_samples
    freqs = np.arange(n) * fs / n
    half = n // 2
    in_band = (freqs >= lo_hz) & (freqs <= hi_hz)
    in_band[half + 1 :] = False  # positive frequencies only
    if n % 2 == 0:
        in_band[half] = False  # keep Nyquist empty; it is out of band anyway
    k = int(in_band.sum())
    spec = np.zeros((n_channels, n), dtype=np.complex128)
    draws = rng.standard_normal((n_channels, k, 2))
    spec[:, in_band] = draws[..., 0] + 1j * draws[..., 1]
    # mirror for a real signal
    pos = np.flatnonzero(in_band)
    spec[:, n - pos] = np.conj(spec[:, pos])
    x = idft(spec).real
    std = x.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return x / std


def generate_dataset(cfg: SynthConfig) -> tuple[list[Recording], GroundTruth]:
    """All subjects, two sessions each (K+ and K-), fully seed-determined."""
    recordings: list[Recording] = []
    gt = GroundTruth()
    for subj_idx in range(cfg.n_subjects):
        sid = subj_idx + 1
        s_seed = subject_seed(cfg.seed, subj_idx)
        traits_rng = np.random.default_rng(mix_seed(s_seed, 999))
        gains = np.exp(cfg.subject_gain_sd * traits_rng.standard_normal(cfg.n_channels))
        alpha_hz = cfg.alpha_tone_hz + traits_rng.uniform(-cfg.tone_jitter_hz,
                                                          cfg.tone_jitter_hz)
        theta_hz = cfg.theta_tone_hz + traits_rng.uniform(-cfg.tone_jitter_hz,
                                                          cfg.tone_jitter_hz)
        for session in (Session.KMINUS, Session.KPLUS):
            rng = np.random.default_rng(mix_seed(s_seed, session.value))
            rec, trials = _generate_session(cfg, sid, session, rng, gains,
                                            alpha_hz, theta_hz)
            recordings.append(rec)
            gt.trials.extend(trials)
    return recordings, gt


def _generate_session(cfg: SynthConfig, subject_id: int, session: Session,
                      rng: np.random.Generator, gains: np.ndarray,
                      alpha_hz: float, theta_hz: float
                      ) -> tuple[Recording, list[GtTrial]]:
    fs = cfg.sample_rate_hz
    w = int(round(cfg.window_s * fs))
    gap = int(round(cfg.gap_s * fs))
    p = cfg.rt_params

    states = np.where(rng.random(cfg.trials_per_session) < 0.5, ALERT, DROWSY)
    rts = np.where(
        states == ALERT,
        np.exp(np.log(p.fast_median_s) + p.fast_sigma
               * rng.standard_normal(cfg.trials_per_session)),
        np.exp(np.log(p.slow_median_s) + p.slow_sigma
               * rng.standard_normal(cfg.trials_per_session)),
    )
    steer = rng.uniform(0.5, 1.5, cfg.trials_per_session)

    events = []
    cursor = 0
    for i in range(cfg.trials_per_session):
        onset = cursor + w + gap
        r_on = onset + int(round(rts[i] * fs))
        r_off = r_on + int(round(steer[i] * fs))
        events.append(DeviationEvent(onset, r_on, r_off))
        cursor = r_off
    # round the session up to a power of two (tail is just more noise);
    # keeps the frequency-domain synthesis on the fast radix-2 path
    n_samples = next_pow2(cursor + gap + 1)

    noise = _band_limited_noise(rng, cfg.n_channels, n_samples, fs,
                                cfg.noise_lo_hz, cfg.noise_hi_hz)
    sigma = cfg.noise_sigma_uv
    session_factor = cfg.kplus_noise_factor if session is Session.KPLUS else 1.0
    data = noise * (sigma * session_factor)

    # attention signature: alpha + theta tones on posterior channels,
    # confined to the pre-deviation window of drowsy trials; amplitude is
    # tied to the base (K-) noise level so extra K+ noise lowers the SNR
    amp = cfg.effect_size * sigma
    posterior = list(cfg.resolved_posterior())
    if amp > 0:
        t_axis = np.arange(n_samples) / fs
        for i, ev in enumerate(events):
            if states[i] != DROWSY:
                continue
            sl = slice(ev.deviation_onset - w, ev.deviation_onset + 1)
            seg_t = t_axis[sl]
            phase_a = rng.uniform(0, 2 * np.pi)
            phase_t = rng.uniform(0, 2 * np.pi)
            tone = amp * (np.sin(2 * np.pi * alpha_hz * seg_t + phase_a)
                          + np.sin(2 * np.pi * theta_hz * seg_t + phase_t))
            data[posterior, sl] += tone
    data *= gains[:, None]

    rec = Recording(
        subject_id=subject_id,
        session=session,
        sample_rate_hz=fs,
        channel_names=[f"ch{i:02d}" for i in range(cfg.n_channels)],
        samples=data.astype(np.float32),
        events=events,
    )
    trials = [
        GtTrial(subject_id=subject_id, session=session, trial=i,
                latent_state=str(states[i]), rt_s=float(rts[i]))
        for i in range(cfg.trials_per_session)
    ]
    return rec, trials


def oracle_agreement(latent_states: list[str], rts: list[float],
                     policy: LabelPolicy) -> float:
    """Fraction of RT-threshold labels matching the latent state, over the
    non-Excluded trials of one session."""
    if len(latent_states) != len(rts):
        raise LengthMismatch(
            f"{len(latent_states)} states for {len(rts)} reaction times"
        )
    if not rts:
        raise EmptyInput("no trials to compare")
    labels = label_trials(list(rts), policy)
    pairs = [
        (state, lab)
        for state, lab in zip(latent_states, labels)
        if lab is not TrialLabel.EXCLUDED
    ]
    if not pairs:
        return 0.0
    hits = sum(
        1
        for state, lab in pairs
        if (state == ALERT and lab is TrialLabel.ATTENTIVE)
        or (state == DROWSY and lab is TrialLabel.INATTENTIVE)
    )
    return hits / len(pairs)
