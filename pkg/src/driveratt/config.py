"""Flat key=value run configuration.

One UTF-8 file configures every stage: '#' starts a comment, blank lines are
skipped, keys are dot-namespaced per module. Unknown keys are rejected by
name, and every value is validated by constructing the owning module's
config type at load time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigInvalid
from .eegnet.model import EEGNetConfig
from .recording import LabelPolicy
from .spectral import BandSpec, default_bands
from .svm import SvmConfig
from .synth import RtParams, SynthConfig

_EEGNET_FIELDS = {
    "temporal_kernels": int,
    "temporal_len": int,
    "depth_multiplier": int,
    "sep_kernels": int,
    "sep_len": int,
    "pool1": int,
    "pool2": int,
    "dropout_p": float,
    "learning_rate": float,
    "batch_size": int,
    "epochs": int,
}

_SYNTH_FIELDS = {
    "n_subjects": int,
    "trials_per_session": int,
    "sample_rate_hz": float,
    "n_channels": int,
    "effect_size": float,
    "noise_sigma_uv": float,
    "alpha_tone_hz": float,
    "theta_tone_hz": float,
    "tone_jitter_hz": float,
    "subject_gain_sd": float,
    "kplus_noise_factor": float,
    "window_s": float,
    "gap_s": float,
}

_RT_FIELDS = {
    "rt_fast_median_s": ("fast_median_s", float),
    "rt_fast_sigma": ("fast_sigma", float),
    "rt_slow_median_s": ("slow_median_s", float),
    "rt_slow_sigma": ("slow_sigma", float),
}

_BAND_NAMES = ("delta", "theta", "alpha", "beta", "gamma")


@dataclass
class RunConfig:
    seed: int = 0
    policy: LabelPolicy = field(default_factory=LabelPolicy)
    bands: list[BandSpec] = field(default_factory=default_bands)
    eegnet: dict = field(default_factory=dict)  # overrides on EEGNetConfig
    eegnet_bands: dict = field(default_factory=dict)
    svm: SvmConfig = field(default_factory=SvmConfig)
    train_frac: float = 0.9
    synth: SynthConfig = field(default_factory=SynthConfig)

    def eegnet_config(self, n_channels: int, n_timepoints: int) -> EEGNetConfig:
        return replace(
            EEGNetConfig(n_channels=n_channels, n_timepoints=n_timepoints),
            **self.eegnet,
        )

    def canonical_text(self) -> str:
        """Every effective setting, one sorted key=value per line."""
        pairs: list[tuple[str, object]] = [("seed", self.seed),
                                           ("split.train_frac", self.train_frac)]
        for f in fields(LabelPolicy):
            pairs.append((f"policy.{f.name}", getattr(self.policy, f.name)))
        for band in self.bands:
            pairs.append((f"bands.{band.name}", f"{band.lo_hz},{band.hi_hz}"))
        base = EEGNetConfig()
        for name in _EEGNET_FIELDS:
            pairs.append((f"eegnet.{name}",
                          self.eegnet.get(name, getattr(base, name))))
        for name in _EEGNET_FIELDS:
            if name in self.eegnet_bands:
                pairs.append((f"eegnet_bands.{name}", self.eegnet_bands[name]))
        for f in fields(SvmConfig):
            pairs.append((f"svm.{f.name}", getattr(self.svm, f.name)))
        for name in _SYNTH_FIELDS:
            pairs.append((f"synth.{name}", getattr(self.synth, name)))
        for key, (attr, _) in _RT_FIELDS.items():
            pairs.append((f"synth.{key}", getattr(self.synth.rt_params, attr)))
        pairs.append(("synth.posterior_channels",
                      ",".join(str(c) for c in self.synth.resolved_posterior())))
        return "\n".join(f"{k}={v}" for k, v in sorted(pairs)) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def parse_config_text(text: str) -> RunConfig:
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in settings:
            raise ConfigInvalid(f"line {lineno}: duplicate key {key!r}")
        settings[key] = value.strip()
    return build_config(settings)


def load_config(path: str | Path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def build_config(settings: dict[str, str]) -> RunConfig:
    cfg = RunConfig()
    policy_kw: dict = {}
    band_edges: dict[str, tuple[float, float]] = {}
    eegnet_kw: dict = {}
    eegnet_bands_kw: dict = {}
    svm_kw: dict = {}
    synth_kw: dict = {}
    rt_kw: dict = {}

    for key, value in settings.items():
        try:
            if key == "seed":
                cfg.seed = int(value)
            elif key == "split.train_frac":
                cfg.train_frac = float(value)
            elif key.startswith("policy."):
                name = key[len("policy."):]
                if name not in {f.name for f in fields(LabelPolicy)}:
                    raise ConfigInvalid(f"unknown key {key!r}")
                policy_kw[name] = float(value)
            elif key.startswith("bands."):
                name = key[len("bands."):]
                if name not in _BAND_NAMES:
                    raise ConfigInvalid(f"unknown key {key!r}")
                lo, hi = value.split(",")
                band_edges[name] = (float(lo), float(hi))
            elif key.startswith("eegnet_bands."):
                name = key[len("eegnet_bands."):]
                if name not in _EEGNET_FIELDS:
                    raise ConfigInvalid(f"unknown key {key!r}")
                eegnet_bands_kw[name] = _EEGNET_FIELDS[name](value)
            elif key.startswith("eegnet."):
                name = key[len("eegnet."):]
                if name not in _EEGNET_FIELDS:
                    raise ConfigInvalid(f"unknown key {key!r}")
                eegnet_kw[name] = _EEGNET_FIELDS[name](value)
            elif key.startswith("svm."):
                name = key[len("svm."):]
                if name == "c":
                    svm_kw["c"] = float(value)
                elif name == "kernel":
                    svm_kw["kernel"] = value
                elif name == "gamma":
                    svm_kw["gamma"] = None if value == "scale" else float(value)
                elif name == "tol":
                    svm_kw["tol"] = float(value)
                elif name == "max_passes":
                    svm_kw["max_passes"] = int(value)
                else:
                    raise ConfigInvalid(f"unknown key {key!r}")
            elif key.startswith("synth."):
                name = key[len("synth."):]
                if name in _SYNTH_FIELDS:
                    synth_kw[name] = _SYNTH_FIELDS[name](value)
                elif name in _RT_FIELDS:
                    attr, conv = _RT_FIELDS[name]
                    rt_kw[attr] = conv(value)
                elif name == "posterior_channels":
                    synth_kw["posterior_channels"] = tuple(
                        int(c) for c in value.split(",") if c.strip()
                    )
                else:
                    raise ConfigInvalid(f"unknown key {key!r}")
            else:
                raise ConfigInvalid(f"unknown key {key!r}")
        except ConfigInvalid:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigInvalid(f"bad value for {key!r}: {value!r} ({exc})") from exc

    try:
        cfg.policy = LabelPolicy(**policy_kw)
        if band_edges:
            cfg.bands = [
                BandSpec(b.name, *band_edges.get(b.name, (b.lo_hz, b.hi_hz)),
                         inclusive_hi=b.inclusive_hi)
                for b in default_bands()
            ]
        cfg.eegnet = eegnet_kw
        cfg.eegnet_bands = eegnet_bands_kw
        cfg.svm = SvmConfig(**svm_kw)
        if rt_kw:
            synth_kw["rt_params"] = RtParams(**rt_kw)
        cfg.synth = SynthConfig(seed=cfg.seed, **synth_kw)
        if not 0.0 < cfg.train_frac < 1.0:
            raise ConfigInvalid(f"split.train_frac must be in (0, 1), got {cfg.train_frac}")
        # exercise the overrides so bad combinations fail at load, not mid-run
        cfg.eegnet_config(n_channels=2, n_timepoints=8)
    except ConfigInvalid:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    return cfg
