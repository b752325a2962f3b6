"""Discrete Fourier transform, one-sided periodogram, and band-power features.

The transform is exact-length: power-of-two sizes go through an iterative
radix-2 FFT, everything else (1501-sample windows included) through
Bluestein's chirp-z reduction to a padded power-of-two convolution. No window
function is applied anywhere; the periodogram is the plain one-sided
|X|^2 / (fs * N) estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBand, EmptyInput, InvalidBand
from .recording import LabeledEpoch, Session, TrialLabel


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT along the last axis.

    x.shape[-1] must be a power of two. Stages are vectorized over all
    leading axes; summation order is fixed, so results are reproducible.
    """
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    out = np.array(x, dtype=np.complex128)
    if n == 1:
        return out
    # bit-reversal permutation
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    bits = n.bit_length() - 1
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    out = out[..., rev]
    half = 1
    while half < n:
        step = half * 2
        tw = np.exp(-2j * np.pi * np.arange(half) / step)
        blocks = out.reshape(*out.shape[:-1], n // step, step)
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * tw
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        half = step
    return out


def _ifft_pow2(x: np.ndarray) -> np.ndarray:
    return np.conj(_fft_pow2(np.conj(x))) / x.shape[-1]


def dft(signal: np.ndarray) -> np.ndarray:
    """X[k] = sum_n x[n] exp(-2 pi i k n / N), k = 0..N-1, along the last axis.

    Arbitrary N: powers of two run the radix-2 path directly, other lengths
    use Bluestein's identity nk = (n^2 + k^2 - (k-n)^2) / 2, which turns the
    transform into one circular convolution at a padded power-of-two size.
    """
    x = np.asarray(signal)
    if x.size == 0 or x.shape[-1] == 0:
        raise EmptyInput("dft of an empty signal")
    n = x.shape[-1]
    x = x.astype(np.complex128)
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    # chirp: exp(-i pi n^2 / N); n^2 taken mod 2N keeps the angle exact
    # for large n (pi * n^2 / N is periodic in n^2 with period 2N).
    k = np.arange(n, dtype=np.int64)
    chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
    m = 1 << (2 * n - 1).bit_length()
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1 :] = np.conj(chirp[1:][::-1])
    conv = _ifft_pow2(_fft_pow2(a) * _fft_pow2(b))
    return conv[..., :n] * chirp


def idft(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of dft; here for round-trip tests and synthetic-noise shaping."""
    x = np.asarray(spectrum)
    if x.size == 0 or x.shape[-1] == 0:
        raise EmptyInput("idft of an empty spectrum")
    return np.conj(dft(np.conj(x))) / x.shape[-1]


def dft_naive(signal: np.ndarray) -> np.ndarray:
    """Direct O(N^2) evaluation of the DFT sum. Oracle-grade, 1-D only."""
    x = np.asarray(signal, dtype=np.complex128)
    if x.size == 0:
        raise EmptyInput("dft of an empty signal")
    n = x.shape[0]
    grid = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(grid, grid) / n)
    return w @ x


# ---------------------------------------------------------------------------
# periodogram and band powers
# ---------------------------------------------------------------------------


def periodogram(signal: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD estimate along the last axis.

    Returns (freqs, psd) with bins k = 0..floor(N/2), freq = k*fs/N, and
    psd = s_k |X[k]|^2 / (fs N) where s_k doubles every bin except DC and
    (for even N) Nyquist. Parseval: sum(psd) * fs/N == mean(x^2).
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0 or x.shape[-1] == 0:
        raise EmptyInput("periodogram of an empty signal")
    n = x.shape[-1]
    if n < 2:
        raise EmptyInput(f"periodogram needs at least 2 samples, got {n}")
    spec = dft(x)
    n_bins = n // 2 + 1
    scale = np.full(n_bins, 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    psd = scale * np.abs(spec[..., :n_bins]) ** 2 / (fs * n)
    freqs = np.arange(n_bins) * fs / n
    return freqs, psd


@dataclass(frozen=True)
class BandSpec:
    """One frequency band. Edges are [lo, hi) unless inclusive_hi is set."""

    name: str
    lo_hz: float
    hi_hz: float
    inclusive_hi: bool = False

    def __post_init__(self) -> None:
        if not self.lo_hz < self.hi_hz:
            raise InvalidBand(f"{self.name}: lo {self.lo_hz} must be < hi {self.hi_hz}")

    def mask(self, freqs: np.ndarray) -> np.ndarray:
        if self.inclusive_hi:
            return (freqs >= self.lo_hz) & (freqs <= self.hi_hz)
        return (freqs >= self.lo_hz) & (freqs < self.hi_hz)


def default_bands() -> list[BandSpec]:
    """The five canonical bands.

    The 7-8 Hz gap between theta and alpha is deliberate (bins there belong
    to no band), and gamma's upper edge is inclusive at the 50 Hz band-pass
    limit of the data.
    """
    return [
        BandSpec("delta", 0.0, 4.0),
        BandSpec("theta", 4.0, 7.0),
        BandSpec("alpha", 8.0, 12.0),
        BandSpec("beta", 12.0, 30.0),
        BandSpec("gamma", 30.0, 50.0, inclusive_hi=True),
    ]


BAND_NAMES = tuple(b.name for b in default_bands())


def band_powers(
    epoch: np.ndarray, fs: float, bands: list[BandSpec] | None = None
) -> np.ndarray:
    """Mean one-sided PSD per (channel, band), channel-major flat vector.

    Output length is n_channels * n_bands, ordered ch0 x all bands, then ch1,
    etc. A band that captures no bins at this N and fs is an error rather
    than a silent zero.
    """
    if bands is None:
        bands = default_bands()
    x = np.asarray(epoch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"epoch must be channels x samples, got shape {x.shape}")
    nyquist = fs / 2.0
    for band in bands:
        if band.hi_hz > nyquist:
            raise InvalidBand(
                f"band {band.name} [{band.lo_hz}, {band.hi_hz}] exceeds the "
                f"Nyquist frequency {nyquist}"
            )
    freqs, psd = periodogram(x, fs)
    masks = []
    for band in bands:
        m = band.mask(freqs)
        if not m.any():
            raise EmptyBand(
                f"band {band.name} captures no bins at N={x.shape[-1]}, fs={fs}"
            )
        masks.append(m)
    cols = [psd[:, m].mean(axis=1) for m in masks]  # each: (n_channels,)
    return np.stack(cols, axis=1).reshape(-1)


@dataclass
class FeatureVector:
    """Band powers of one epoch, with provenance and label."""

    subject_id: int
    session: Session
    label: TrialLabel
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("feature values must be finite and non-negative")


def features_from_epochs(
    epochs: list[LabeledEpoch], fs: float, bands: list[BandSpec] | None = None
) -> list[FeatureVector]:
    if bands is None:
        bands = default_bands()
    return [
        FeatureVector(e.subject_id, e.session, e.label, band_powers(e.data, fs, bands))
        for e in epochs
    ]


def feature_csv_header(n_channels: int, bands: list[BandSpec] | None = None) -> list[str]:
    if bands is None:
        bands = default_bands()
    cols = ["subject", "session", "label"]
    for ch in range(n_channels):
        for band in bands:
            cols.append(f"ch{ch}_{band.name}")
    return cols


def features_to_csv(features: list[FeatureVector], bands: list[BandSpec] | None = None) -> str:
    """CSV export; values printed with 9 significant digits."""
    if bands is None:
        bands = default_bands()
    if not features:
        raise EmptyInput("no feature vectors to export")
    n_channels = features[0].values.size // len(bands)
    lines = [",".join(feature_csv_header(n_channels, bands))]
    for fv in features:
        cells = [str(fv.subject_id), fv.session.token, fv.label.value]
        cells.extend(f"{v:.9g}" for v in fv.values)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length() if n > 1 else 1
