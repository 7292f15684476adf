"""Contour preprocessing and spectral primitives."""

from __future__ import annotations

from dataclasses import dataclass

from functools import lru_cache

import numpy as np
from scipy import fft, signal

from .ingest import SampledTrack, Waveform

ENERGY_RATE = 100.0
ENERGY_WINDOW = 0.05
BAND = (200.0, 4000.0)
BAND_ORDER = 5


def percentile(x, q: float) -> float:
    """Linear-interpolation (type 7) percentile."""
    return float(np.percentile(np.asarray(x, dtype=float), q, method="linear"))


def interpolate_gaps(track: SampledTrack) -> SampledTrack:
    """Bridge invalid samples linearly; hold the edge values outward."""
    valid = track.valid
    if not valid.any():
        raise ValueError("cannot interpolate a track without valid samples")
    if valid.all():
        return track
    idx = np.arange(len(track))
    values = np.interp(idx, idx[valid], track.values[valid])
    return track.replace(values=values, valid=np.ones(len(track), bool))


def remove_outliers(track: SampledTrack, k: float = 1.5) -> SampledTrack:
    """Invalidate samples outside the ``k * IQR`` fences of log2(f0)."""
    valid = track.valid.copy()
    if valid.sum() < 4:
        return track
    lg = np.log2(track.values[valid])
    q1, q3 = np.percentile(lg, [25, 75])
    lo, hi = q1 - k * (q3 - q1), q3 + k * (q3 - q1)
    keep = (lg >= lo) & (lg <= hi)
    valid[np.flatnonzero(valid)[~keep]] = False
    return track.replace(valid=valid)


def savgol_smooth(track: SampledTrack, window: int = 5, order: int = 3) -> SampledTrack:
    if len(track) < window:
        raise ValueError(f"need at least {window} samples to smooth, got {len(track)}")
    out = signal.savgol_filter(track.values, window, order, mode="interp")
    return track.replace(values=out)


def semitone_base(values) -> float:
    """Median of the samples at or below the 5th percentile."""
    values = np.asarray(values, dtype=float)
    return float(np.median(values[values <= percentile(values, 5)]))


def to_semitones(track: SampledTrack, base: float | None = None):
    """Convert Hz to semitones relative to ``base``.

    When ``base`` is None it is derived from the track itself via
    :func:`semitone_base`. Returns ``(semitone_track, base)``.
    """
    if not track.valid.all():
        raise ValueError("semitone transform needs a gap-free track")
    v = track.values
    if np.any(v <= 0):
        raise ValueError("semitone transform needs positive f0 values")
    if base is None:
        base = semitone_base(v)
    return track.replace(values=12.0 * np.log2(v / base), unit="semitone"), base


def from_semitones(track: SampledTrack, base: float) -> SampledTrack:
    return track.replace(values=base * 2.0 ** (track.values / 12.0), unit="hertz")


def preprocess_f0(track: SampledTrack, order: str = "outliers_first") -> SampledTrack:
    """Outlier removal, gap bridging and smoothing of a raw Hz track."""
    if order == "outliers_first":
        track = interpolate_gaps(remove_outliers(track))
    elif order == "interpolate_first":
        voiced = track.valid
        filled = interpolate_gaps(track)
        cleaned = remove_outliers(filled.replace(valid=voiced))
        track = interpolate_gaps(cleaned)
    else:
        raise ValueError(f"unknown preprocessing order {order!r}")
    return savgol_smooth(track)


def rms_energy(w: Waveform, rate: float = ENERGY_RATE,
               window: float = ENERGY_WINDOW) -> SampledTrack:
    """Hamming-weighted RMS in windows centred on a ``rate`` Hz grid.

    The signal is zero-padded beyond its ends.
    """
    if w.rate < 8000:
        raise ValueError("waveform rate must be at least 8 kHz")
    n_out = int(round(len(w.samples) * rate / w.rate))
    length = int(round(window * w.rate))
    ham = np.hamming(length)
    half = length // 2
    centers = np.round(np.arange(n_out) * w.rate / rate).astype(np.int64)
    x2 = np.zeros(len(w.samples) + length + 1)
    x2[half:half + len(w.samples)] = np.square(w.samples)
    step = w.rate / rate
    if n_out > 1 and step == int(step):
        stride = x2.strides[0]
        frames = np.lib.stride_tricks.as_strided(
            x2, shape=(n_out, length), strides=(stride * int(step), stride),
            writeable=False)
        out = frames @ ham
    else:
        out = np.empty(n_out)
        offsets = np.arange(length)
        for a in range(0, n_out, 1024):
            c = centers[a:a + 1024]
            out[a:a + len(c)] = x2[c[:, None] + offsets] @ ham
    out = np.sqrt(np.maximum(out, 0.0) / ham.sum())
    return SampledTrack(out, rate, np.ones(n_out, bool), "rms", 0.0)


@lru_cache(maxsize=16)
def _butter_sos(rate: float, band: tuple, order: int) -> np.ndarray:
    sos = signal.butter(order, band, btype="bandpass", fs=rate, output="sos")
    return sos


def design_bandpass(rate: float, band=BAND, order: int = BAND_ORDER):
    if rate <= 2 * band[1]:
        raise ValueError(f"rate {rate} Hz too low for a {band[1]:g} Hz cutoff")
    return _butter_sos(float(rate), tuple(band), int(order)).copy()


def bandpass(w: Waveform, band=BAND, order: int = BAND_ORDER) -> Waveform:
    """Zero-phase Butterworth band-pass."""
    sos = design_bandpass(w.rate, band, order)
    padlen = min(3 * (2 * len(sos) + 1), max(len(w.samples) - 1, 0))
    return Waveform(signal.sosfiltfilt(sos, w.samples, padlen=padlen), w.rate)


@dataclass(frozen=True)
class DctSpectrum:
    coefficients: np.ndarray
    rate: float

    def freq_of(self, k):
        return np.asarray(k) * self.rate / (2 * len(self.coefficients))

    @property
    def freqs(self) -> np.ndarray:
        return self.freq_of(np.arange(len(self.coefficients)))


def dct_spectrum(track: SampledTrack) -> DctSpectrum:
    if len(track) < 2:
        raise ValueError("DCT needs at least 2 samples")
    return DctSpectrum(fft.dct(track.values, type=2, norm="ortho"), track.rate)
