"""Prosodic structure: inter-pausal units, syllable nuclei, pitch accents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest import DialogAnnotation, Waveform

PAUSE = 0.100
NUCLEUS_STEP = 0.05
W_ANALYSIS = 0.05
W_REFERENCE = 0.11
RATIO_V = 1.1
REL_X = 0.1
T_ACCENT = 0.6
T_NO_ACCENT = 0.15
ACCENT_PERCENTILE = 82.0


class AccentModelError(ValueError):
    pass


@dataclass(frozen=True)
class Ipu:
    speaker_id: str
    start: float
    end: float
    turn_index: int

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SyllableNucleus:
    time: float
    energy_ratio: float
    ipu: int = -1  # position in the IPU list the nucleus was detected in


def segment_ipus(annotation: DialogAnnotation, pause: float = PAUSE) -> list[Ipu]:
    """Split every turn at word gaps of at least ``pause`` seconds.

    A turn without word records becomes a single IPU.
    """
    ipus = []
    for turn in annotation.turns:
        words = annotation.words_in(turn)
        if not words:
            ipus.append(Ipu(turn.speaker_id, turn.start, turn.end, turn.index))
            continue
        start, end = words[0].start, words[0].end
        for w in words[1:]:
            # gaps are compared at microsecond resolution; times carry ms precision
            if round(w.start - end, 6) >= pause:
                ipus.append(Ipu(turn.speaker_id, start, end, turn.index))
                start = w.start
            end = max(end, w.end)
        ipus.append(Ipu(turn.speaker_id, start, end, turn.index))
    return ipus


def _window_rms(x2cum: np.ndarray, centers: np.ndarray, length: int, n: int) -> np.ndarray:
    """RMS of zero-padded windows of ``length`` samples centred at ``centers``."""
    lo = centers - length // 2
    hi = lo + length
    a = np.clip(lo, 0, n)
    b = np.clip(hi, 0, n)
    energy = x2cum[b] - x2cum[a]
    return np.sqrt(np.maximum(energy, 0.0) / length)


def nucleus_candidates(bp: Waveform, ipu: Ipu, step: float = NUCLEUS_STEP,
                       w_a: float = W_ANALYSIS, w_r: float = W_REFERENCE):
    """Step times with analysis- and reference-window RMS for one IPU."""
    n_steps = int(math.floor((ipu.end - ipu.start) / step + 1e-9)) + 1
    times = ipu.start + step * np.arange(n_steps)
    la = int(round(w_a * bp.rate))
    lr = int(round(w_r * bp.rate))
    pad = lr // 2 + 2
    i0 = max(0, int(round(ipu.start * bp.rate)) - pad)
    i1 = min(len(bp.samples), int(round(ipu.end * bp.rate)) + pad)
    seg = bp.samples[i0:i1]
    x2cum = np.concatenate(([0.0], np.cumsum(np.square(seg))))
    centers = np.round(times * bp.rate).astype(np.int64) - i0
    rms_a = _window_rms(x2cum, centers, la, len(seg))
    rms_r = _window_rms(x2cum, centers, lr, len(seg))
    return times, rms_a, rms_r


def detect_syllable_nuclei(bp: Waveform, ipus, step: float = NUCLEUS_STEP,
                           w_a: float = W_ANALYSIS, w_r: float = W_REFERENCE,
                           v: float = RATIO_V, x: float = REL_X) -> list[SyllableNucleus]:
    """Energy-peak syllable nuclei inside the given IPUs.

    A step qualifies when RMS(w_a) > v * RMS(w_r) and RMS(w_a) > x * max RMS(w_a)
    over the IPU. Runs of adjacent qualifying steps yield one nucleus at their
    loudest step.
    """
    out = []
    for k, ipu in enumerate(ipus):
        times, rms_a, rms_r = nucleus_candidates(bp, ipu, step, w_a, w_r)
        if not len(times):
            continue
        rms_max = rms_a.max()
        ok = (rms_a > rms_r * v) & (rms_a > rms_max * x)
        i = 0
        while i < len(ok):
            if not ok[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(ok) and ok[j + 1]:
                j += 1
            best = i + int(np.argmax(rms_a[i:j + 1]))
            ratio = rms_a[best] / rms_r[best] if rms_r[best] > 0 else math.inf
            out.append(SyllableNucleus(float(times[best]), float(ratio), k))
            i = j + 1
    return out


# --- accent classifier ----------------------------------------------------

def silhouette_1d(values, labels) -> np.ndarray:
    """Per-point silhouette coefficients for a 1-d, two-or-more cluster split.

    Points in singleton clusters get 0.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    sums = {}
    for c in classes:
        s = np.sort(values[labels == c])
        pref = np.concatenate(([0.0], np.cumsum(s)))
        m = np.searchsorted(s, values, side="right")
        sums[c] = (values * m - pref[m] + (pref[-1] - pref[m]) - values * (len(s) - m),
                   len(s))
    sil = np.zeros(len(values))
    for c in classes:
        own = labels == c
        total, n_own = sums[c]
        if n_own < 2:
            continue
        a = total[own] / (n_own - 1)
        b = np.min([sums[o][0][own] / sums[o][1] for o in classes if o != c], axis=0)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            sil[own] = np.where(denom > 0, (b - a) / denom, 0.0)
    return sil


def mean_cluster_silhouette(values, labels) -> float:
    """Average over clusters of the per-cluster mean silhouette."""
    sil = silhouette_1d(values, labels)
    labels = np.asarray(labels)
    return float(np.mean([sil[labels == c].mean() for c in np.unique(labels)]))


@dataclass(frozen=True)
class AccentModel:
    centroid_0: np.ndarray
    centroid_1: np.ndarray
    weights: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    percentile: float = ACCENT_PERCENTILE

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise ValueError("accent feature weights must be finite and >= 0")
        if not 50 < self.percentile < 100:
            raise ValueError("accent percentile must lie in (50, 100)")


def seed_labels(word_durations, syllable_word, t_a: float = T_ACCENT,
                t_na: float = T_NO_ACCENT) -> np.ndarray:
    """Seed class per syllable: 1, 0, or -1 (unseeded).

    ``syllable_word`` maps time-ordered syllables to word indices (-1 = none).
    The first syllable of a word longer than ``t_a`` seeds class 1; every
    syllable of a word shorter than ``t_na`` seeds class 0.
    """
    durations = np.asarray(word_durations, dtype=float)
    sw = np.asarray(syllable_word, dtype=int)
    labels = np.full(len(sw), -1)
    seen = set()
    for i, w in enumerate(sw):
        if w < 0:
            continue
        first = w not in seen
        seen.add(w)
        if durations[w] > t_a and first:
            labels[i] = 1
        elif durations[w] < t_na:
            labels[i] = 0
    return labels


def _impute(x: np.ndarray, fill: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    bad = ~np.isfinite(x)
    x[bad] = np.broadcast_to(fill, x.shape)[bad]
    return x


def _nanmean_cols(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(x)
    counts = ok.sum(axis=0)
    sums = np.where(ok, x, 0.0).sum(axis=0)
    return np.divide(sums, counts, out=np.zeros(x.shape[1]), where=counts > 0)


def bootstrap_accent_model(features, labels, percentile: float = ACCENT_PERCENTILE,
                           ) -> AccentModel:
    """Seed centroids and silhouette weights from labelled syllables.

    ``features`` is (n_syllables, n_features) with NaN for missing values;
    ``labels`` comes from :func:`seed_labels`. Features are z-scored over all
    syllables before centroids are taken.
    """
    feats = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n1, n0 = int((labels == 1).sum()), int((labels == 0).sum())
    if n1 == 0 or n0 == 0:
        empty = "accented (class 1)" if n1 == 0 else "unaccented (class 0)"
        raise AccentModelError(
            f"{empty} seed set is empty; adjust the word-duration thresholds "
            f"t_a / t_na")
    center = _nanmean_cols(feats)
    z = _impute(feats, center) - center
    scale = z.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    z /= scale
    seeds = labels >= 0
    zs, ls = z[seeds], labels[seeds]
    weights = np.array([max(0.0, mean_cluster_silhouette(zs[:, f], ls))
                        for f in range(z.shape[1])])
    if not np.any(weights > 0):
        raise AccentModelError("no feature separates the seed clusters (all weights 0)")
    return AccentModel(zs[ls == 0].mean(axis=0), zs[ls == 1].mean(axis=0), weights,
                       center, scale, percentile)


def percentile_with_inf(q, p: float) -> float:
    """Type-7 percentile that tolerates +inf entries."""
    s = np.sort(np.asarray(q, dtype=float))
    h = (len(s) - 1) * p / 100.0
    lo, hi = int(math.floor(h)), int(math.ceil(h))
    a, b = s[lo], s[hi]
    if a == b or h == lo:
        return float(a)
    if math.isinf(b):
        return math.inf
    return float(a + (h - lo) * (b - a))


def accent_quotients(model: AccentModel, candidates) -> np.ndarray:
    """q = d0 / d1 with weighted Euclidean distances to the centroids."""
    x = np.asarray(candidates, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    x = _impute(x, _nanmean_cols(x))
    x = _impute(x, model.center)
    z = (x - model.center) / model.scale
    d0 = np.sqrt(((z - model.centroid_0) ** 2 * model.weights).sum(axis=1))
    d1 = np.sqrt(((z - model.centroid_1) ** 2 * model.weights).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d1 > 0, d0 / np.where(d1 > 0, d1, 1.0), math.inf)


def classify_accents(model: AccentModel, candidates) -> np.ndarray:
    """Flag candidates whose quotient lies strictly above the percentile."""
    q = accent_quotients(model, candidates)
    if not len(q):
        return np.zeros(0, bool)
    thr = percentile_with_inf(q, model.percentile)
    return (q > thr) | np.isinf(q)


def flags_from_quotients(q, p: float = ACCENT_PERCENTILE) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return (q > percentile_with_inf(q, p)) | np.isinf(q)


def format_nuclei_dump(nuclei, flags=None) -> str:
    """``<time>\\t<flag>`` lines for debugging."""
    if flags is None:
        flags = [0] * len(nuclei)
    return "".join(f"{n.time:.3f}\t{int(bool(f))}\n" for n, f in zip(nuclei, flags))
