"""Superpositional f0 stylization: register lines and local accent shapes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import SampledTrack

REGISTER_WINDOW = 0.05
REGISTER_STEP = 0.01
ACCENT_WINDOW = 0.3


@dataclass(frozen=True)
class RegisterFit:
    """Mid-, base-, top- and range regression lines over normalised time.

    Time runs from 0 at ``t0`` to 1 at ``t1`` (absolute seconds).
    """

    lev_c0: float
    lev_c1: float
    rng_c0: float
    rng_c1: float
    bas_c0: float
    bas_c1: float
    top_c0: float
    top_c1: float
    t0: float
    t1: float
    grid: np.ndarray

    def normalise(self, times) -> np.ndarray:
        return (np.asarray(times, dtype=float) - self.t0) / (self.t1 - self.t0)

    def level_at(self, times) -> np.ndarray:
        return self.lev_c0 + self.lev_c1 * self.normalise(times)

    def range_at(self, times) -> np.ndarray:
        return self.rng_c0 + self.rng_c1 * self.normalise(times)

    @property
    def midline_points(self) -> np.ndarray:
        return self.level_at(self.grid)

    @property
    def rangeline_points(self) -> np.ndarray:
        return self.range_at(self.grid)

    @property
    def baseline_points(self) -> np.ndarray:
        return self.bas_c0 + self.bas_c1 * self.normalise(self.grid)

    @property
    def topline_points(self) -> np.ndarray:
        return self.top_c0 + self.top_c1 * self.normalise(self.grid)


def register_medians(segment: SampledTrack, window: float = REGISTER_WINDOW,
                     step: float = REGISTER_STEP):
    """Windowed medians for base-, mid- and topline.

    Returns ``(centre_times, base, mid, top)``; empty arrays when the segment
    is shorter than one window.
    """
    v = np.asarray(segment.values, dtype=float)
    length = max(1, int(round(window * segment.rate)))
    hop = max(1, int(round(step * segment.rate)))
    if len(v) < length:
        e = np.empty(0)
        return e, e, e, e
    frames = np.lib.stride_tricks.sliding_window_view(v, length)[::hop]
    starts = np.arange(0, len(v) - length + 1, hop)
    centres = segment.start + (starts + (length - 1) / 2) / segment.rate
    srt = np.sort(frames, axis=1)
    p10 = _sorted_percentile(srt, 10.0)[:, None]
    p90 = _sorted_percentile(srt, 90.0)[:, None]
    # the values at or below p10 are a prefix of each sorted frame, those at
    # or above p90 a suffix, so their medians are index lookups
    rows = np.arange(len(srt))
    lo = (srt <= p10).sum(axis=1)
    hi = (srt >= p90).sum(axis=1)
    base = 0.5 * (srt[rows, (lo - 1) // 2] + srt[rows, lo // 2])
    top = 0.5 * (srt[rows, length - hi + (hi - 1) // 2] + srt[rows, length - hi + hi // 2])
    mid = np.median(srt, axis=1)
    return centres, base, mid, top


def _sorted_percentile(srt: np.ndarray, q: float) -> np.ndarray:
    """Row-wise linear-interpolation percentile of row-sorted data."""
    pos = (srt.shape[1] - 1) * q / 100.0
    k = int(np.floor(pos))
    frac = pos - k
    if frac == 0.0:
        return srt[:, k]
    return srt[:, k] + frac * (srt[:, k + 1] - srt[:, k])


def _lines(t, ys) -> np.ndarray:
    """Least-squares (intercept, slope) rows, one per row of ``ys``."""
    tm = t.mean()
    tc = t - tm
    ym = ys.mean(axis=1)
    slope = (ys - ym[:, None]) @ tc / (tc @ tc)
    return np.column_stack([ym - slope * tm, slope])


def fit_register(segment: SampledTrack, window: float = REGISTER_WINDOW,
                 step: float = REGISTER_STEP, min_duration: float = 0.06):
    """Register stylization of a semitone segment; None when too short."""
    if len(segment) < 2 or len(segment) / segment.rate < min_duration - 1e-9:
        return None
    centres, base, mid, top = register_medians(segment, window, step)
    if len(np.unique(centres)) < 2:
        return None
    grid = segment.times
    t0, t1 = float(grid[0]), float(grid[-1])
    tn = (centres - t0) / (t1 - t0)
    lev, bas, top_, rng = _lines(tn, np.vstack([mid, base, top, top - base])).tolist()
    return RegisterFit(lev[0], lev[1], rng[0], rng[1], bas[0], bas[1], top_[0], top_[1],
                       t0, t1, grid)


def accent_window(track: SampledTrack, centre: float, width: float = ACCENT_WINDOW):
    """Samples of ``track`` within ``width``/2 of ``centre`` and their time in [-1, 1]."""
    half = width / 2
    win = track.window(centre - half, centre + half)
    return win, (win.times - centre) / half


def fit_accent_poly(residual: SampledTrack, nucleus_time: float,
                    width: float = ACCENT_WINDOW):
    """Cubic least-squares fit (s0..s3) around a nucleus; None if < 4 samples."""
    win, t = accent_window(residual, nucleus_time, width)
    if len(win) < 4:
        return None
    design = np.vander(t, 4, increasing=True)
    coef, *_ = np.linalg.lstsq(design, win.values, rcond=None)
    return coef


def gestalt(local: RegisterFit, phrase: RegisterFit, times) -> tuple[float, float]:
    """RMS deviation of the local mid- and range line from the phrase lines."""
    times = np.asarray(times, dtype=float)
    dl = local.level_at(times) - phrase.level_at(times)
    dr = local.range_at(times) - phrase.range_at(times)
    return float(np.sqrt(np.mean(dl ** 2))), float(np.sqrt(np.mean(dr ** 2)))


@dataclass(frozen=True)
class AccentShape:
    s: np.ndarray  # s0..s3
    local_register: RegisterFit | None
    gst_lev: float | None
    gst_rng: float | None
    time: float = float("nan")


def stylize_accent(contour: SampledTrack, phrase: RegisterFit, nucleus_time: float,
                   width: float = ACCENT_WINDOW, window: float = REGISTER_WINDOW,
                   step: float = REGISTER_STEP):
    """Polynomial shape, local register and Gestalt deviations for one event.

    ``contour`` is the semitone contour of the enclosing phrase and ``phrase``
    its register fit. Returns None when the clipped window holds fewer than
    four samples; the local register parts are None below 60 ms.
    """
    residual = contour.replace(values=contour.values - phrase.level_at(contour.times))
    s = fit_accent_poly(residual, nucleus_time, width)
    if s is None:
        return None
    win, _ = accent_window(contour, nucleus_time, width)
    local = fit_register(win, window, step)
    gl = gr = None
    if local is not None:
        gl, gr = gestalt(local, phrase, win.times)
    return AccentShape(np.asarray(s), local, gl, gr, nucleus_time)
