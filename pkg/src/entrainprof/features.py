"""The 37 turn-level prosodic features and their CSV representation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .dsp import dct_spectrum
from .ingest import SampledTrack

RHYTHM_BAND = 1.0
RHYTHM_CUTOFF = 10.0

_REG = ["lev.c0", "lev.c1", "rng.c0", "rng.c1"]
_ACC = ["c0", "c1", "c2", "c3"] + _REG + ["gst.lev", "gst.rng"]

FEATURE_NAMES = tuple(
    [f"gnl_en.{s}" for s in ("max", "med", "sd")]
    + [f"gnl_f0.{s}" for s in ("max", "med", "sd")]
    + [f"phrase.{n}.{p}" for n in _REG for p in "FL"]
    + [f"acc.{n}.{p}" for n in _ACC for p in "FL"]
    + ["rhy_en.syl.prop", "rhy_en.syl.rate", "rhy_f0.syl.prop"]
)
FEATURE_SETS = ("gnl_en", "gnl_f0", "phrase", "acc", "rhy_en", "rhy_f0")
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}
N_FEATURES = len(FEATURE_NAMES)
ID_COLUMNS = ("session", "turn", "speaker", "task", "role", "gender", "start", "end")


def feature_set(name: str) -> str:
    return name.split(".", 1)[0]


def short_name(name: str) -> str:
    return name.split(".", 1)[1]


def position(name: str):
    """'F' or 'L' for positional phrase/acc features, else None."""
    if feature_set(name) in ("phrase", "acc") and name[-2:] in (".F", ".L"):
        return name[-1]
    return None


@dataclass
class TurnFeatures:
    session_id: str
    turn_index: int
    speaker_id: str
    task_id: str
    role: str
    gender: str
    start: float
    end: float
    values: np.ndarray  # NaN marks a missing value

    def __getitem__(self, name: str) -> float:
        return float(self.values[FEATURE_INDEX[name]])

    def as_dict(self) -> dict:
        return {n: (None if math.isnan(v) else float(v))
                for n, v in zip(FEATURE_NAMES, self.values)}


def gnl_stats(values) -> tuple:
    """Maximum, median and population standard deviation; NaNs when empty."""
    v = np.asarray(values, dtype=float)
    if not len(v):
        return math.nan, math.nan, math.nan
    return float(v.max()), float(np.median(v)), float(v.std())


def syllable_prop(contour: SampledTrack, rate: float, band: float = RHYTHM_BAND,
                  cutoff: float = RHYTHM_CUTOFF) -> float:
    """Share of sub-cutoff DCT magnitude within ``rate`` +- ``band`` Hz.

    The contour mean is removed first, so the DC coefficient never enters.
    Returns NaN when undefined.
    """
    if not (rate > 0 and rate < cutoff) or len(contour) < 2:
        return math.nan
    spec = dct_spectrum(contour.replace(values=contour.values - contour.values.mean()))
    mag = np.abs(spec.coefficients)
    f = spec.freqs
    eps = 1e-9
    low = (f > 0) & (f <= cutoff + eps)
    den = mag[low].sum()
    if den <= 0:
        return math.nan
    num = mag[low & (f >= rate - band - eps) & (f <= rate + band + eps)].sum()
    return float(num / den)


def rhythm_features(energy: SampledTrack, f0: SampledTrack, nuclei, turn,
                    band: float = RHYTHM_BAND, cutoff: float = RHYTHM_CUTOFF) -> dict:
    """Syllable rate of a turn and the syllable share of energy and f0 modulation.

    ``nuclei`` are the nuclei inside the turn; ``energy`` and ``f0`` may cover
    more than the turn and are cut to it here (``f0`` may be None).
    """
    if not turn.end > turn.start:
        raise ValueError("turn duration must be positive")
    count = len(nuclei)
    rate = count / (turn.end - turn.start)
    out = {"syl.rate": rate, "syl.prop_en": math.nan, "syl.prop_f0": math.nan}
    if count == 0 or rate >= cutoff:
        return out
    out["syl.prop_en"] = syllable_prop(energy.window(turn.start, turn.end), rate, band, cutoff)
    if f0 is not None:
        out["syl.prop_f0"] = syllable_prop(f0.window(turn.start, turn.end), rate, band,
                                           cutoff)
    return out


def _nan(x):
    return math.nan if x is None else float(x)


def assemble_turn_features(turn, meta: dict, energy_vals, f0_vals, phrase_fits,
                           accents, rhythm: dict) -> TurnFeatures:
    """Fill the 37 slots for one turn.

    ``phrase_fits`` are the register fits of the turn's IPUs in time order
    (None entries for unfittable IPUs), ``accents`` the AccentShapes of its
    detected pitch events in time order. First/last refer to the first and last
    element; a missing fit leaves its slots empty.
    """
    v = np.full(N_FEATURES, math.nan)

    def put(name, x):
        v[FEATURE_INDEX[name]] = _nan(x)

    for prefix, vals in (("gnl_en", energy_vals), ("gnl_f0", f0_vals)):
        mx, med, sd = gnl_stats(vals)
        put(f"{prefix}.max", mx)
        put(f"{prefix}.med", med)
        put(f"{prefix}.sd", sd)
    if phrase_fits:
        for pos, fit in (("F", phrase_fits[0]), ("L", phrase_fits[-1])):
            if fit is None:
                continue
            for key in _REG:
                put(f"phrase.{key}.{pos}", getattr(fit, key.replace(".", "_")))
    if accents:
        for pos, acc in (("F", accents[0]), ("L", accents[-1])):
            for i in range(4):
                put(f"acc.c{i}.{pos}", acc.s[i])
            if acc.local_register is not None:
                for key in _REG:
                    put(f"acc.{key}.{pos}", getattr(acc.local_register, key.replace(".", "_")))
                put(f"acc.gst.lev.{pos}", acc.gst_lev)
                put(f"acc.gst.rng.{pos}", acc.gst_rng)
    put("rhy_en.syl.rate", rhythm.get("syl.rate"))
    put("rhy_en.syl.prop", rhythm.get("syl.prop_en"))
    put("rhy_f0.syl.prop", rhythm.get("syl.prop_f0"))
    return TurnFeatures(meta["session"], turn.index, turn.speaker_id, turn.task_id,
                        meta["role"], meta["gender"], turn.start, turn.end, v)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def format_features_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ID_COLUMNS + FEATURE_NAMES)
    for r in rows:
        w.writerow([r.session_id, r.turn_index, r.speaker_id, r.task_id, r.role, r.gender,
                    f"{r.start:.3f}", f"{r.end:.3f}"] + [_fmt(x) for x in r.values])
    return buf.getvalue()


def parse_features_csv(text: str) -> list[TurnFeatures]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != ID_COLUMNS + FEATURE_NAMES:
        raise ValueError("feature CSV header does not match the 37-feature layout")
    rows = []
    for rec in reader:
        vals = np.array([math.nan if x == "" else float(x) for x in rec[len(ID_COLUMNS):]])
        rows.append(TurnFeatures(rec[0], int(rec[1]), rec[2], rec[3], rec[4], rec[5],
                                 float(rec[6]), float(rec[7]), vals))
    return rows
