"""Directed turn pairing, proximity/synchrony distances and entrainment profiles."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from .features import FEATURE_NAMES, N_FEATURES

log = logging.getLogger(__name__)

CONDITIONS = ("adjacent", "non_adjacent", "same_dialog", "different_dialog")
LEVEL_CONDITIONS = {"local": ("adjacent", "non_adjacent"),
                    "global": ("same_dialog", "different_dialog")}
SPEAKER_TYPES = ("d_f", "d_m", "f_f", "f_m")
PROFILE_CONDITIONS = tuple(f"a_{t}" for t in SPEAKER_TYPES) + ("a", "na", "u")
MEASURES = ("prox", "sync")


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class TurnRef:
    session_id: str
    index: int


@dataclass(frozen=True)
class TurnPair:
    condition: str
    initiator: TurnRef
    responder: TurnRef
    responder_role: str
    responder_gender: str
    responder_speaker: str = ""
    initiator_speaker: str = ""

    @property
    def speaker_type(self) -> str:
        return f"{self.responder_role[0]}_{self.responder_gender}"


@dataclass(frozen=True)
class DistanceRecord:
    pair: TurnPair
    feature: str
    proximity: float | None
    synchrony: float | None


def _by_task(ann):
    tasks = {}
    for t in ann.turns:
        tasks.setdefault(t.task_id, []).append(t)
    return tasks


def _make_pair(cond, ann_i, ti, ann_r, tr):
    return TurnPair(cond, TurnRef(ann_i.session_id, ti.index),
                    TurnRef(ann_r.session_id, tr.index), ann_r.role(tr),
                    ann_r.gender(tr), tr.speaker_id, ti.speaker_id)


def _draw(rng, candidates, used):
    """Uniform draw, preferring candidates not drawn before in this pass."""
    fresh = [c for c in candidates if c.index not in used]
    pool = fresh or candidates
    pick = pool[int(rng.integers(len(pool)))]
    used.add(pick.index)
    return pick


def pair_local(ann, rng, min_inter_onset: float = 15.0) -> list[TurnPair]:
    """Adjacent and non-adjacent pairs within each task of one dialog.

    Adjacent: the immediately preceding turn, if it belongs to the other
    speaker. Non-adjacent: a random earlier turn of another speaker in the same
    task whose onset lies at least ``min_inter_onset`` seconds earlier.
    """
    rng = np.random.default_rng(rng)
    pairs = []
    for task_id, turns in _by_task(ann).items():
        used = set()
        for j, tr in enumerate(turns):
            if j > 0 and turns[j - 1].speaker_id != tr.speaker_id:
                pairs.append(_make_pair("adjacent", ann, turns[j - 1], ann, tr))
            cands = [ti for ti in turns[:j] if ti.speaker_id != tr.speaker_id
                     and tr.start - ti.start >= min_inter_onset - 1e-9]
            if cands:
                pairs.append(_make_pair("non_adjacent", ann, _draw(rng, cands, used), ann, tr))
    return pairs


def pair_global(anns, rng) -> list[TurnPair]:
    """Same-dialog pairs and an equal number of cross-dialog pairs.

    Cross-dialog initiators come from dialogs sharing no speaker with the
    responder's dialog. Dialogs without such a partner contribute no pairs.
    """
    rng = np.random.default_rng(rng)
    anns = list(anns)
    spk = [set(a.speaker_ids) for a in anns]
    partners = [[k for k in range(len(anns)) if k != d and not (spk[d] & spk[k])]
                for d in range(len(anns))]
    if not any(partners):
        raise PairingError("different_dialog pairing needs two dialogs without a "
                           "common speaker")
    same, cross = [], []
    for d, ann in enumerate(anns):
        if not partners[d]:
            log.warning("dialog %s has no speaker-disjoint partner; skipped for "
                        "global pairing", ann.session_id)
            continue
        pool = [(k, t) for k in partners[d] for t in anns[k].turns]
        for task_id, turns in _by_task(ann).items():
            used = set()
            for j, tr in enumerate(turns):
                cands = [ti for ti in turns[:j] if ti.speaker_id != tr.speaker_id]
                if not cands:
                    continue
                same.append(_make_pair("same_dialog", ann, _draw(rng, cands, used), ann, tr))
                k, ti = pool[int(rng.integers(len(pool)))]
                cross.append(_make_pair("different_dialog", anns[k], ti, ann, tr))
    return same + cross


@dataclass
class DistanceTable:
    """Distances for a list of pairs; rows follow ``pairs``, columns FEATURE_NAMES."""

    pairs: list
    prox: np.ndarray
    sync: np.ndarray

    def __len__(self):
        return len(self.pairs)

    def column(self, attr: str) -> np.ndarray:
        return np.array([getattr(p, attr) for p in self.pairs], dtype=object)

    @property
    def conditions(self) -> np.ndarray:
        return np.array([p.condition for p in self.pairs])

    def measure(self, name: str) -> np.ndarray:
        return self.prox if name == "prox" else self.sync

    def records(self):
        for i, p in enumerate(self.pairs):
            for f, name in enumerate(FEATURE_NAMES):
                a, b = self.prox[i, f], self.sync[i, f]
                yield DistanceRecord(p, name, None if math.isnan(a) else float(a),
                                     None if math.isnan(b) else float(b))

    def subset(self, mask) -> "DistanceTable":
        idx = np.flatnonzero(mask)
        return DistanceTable([self.pairs[i] for i in idx], self.prox[idx], self.sync[idx])


def pair_distance(x1: float, x2: float, m1: float, m2: float):
    """(proximity, synchrony) distance for one feature value pair."""
    if x1 is None or x2 is None or math.isnan(x1) or math.isnan(x2):
        return None, None
    return abs(x2 - x1), abs((x2 - m2) - (x1 - m1))


def speaker_means(features) -> dict:
    """Per (session, speaker) mean of every feature, ignoring missing values."""
    groups = {}
    for f in features:
        groups.setdefault((f.session_id, f.speaker_id), []).append(f.values)
    out = {}
    for key, rows in groups.items():
        m = np.array(rows)
        ok = np.isfinite(m)
        cnt = ok.sum(axis=0)
        s = np.where(ok, m, 0.0).sum(axis=0)
        out[key] = np.divide(s, cnt, out=np.full(m.shape[1], math.nan), where=cnt > 0)
    return out


def distances(pairs, features, means=None) -> DistanceTable:
    """Distance table for ``pairs`` given TurnFeatures of all sessions."""
    lookup = {(f.session_id, f.turn_index): f for f in features}
    if means is None:
        means = speaker_means(features)
    n = len(pairs)
    x1 = np.full((n, N_FEATURES), math.nan)
    x2 = np.full((n, N_FEATURES), math.nan)
    m1 = np.full((n, N_FEATURES), math.nan)
    m2 = np.full((n, N_FEATURES), math.nan)
    for i, p in enumerate(pairs):
        fi = lookup[(p.initiator.session_id, p.initiator.index)]
        fr = lookup[(p.responder.session_id, p.responder.index)]
        x1[i], x2[i] = fi.values, fr.values
        m1[i] = means[(fi.session_id, fi.speaker_id)]
        m2[i] = means[(fr.session_id, fr.speaker_id)]
    prox = np.abs(x2 - x1)
    sync = np.abs((x2 - m2) - (x1 - m1))
    return DistanceTable(list(pairs), prox, sync)


@dataclass(frozen=True)
class ProfileRow:
    feature: str
    measure: str
    condition: str
    mean: float
    count: int


def profile_condition_masks(table: DistanceTable) -> dict:
    cond = table.conditions
    types = np.array([p.speaker_type for p in table.pairs])
    masks = {f"a_{t}": (cond == "adjacent") & (types == t) for t in SPEAKER_TYPES}
    masks["a"] = cond == "adjacent"
    masks["na"] = cond == "non_adjacent"
    masks["u"] = cond == "different_dialog"
    return masks


def build_profile(table: DistanceTable) -> list[ProfileRow]:
    """Mean distance per feature, measure and profile condition."""
    masks = profile_condition_masks(table)
    rows = []
    for f, name in enumerate(FEATURE_NAMES):
        for measure in MEASURES:
            col = table.measure(measure)[:, f]
            for c in PROFILE_CONDITIONS:
                vals = col[masks[c]]
                vals = vals[np.isfinite(vals)]
                mean = float(vals.mean()) if len(vals) else math.nan
                rows.append(ProfileRow(name, measure, c, mean, int(len(vals))))
    return rows


def format_profile_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "measure", "condition", "mean", "count"])
    for r in rows:
        w.writerow([r.feature, r.measure, r.condition,
                    "" if math.isnan(r.mean) else repr(r.mean), r.count])
    return buf.getvalue()
