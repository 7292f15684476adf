"""Task success measures: score, duration, efficiency and smooth transitions."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

SMOOTH_INTERVAL = 0.5


class TaskSuccessError(ValueError):
    pass


@dataclass
class TaskSuccess:
    session_id: str
    task_id: str
    describer_gender: str
    follower_gender: str
    score: float
    duration: float
    efficiency: float
    smooth: float  # NaN without speaker changes
    n_transitions: int
    z: dict = None


def speaker_change_latencies(turns) -> list:
    """Onset of each turn minus offset of the preceding turn by the other speaker."""
    turns = sorted(turns, key=lambda t: (t.start, t.end))
    return [b.start - a.end for a, b in zip(turns, turns[1:]) if a.speaker_id != b.speaker_id]


def smooth_fraction(latencies, interval: float = SMOOTH_INTERVAL) -> float:
    lat = np.asarray(latencies, dtype=float)
    if not len(lat):
        return math.nan
    return float(np.mean((lat >= -interval) & (lat <= interval)))


def transition_kind(latency: float, interval: float = SMOOTH_INTERVAL) -> str:
    if latency < -interval:
        return "interruption"
    if latency > interval:
        return "vacillation"
    return "smooth"


def task_success(ann, interval: float = SMOOTH_INTERVAL) -> list[TaskSuccess]:
    out = []
    for task in ann.tasks:
        duration = task.end - task.start
        if not duration > 0:
            raise TaskSuccessError(f"{ann.session_id}/{task.task_id}: zero task duration")
        lat = speaker_change_latencies([t for t in ann.turns if t.task_id == task.task_id])
        follower = [s for s, r in task.roles if r == "follower"]
        out.append(TaskSuccess(
            ann.session_id, task.task_id, ann.speaker(task.describer).gender,
            ann.speaker(follower[0]).gender if follower else "",
            task.score, duration, task.score / duration, smooth_fraction(lat, interval),
            len(lat)))
    return out


MEASURES = ("score", "duration", "efficiency", "smooth")


def add_zscores(rows) -> list[TaskSuccess]:
    """Attach z-transformed measures computed over all given tasks."""
    for m in MEASURES:
        v = np.array([getattr(r, m) for r in rows], dtype=float)
        ok = np.isfinite(v)
        mu = v[ok].mean() if ok.any() else math.nan
        sd = v[ok].std(ddof=1) if ok.sum() > 1 else math.nan
        for r, x in zip(rows, v):
            if r.z is None:
                r.z = {}
            r.z[m] = (x - mu) / sd if sd > 0 and math.isfinite(x) else math.nan
    return rows


def _f(x) -> str:
    return "" if x is None or math.isnan(x) else repr(float(x))


def format_success_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["session", "task", "describer_gender", "follower_gender", *MEASURES,
                "transitions", *[f"z_{m}" for m in MEASURES]])
    for r in rows:
        z = r.z or {}
        w.writerow([r.session_id, r.task_id, r.describer_gender, r.follower_gender,
                    _f(r.score), _f(r.duration), _f(r.efficiency), _f(r.smooth),
                    r.n_transitions, *[_f(z.get(m, math.nan)) for m in MEASURES]])
    return buf.getvalue()
