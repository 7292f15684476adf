import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entrainprof.ingest import DialogAnnotation, SampledTrack, Speaker, Task, Turn, Word

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def track(values, rate=100.0, valid=None, unit="hertz", start=0.0):
    return SampledTrack(np.asarray(values, dtype=float), rate, valid, unit, start)


def dialog(turns, words=(), genders=("f", "m"), tasks=None, session_id="t1",
           speakers=("A", "B")):
    """Annotation for two speakers (default A/B) from ``(speaker, start, end)`` turn tuples.

    One task spanning everything with the first speaker as describer unless ``tasks`` is given
    as ``(task_id, start, end, describer)`` tuples; a turn belongs to the task
    containing its start.
    """
    if tasks is None:
        end = max(t[2] for t in turns) + 1.0
        tasks = [("T1", 0.0, end, speakers[0])]
    task_objs = [Task(tid, s, e, d, 50.0) for tid, s, e, d in tasks]

    def task_of(start):
        return next(t.task_id for t in task_objs if t.start <= start < t.end)

    return DialogAnnotation(
        session_id, tuple(Speaker(s, g) for s, g in zip(speakers, genders)), tuple(task_objs),
        tuple(Turn(s, task_of(a), a, b) for s, a, b in turns),
        tuple(Word(s, a, b, w) for s, a, b, w in words))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
