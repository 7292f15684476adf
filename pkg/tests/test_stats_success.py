import math

import pytest

from entrainprof.stats.success import (TaskSuccessError, add_zscores, format_success_csv,
                                       smooth_fraction, speaker_change_latencies,
                                       task_success, transition_kind)

from conftest import dialog


@pytest.mark.parametrize("lat, kind", [(0.3, "smooth"), (-0.6, "interruption"),
                                       (0.7, "vacillation"), (0.5, "smooth"),
                                       (-0.5, "smooth")])
def test_transition_kinds(lat, kind):
    assert transition_kind(lat) == kind


def test_smooth_fraction():
    assert smooth_fraction([-0.7, 0, 0.4, 0.6]) == 0.5
    assert math.isnan(smooth_fraction([]))


def test_efficiency():
    ann = dialog([("A", 0.0, 10.0), ("B", 10.3, 20.0), ("B", 20.5, 25.0), ("A", 24.0, 30.0)],
                 tasks=[("T1", 0.0, 40.0, "A")])
    ann = type(ann)(ann.session_id, ann.speakers,
                    (type(ann.tasks[0])("T1", 0.0, 40.0, "A", 80.0),), ann.turns)
    (row,) = task_success(ann)
    assert row.efficiency == 2.0 and row.duration == 40.0
    assert speaker_change_latencies(ann.turns) == pytest.approx([0.3, -1.0])
    assert row.smooth == 0.5
    assert (row.describer_gender, row.follower_gender) == ("f", "m")


def test_zero_duration_raises():
    ann = dialog([("A", 0.0, 1.0)])

    class Fake:
        session_id = "x"
        tasks = (type(ann.tasks[0])("T1", 3.0, 3.0, "A", 1.0),)
        turns = ()

    with pytest.raises(TaskSuccessError):
        task_success(Fake())


def test_zscores():
    anns = [dialog([("A", 0.0, 1.0), ("B", 1.2, 2.0)], tasks=[("T1", 0.0, d, "A")],
                   session_id=f"s{d}") for d in (10.0, 20.0, 30.0)]
    rows = add_zscores([r for a in anns for r in task_success(a)])
    assert [round(r.z["duration"], 12) for r in rows] == [-1.0, 0.0, 1.0]
    assert format_success_csv(rows).count("\n") == 4
