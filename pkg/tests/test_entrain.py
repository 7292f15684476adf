import math
from collections import Counter, defaultdict
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entrainprof import entrain as E
from entrainprof.features import FEATURE_NAMES, N_FEATURES, TurnFeatures

from conftest import dialog


def alternating(n, step=5.0, spk=("A", "B")):
    return [(spk[k % 2], k * step, k * step + step * 0.8) for k in range(n)]


def feats_for(ann, rng):
    out = []
    for t in ann.turns:
        v = rng.standard_normal(N_FEATURES)
        v[rng.random(N_FEATURES) < 0.1] = math.nan
        out.append(TurnFeatures(ann.session_id, t.index, t.speaker_id, t.task_id,
                                ann.role(t), ann.gender(t), t.start, t.end, v))
    return out


def test_two_turn_dialog():
    ann = dialog([("A", 0.0, 1.0), ("B", 1.5, 2.5)])
    pairs = E.pair_local(ann, 0)
    assert [p.condition for p in pairs] == ["adjacent"]
    assert pairs[0].initiator.index == 0 and pairs[0].responder.index == 1
    assert pairs[0].responder_role == "follower"


@pytest.mark.parametrize("gap, included", [(14.9, False), (15.0, True)])
def test_inter_onset_bound(gap, included):
    ann = dialog([("A", 0.0, 1.0), ("A", 2.0, 3.0), ("B", gap, gap + 0.5)])
    na = [p for p in E.pair_local(ann, 0) if p.condition == "non_adjacent"]
    assert bool(na) == included
    if included:
        assert na[0].initiator.index == 0


def test_local_pairs_seeded():
    ann = dialog(alternating(40))
    a = E.pair_local(ann, np.random.default_rng(3))
    b = E.pair_local(ann, np.random.default_rng(3))
    assert a == b


def test_local_pairs_stay_in_task():
    ann = dialog(alternating(20), tasks=[("T1", 0.0, 50.0, "A"), ("T2", 50.0, 200.0, "B")])
    by_index = {t.index: t for t in ann.turns}
    for p in E.pair_local(ann, 1):
        a, b = by_index[p.initiator.index], by_index[p.responder.index]
        assert a.task_id == b.task_id and a.start < b.start
        assert a.speaker_id != b.speaker_id


@given(st.integers(4, 60), st.integers(0, 10 ** 6))
def test_one_pair_per_condition_per_responder(n, seed):
    ann = dialog(alternating(n, step=3.0))
    counts = Counter((p.condition, p.responder.index) for p in E.pair_local(ann, seed))
    assert max(counts.values()) == 1


def _session(sid, spk):
    return dialog(alternating(12, spk=spk), session_id=sid, speakers=spk)


def test_global_requires_disjoint_dialogs():
    with pytest.raises(E.PairingError):
        E.pair_global([_session("s1", ("A", "B"))], 0)


def test_global_pairs():
    anns = [_session("s1", ("A", "B")), _session("s2", ("C", "D")), _session("s3", ("A", "E"))]
    pairs = E.pair_global(anns, np.random.default_rng(9))
    spk = {a.session_id: set(a.speaker_ids) for a in anns}
    cond = Counter(p.condition for p in pairs)
    assert cond["same_dialog"] == cond["different_dialog"] > 0
    for p in pairs:
        if p.condition == "different_dialog":
            assert not spk[p.initiator.session_id] & spk[p.responder.session_id]
        else:
            assert p.initiator.session_id == p.responder.session_id
            assert p.initiator.index < p.responder.index


def test_distance_examples():
    assert E.pair_distance(5.0, 5.0, 0, 0)[0] == 0
    assert E.pair_distance(110.0, 210.0, 100.0, 200.0)[1] == 0
    assert E.pair_distance(5.0, 8.0, 0, 0)[0] == 3
    assert E.pair_distance(math.nan, 8.0, 0, 0) == (None, None)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_distance_symmetry(x1, x2, m1, m2):
    p, s = E.pair_distance(x1, x2, m1, m2)
    q, r = E.pair_distance(x2, x1, m2, m1)
    assert p == q and s == pytest.approx(r, abs=1e-9)
    assert p >= 0 and s >= 0


def test_distance_table_matches_pairwise(rng):
    ann = dialog(alternating(30))
    feats = feats_for(ann, rng)
    means = E.speaker_means(feats)
    table = E.distances(E.pair_local(ann, 0), feats, means)
    f = {x.turn_index: x for x in feats}
    for i, rec in enumerate(table.records()):
        if i > 200:
            break
        a, b = f[rec.pair.initiator.index], f[rec.pair.responder.index]
        k = FEATURE_NAMES.index(rec.feature)
        m1, m2 = means[("t1", a.speaker_id)][k], means[("t1", b.speaker_id)][k]
        exp = E.pair_distance(a.values[k], b.values[k], m1, m2)
        if exp[0] is None:
            assert rec.proximity is None and rec.synchrony is None
        else:
            assert rec.proximity == pytest.approx(exp[0])
            assert rec.synchrony == pytest.approx(exp[1])


def _table(conds, values, types=None):
    pairs = []
    for k, c in enumerate(conds):
        role, gender = (types[k] if types else ("describer", "f"))
        pairs.append(E.TurnPair(c, E.TurnRef("s", k), E.TurnRef("s", k + 1), role, gender))
    prox = np.tile(np.asarray(values, float)[:, None], (1, N_FEATURES))
    return E.DistanceTable(pairs, prox, prox * 2)


def test_profile_single_records():
    t = _table(["adjacent", "non_adjacent", "different_dialog"], [1.0, 2.0, 3.0])
    rows = {(r.feature, r.measure, r.condition): r for r in E.build_profile(t)}
    assert rows[("gnl_f0.med", "prox", "a")].mean == 1.0
    assert rows[("gnl_f0.med", "prox", "na")].mean == 2.0
    assert rows[("gnl_f0.med", "sync", "u")].mean == 6.0
    assert rows[("gnl_f0.med", "prox", "a_d_f")].count == 1
    assert math.isnan(rows[("gnl_f0.med", "prox", "a_f_m")].mean)


def test_profile_group_by_oracle(rng):
    conds = rng.choice(["adjacent", "non_adjacent", "different_dialog"], 20)
    types = [(rng.choice(["describer", "follower"]), rng.choice(["f", "m"])) for _ in conds]
    vals = rng.random(20)
    rows = {(r.measure, r.condition): r.mean
            for r in E.build_profile(_table(conds, vals, types)) if r.feature == "acc.c0.F"}
    groups = defaultdict(list)
    for c, (role, g), v in zip(conds, types, vals):
        key = {"adjacent": "a", "non_adjacent": "na", "different_dialog": "u"}[c]
        groups[key].append(v)
        if key == "a":
            groups[f"a_{role[0]}_{g}"].append(v)
    for key, vs in groups.items():
        assert rows[("prox", key)] == pytest.approx(sum(vs) / len(vs), abs=1e-12)


@given(st.integers(0, 10 ** 6))
def test_initiator_metadata_irrelevant(seed):
    rng = np.random.default_rng(seed)
    ann = dialog(alternating(24))
    feats = feats_for(ann, rng)
    table = E.distances(E.pair_local(ann, seed), feats)
    swapped = E.DistanceTable([replace(p, initiator_speaker="ZZ") for p in table.pairs],
                              table.prox, table.sync)
    a = [(r.condition, r.count) for r in E.build_profile(table)]
    b = [(r.condition, r.count) for r in E.build_profile(swapped)]
    assert a == b
    assert all(r.mean >= 0 for r in E.build_profile(table) if not math.isnan(r.mean))


def test_profile_csv():
    text = E.format_profile_csv(E.build_profile(_table(["adjacent"], [0.5])))
    assert text.splitlines()[0] == "feature,measure,condition,mean,count"
