import csv
import importlib
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entrainprof.features import FEATURE_NAMES
from entrainprof.stats import condense, format_harvest_csv, harvest, parse_harvest_csv
from entrainprof.stats.condense import GROUPINGS, as_table
from entrainprof.stats.harvest import COLUMNS, PairingData

# the package namespace re-exports a harvest() function, so fetch the module
H = importlib.import_module("entrainprof.stats.harvest")
Result = H.TestResult
feature_tests = H.test_feature

DATA = Path(__file__).parent / "data"


def _published(level):
    return parse_harvest_csv((DATA / f"harvest_{level}_published.csv").read_text())


def _result(feature, measure, t, est, p_adj):
    return Result(feature, "local", measure, t, est, 0.1, p_adj, 50, p_adj=p_adj)


def test_nothing_significant():
    rows = harvest([_result("gnl_f0.med", "prox", "x_x", -1.0, 0.2)])
    assert len(rows) == 37
    text = format_harvest_csv(rows)
    line = text.splitlines()[5]
    assert line == "5,gnl_f0,med,--,--,--,--"


def test_overall_effect_is_x_x():
    rows = harvest([_result("gnl_f0.med", "prox", "x_x", -1.0, 0.01),
                    _result("gnl_f0.med", "sync", "d_f", 0.5, 0.04)])
    row = rows[FEATURE_NAMES.index("gnl_f0.med")]
    assert row.cells["prox"] == {"x_x"} and row.cells["-sync"] == {"d_f"}
    assert not row.cells["sync"] and not row.cells["-prox"]


def test_harvest_csv_round_trip():
    rows = _published("global")
    again = parse_harvest_csv(format_harvest_csv(rows))
    assert [r.cells for r in again] == [r.cells for r in rows]


def test_published_tables_respect_invariant():
    for level in ("global", "local"):
        for r in _published(level):
            for m in ("prox", "sync"):
                assert not r.cells[m] & r.cells["-" + m]


def test_unknown_types_rejected():
    with pytest.raises(ValueError):
        parse_harvest_csv("row,set,name,prox,sync,-prox,-sync\n1,gnl_en,max,q_q,--,--,--\n")


# --- interaction follow-up ---------------------------------------------------

def pairing_data(rng, effect_by_cell, n_per=60, n_spk=8):
    """Distances with a pairing effect that may differ per (role, gender) cell."""
    ys, pair, role, gender, resp, init = [], [], [], [], [], []
    spk_int = rng.normal(0, 0.3, n_spk)
    for ci, ((r, g), eff) in enumerate(effect_by_cell.items()):
        for k in range(n_per):
            s = ci * 2 + k % 2
            i = (s + 1 + k % 3) % n_spk
            p = (k // 2) % 2 == 0
            ys.append(3 + spk_int[s] + spk_int[i] + (eff if p else 0) + rng.normal(0, 0.5))
            pair.append(float(p))
            role.append(r)
            gender.append(g)
            resp.append(f"s{s}")
            init.append(f"s{i}")
    return PairingData(np.array(ys), np.array(pair), np.array(role), np.array(gender),
                       np.array(resp), np.array(init))


CELLS = [("describer", "f"), ("describer", "m"), ("follower", "f"), ("follower", "m")]


def test_main_effect_only(rng):
    data = pairing_data(rng, dict.fromkeys(CELLS, -1.0))
    out = feature_tests(data, rng)
    assert out[0][0] == "x_x" and out[0][1] < 0 and out[0][3] < 1e-6


def test_cell_specific_effect_reaches_cell(rng):
    data = pairing_data(rng, {CELLS[0]: -2.0, CELLS[1]: 0.0, CELLS[2]: 0.0, CELLS[3]: 0.0})
    res = {t: (est, p) for t, est, se, p, n, m in feature_tests(data, rng)}
    assert "d_f" in res
    assert res["d_f"][0] < -1.5 and res["d_f"][1] < 1e-6
    assert res.get("f_m", (0, 1))[1] > 0.01


@given(st.integers(0, 2 ** 31))
def test_sign_flip_swaps_columns(seed):
    rng = np.random.default_rng(seed)
    eff = {c: float(rng.choice([-1.5, 0.0, 1.5])) for c in CELLS}
    data = pairing_data(rng, eff, n_per=40)
    # swapping target and reference labels negates every distance difference
    flipped = PairingData(data.y, 1.0 - data.pairing, data.role, data.gender,
                          data.responder, data.initiator)
    a = feature_tests(data, 0, n_perm=99)
    b = feature_tests(flipped, 0, n_perm=99)

    def table(out):
        res = [Result("acc.c0.F", "local", "prox", t, est, se, p, n, m, p_adj=p)
               for t, est, se, p, n, m in out]
        return harvest(res, features=["acc.c0.F"])[0].cells

    ta, tb = table(a), table(b)
    assert [t for t, *_ in a] == [t for t, *_ in b]
    assert ta["prox"] == tb["-prox"] and ta["-prox"] == tb["prox"]


# --- condensation -------------------------------------------------------------

def test_worked_example_local_gnl_f0():
    rows = [r for r in _published("local") if r.feature_set == "gnl_f0"]
    assert len(rows) == 3
    tab = as_table(condense(rows, "feature_set"))
    assert tab[("gnl_f0", "prox")] == Fraction(1, 3)
    assert tab[("gnl_f0", "sync")] == 1
    assert tab[("gnl_f0", "-prox")] == 0 and tab[("gnl_f0", "-sync")] == 0


def _hand_counts():
    lines = [ln for ln in (DATA / "condense_hand_counts.csv").read_text().splitlines()
             if not ln.startswith("#")]
    out = {}
    for rec in csv.DictReader(lines):
        for c in COLUMNS:
            out[(rec["level"], rec["grouping"], rec["group"], c)] = \
                Fraction(int(rec[c]), int(rec["total"]))
    return out


@pytest.mark.parametrize("level", ["global", "local"])
@pytest.mark.parametrize("grouping", GROUPINGS)
def test_published_tables_hand_counts(level, grouping):
    expect = _hand_counts()
    cells = condense(_published(level), grouping, level)
    assert cells
    for c in cells:
        assert c.probability == expect[(level, grouping, c.group, c.column)]


def test_empty_evidence_is_zero_and_empty_group_missing():
    rows = harvest([])
    assert all(c.probability == 0 for c in condense(rows, "feature_set"))
    assert all(c.probability is None for c in condense([], "position"))


@given(st.lists(st.tuples(st.sampled_from(FEATURE_NAMES), st.sampled_from(COLUMNS),
                          st.sampled_from(["x_x", "d_f", "f_m"])), max_size=60))
def test_condensed_probabilities_bounded(entries):
    results = [Result(f, "global", c.lstrip("-"), t, 1.0 if c.startswith("-") else -1.0,
                          0.1, 0.001, 10, p_adj=0.001) for f, c, t in entries]
    rows = harvest(results)
    for g in GROUPINGS:
        cells = condense(rows, g)
        assert all(0 <= c.probability <= 1 for c in cells)
    sets = condense(rows, "feature_set")
    assert sum(c.total for c in sets if c.column == "prox") == 37
