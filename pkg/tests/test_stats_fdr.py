from fractions import Fraction

import numpy as np
from hypothesis import given, strategies as st

from entrainprof.stats.fdr import fdr_correct, harmonic_exact


def test_single_p_unchanged():
    assert fdr_correct([0.037])[0] == 0.037


def test_all_ones():
    assert list(fdr_correct([1.0] * 7)) == [1.0] * 7


def test_four_p_fixture():
    assert harmonic_exact(4) == Fraction(25, 12)
    # m * c(m) = 25/3; every p_(i) * (25/3) / i equals 1/12
    assert list(fdr_correct([0.01, 0.02, 0.03, 0.04])) == [1 / 12] * 4
    assert list(fdr_correct([0.04, 0.01, 0.03, 0.02])) == [1 / 12] * 4


def test_step_up_by_hand():
    # sorted .001, .03, .2 with m c(m) = 3 * 11/6 = 5.5:
    # .001 * 5.5 / 1, .03 * 5.5 / 2, .2 * 5.5 / 3 (already nondecreasing)
    adj = fdr_correct([0.001, 0.2, 0.03])
    assert np.allclose(adj, [0.0055, 1.1 / 3, 0.0825], rtol=1e-15)


def naive_by(p):
    m = len(p)
    c = sum(1 / i for i in range(1, m + 1))
    order = np.argsort(p)
    adj = np.empty(m)
    for r, k in enumerate(order):
        adj[k] = min(1.0, min(m * c * p[order[j]] / (j + 1) for j in range(r, m)))
    return adj


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_properties(p):
    p = np.array(p)
    adj = fdr_correct(p)
    assert np.all(adj >= p) and np.all(adj <= 1)
    order = np.argsort(p, kind="mergesort")
    assert np.all(np.diff(adj[order]) >= 0)
    assert np.allclose(adj, np.maximum(naive_by(p), p), rtol=1e-12, atol=0)
