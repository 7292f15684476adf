from fractions import Fraction
from functools import lru_cache

import numpy as np

EXACT_LIMIT = 5000


@lru_cache(maxsize=64)
def harmonic_exact(m: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, m + 1)), Fraction(0))


def harmonic(m: int) -> float:
    return float(harmonic_exact(m)) if m <= EXACT_LIMIT else float(
        np.sum(1.0 / np.arange(1, m + 1)))


def fdr_correct(pvals) -> np.ndarray:
    """Benjamini-Yekutieli step-up adjustment (valid under any dependency).

    adjusted p_(i) = min over j >= i of m * c(m) * p_(j) / j, clipped at 1,
    with c(m) = sum_{i<=m} 1/i. Returned in the input order. Families of up to
    EXACT_LIMIT values are adjusted in rational arithmetic and rounded once.
    """
    p = np.asarray(pvals, dtype=float)
    m = len(p)
    if m == 0:
        return p.copy()
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("p values must lie in [0, 1]")
    order = np.argsort(p, kind="mergesort")
    if m <= EXACT_LIMIT:
        factor = m * harmonic_exact(m)
        scaled = [Fraction(float(p[k])) * factor / (r + 1) for r, k in enumerate(order)]
        adj = np.empty(m)
        running = Fraction(1)
        for r in range(m - 1, -1, -1):
            running = min(running, scaled[r])
            adj[r] = float(running)
    else:
        scaled = p[order] * (m * harmonic(m)) / np.arange(1, m + 1)
        adj = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj
    return np.maximum(out, p)
