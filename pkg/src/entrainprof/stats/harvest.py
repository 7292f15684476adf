"""Per-feature pairing tests and the entrain/disentrain harvest tables."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..entrain import LEVEL_CONDITIONS, MEASURES, DistanceTable
from ..features import FEATURE_NAMES, feature_set, short_name
from .fdr import fdr_correct
from .mixed import SingularDesignError, fit_crossed, independent_columns, \
    permutation_test

log = logging.getLogger(__name__)

TYPE_ORDER = ("x_x", "x_f", "x_m", "d_x", "d_f", "d_m", "f_x", "f_f", "f_m")
COLUMNS = ("prox", "sync", "-prox", "-sync")
ALPHA = 0.05
# effect coding of the responder factors
_CODES = {"role": {"describer": 0.5, "follower": -0.5},
          "gender": {"f": 0.5, "m": -0.5}}
_ABBR = {"role": {"describer": "d", "follower": "f"}, "gender": {"f": "f", "m": "m"}}


@dataclass
class TestResult:
    feature: str
    level: str
    measure: str
    speaker_type: str
    estimate: float
    se: float
    p_raw: float
    n: int
    method: str = "lmm"
    p_adj: float = math.nan
    notes: str = ""

    @property
    def direction(self) -> str:
        return "entrain" if self.estimate < 0 else "disentrain"


@dataclass
class PairingData:
    """Long-format data for one feature, level and measure."""

    y: np.ndarray
    pairing: np.ndarray  # 1 = adjacent / same dialog, 0 = reference condition
    role: np.ndarray
    gender: np.ndarray
    responder: np.ndarray
    initiator: np.ndarray

    def subset(self, mask) -> "PairingData":
        return PairingData(*(getattr(self, f)[mask] for f in
                             ("y", "pairing", "role", "gender", "responder", "initiator")))

    def __len__(self):
        return len(self.y)


def pairing_data(table: DistanceTable, level: str, feature: str, measure: str
                 ) -> PairingData:
    target, ref = LEVEL_CONDITIONS[level]
    f = FEATURE_NAMES.index(feature)
    cond = table.conditions
    keep = np.isin(cond, (target, ref))
    y = table.measure(measure)[:, f]
    keep &= np.isfinite(y)
    idx = np.flatnonzero(keep)
    pairs = [table.pairs[i] for i in idx]
    return PairingData(
        y[idx], (cond[idx] == target).astype(float),
        np.array([p.responder_role for p in pairs]),
        np.array([p.responder_gender for p in pairs]),
        np.array([p.responder_speaker for p in pairs]),
        np.array([p.initiator_speaker for p in pairs]))


def _design(data: PairingData, factors, interactions: bool):
    cols = {"(Intercept)": np.ones(len(data)),
            "pairing": data.pairing if not interactions else data.pairing - 0.5}
    coded = {f: np.array([_CODES[f][v] for v in getattr(data, f)]) for f in factors}
    for f in factors:
        cols[f] = coded[f]
    if interactions:
        for f in factors:
            cols[f"pairing:{f}"] = cols["pairing"] * coded[f]
        if len(factors) == 2:
            a, b = factors
            cols[f"{a}:{b}"] = coded[a] * coded[b]
            cols[f"pairing:{a}:{b}"] = cols["pairing"] * coded[a] * coded[b]
    names = list(cols)
    return np.column_stack([cols[n] for n in names]), names


def _groups(data: PairingData):
    return [g for g in (data.responder, data.initiator) if len(np.unique(g)) >= 2]


def _fit_term(data: PairingData, factors, interactions: bool, terms):
    """Wald results for ``terms``; dependent nuisance columns are dropped."""
    X, names = _design(data, factors, interactions)
    protect = [0] + [names.index(t) for t in terms]
    keep = independent_columns(X, protect=protect)
    X, names = X[:, keep], [names[k] for k in keep]
    fit = fit_crossed(data.y, X, _groups(data), names)
    return {t: fit.wald(t) for t in terms}, fit


def test_pairing(data: PairingData, factors, rng, n_perm: int = 999):
    """Pairing main-effect test in ``y ~ pairing + factors``.

    Falls back to a within-responder permutation test when the mixed model
    cannot be fitted. Returns (estimate, se, p, n, method).
    """
    if len(np.unique(data.pairing)) < 2:
        return math.nan, math.nan, math.nan, len(data), "degenerate"
    try:
        res, _ = _fit_term(data, factors, False, ["pairing"])
        est, se, _, p = res["pairing"]
        if math.isfinite(p):
            return est, se, p, len(data), "lmm"
    except (SingularDesignError, np.linalg.LinAlgError, ValueError) as exc:
        log.debug("mixed model failed (%s); permutation fallback", exc)
    est, se, p = permutation_test(data.y, data.pairing > 0, data.responder, rng, n_perm)
    return est, se, p, len(data), "permutation"


def interaction_pvalues(data: PairingData, factors) -> dict:
    """Raw p values of the pairing interactions present in the data."""
    present = [f for f in factors if len(np.unique(getattr(data, f))) >= 2]
    if not present or len(np.unique(data.pairing)) < 2:
        return {}
    terms = [f"pairing:{f}" for f in present]
    if len(present) == 2:
        terms.append("pairing:" + ":".join(present))
    out = {}
    X, names = _design(data, present, True)
    try:
        keep = independent_columns(X, protect=[0, 1])
    except SingularDesignError:
        return {}
    names_kept = [names[k] for k in keep]
    testable = [t for t in terms if t in names_kept]
    if not testable:
        return {}
    try:
        fit = fit_crossed(data.y, X[:, keep], _groups(data), names_kept)
    except (SingularDesignError, np.linalg.LinAlgError, ValueError):
        return {}
    for t in testable:
        out[t] = fit.wald(t)[3]
    return out


def _label(fixed: dict) -> str:
    r = _ABBR["role"][fixed["role"]] if "role" in fixed else "x"
    g = _ABBR["gender"][fixed["gender"]] if "gender" in fixed else "x"
    return f"{r}_{g}"


def test_feature(data: PairingData, rng, alpha: float = ALPHA, n_perm: int = 999) -> list:
    """Overall pairing test plus interaction-triggered subset re-tests.

    Returns a list of ``(speaker_type, estimate, se, p, n, method)``. A
    significant pairing x factor interaction splits the data by that factor and
    recurses; when both factors interact with pairing, or the three-way term is
    significant, all four role x gender cells are tested as well.
    """
    rng = np.random.default_rng(rng)
    results = {}

    def visit(sub: PairingData, fixed: dict):
        free = [f for f in ("role", "gender") if f not in fixed]
        label = _label(fixed)
        if label not in results:
            results[label] = test_pairing(sub, free, rng, n_perm)
        if not free:
            return
        ip = interaction_pvalues(sub, free)
        split = [f for f in free if ip.get(f"pairing:{f}", 1.0) < alpha]
        for f in split:
            for level in _CODES[f]:
                mask = getattr(sub, f) == level
                if mask.any():
                    visit(sub.subset(mask), {**fixed, f: level})
        three = ip.get("pairing:role:gender", 1.0) < alpha
        if len(free) == 2 and (len(split) == 2 or three):
            for r in _CODES["role"]:
                for g in _CODES["gender"]:
                    mask = (sub.role == r) & (sub.gender == g)
                    if mask.any() and _label({"role": r, "gender": g}) not in results:
                        visit(sub.subset(mask), {"role": r, "gender": g})

    visit(data, {})
    return [(t, *results[t]) for t in TYPE_ORDER if t in results]


def run_level_tests(table: DistanceTable, level: str, rng, alpha: float = ALPHA,
                    n_perm: int = 999, features=FEATURE_NAMES) -> list[TestResult]:
    """All features x measures for one level, FDR-adjusted as one family."""
    rng = np.random.default_rng(rng)
    out = []
    for feature in features:
        for measure in MEASURES:
            data = pairing_data(table, level, feature, measure)
            if len(data) < 3:
                continue
            for t, est, se, p, n, method in test_feature(data, rng, alpha, n_perm):
                if not math.isfinite(p):
                    continue
                out.append(TestResult(feature, level, measure, t, est, se, p, n, method))
    adj = fdr_correct([r.p_raw for r in out])
    for r, a in zip(out, adj):
        r.p_adj = float(a)
    return out


@dataclass
class HarvestRow:
    feature: str
    cells: dict = field(default_factory=lambda: {c: set() for c in COLUMNS})

    @property
    def feature_set(self) -> str:
        return feature_set(self.feature)

    def types(self, column: str) -> list:
        return [t for t in TYPE_ORDER if t in self.cells[column]]


def harvest(results, alpha: float = ALPHA, features=FEATURE_NAMES) -> list[HarvestRow]:
    rows = {f: HarvestRow(f) for f in features}
    for r in results:
        if not (r.p_adj < alpha):
            continue
        col = r.measure if r.direction == "entrain" else "-" + r.measure
        rows[r.feature].cells[col].add(r.speaker_type)
    return [rows[f] for f in features]


def format_harvest_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "set", "name"] + list(COLUMNS))
    for i, r in enumerate(rows, 1):
        w.writerow([i, r.feature_set, short_name(r.feature)]
                   + [",".join(r.types(c)) or "--" for c in COLUMNS])
    return buf.getvalue()


_ALIASES = {"gst.lev.rms": "gst.lev", "gst.rng.rms": "gst.rng"}


def canonical_feature(set_name: str, name: str) -> str:
    for old, new in _ALIASES.items():
        if name.startswith(old):
            name = new + name[len(old):]
    full = f"{set_name}.{name}"
    if full not in FEATURE_NAMES:
        raise ValueError(f"unknown feature {full!r}")
    return full


def parse_harvest_csv(text: str) -> list[HarvestRow]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        row = HarvestRow(canonical_feature(rec["set"], rec["name"]))
        for c in COLUMNS:
            val = rec[c].strip()
            if val and val != "--":
                types = {t.strip() for t in val.split(",")}
                bad = types - set(TYPE_ORDER)
                if bad:
                    raise ValueError(f"unknown speaker type(s) {sorted(bad)}")
                row.cells[c] = types
        rows.append(row)
    return rows


def format_tests_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "feature", "measure", "speaker_type", "estimate", "se", "p_raw",
                "p_adj", "n", "method", "direction"])
    for r in results:
        w.writerow([r.level, r.feature, r.measure, r.speaker_type, repr(float(r.estimate)),
                    repr(float(r.se)), repr(float(r.p_raw)), repr(float(r.p_adj)), r.n,
                    r.method, r.direction])
    return buf.getvalue()
