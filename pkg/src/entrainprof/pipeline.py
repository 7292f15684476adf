"""Per-session feature extraction: signals and annotation in, turn features out."""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dsp, structure, styl
from .config import Params
from .features import assemble_turn_features, rhythm_features
from .ingest import DialogAnnotation, SampledTrack, Waveform, load_annotation, \
    load_f0, load_waveform

log = logging.getLogger(__name__)

BANDPASS_PAD = 0.25


@dataclass
class SpeakerAnalysis:
    energy: SampledTrack
    semitones: SampledTrack | None
    base_hz: float
    ipus: list
    fits: list
    nuclei: list
    shapes: list  # AccentShape or None per nucleus
    accent: np.ndarray = None


@dataclass
class SessionAnalysis:
    session_id: str
    annotation: DialogAnnotation
    features: list
    speakers: dict
    errors: list = field(default_factory=list)


def speaker_semitones(raw_f0: SampledTrack, turns, params: Params):
    """Preprocessed semitone contour of one speaker and its Hz base value.

    The base value is taken over the speaker's in-turn samples.
    """
    if raw_f0.valid.sum() == 0:
        return None, math.nan
    hz = dsp.preprocess_f0(raw_f0, params.outlier_order)
    mask = np.zeros(len(hz), bool)
    for t in turns:
        i, j = hz.index_range(t.start, t.end)
        mask[i:j] = True
    scope = hz.values[mask] if mask.any() else hz.values
    base = dsp.semitone_base(scope)
    st, _ = dsp.to_semitones(hz, base)
    return st, base


def detect_nuclei(w: Waveform, ipus, params: Params):
    """Band-pass each IPU (with context padding) and detect its nuclei."""
    out = []
    for k, ipu in enumerate(ipus):
        s0 = max(0.0, ipu.start - BANDPASS_PAD)
        seg = w.segment(s0, ipu.end + BANDPASS_PAD)
        if len(seg.samples) < 2:
            continue
        off = round(s0 * w.rate) / w.rate
        bp = dsp.bandpass(seg)
        local = structure.Ipu(ipu.speaker_id, ipu.start - off, ipu.end - off, ipu.turn_index)
        for n in structure.detect_syllable_nuclei(bp, [local], params.nucleus_step, params.w_a,
                                                  params.w_r, params.v, params.x):
            out.append(structure.SyllableNucleus(round(n.time + off, 9), n.energy_ratio, k))
    return out


def syllable_feature_matrix(shapes, nuclei, ipus) -> np.ndarray:
    """Accent-classifier features per nucleus.

    Ten stylization values (s0..s3, local level/range intercept and slope,
    two Gestalt RMSDs) plus the inter-nucleus interval as a duration proxy.
    """
    rows = np.full((len(nuclei), 11), math.nan)
    for i, (shape, n) in enumerate(zip(shapes, nuclei)):
        if shape is not None:
            rows[i, :4] = shape.s
            if shape.local_register is not None:
                r = shape.local_register
                rows[i, 4:10] = (r.lev_c0, r.lev_c1, r.rng_c0, r.rng_c1,
                                 shape.gst_lev, shape.gst_rng)
        nxt = nuclei[i + 1].time if i + 1 < len(nuclei) and nuclei[i + 1].ipu == n.ipu \
            else ipus[n.ipu].end
        rows[i, 10] = max(nxt - n.time, 0.0)
    d = rows[:, 10]
    if len(d) > 1 and d.std() > 0:
        rows[:, 10] = (d - d.mean()) / d.std()
    elif len(d):
        rows[:, 10] = 0.0
    return rows


def word_of_nuclei(words, nuclei) -> np.ndarray:
    starts = [w.start for w in words]
    out = np.full(len(nuclei), -1)
    for i, n in enumerate(nuclei):
        k = bisect.bisect_right(starts, n.time + 1e-9) - 1
        if k >= 0 and n.time <= words[k].end + 1e-9:
            out[i] = k
    return out


def analyze_speaker(ann: DialogAnnotation, speaker_id: str, wave: Waveform,
                    raw_f0: SampledTrack, ipus, params: Params) -> SpeakerAnalysis:
    turns = [t for t in ann.turns if t.speaker_id == speaker_id]
    st, base = speaker_semitones(raw_f0, turns, params)
    energy = dsp.rms_energy(wave)
    fits = []
    for ipu in ipus:
        fit = None
        if st is not None:
            fit = styl.fit_register(st.window(ipu.start, ipu.end), params.register_window,
                                    params.register_step)
        fits.append(fit)
    nuclei = detect_nuclei(wave, ipus, params)
    shapes = []
    for n in nuclei:
        fit = fits[n.ipu]
        if fit is None:
            shapes.append(None)
            continue
        seg = st.window(ipus[n.ipu].start, ipus[n.ipu].end)
        shapes.append(styl.stylize_accent(seg, fit, n.time, params.accent_window,
                                          params.register_window, params.register_step))
    return SpeakerAnalysis(energy, st, base, list(ipus), fits, nuclei, shapes)


def classify_session(ann: DialogAnnotation, speakers: dict, params: Params, errors: list):
    """Bootstrap one accent model per session and flag word-initial syllables."""
    feats, labels, initial, owners = [], [], [], []
    for sid, sa in speakers.items():
        words = [w for w in ann.words if w.speaker_id == sid]
        m = syllable_feature_matrix(sa.shapes, sa.nuclei, sa.ipus)
        wi = word_of_nuclei(words, sa.nuclei)
        labels.append(structure.seed_labels([w.end - w.start for w in words], wi,
                                            params.t_a, params.t_na))
        first = np.zeros(len(wi), bool)
        seen = set()
        for i, w in enumerate(wi):
            if w >= 0 and w not in seen:
                first[i] = True
                seen.add(w)
        feats.append(m)
        initial.append(first)
        owners.append(sid)
        sa.accent = np.zeros(len(sa.nuclei), bool)
    if not feats or sum(len(f) for f in feats) == 0:
        errors.append(f"{ann.session_id}: no syllable nuclei detected")
        return
    x = np.vstack(feats)
    lab = np.concatenate(labels)
    first = np.concatenate(initial)
    try:
        model = structure.bootstrap_accent_model(x, lab, params.accent_percentile)
    except structure.AccentModelError as exc:
        errors.append(f"{ann.session_id}: accent model: {exc}")
        return
    flags = np.zeros(len(x), bool)
    if first.any():
        flags[first] = structure.classify_accents(model, x[first])
    k = 0
    for sid, f in zip(owners, feats):
        speakers[sid].accent = flags[k:k + len(f)]
        k += len(f)


def turn_features(ann: DialogAnnotation, speakers: dict, params: Params) -> list:
    ipus_of, nuclei_of = {}, {}
    for sid, sa in speakers.items():
        ipus_of[sid], nuclei_of[sid] = {}, {}
        for k, ipu in enumerate(sa.ipus):
            ipus_of[sid].setdefault(ipu.turn_index, []).append(k)
        for i, n in enumerate(sa.nuclei):
            nuclei_of[sid].setdefault(n.ipu, []).append(i)
    rows = []
    for turn in ann.turns:
        sa = speakers.get(turn.speaker_id)
        meta = {"session": ann.session_id, "role": ann.role(turn), "gender": ann.gender(turn)}
        if sa is None:
            rows.append(assemble_turn_features(turn, meta, [], [], [], [], {}))
            continue
        k_ipus = ipus_of[turn.speaker_id].get(turn.index, [])
        by_ipu = nuclei_of[turn.speaker_id]
        en = sa.energy.window(turn.start, turn.end).values
        f0 = [] if sa.semitones is None else sa.semitones.window(turn.start, turn.end).values
        fits = [sa.fits[k] for k in k_ipus]
        in_turn = [i for k in k_ipus for i in by_ipu.get(k, ())]
        accents = [sa.shapes[i] for i in in_turn
                   if sa.accent is not None and sa.accent[i] and sa.shapes[i] is not None]
        rhythm = rhythm_features(sa.energy, sa.semitones, [sa.nuclei[i] for i in in_turn],
                                 turn, params.rhythm_band, params.rhythm_cutoff)
        rows.append(assemble_turn_features(turn, meta, en, f0, fits, accents, rhythm))
    return rows


def analyze_session(ann: DialogAnnotation, channels: dict, params: Params = Params()
                    ) -> SessionAnalysis:
    """Full feature extraction for one dialog.

    ``channels`` maps speaker id to ``(Waveform, raw Hz SampledTrack)``.
    """
    errors = []
    all_ipus = structure.segment_ipus(ann, params.pause)
    speakers = {}
    for sid in ann.speaker_ids:
        if sid not in channels:
            errors.append(f"{ann.session_id}: no channel for speaker {sid}")
            continue
        wave, raw_f0 = channels[sid]
        ipus = [i for i in all_ipus if i.speaker_id == sid]
        speakers[sid] = analyze_speaker(ann, sid, wave, raw_f0, ipus, params)
    classify_session(ann, speakers, params, errors)
    feats = turn_features(ann, speakers, params)
    return SessionAnalysis(ann.session_id, ann, feats, speakers, errors)


def load_and_analyze(entry, params: Params = Params()) -> SessionAnalysis:
    ann = load_annotation(entry.annotation)
    channels = {c.speaker_id: (load_waveform(c.wav), load_f0(c.f0)) for c in entry.channels}
    return analyze_session(ann, channels, params)

