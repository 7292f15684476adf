"""Synthetic dyads with controllable entrainment, written in the ingest formats.

Each speaker channel carries a 100 Hz f0 track built from per-turn register
lines plus accent bumps, and a 16 kHz multi-tone carrier whose envelope pulses
once per syllable. Per-turn prosodic targets are drawn per speaker and, for the
entraining speakers, pulled towards (or pushed away from) the value of the
preceding turn of the other speaker.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_pairs
from .ingest import (F0_RATE, Channel, DialogAnnotation, SampledTrack, SessionEntry,
                     Speaker, Task, Turn, Waveform, Word, write_annotation, write_f0,
                     write_manifest, write_waveform)

MODES = ("none", "proximity", "synchrony", "disentrain")
TARGETS = ("f0_level", "f0_range", "energy", "syl_rate")
REF_HZ = {"f": 200.0, "m": 110.0}
CARRIER_HZ = (350.0, 800.0, 1600.0)
NOISE_FLOOR = 1e-4
PULSE_SD = 0.03
REPEL = 1.5


@dataclass(frozen=True)
class SynthConfig:
    n_turns: int = 100
    n_tasks: int = 2
    genders: tuple = ("f", "m")
    speaker_ids: tuple = ("A", "B")
    turn_duration: tuple = (1.4, 0.4, 0.7)  # mean, sd, minimum
    latency: tuple = (0.2, 0.25, -0.3)  # mean, sd, minimum
    f0_level: tuple = (4.0, 0.7)  # semitones over the gender reference; speaker sd
    f0_range: tuple = (3.0, 0.8)
    energy: tuple = (-14.0, 3.0)  # dB re full scale
    syl_rate: tuple = (4.5, 0.7)
    turn_sd: dict = field(default_factory=lambda: {
        "f0_level": 1.5, "f0_range": 0.6, "energy": 2.5, "syl_rate": 0.6})
    entrainment_mode: str = "none"
    entrainment_gain: float = 0.0
    target: tuple = ("f0_level",)
    entrainers: tuple = ("f_x",)  # role_gender patterns of responders that adapt
    wave_rate: int = 16000
    seed: int = 0
    session_id: str = "synth"

    def __post_init__(self):
        if self.n_turns < 4:
            raise ConfigError("n_turns must be at least 4")
        if not 0 <= self.entrainment_gain <= 1:
            raise ConfigError("entrainment_gain must lie in [0, 1]")
        if self.entrainment_mode not in MODES:
            raise ConfigError(f"unknown entrainment mode {self.entrainment_mode!r}")
        if isinstance(self.target, str):
            object.__setattr__(self, "target", (self.target,))
        if isinstance(self.entrainers, str):
            object.__setattr__(self, "entrainers", (self.entrainers,))
        bad = set(self.target) - set(TARGETS)
        if bad:
            raise ConfigError(f"unknown target feature(s) {sorted(bad)}")
        if self.n_tasks < 1 or self.n_tasks > self.n_turns:
            raise ConfigError("n_tasks must lie in [1, n_turns]")
        if len(self.genders) != 2 or len(self.speaker_ids) != 2:
            raise ConfigError("a dyad has exactly two speakers")


@dataclass
class TurnTruth:
    turn_index: int
    speaker_id: str
    role: str
    gender: str
    values: dict  # realised per-turn targets
    draws: dict  # the speaker's own draws before adaptation
    adapted: bool
    n_syllables: int = 0
    duration: float = math.nan

    @property
    def realised_rate(self) -> float:
        """Syllables per second of the rendered turn."""
        return self.n_syllables / self.duration


@dataclass
class SynthDyad:
    config: SynthConfig
    annotation: DialogAnnotation
    waves: dict
    f0: dict
    truth: list
    speaker_means: dict

    @property
    def session_id(self) -> str:
        return self.annotation.session_id


def _matches(pattern: str, role: str, gender: str) -> bool:
    r, g = pattern.split("_")
    return r in ("x", role[0]) and g in ("x", gender)


def _adapt(mode, gain, own, own_mean, prev, prev_mean, spread):
    if mode == "proximity":
        return (1 - gain) * own + gain * prev
    if mode == "synchrony":
        return own_mean + (1 - gain) * (own - own_mean) + gain * (prev - prev_mean)
    if mode == "disentrain":
        # a fixed step from the partner's typical value, opposite to the
        # partner's current deviation
        away = -1.0 if prev >= prev_mean else 1.0
        return (1 - gain) * own + gain * (prev_mean + away * REPEL * spread)
    return own


def _words_for_turn(start, length, rate, rng):
    """Words filling about ``length`` seconds from ``start``, grouped into IPUs
    separated by >= 0.2 s pauses. The last word closes the turn.

    Returns (words, syllables) with words as (start, end, accented) and
    syllables as (centre, width, accented) tuples.
    """
    words, syls = [], []
    syl = 1.0 / rate
    t = start
    while not words or t < start + length:
        if rng.random() < 0.3:
            n, dur, acc = 1, min(0.12, syl), False
        else:
            n = int(rng.integers(2, 5))
            dur, acc = n * syl, True
        # uneven syllable lengths keep nuclei from phase-locking to the analysis grid
        widths = dur / n * rng.uniform(0.75, 1.25, n)
        edges = t + np.concatenate([[0.0], np.cumsum(widths)])
        words.append((t, float(edges[-1]), acc))
        for k in range(n):
            syls.append((float(edges[k] + edges[k + 1]) / 2, float(widths[k]), acc and k == 0))
        t = float(edges[-1])
        if rng.random() < 0.1 and t < start + length - 0.5:
            t += float(rng.uniform(0.2, 0.3))
    return words, syls


def generate_dyad(cfg: SynthConfig) -> SynthDyad:
    """One seeded dyad; identical configs give bit-identical output."""
    rng = np.random.default_rng(cfg.seed)
    ids, genders = cfg.speaker_ids, cfg.genders
    means = {}
    for sid, g in zip(ids, genders):
        means[sid] = {k: float(rng.normal(*getattr(cfg, k))) for k in TARGETS}
        means[sid]["f0_range"] = max(means[sid]["f0_range"], 0.8)
        means[sid]["syl_rate"] = min(max(means[sid]["syl_rate"], 2.5), 7.0)
    slot0 = int(rng.integers(2))
    slots = [(slot0 + i) % 2 for i in range(cfg.n_turns)]
    bounds = np.linspace(0, cfg.n_turns, cfg.n_tasks + 1).round().astype(int)
    first_describer = int(rng.integers(2))
    task_of = np.repeat(np.arange(cfg.n_tasks), np.diff(bounds))
    describer = [ids[(first_describer + k) % 2] for k in range(cfg.n_tasks)]

    truth, last = [], {}
    for i, slot in enumerate(slots):
        sid, g = ids[slot], genders[slot]
        other = ids[1 - slot]
        role = "describer" if describer[task_of[i]] == sid else "follower"
        draws = {k: float(rng.normal(means[sid][k], cfg.turn_sd[k])) for k in TARGETS}
        values = dict(draws)
        adapted = (cfg.entrainment_mode != "none" and other in last
                   and any(_matches(p, role, g) for p in cfg.entrainers))
        if adapted:
            for k in cfg.target:
                values[k] = _adapt(cfg.entrainment_mode, cfg.entrainment_gain, draws[k],
                                   means[sid][k], last[other][k], means[other][k],
                                   cfg.turn_sd[k])
        values["f0_range"] = max(values["f0_range"], 0.5)
        values["syl_rate"] = min(max(values["syl_rate"], 2.0), 8.0)
        last[sid] = values
        truth.append(TurnTruth(i, sid, role, g, values, draws, adapted))

    # timing: each turn is as long as its words; latencies may be negative
    mu, sd, lo = cfg.turn_duration
    lmu, lsd, llo = cfg.latency
    t = 0.5
    layout = []
    for tr in truth:
        ws, syls = _words_for_turn(t, max(lo, rng.normal(mu, sd)), tr.values["syl_rate"], rng)
        ws = [(round(a, 3), round(b, 3), acc) for a, b, acc in ws]
        layout.append((ws, syls))
        tr.n_syllables, tr.duration = len(syls), ws[-1][1] - ws[0][0]
        t = ws[-1][1] + max(llo, rng.normal(lmu, lsd))

    tasks, turns = [], []
    for k in range(cfg.n_tasks):
        a, b = bounds[k], bounds[k + 1]
        t0 = layout[a][0][0][0] - 0.2
        t1 = max(ws[-1][1] for ws, _ in layout[a:b]) + 0.2
        tasks.append(Task(f"t{k + 1}", round(t0, 3), round(t1, 3), describer[k],
                          float(round(rng.uniform(20, 100), 1))))
    for i, (ws, _) in enumerate(layout):
        turns.append(Turn(truth[i].speaker_id, tasks[task_of[i]].task_id, ws[0][0], ws[-1][1]))

    duration = max(t.end for t in tasks) + 0.5
    n_wave = int(math.ceil(duration * cfg.wave_rate))
    n_f0 = int(math.ceil(duration * F0_RATE))
    env = {sid: np.zeros(n_wave) for sid in ids}
    f0 = {sid: np.zeros(n_f0) for sid in ids}
    words = []
    t_f0 = np.arange(n_f0) / F0_RATE
    for turn, tr, (ws, syls) in zip(turns, truth, layout):
        v = tr.values
        words += [Word(turn.speaker_id, a, b, f"w{len(words) + j}")
                  for j, (a, b, _) in enumerate(ws)]
        amp = 10 ** (v["energy"] / 20)
        _render_energy(env[turn.speaker_id], syls, amp, cfg.wave_rate)
        ref = REF_HZ[tr.gender]
        for a, b, _ in _ipus(ws):
            i0, i1 = int(math.ceil(a * F0_RATE)), int(math.floor(b * F0_RATE)) + 1
            tt = t_f0[i0:i1]
            if not len(tt):
                continue
            u = (tt - a) / max(b - a, 1e-9)
            level = v["f0_level"] + 0.5 - 1.0 * u  # gentle declination
            ripple = 0.5 * v["f0_range"] * np.sin(2 * np.pi * 25.0 * tt)
            peaks = [(c, w) for c, w, acc in syls if acc and a <= c <= b]
            bumps = np.zeros_like(tt)
            if peaks:
                c, w = np.array(peaks).T
                bumps = 2.0 * np.exp(-0.5 * ((tt[:, None] - c) / (0.25 * w)) ** 2).sum(axis=1)
            f0[turn.speaker_id][i0:i1] = ref * 2 ** ((level + ripple + bumps) / 12)

    carrier = _carrier(n_wave, cfg.wave_rate)
    waves, tracks = {}, {}
    for sid in ids:
        noise = NOISE_FLOOR * rng.standard_normal(n_wave)
        waves[sid] = Waveform(np.clip(env[sid] * carrier + noise, -0.999, 0.999),
                              float(cfg.wave_rate))
        vals = np.round(f0[sid], 4)
        tracks[sid] = SampledTrack(vals, F0_RATE, vals > 0, "hertz", 0.0)
    ann = DialogAnnotation(cfg.session_id, tuple(Speaker(s, g) for s, g in zip(ids, genders)),
                           tuple(tasks), tuple(turns), tuple(words))
    return SynthDyad(cfg, ann, waves, tracks, truth, means)


def _ipus(words, pause: float = 0.1):
    out = []
    for a, b, acc in words:
        if out and a - out[-1][1] < pause:
            out[-1] = (out[-1][0], b, out[-1][2] or acc)
        else:
            out.append((a, b, acc))
    return out


def _carrier(n: int, rate: int) -> np.ndarray:
    # the tones share a 50 Hz fundamental, so one period can be tiled
    period = rate // math.gcd(rate, math.gcd(*(int(f) for f in CARRIER_HZ)))
    t = np.arange(period) / rate
    one = sum(np.sin(2 * np.pi * f * t) for f in CARRIER_HZ) / len(CARRIER_HZ) * 2.0
    return np.tile(one, n // period + 1)[:n]


def _render_energy(env: np.ndarray, syls, amp: float, rate: int) -> None:
    """Add one Gaussian envelope pulse per syllable (accented ones louder)."""
    for c, w, acc in syls:
        sd = min(0.18 * w, PULSE_SD)
        i0 = max(0, int((c - 3 * sd) * rate))
        i1 = min(len(env), int((c + 3 * sd) * rate) + 1)
        t = np.arange(i0, i1) / rate
        peak = amp * (1.4 if acc else 1.0)
        env[i0:i1] = np.maximum(env[i0:i1], peak * np.exp(-0.5 * ((t - c) / sd) ** 2))


def corpus_configs(base: SynthConfig, n_sessions: int, seed: int) -> list[SynthConfig]:
    """Configs for speaker-disjoint sessions with varied gender pairings.

    Session seeds are spawned from ``seed`` so each session owns a substream.
    """
    pairings = (("f", "m"), ("m", "f"), ("f", "f"), ("m", "m"))
    children = np.random.SeedSequence(seed).spawn(n_sessions)
    out = []
    for k, child in enumerate(children):
        sid = f"s{k + 1:02d}"
        out.append(dataclasses.replace(
            base, seed=int(child.generate_state(1)[0]), session_id=sid,
            genders=pairings[k % len(pairings)],
            speaker_ids=(f"{sid}A", f"{sid}B")))
    return out


def write_dyad(dyad: SynthDyad, out_dir) -> SessionEntry:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sid = dyad.session_id
    ann_path = out_dir / f"{sid}.ann"
    write_annotation(ann_path, dyad.annotation)
    channels = []
    for spk in dyad.annotation.speaker_ids:
        wav, f0 = out_dir / f"{sid}_{spk}.wav", out_dir / f"{sid}_{spk}.f0"
        write_waveform(wav, dyad.waves[spk])
        write_f0(f0, dyad.f0[spk])
        channels.append(Channel(spk, wav, f0))
    return SessionEntry(sid, ann_path, tuple(channels))


TRUTH_HEADER = "session\tturn\tspeaker\trole\tgender\tadapted\t" + "\t".join(TARGETS)


def _truth_lines(d: SynthDyad) -> list:
    return ["\t".join([d.session_id, str(t.turn_index), t.speaker_id, t.role, t.gender,
                       str(int(t.adapted))] + [repr(t.values[k]) for k in TARGETS])
            for t in d.truth]


def write_truth(path, dyads) -> None:
    lines = [TRUTH_HEADER] + [ln for d in dyads for ln in _truth_lines(d)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_corpus(dyads, out_dir) -> Path:
    """Write sessions, a manifest and a ground-truth table; returns the manifest path.

    ``dyads`` may be a lazy iterable: each one is written and released before
    the next is drawn, so long corpora need memory for one session only.
    """
    out_dir = Path(out_dir)
    entries, truth = [], [TRUTH_HEADER]
    for d in dyads:
        entries.append(write_dyad(d, out_dir))
        truth += _truth_lines(d)
        del d
    manifest = out_dir / "manifest.tsv"
    write_manifest(manifest, entries)
    (out_dir / "truth.tsv").write_text("\n".join(truth) + "\n", encoding="utf-8")
    return manifest


_TUPLES = {"genders", "speaker_ids", "target", "entrainers"}
_RANGES = {"turn_duration", "latency", "f0_level", "f0_range", "energy", "syl_rate"}


def load_synth_config(path):
    """Flat key-value synth config: returns (SynthConfig, n_sessions, output_dir)."""
    path = Path(path)
    pairs = parse_pairs(path.read_text(encoding="utf-8"), str(path))
    out_dir = path.parent / pairs.pop("output_dir", "synth_out")
    n_sessions = int(pairs.pop("sessions", "1"))
    fields = {f.name: f for f in dataclasses.fields(SynthConfig)}
    kw = {}
    for key, raw in pairs.items():
        if key not in fields or key == "turn_sd":
            raise ConfigError(f"{path}: unknown key {key!r}")
        try:
            if key in _TUPLES:
                kw[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key in _RANGES:
                kw[key] = tuple(float(s) for s in raw.split(","))
            elif key in ("entrainment_mode", "session_id"):
                kw[key] = raw
            elif key == "entrainment_gain":
                kw[key] = float(raw)
            else:
                kw[key] = int(raw)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key!r}: {raw!r}") from None
    if n_sessions < 1:
        raise ConfigError(f"{path}: sessions must be at least 1")
    return SynthConfig(**kw), n_sessions, out_dir
