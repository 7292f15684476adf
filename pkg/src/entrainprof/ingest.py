"""Readers and writers for waveforms, f0 tracks and dialog annotations.

Everything downstream consumes the immutable containers defined here.
"""

from __future__ import annotations

import bisect
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

F0_RATE = 100.0
ROLES = ("describer", "follower")
GENDERS = ("f", "m")


class IngestError(ValueError):
    """Base class for all parse and validation failures."""


class WavHeaderError(IngestError):
    pass


class UnsupportedEncodingError(IngestError):
    pass


class EmptyAudioError(IngestError):
    pass


class TrackFormatError(IngestError):
    pass


class AnnotationError(IngestError):
    pass


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("sample rate must be positive")
        samples = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate

    def segment(self, start: float, end: float) -> "Waveform":
        i = max(0, int(round(start * self.rate)))
        j = min(len(self.samples), int(round(end * self.rate)))
        return Waveform(self.samples[i:max(i, j)], self.rate)


@dataclass(frozen=True)
class SampledTrack:
    """Uniformly sampled contour; ``values[i]`` sits at ``start + i / rate``."""

    values: np.ndarray
    rate: float
    valid: np.ndarray = None
    unit: str = "hertz"
    start: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        valid = (np.isfinite(values) if self.valid is None
                 else np.asarray(self.valid, dtype=bool))
        if self.rate <= 0:
            raise ValueError("track rate must be positive")
        if valid.shape != values.shape:
            raise ValueError("valid mask and values differ in length")
        if not np.all(np.isfinite(values[valid])):
            raise ValueError("valid samples must be finite")
        if self.unit not in ("hertz", "semitone", "rms"):
            raise ValueError(f"unknown unit {self.unit!r}")
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(len(self.values)) / self.rate

    def index_range(self, t0: float, t1: float) -> tuple[int, int]:
        """Sample indices ``[i, j)`` whose times fall into ``[t0, t1]``."""
        i = int(np.ceil((t0 - self.start) * self.rate - 1e-9))
        j = int(np.floor((t1 - self.start) * self.rate + 1e-9)) + 1
        n = len(self.values)
        return min(max(i, 0), n), min(max(j, 0), n)

    def window(self, t0: float, t1: float) -> "SampledTrack":
        i, j = self.index_range(t0, t1)
        j = max(i, j)
        return SampledTrack(self.values[i:j], self.rate, self.valid[i:j],
                            self.unit, self.start + i / self.rate)

    def replace(self, values=None, valid=None, unit=None) -> "SampledTrack":
        return SampledTrack(self.values if values is None else values, self.rate,
                            self.valid if valid is None else valid,
                            self.unit if unit is None else unit, self.start)


@dataclass(frozen=True)
class Speaker:
    id: str
    gender: str


@dataclass(frozen=True)
class Task:
    task_id: str
    start: float
    end: float
    describer: str
    score: float
    roles: tuple = ()  # ((speaker_id, role), ...)

    def role_of(self, speaker_id: str) -> str:
        return dict(self.roles)[speaker_id]


@dataclass(frozen=True)
class Turn:
    speaker_id: str
    task_id: str
    start: float
    end: float
    index: int = -1

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Word:
    speaker_id: str
    start: float
    end: float
    text: str


@dataclass(frozen=True)
class DialogAnnotation:
    session_id: str
    speakers: tuple
    tasks: tuple
    turns: tuple
    words: tuple = ()
    _by_id: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        speakers = tuple(self.speakers)
        ids = [s.id for s in speakers]
        if len(set(ids)) != len(ids):
            raise AnnotationError("duplicate speaker id")
        for s in speakers:
            if s.gender not in GENDERS:
                raise AnnotationError(f"unknown gender code {s.gender!r} for {s.id}")
        tasks = []
        for t in self.tasks:
            if t.describer not in ids:
                raise AnnotationError(f"task {t.task_id}: unknown describer {t.describer}")
            if not t.end > t.start:
                raise AnnotationError(f"task {t.task_id}: empty interval")
            roles = tuple((sid, "describer" if sid == t.describer else "follower")
                          for sid in ids)
            if t.roles and dict(t.roles) != dict(roles):
                for _, role in t.roles:
                    if role not in ROLES:
                        raise AnnotationError(f"unknown role code {role!r}")
                raise AnnotationError(f"task {t.task_id}: inconsistent roles")
            tasks.append(Task(t.task_id, t.start, t.end, t.describer, t.score, roles))
        task_by_id = {t.task_id: t for t in tasks}
        if len(task_by_id) != len(tasks):
            raise AnnotationError("duplicate task id")

        order = sorted(range(len(self.turns)),
                       key=lambda k: (self.turns[k].start, self.turns[k].end, k))
        turns = [None] * len(self.turns)
        for rank, k in enumerate(order):
            t = self.turns[k]
            turns[k] = Turn(t.speaker_id, t.task_id, t.start, t.end, rank)
        turns = tuple(sorted(turns, key=lambda t: t.index))
        for t in turns:
            if t.speaker_id not in ids:
                raise AnnotationError(f"turn at {t.start}: unknown speaker {t.speaker_id}")
            task = task_by_id.get(t.task_id)
            if task is None:
                raise AnnotationError(f"turn at {t.start}: unknown task {t.task_id}")
            if not t.end > t.start:
                raise AnnotationError(f"turn at {t.start}: empty interval")
            if t.start < task.start - 1e-9 or t.end > task.end + 1e-9:
                raise AnnotationError(f"turn at {t.start} lies outside task {t.task_id}")
        last_end = {}
        for t in turns:
            prev = last_end.get(t.speaker_id)
            if prev is not None and t.start < prev - 1e-9:
                raise AnnotationError(
                    f"overlapping turns of speaker {t.speaker_id} at {t.start:.3f}")
            last_end[t.speaker_id] = max(t.end, prev if prev is not None else t.end)

        by_speaker = {}
        for t in turns:
            by_speaker.setdefault(t.speaker_id, []).append(t)
        starts = {sid: [t.start for t in ts] for sid, ts in by_speaker.items()}
        words = tuple(sorted(self.words, key=lambda w: (w.start, w.speaker_id)))
        words_by_turn = {}
        for w in words:
            if not w.end > w.start:
                raise AnnotationError(f"word {w.text!r} at {w.start}: empty interval")
            ts = by_speaker.get(w.speaker_id, [])
            k = bisect.bisect_right(starts.get(w.speaker_id, []), w.start + 1e-9) - 1
            if k < 0 or w.end > ts[k].end + 1e-9:
                raise AnnotationError(f"word {w.text!r} at {w.start} is not inside a turn")
            words_by_turn.setdefault(ts[k].index, []).append(w)

        object.__setattr__(self, "speakers", speakers)
        object.__setattr__(self, "tasks", tuple(tasks))
        object.__setattr__(self, "turns", turns)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "_by_id", {
            "speaker": {s.id: s for s in speakers}, "task": task_by_id,
            "words": words_by_turn})

    def speaker(self, speaker_id: str) -> Speaker:
        return self._by_id["speaker"][speaker_id]

    def task(self, task_id: str) -> Task:
        return self._by_id["task"][task_id]

    def role(self, turn: Turn) -> str:
        return self.task(turn.task_id).role_of(turn.speaker_id)

    def gender(self, turn: Turn) -> str:
        return self.speaker(turn.speaker_id).gender

    def words_in(self, turn: Turn) -> list:
        return list(self._by_id["words"].get(turn.index, ()))

    @property
    def speaker_ids(self) -> tuple:
        return tuple(s.id for s in self.speakers)


# --- waveform -------------------------------------------------------------

def load_waveform(path, channel: int = 0) -> Waveform:
    """Read a 16-bit PCM WAV file; samples are scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg or "bad sample width" in msg:
            raise UnsupportedEncodingError(f"{path}: {msg}") from exc
        raise WavHeaderError(f"{path}: {msg}") from exc
    except EOFError as exc:
        raise WavHeaderError(f"{path}: truncated header") from exc
    if width != 2:
        raise UnsupportedEncodingError(f"{path}: {8 * width}-bit samples, need 16-bit")
    if n_frames == 0 or not raw:
        raise EmptyAudioError(f"{path}: no samples")
    if not 0 <= channel < n_channels:
        raise ValueError(f"channel {channel} not in file with {n_channels} channels")
    data = np.frombuffer(raw, dtype="<i2")
    data = data[: len(data) - len(data) % n_channels].reshape(-1, n_channels)
    return Waveform(data[:, channel] / 32768.0, float(rate))


def write_waveform(path, w: Waveform) -> None:
    ints = np.clip(np.round(np.asarray(w.samples) * 32768.0), -32768, 32767)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(round(w.rate)))
        fh.writeframes(ints.astype("<i2").tobytes())


# --- f0 track -------------------------------------------------------------

def parse_f0(text: str, source: str = "<f0>") -> SampledTrack:
    times, hz = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TrackFormatError(f"{source}:{lineno}: expected '<time>\\t<hz>'")
        try:
            times.append(float(parts[0]))
            hz.append(float(parts[1]))
        except ValueError as exc:
            raise TrackFormatError(f"{source}:{lineno}: {exc}") from exc
    if not times:
        raise TrackFormatError(f"{source}: empty f0 file")
    times = np.asarray(times)
    hz = np.asarray(hz)
    if len(times) > 1:
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise TrackFormatError(f"{source}: timestamps not strictly increasing")
        step = float(np.median(steps))
        if abs(step * F0_RATE - 1.0) > 0.01:
            raise TrackFormatError(
                f"{source}: sample rate {1 / step:.2f} Hz, expected 100 Hz +- 1%")
        grid = times[0] + np.arange(len(times)) / F0_RATE
        if np.max(np.abs(times - grid)) > 0.5 / F0_RATE:
            raise TrackFormatError(f"{source}: timestamps drift off the 100 Hz grid")
    if np.any(hz < 0) or not np.all(np.isfinite(hz)):
        raise TrackFormatError(f"{source}: negative or non-finite f0 value")
    return SampledTrack(hz, F0_RATE, hz > 0, "hertz", float(times[0]))


def format_f0(track: SampledTrack) -> str:
    vals = np.where(track.valid, track.values, 0.0)
    return "".join(f"{t:.3f}\t{v:.4f}\n" for t, v in zip(track.times, vals))


def load_f0(path) -> SampledTrack:
    return parse_f0(Path(path).read_text(encoding="utf-8"), str(path))


def write_f0(path, track: SampledTrack) -> None:
    Path(path).write_text(format_f0(track), encoding="utf-8")


# --- annotation -----------------------------------------------------------

def _float(tok: str, where: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise AnnotationError(f"{where}: not a number: {tok!r}") from None


def parse_annotation(text: str, source: str = "<annotation>",
                     session_id: str | None = None) -> DialogAnnotation:
    speakers, tasks, turns, words = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        parts = line.rstrip("\n").split("\t")
        kind, args = parts[0], parts[1:]
        expected = {"SESSION": 1, "SPK": 2, "TASK": 5, "TURN": 4, "WORD": 4}
        if kind not in expected:
            raise AnnotationError(f"{where}: unknown record type {kind!r}")
        if len(args) != expected[kind]:
            raise AnnotationError(f"{where}: {kind} takes {expected[kind]} fields")
        if kind == "SESSION":
            session_id = args[0]
        elif kind == "SPK":
            if args[1] not in GENDERS:
                raise AnnotationError(f"{where}: unknown gender code {args[1]!r}")
            speakers.append(Speaker(args[0], args[1]))
        elif kind == "TASK":
            tasks.append(Task(args[0], _float(args[1], where), _float(args[2], where),
                              args[3], _float(args[4], where)))
        elif kind == "TURN":
            turns.append(Turn(args[0], args[1], _float(args[2], where),
                              _float(args[3], where)))
        else:
            words.append(Word(args[0], _float(args[1], where), _float(args[2], where),
                              args[3]))
    if session_id is None:
        session_id = Path(source).stem
    return DialogAnnotation(session_id, speakers, tasks, turns, words)


def format_annotation(ann: DialogAnnotation) -> str:
    out = [f"SESSION\t{ann.session_id}"]
    out += [f"SPK\t{s.id}\t{s.gender}" for s in ann.speakers]
    out += [f"TASK\t{t.task_id}\t{t.start:.3f}\t{t.end:.3f}\t{t.describer}\t{t.score:g}"
            for t in ann.tasks]
    out += [f"TURN\t{t.speaker_id}\t{t.task_id}\t{t.start:.3f}\t{t.end:.3f}"
            for t in ann.turns]
    out += [f"WORD\t{w.speaker_id}\t{w.start:.3f}\t{w.end:.3f}\t{w.text}"
            for w in ann.words]
    return "\n".join(out) + "\n"


def load_annotation(path) -> DialogAnnotation:
    return parse_annotation(Path(path).read_text(encoding="utf-8"), str(path))


def write_annotation(path, ann: DialogAnnotation) -> None:
    Path(path).write_text(format_annotation(ann), encoding="utf-8")


def load_tracks_and_annotation(f0_path, ann_path):
    return load_f0(f0_path), load_annotation(ann_path)


# --- corpus manifest ------------------------------------------------------

@dataclass(frozen=True)
class Channel:
    speaker_id: str
    wav: Path
    f0: Path


@dataclass(frozen=True)
class SessionEntry:
    session_id: str
    annotation: Path
    channels: tuple


def load_manifest(path) -> list[SessionEntry]:
    """Read a corpus manifest.

    Tab-separated lines ``SESSION <id> <annotation>`` and
    ``CHANNEL <session_id> <speaker_id> <wav> <f0>``; relative paths resolve
    against the manifest's directory.
    """
    path = Path(path)
    root = path.parent
    sessions, channels = {}, {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if parts[0] == "SESSION" and len(parts) == 3:
            sessions[parts[1]] = root / parts[2]
            channels.setdefault(parts[1], [])
        elif parts[0] == "CHANNEL" and len(parts) == 5:
            channels.setdefault(parts[1], []).append(
                Channel(parts[2], root / parts[3], root / parts[4]))
        else:
            raise IngestError(f"{path}:{lineno}: malformed manifest line")
    for sid in channels:
        if sid not in sessions:
            raise IngestError(f"{path}: channel for undeclared session {sid}")
    return [SessionEntry(sid, ann, tuple(channels[sid])) for sid, ann in sessions.items()]


def write_manifest(path, entries) -> None:
    path = Path(path)
    lines = []
    for e in entries:
        lines.append(f"SESSION\t{e.session_id}\t{_rel(e.annotation, path.parent)}")
        for c in e.channels:
            lines.append(f"CHANNEL\t{e.session_id}\t{c.speaker_id}\t"
                         f"{_rel(c.wav, path.parent)}\t{_rel(c.f0, path.parent)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _rel(p, root):
    p = Path(p)
    try:
        return str(p.relative_to(root))
    except ValueError:
        return str(p)
