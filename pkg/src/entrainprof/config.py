"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

STAGES = ("ingest", "dsp", "structure", "styl", "features", "entrain", "stats")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    """Numeric analysis parameters; defaults follow the published setup."""

    pause: float = 0.100
    nucleus_step: float = 0.05
    w_a: float = 0.05
    w_r: float = 0.11
    v: float = 1.1
    x: float = 0.1
    t_a: float = 0.6
    t_na: float = 0.15
    accent_percentile: float = 82.0
    accent_window: float = 0.300
    register_window: float = 0.050
    register_step: float = 0.010
    min_inter_onset: float = 15.0
    rhythm_band: float = 1.0
    rhythm_cutoff: float = 10.0
    smooth_interval: float = 0.5
    alpha: float = 0.05
    outlier_order: str = "outliers_first"
    permutations: int = 999

    def __post_init__(self):
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, float) and f.name not in ("v", "x", "alpha") and val <= 0:
                raise ConfigError(f"{f.name} must be positive")
        if not 50 < self.accent_percentile < 100:
            raise ConfigError("accent_percentile must lie in (50, 100)")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.v <= 0 or self.x <= 0:
            raise ConfigError("v and x must be positive")


@dataclass(frozen=True)
class RunConfig:
    manifest: Path
    output_dir: Path
    seed: int = 0
    stages: dict = field(default_factory=lambda: {s: True for s in STAGES})
    params: Params = Params()
    workers: int = 1


def _coerce(raw: str, typ, key: str):
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def parse_pairs(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = val
    return out


_PARAM_TYPES = {f.name: type(f.default) for f in dataclasses.fields(Params)}


def build_params(pairs: dict) -> Params:
    kw = {k: _coerce(v, _PARAM_TYPES[k], k) for k, v in pairs.items()}
    return Params(**kw)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    pairs = parse_pairs(path.read_text(encoding="utf-8"), str(path))
    root = path.parent
    try:
        manifest = root / pairs.pop("manifest")
        output_dir = root / pairs.pop("output_dir")
    except KeyError as exc:
        raise ConfigError(f"{path}: missing required key {exc.args[0]!r}") from None
    seed = _coerce(pairs.pop("seed", "0"), int, "seed")
    workers = _coerce(pairs.pop("workers", "1"), int, "workers")
    stages = {s: True for s in STAGES}
    params = {}
    for key, val in pairs.items():
        if key.startswith("stage."):
            name = key[len("stage."):]
            if name not in STAGES:
                raise ConfigError(f"{path}: unknown stage {name!r}")
            stages[name] = _coerce(val, bool, key)
        elif key in _PARAM_TYPES:
            params[key] = val
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    return RunConfig(manifest, output_dir, seed, stages, build_params(params), workers)


def format_params(params: Params) -> str:
    return "".join(f"{f.name} = {getattr(params, f.name)}\n"
                   for f in dataclasses.fields(params))
