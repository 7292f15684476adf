"""Command line entry point: ``run``, ``synth`` and ``validate``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_run_config
from .entrain import LEVEL_CONDITIONS, PairingError, build_profile, distances, \
    format_profile_csv, pair_global, pair_local, speaker_means
from .features import FEATURE_SETS, format_features_csv
from .ingest import IngestError, load_annotation, load_f0, load_manifest, load_waveform
from .pipeline import load_and_analyze
from .stats import add_zscores, condense, format_condense_csv, format_harvest_csv, \
    format_success_csv, harvest, run_level_tests, task_success
from .stats.condense import GROUPINGS
from .stats.harvest import format_tests_csv
from .stats.success import TaskSuccessError
from .synthgen import corpus_configs, generate_dyad, load_synth_config, write_corpus

log = logging.getLogger("entrainprof")
LOG_ENV = "ENTRAINPROF_LOG"
SUBSET_NOTE = ("interaction follow-up: significant pairing x role or pairing x gender "
               "terms split the data by that factor; when both (or the three-way term) "
               "are significant all four role x gender cells are re-tested")


def _analyze(args):
    entry, params = args
    try:
        res = load_and_analyze(entry, params)
        return entry.session_id, res.annotation, res.features, res.errors
    except (IngestError, ValueError, OSError) as exc:
        return entry.session_id, None, [], [f"{entry.session_id}: {exc}"]


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _versions() -> dict:
    import matplotlib
    import scipy
    return {"entrainprof": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


def run(cfg: RunConfig) -> int:
    entries = load_manifest(cfg.manifest)
    if not entries:
        print(f"error: manifest {cfg.manifest} lists no sessions", file=sys.stderr)
        return 2
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    stage = cfg.stages
    feature_stages = ("dsp", "structure", "styl", "features")
    if not stage["ingest"]:
        print("error: the ingest stage cannot be disabled", file=sys.stderr)
        return 2

    seeds = np.random.SeedSequence(cfg.seed)
    session_seeds, global_seed, stats_seed = seeds.spawn(3)
    per_session = dict(zip((e.session_id for e in entries),
                           session_seeds.spawn(len(entries))))

    errors, anns, features = [], [], []
    if not all(stage[s] for s in feature_stages):
        for e in entries:
            try:
                anns.append(load_annotation(e.annotation))
            except IngestError as exc:
                errors.append(f"{e.session_id}: {exc}")
        log.info("feature stages disabled; ingest only")
    else:
        jobs = [(e, cfg.params) for e in entries]
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                results = list(pool.map(_analyze, jobs))
        else:
            results = [_analyze(j) for j in jobs]
        for sid, ann, feats, errs in results:
            errors += errs
            if ann is not None:
                anns.append(ann)
                features += feats
            log.info("session %s: %d turns", sid, len(feats))
        _write(out / "features.csv", format_features_csv(features))

    if anns and stage["stats"]:
        rows = []
        for ann in anns:
            try:
                rows += task_success(ann, cfg.params.smooth_interval)
            except TaskSuccessError as exc:
                errors.append(str(exc))
        _write(out / "success.csv", format_success_csv(add_zscores(rows)))

    if features and stage["entrain"]:
        means = speaker_means(features)
        local = []
        for ann in anns:
            local += pair_local(ann, np.random.default_rng(per_session[ann.session_id]),
                                cfg.params.min_inter_onset)
        tables = {"local": distances(local, features, means)}
        try:
            tables["global"] = distances(pair_global(anns, np.random.default_rng(global_seed)),
                                         features, means)
        except PairingError as exc:
            log.warning("global pairing skipped: %s", exc)
            errors.append(f"global pairing skipped: {exc}")
        combined = tables["local"]
        if "global" in tables:
            g = tables["global"]
            combined = type(g)(combined.pairs + g.pairs, np.vstack([combined.prox, g.prox]),
                               np.vstack([combined.sync, g.sync]))
        profile = build_profile(combined)
        _write(out / "profiles.csv", format_profile_csv(profile))
        from .plotting import plot_condensed, plot_profile
        for s in FEATURE_SETS:
            plot_profile(profile, s, out / f"profiles_{s}.svg")

        if stage["stats"]:
            condensed = {g: {} for g in GROUPINGS}
            level_rngs = dict(zip(LEVEL_CONDITIONS, stats_seed.spawn(len(LEVEL_CONDITIONS))))
            for level in LEVEL_CONDITIONS:
                if level not in tables:
                    continue
                results = run_level_tests(tables[level], level,
                                          np.random.default_rng(level_rngs[level]),
                                          cfg.params.alpha, cfg.params.permutations)
                _write(out / f"tests_{level}.csv", format_tests_csv(results))
                table = harvest(results, cfg.params.alpha)
                _write(out / f"harvest_{level}.csv", format_harvest_csv(table))
                for g in GROUPINGS:
                    condensed[g][level] = condense(table, g, level)
            for g, by_level in condensed.items():
                if not by_level:
                    continue
                _write(out / f"condense_{g}.csv",
                       format_condense_csv([c for cells in by_level.values() for c in cells]))
                plot_condensed(by_level, g, out / f"condense_{g}.svg")

    meta = {"seed": cfg.seed, "manifest": str(cfg.manifest), "params": asdict(cfg.params),
            "stages": dict(cfg.stages), "sessions": [e.session_id for e in entries],
            "versions": _versions(), "notes": [SUBSET_NOTE], "errors": errors}
    _write(out / "run_meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if errors:
        _write(out / "errors.txt", "\n".join(errors) + "\n")
        for e in errors:
            log.error(e)
    return 1 if not features and all(stage[s] for s in feature_stages) else 0


def validate(manifest) -> int:
    try:
        entries = load_manifest(manifest)
    except (IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not entries:
        print(f"error: manifest {manifest} lists no sessions", file=sys.stderr)
        return 2
    bad = 0
    for e in entries:
        try:
            ann = load_annotation(e.annotation)
            missing = set(ann.speaker_ids) - {c.speaker_id for c in e.channels}
            if missing:
                raise IngestError(f"no channel for speaker(s) {sorted(missing)}")
            for c in e.channels:
                load_f0(c.f0)
                load_waveform(c.wav)
            print(f"ok\t{e.session_id}\t{len(ann.turns)} turns")
        except (IngestError, OSError, ValueError) as exc:
            bad += 1
            print(f"FAIL\t{e.session_id}\t{exc}")
    return 1 if bad else 0


def synth(config_path) -> int:
    base, n_sessions, out_dir = load_synth_config(config_path)
    dyads = (generate_dyad(c) for c in corpus_configs(base, n_sessions, base.seed))
    manifest = write_corpus(dyads, out_dir)
    print(manifest)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="entrainprof",
                                     description="Prosodic entrainment profiles.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="run the pipeline from a config file").add_argument("config")
    sub.add_parser("synth", help="write a synthetic corpus").add_argument("config")
    sub.add_parser("validate", help="check a corpus manifest").add_argument("manifest")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(load_run_config(args.config))
        if args.command == "synth":
            return synth(args.config)
        return validate(args.manifest)
    except (ConfigError, IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
