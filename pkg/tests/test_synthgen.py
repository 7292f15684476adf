import numpy as np
import pytest

from entrainprof.config import ConfigError
from entrainprof.entrain import pair_local, distances
from entrainprof.ingest import load_annotation, load_f0, load_manifest, load_waveform
from entrainprof.pipeline import analyze_session
from entrainprof.stats.harvest import harvest, run_level_tests
from entrainprof.synthgen import (SynthConfig, corpus_configs, generate_dyad,
                                  load_synth_config, write_corpus)


def analyse(d):
    return analyze_session(d.annotation, {s: (d.waves[s], d.f0[s])
                                          for s in d.annotation.speaker_ids})


def adjacent_deviation_pairs(d, key):
    """(initiator, responder) target values, centred on each speaker's mean."""
    vals = {}
    for t in d.truth:
        vals.setdefault(t.speaker_id, []).append(t.values[key])
    mean = {s: np.mean(v) for s, v in vals.items()}
    x, y = [], []
    for a, b in zip(d.truth, d.truth[1:]):
        if a.speaker_id != b.speaker_id:
            x.append(a.values[key] - mean[a.speaker_id])
            y.append(b.values[key] - mean[b.speaker_id])
    return np.array(x), np.array(y)


def test_same_seed_bit_identical():
    a = generate_dyad(SynthConfig(n_turns=10, seed=4))
    b = generate_dyad(SynthConfig(n_turns=10, seed=4))
    for s in a.annotation.speaker_ids:
        assert a.waves[s].samples.tobytes() == b.waves[s].samples.tobytes()
        assert a.f0[s].values.tobytes() == b.f0[s].values.tobytes()
    assert a.annotation == b.annotation
    c = generate_dyad(SynthConfig(n_turns=10, seed=5))
    assert c.f0["A"].values.tobytes() != a.f0["A"].values.tobytes()


def test_gain_zero_uncorrelated():
    d = generate_dyad(SynthConfig(n_turns=500, seed=11))
    x, y = adjacent_deviation_pairs(d, "f0_level")
    assert len(x) > 400
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.1


def test_synchrony_mode_couples_deviations():
    cfg = SynthConfig(n_turns=300, seed=2, entrainment_mode="synchrony",
                      entrainment_gain=0.8, entrainers=("x_x",))
    x, y = adjacent_deviation_pairs(generate_dyad(cfg), "f0_level")
    assert np.corrcoef(x, y)[0, 1] > 0.5


def test_proximity_gain_one_copies_partner():
    d = generate_dyad(SynthConfig(n_turns=20, seed=3, entrainment_mode="proximity",
                                  entrainment_gain=1.0, entrainers=("x_x",)))
    for a, b in zip(d.truth, d.truth[1:]):
        if b.adapted:
            assert b.values["f0_level"] == pytest.approx(a.values["f0_level"])


def test_written_corpus_passes_ingest(tmp_path):
    dyads = [generate_dyad(c) for c in corpus_configs(SynthConfig(n_turns=9), 2, 0)]
    manifest = write_corpus(dyads, tmp_path)
    entries = load_manifest(manifest)
    assert [e.session_id for e in entries] == ["s01", "s02"]
    for e, d in zip(entries, dyads):
        ann = load_annotation(e.annotation)
        assert len(ann.turns) == d.config.n_turns == 9
        for c in e.channels:
            assert load_f0(c.f0).rate == 100
            assert load_waveform(c.wav).rate == 16000
    spk = [set(d.annotation.speaker_ids) for d in dyads]
    assert not spk[0] & spk[1]


def test_recovery_of_ground_truth():
    d = generate_dyad(SynthConfig(n_turns=100, seed=21))
    feats = analyse(d).features
    truth = {t.turn_index: t for t in d.truth}
    for name, get in (("gnl_f0.med", lambda t: t.values["f0_level"]),
                      ("phrase.lev.c0.F", lambda t: t.values["f0_level"]),
                      ("rhy_en.syl.rate", lambda t: t.realised_rate)):
        for s in d.annotation.speaker_ids:
            rows = [f for f in feats if f.speaker_id == s]
            x = np.array([f[name] for f in rows])
            y = np.array([get(truth[f.turn_index]) for f in rows])
            ok = np.isfinite(x)
            assert ok.sum() > 30
            assert np.corrcoef(x[ok], y[ok])[0, 1] > 0.8, (name, s)


def test_profile_reflects_entrainment():
    hits = 0
    for seed in range(5):
        d = generate_dyad(SynthConfig(seed=seed, entrainment_mode="proximity",
                                      entrainment_gain=1.0))
        table = distances(pair_local(d.annotation, seed), analyse(d).features)
        k = list(table.conditions)
        col = table.prox[:, 4]  # gnl_f0.med
        a = np.nanmean(col[[c == "adjacent" for c in k]])
        na = np.nanmean(col[[c == "non_adjacent" for c in k]])
        hits += a < na
    assert hits == 5


@pytest.mark.slow
def test_cell_specific_entrainment_harvested():
    """Describer-female-only adaptation shows up as d_f in the prox column."""
    runs, found = 20, 0
    for seed in range(runs):
        base = SynthConfig(entrainment_mode="proximity", entrainment_gain=1.0,
                           entrainers=("d_f",))
        feats, pairs = [], []
        for i, cfg in enumerate(corpus_configs(base, 4, seed)):
            d = generate_dyad(cfg)
            feats += analyse(d).features
            pairs += pair_local(d.annotation, np.random.default_rng([seed, i]))
        res = run_level_tests(distances(pairs, feats), "local",
                              np.random.default_rng(seed), features=["gnl_f0.med"])
        found += "d_f" in harvest(res, features=["gnl_f0.med"])[0].cells["prox"]
    assert found >= 0.9 * runs


@pytest.mark.parametrize("kw", [dict(n_turns=3), dict(entrainment_gain=1.5),
                                dict(entrainment_mode="mimic"), dict(target=("pitch",)),
                                dict(genders=("f",))])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_load_synth_config(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("output_dir = out\nsessions = 3\nn_turns = 12\n"
                 "entrainment_mode = disentrain\nentrainment_gain = 0.5\n"
                 "entrainers = d_f, f_m\nf0_level = 3, 1\n")
    cfg, n, out = load_synth_config(p)
    assert (n, out) == (3, tmp_path / "out")
    assert cfg.entrainers == ("d_f", "f_m") and cfg.f0_level == (3.0, 1.0)
    p.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        load_synth_config(p)
