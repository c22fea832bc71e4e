import json

import numpy as np
import pytest

from proxyreg.config import PROFILES, load_config, section
from proxyreg.data import CaptionRecord, dumps, load_dataset, save_dataset, sha256_file
from proxyreg.errors import ConfigError, DataError
from proxyreg.fixtures import TOPICS, FixtureSpec, generate_fixture, topic_of
from proxyreg.persist import load_checkpoint, save_checkpoint
from proxyreg.proxy_space import ProxyConfig, init_proxy_model
from proxyreg.text import tokenize


def test_dumps_round_trips_floats_exactly():
    rng = np.random.default_rng(0)
    values = np.concatenate([rng.normal(size=50), [1e-300, -2.5e300, 0.1, 1 / 3]])
    back = np.array(json.loads(dumps({"v": values}, indent=1))["v"])
    assert back.tobytes() == values.tobytes()


def test_dataset_roundtrip(tmp_path):
    recs = generate_fixture(FixtureSpec(topics=2, audios_per_topic=2, frames=5, mel_bins=3))
    path = tmp_path / "d.jsonl"
    save_dataset(recs, path)
    back = load_dataset(path)
    assert [r.audio_id for r in back] == [r.audio_id for r in recs]
    for a, b in zip(recs, back):
        assert a.captions == b.captions
        assert a.features.tobytes() == b.features.tobytes()


def test_dataset_errors(tmp_path):
    rec = CaptionRecord("x", ("a b",), np.ones((2, 2)))
    path = tmp_path / "dup.jsonl"
    save_dataset([rec, rec], path)
    with pytest.raises(DataError, match="x"):
        load_dataset(path)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"audio_id": "y", "captions": [], "features": {"T": 2, "F": 2, "values": [1]}}\n')
    with pytest.raises(DataError):
        load_dataset(bad)
    with pytest.raises(DataError):
        CaptionRecord("z", ("a",), np.array([[np.nan]]))


def test_fixture_determinism_and_shape(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(generate_fixture(), a)
    save_dataset(generate_fixture(), b)
    assert sha256_file(a) == sha256_file(b)
    recs = load_dataset(a)
    assert len(recs) == 32
    assert all(len(r.captions) == 3 and len(set(r.captions)) == 3 for r in recs)
    assert all(r.features.shape == (40, 16) for r in recs)
    assert sorted({topic_of(r.audio_id) for r in recs}) == list(range(8))


def test_fixture_smallest():
    recs = generate_fixture(FixtureSpec(topics=2, audios_per_topic=1, captions_per_audio=2))
    assert len(recs) == 2 and all(len(r.captions) == 2 for r in recs)


def test_fixture_captions_draw_on_their_topic():
    for rec in generate_fixture():
        topic = TOPICS[topic_of(rec.audio_id)]
        sources = set(topic["source"])
        for caption in rec.captions:
            assert sources & set(tokenize(caption)), caption


@pytest.mark.parametrize("kw", [dict(topics=1), dict(captions_per_audio=1), dict(noise=-1.0)])
def test_fixture_spec_errors(kw):
    with pytest.raises(ConfigError):
        FixtureSpec(**kw)


def test_default_profile_holds_cited_values():
    flat = load_config("default")
    s1, s2 = section(flat, "stage1"), section(flat, "stage2")
    assert (s1.lr, s1.epochs, s1.n_audios, s1.m_captions, s1.scale_init, s1.bias_init) == (0.01, 500, 64, 3, 10.0, -5.0)
    assert (s1.hidden_dim, s1.embed_dim) == (1024, 512)
    assert (s2.lr, s2.epochs, s2.lam, s2.tf_start, s2.tf_end) == (5e-4, 25, 0.5, 1.0, 0.7)
    assert s1.loss_variant == "exclusive" and s1.bidirectional is False


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"profile": "desk", "stage2.lam": 0}))
    flat = load_config(str(path), {"stage1.bidirectional": "true", "seed": "3"})
    assert flat["stage2.lam"] == 0.0 and flat["stage1.bidirectional"] is True and flat["seed"] == 3
    assert flat["stage1.hidden_dim"] == PROFILES["desk"]["stage1.hidden_dim"]
    assert load_config("desk", {"stage2.max_time_w": "4"})["stage2.max_time_w"] == 4


@pytest.mark.parametrize("overrides", [{"stage1.nope": 1}, {"stage1.epochs": "many"}, {"stage1.epochs": 2.5}])
def test_config_errors(overrides):
    with pytest.raises(ConfigError):
        load_config("default", overrides)


def test_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_checkpoint_reload_is_bit_exact(tmp_path):
    recs = generate_fixture(FixtureSpec(topics=2, audios_per_topic=2))
    model = init_proxy_model(recs, ProxyConfig(word_dim=4, hidden_dim=5, embed_dim=3))
    path = tmp_path / "m.json"
    save_checkpoint(path, model, 0)
    back = load_checkpoint(path, kind="proxy")
    caps = [c for r in recs for c in r.captions]
    assert back.embed_captions(caps).tobytes() == model.embed_captions(caps).tobytes()
    with pytest.raises(DataError):
        load_checkpoint(path, kind="captioner")
    doc = json.loads(path.read_text())
    doc["format"] = "ckpt/2"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError, match="format"):
        load_checkpoint(path)
