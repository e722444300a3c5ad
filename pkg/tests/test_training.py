import dataclasses

import numpy as np
import pytest

from taman.errors import ConfigError, DataError
from taman.harness.formats import load_checkpoint, read_metrics
from taman.harness.synthetic import DomainArrays, SyntheticSpec, random_domains, synthesize
from taman.harness.training import TRAIN_VARIANTS, RunConfig, recombined_total, step_attention, train
from taman.alignment import MomentConfig
from taman.model import ModelParams, encode_domains
from taman.temporal import sample_clip_batch


@pytest.fixture(scope="module")
def data():
    spec = SyntheticSpec(2, random_domains(["s1", "s2", "tg"], 6, 3.0), h=4, d_f=6, videos_per_class=24)
    return synthesize(spec)


def quick(**kw):
    base = dict(epochs=3, batch_size=16, hidden=(16,), d_t=12, z_max=2)
    base.update(kw)
    return RunConfig(**base)


def test_defaults_echo_published_hyperparameters():
    cfg = RunConfig().to_dict()
    assert (cfg["lr"], cfg["momentum"], cfg["weight_decay"]) == (0.001, 0.9, 0.0001)
    assert (cfg["lambda_df"], cfg["lambda_dt"]) == (0.005, 0.01)
    assert cfg["moment_orders"] == [1, 2] and cfg["z_max"] == 3


def test_from_mapping_parses_strings():
    cfg = RunConfig.from_mapping({"lr": "0.01", "hidden": "32,16", "scales": "2 3", "variant": "no_dominance",
                                  "batch-size": "8"})
    assert cfg.lr == 0.01 and cfg.hidden == (32, 16) and cfg.scales == (2, 3) and cfg.batch_size == 8
    assert RunConfig.from_mapping({"scales": "all"}).scales is None
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"learning_rate": "1"})
    with pytest.raises(ConfigError):
        RunConfig(variant="best")
    with pytest.raises(ConfigError):
        RunConfig(lr=0)


def test_classification_only_loss_decreases(data):
    cfg = quick(epochs=5, lambda_df=0.0, lambda_dt=0.0, lr=0.01)
    res = train(cfg, [data["s1"]["train"]], data["tg"]["train"])
    totals = [r["total"] for r in res.metrics]
    assert all(b < a for a, b in zip(totals, totals[1:])), totals
    assert all(r["d_f"] > 0 for r in res.metrics)


def test_metrics_records(data, tmp_path):
    res = train(quick(), [data["s1"]["train"], data["s2"]["train"]], data["tg"]["train"],
                tmp_path / "c.tmnc", tmp_path / "m.jsonl")
    on_disk = read_metrics(tmp_path / "m.jsonl")
    assert [r["epoch"] for r in on_disk] == [0, 1, 2]
    for rec in on_disk:
        assert set(rec) >= {"epoch", "cls_loss", "d_f", "d_t", "total", "lambda_df", "lambda_dt", "lr",
                            "target_scale_weights", "wall_ms"}
        assert len(rec["cls_loss"]) == 2
        assert abs(recombined_total(rec) - rec["total"]) <= 1e-5 * max(1.0, abs(rec["total"]))
        assert abs(sum(rec["target_scale_weights"]) - 1) < 1e-6
    ckpt = load_checkpoint(tmp_path / "c.tmnc")
    assert ckpt.meta["scales"] == [2, 3, 4] and ckpt.meta["n_classes"] == 4
    assert ckpt.meta["config"] == res.config.to_dict()


def test_target_labels_never_read(data):
    tgt = data["tg"]["train"]
    scrambled = dataclasses.replace(tgt, labels=np.random.default_rng(0).permutation(tgt.labels))
    cfg = quick(epochs=2)
    a = train(cfg, [data["s1"]["train"]], tgt)
    b = train(cfg, [data["s1"]["train"]], scrambled)
    c = train(cfg, [data["s1"]["train"]], dataclasses.replace(tgt, labels=None))
    strip = lambda res: [{k: v for k, v in r.items() if k != "wall_ms"} for r in res.metrics]
    assert strip(a) == strip(b) == strip(c)


def test_source_only_has_no_alignment_terms(data):
    res = train(quick(variant="source_only", epochs=1), [data["s1"]["train"]], data["tg"]["train"])
    assert res.metrics[0]["lambda_df"] == 0 and res.metrics[0]["lambda_dt"] == 0


@pytest.mark.parametrize("variant", TRAIN_VARIANTS)
def test_every_variant_trains(data, variant):
    res = train(quick(epochs=1, variant=variant), [data["s1"]["train"], data["s2"]["train"]], data["tg"]["train"])
    assert np.isfinite(res.metrics[0]["total"])
    assert res.checkpoint.meta["additive"] == (variant == "no_local_attention")


def test_data_errors(data):
    with pytest.raises(DataError):
        train(quick(), [], data["tg"]["train"])
    bad = DomainArrays("x", data["s1"]["train"].frames[:, :3], data["s1"]["train"].labels)
    with pytest.raises(DataError):
        train(quick(), [bad], data["tg"]["train"])
    with pytest.raises(ConfigError):
        train(quick(scales=(2, 5)), [data["s1"]["train"]], data["tg"]["train"])


def _banks(seed=0):
    rng = np.random.default_rng(seed)
    model = ModelParams.init(6, 4, 2, (2, 3, 4), hidden=(8,), d_t=5, seed=seed)
    frames = [rng.standard_normal((8, 4, 6)).astype(np.float32) + i for i in range(3)]
    clips = [{r: sample_clip_batch(4, r, 2, 8, rng) for r in (2, 3, 4)} for _ in frames]
    return model, encode_domains(model, frames, clips).banks


@pytest.mark.parametrize("variant", ["full", "no_confidence", "no_dominance", "dominance_min", "dominance_max"])
def test_step_attention_normalized(variant):
    model, banks = _banks()
    w, stats = step_attention(model, banks, variant, MomentConfig())
    np.testing.assert_allclose(w.source.sum(axis=1), 1.0, atol=1e-6)
    assert abs(w.target.sum() - 1) < 1e-6
    if variant == "dominance_min":
        assert w.target[np.argmin(stats["d_local"])] == 1.0
    if variant == "dominance_max":
        assert w.target[np.argmax(stats["d_local"])] == 1.0
    if variant == "no_dominance":
        np.testing.assert_allclose(w.target, 1 / 3)
    if variant == "no_confidence":
        np.testing.assert_allclose(w.source, np.tile(w.target, (2, 1)))
