import struct

import numpy as np
import pytest

from beatvae import pipeline
from beatvae.errors import ArtifactError, DataError, NumericalError
from beatvae.pipeline import (
    TrainConfig,
    evaluate,
    hash_array,
    load_model,
    save_model,
    train,
)
from beatvae.vae import VaeModel


@pytest.fixture(scope="module")
def tiny(small_sets):
    tr, te = small_sets
    return tr.X[::4], te.X[::4]


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig("gan")
    with pytest.raises(ValueError):
        TrainConfig(beta=-1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    assert TrainConfig().beta == 0.5 and TrainConfig().epochs == 50


@pytest.mark.parametrize("kind", ["ae", "beta-vae"])
def test_training_is_deterministic(tiny, kind):
    cfg = TrainConfig(kind, epochs=3, batch_size=32, seed=11)
    a, ha = train(*tiny, cfg)
    b, hb = train(*tiny, cfg)
    for pa, pb in zip(a.params(), b.params()):
        np.testing.assert_array_equal(pa, pb)
    assert ha.steps == hb.steps
    c, _ = train(*tiny, TrainConfig(kind, epochs=3, batch_size=32, seed=12))
    assert not np.array_equal(a.params()[0], c.params()[0])


def test_loss_identity_every_step(tiny):
    beta = 0.25
    _, hist = train(*tiny, TrainConfig(beta=beta, epochs=5, batch_size=16, seed=2))
    assert len(hist.steps) == 5 * int(np.ceil(len(tiny[0]) / 16))
    for loss, l_r, d_kl in hist.steps:
        assert abs(loss - (l_r + beta * d_kl)) < 1e-12


def test_each_epoch_visits_every_sample_once(tiny, monkeypatch):
    x = tiny[0][:50]
    seen = []
    real = pipeline._batch_step

    def spy(model, xb, config, rng):
        seen.append(xb.copy())
        return real(model, xb, config, rng)

    monkeypatch.setattr(pipeline, "_batch_step", spy)
    train(x, None, TrainConfig(epochs=2, batch_size=16, seed=0))
    sizes = [len(b) for b in seen]
    assert sizes == [16, 16, 16, 2] * 2  # partial final batch kept
    for epoch in (seen[:4], seen[4:]):
        rows = np.concatenate(epoch)
        key = lambda a: sorted(map(tuple, a))  # noqa: E731
        assert key(rows) == key(x)
    assert not np.array_equal(np.concatenate(seen[:4]), np.concatenate(seen[4:]))


@pytest.mark.parametrize("kind", ["ae", "beta-vae"])
def test_training_reduces_loss(small_sets, kind):
    tr, te = small_sets
    _, hist = train(tr.X, te.X, TrainConfig(kind, beta=0.1, epochs=20, seed=0))
    assert hist.records[-1].loss < hist.records[0].loss
    assert np.isfinite(hist.records[-1].test_loss)


def test_beta_zero_vae_reconstructs_like_ae(small_sets):
    tr, te = small_sets
    cfg = dict(epochs=20, seed=0)
    ae, _ = train(tr.X, te.X, TrainConfig("ae", **cfg))
    vae, _ = train(tr.X, te.X, TrainConfig("beta-vae", beta=0.0, **cfg))
    a, v = evaluate(ae, te.X)["l_r"], evaluate(vae, te.X)["l_r"]
    assert max(a, v) < 2 * min(a, v)


def test_non_finite_training_names_epoch_and_batch(tiny):
    x = tiny[0].copy()
    x[0, 0] = np.nan
    with pytest.raises(NumericalError, match="epoch 1, batch"):
        train(x, None, TrainConfig(epochs=1, seed=0))


def test_empty_training_set():
    with pytest.raises(DataError):
        train(np.zeros((0, 30)), None, TrainConfig())


def test_evaluate_is_pure(trained_vae, small_sets):
    x = small_sets[1].X
    before = [p.copy() for p in trained_vae.params()]
    a = evaluate(trained_vae, x, 0.5)
    b = evaluate(trained_vae, x, 0.5)
    assert a == b
    for p, q in zip(before, trained_vae.params()):
        np.testing.assert_array_equal(p, q)
    assert abs(a["loss"] - (a["l_r"] + 0.5 * a["d_kl"])) < 1e-12
    untrained = VaeModel.init(np.random.default_rng(0))
    assert evaluate(untrained, x)["l_r"] > 0
    with pytest.raises(DataError):
        evaluate(trained_vae, np.zeros((0, 30)))


def test_history_csv(tmp_path, tiny):
    _, hist = train(*tiny, TrainConfig(epochs=50, batch_size=64, seed=0))
    p = tmp_path / "h.csv"
    hist.write_csv(p, "beta-vae")
    lines = p.read_text().splitlines()
    assert lines[0] == "epoch,loss,l_r,d_kl,test_loss"
    assert len(lines) == 51
    assert [int(r.split(",")[0]) for r in lines[1:]] == list(range(1, 51))
    _, hist = train(*tiny, TrainConfig("ae", epochs=2, seed=0))
    hist.write_csv(p, "ae")
    assert p.read_text().splitlines()[0] == "epoch,loss,l_r,test_loss"


@pytest.mark.parametrize("fixture", ["trained_vae", "trained_ae"])
def test_artifact_round_trip(tmp_path, request, fixture, small_sets):
    model = request.getfixturevalue(fixture)
    cfg = TrainConfig(model.kind, beta=0.1, epochs=15, seed=1)
    path = tmp_path / "m.bin"
    digest = hash_array(small_sets[0].X)
    save_model(model, cfg, path, dataset_hash=digest)
    art = load_model(path)
    assert art.model_kind == model.kind
    assert art.config == cfg
    assert art.dataset_hash == digest
    for p, q in zip(model.params(), art.model.params()):
        np.testing.assert_array_equal(p, q)
    x = small_sets[1].X
    np.testing.assert_array_equal(model.encode(x), art.model.encode(x))


def test_artifact_errors(tmp_path, trained_vae):
    path = tmp_path / "m.bin"
    save_model(trained_vae, TrainConfig(), path)
    data = path.read_bytes()

    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ArtifactError, match="not a model"):
        load_model(bad)
    bad.write_bytes(data[:4] + struct.pack("<H", 99) + data[6:])
    with pytest.raises(ArtifactError, match="version 99"):
        load_model(bad)
    bad.write_bytes(data[:-8])
    with pytest.raises(ArtifactError, match="parameter block"):
        load_model(bad)
    bad.write_bytes(data[:12])
    with pytest.raises(ArtifactError):
        load_model(bad)


def test_hash_array_sensitivity():
    x = np.zeros((3, 30))
    y = x.copy()
    y[2, 29] = 1e-300
    assert hash_array(x) == hash_array(x.copy())
    assert hash_array(x) != hash_array(y)
