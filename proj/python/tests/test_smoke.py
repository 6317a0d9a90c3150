import math

import numpy as np
import pytest

import jmvae


@pytest.fixture(scope="module")
def tiny():
    train, test = jmvae.split(jmvae.make_toy(classes=2, dim=4, per_class=100, noise=0.1, seed=11), 0.8, 5)
    model = jmvae.Model("jmvae-kl", train, latent=1, encoder_hidden=[16], shared_top=8,
                        decoder_hidden=[16], seed=1)
    history = model.train(train, epochs=30, batch_size=40, warmup_epochs=5, seed=1, precision="f64")
    return model, train, test, history


def test_toy_data():
    data = jmvae.make_toy(classes=10, dim=64, per_class=3, seed=2)
    assert len(data) == 30
    assert data.x.shape == (30, 64)
    assert data.w.shape == (30, 10)
    np.testing.assert_array_equal(data.w.argmax(axis=1), data.labels)
    assert set(np.unique(data.x)) <= {0.0, 1.0}


def test_training_history(tiny):
    _, _, _, history = tiny
    assert len(history) == 30
    assert history[0]["beta"] == pytest.approx(0.2)
    assert history[-1]["beta"] == 1.0
    assert history[-1]["total"] > history[0]["total"]
    assert jmvae.warmup_beta(4, 5) == 1.0


def test_bound_below_quadrature(tiny):
    model, _, test, _ = tiny
    x, w = test.x[0].astype(np.float64), test.w[0].astype(np.float64)
    exact = model.quadrature("joint", x, w)
    report = model.evaluate(test, target="joint", path="multiple", k=2000, seed=3, threads=2)
    assert report["values"].shape == (len(test),)
    assert report["values"][0] == pytest.approx(exact, abs=0.05)
    assert math.isfinite(report["mean"])


def test_save_load(tiny, tmp_path):
    model, _, test, _ = tiny
    path = tmp_path / "m.jmck"
    model.save(path)
    loaded = jmvae.Model.load(path)
    assert loaded.variant == "jmvae-kl"
    assert loaded.parameter_count == model.parameter_count
    a = model.evaluate(test, target="marginal-x", k=5, seed=1)["values"]
    b = loaded.evaluate(test, target="marginal-x", k=5, seed=1)["values"]
    np.testing.assert_array_equal(a, b)
    with pytest.raises(jmvae.CheckpointError):
        jmvae.Model.load(tmp_path / "missing.jmck")


def test_generation_and_latents(tiny):
    model, _, test, _ = tiny
    images = model.generate_x_from_w(1, count=3, sample=True, seed=4)
    assert images.shape == (3, 4)
    assert ((images >= 0) & (images <= 1)).all()
    z = model.latent_means(test, path="multiple")
    assert z.shape == (len(test), 1)
    assert jmvae.centroid_separation(z, test.labels) > 0


def test_bad_arguments(tiny):
    model, train, test, _ = tiny
    with pytest.raises(ValueError):
        model.evaluate(test, target="everything")
    with pytest.raises(ValueError):
        jmvae.Model("gan", train)
    vae = jmvae.Model("vae", train, latent=1, encoder_hidden=[4], shared_top=4, decoder_hidden=[4])
    with pytest.raises(ValueError):
        vae.generate_x_from_w(0)
