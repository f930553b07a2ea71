import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from arbsr.data import synthetic_corpus, to_image
from arbsr.estimator import ArbSR, check_image, check_images

TINY = dict(blocks=2, channels=8, adapt_every=1, experts=2, epochs=1, iters_per_epoch=2,
            batch=2, patch=8)


def test_params_round_trip():
    est = ArbSR(**TINY)
    params = est.get_params()
    assert params["channels"] == 8 and params["scale"] == 2.0
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(experts=4)
    assert est.model_config().experts == 4


def test_check_image_layouts():
    u8 = np.full((4, 5, 3), 255, dtype=np.uint8)
    assert check_image(u8).shape == (3, 4, 5) and check_image(u8).max() == 1.0
    assert check_image(np.zeros((3, 4, 5))).dtype == np.float64
    with pytest.raises(ValueError):
        check_image(np.zeros((4, 5)))
    with pytest.raises(ValueError):
        check_image(np.full((3, 4, 5), np.nan))
    with pytest.raises(ValueError):
        check_images([])


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        ArbSR().predict(np.zeros((3, 8, 8)))


def test_fit_predict_score(tmp_path):
    corpus = synthetic_corpus(2, seed=0, height=32, width=32)
    est = ArbSR(**TINY).fit([to_image(im) for im in corpus])
    assert len(est.log_.steps) == 2
    out = est.predict(corpus[0], scale=(1.5, 2.0))[0]
    assert out.shape == (3, 64, 48)
    assert est.predict(corpus[0], size=(48, 80))[0].shape == (3, 48, 80)
    assert est.predict([corpus[0]])[0].shape == (3, 64, 64)
    assert 0 < est.score(corpus) < 100

    est.save(tmp_path / "e.ckpt")
    back = ArbSR.load(tmp_path / "e.ckpt")
    assert back.channels == 8
    np.testing.assert_allclose(back.predict(corpus[0])[0], est.predict(corpus[0])[0], atol=1e-5)
