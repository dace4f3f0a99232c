import math

import numpy as np
import pytest

from itoseries.exceptions import ConfigurationError
from itoseries.models import MODELS, get_model
from itoseries.scheme import SchemeConfig, required_compositions, run_path


@pytest.mark.parametrize("name", sorted(MODELS))
def test_models_provide_every_composition(name):
    model = get_model(name)
    model.coeffs.check(2.5)
    x = np.tile(model.y0, (3, 1))
    for comp in required_compositions(2.5):
        assert np.isfinite(model.coeffs.evaluate(comp, x, 0.5)).all()


def test_unknown_model():
    with pytest.raises(ConfigurationError):
        get_model("heston")


def test_gbm_compositions():
    model = get_model("gbm", lam=1.5, mu=0.3)
    x = np.array([[2.0]])
    assert model.coeffs.evaluate("GGGGB", x, 0.0)[0, 0, 0, 0, 0, 0] == pytest.approx(0.3**5 * 2.0)
    assert model.coeffs.evaluate("LLa", x, 0.0)[0, 0] == pytest.approx(1.5**3 * 2.0)


def test_linear_time_drift_depends_on_time():
    model = get_model("linear-time")
    x = np.array([[1.0]])
    a0 = model.coeffs.evaluate("a", x, 0.0)[0, 0]
    a1 = model.coeffs.evaluate("a", x, 1.0)[0, 0]
    assert a1 - a0 == pytest.approx(model.params["beta"])
    # L a picks up the time derivative beta * x
    la = model.coeffs.evaluate("La", x, 0.0)[0, 0]
    assert la == pytest.approx(model.params["beta"] + model.params["lam"] ** 2)


@pytest.mark.parametrize("name", ["gbm", "linear-time"])
def test_exact_solution_mean(name):
    model = get_model(name)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((200_000, 1))
    x = model.exact(1.0, w)
    se = x.std() / math.sqrt(len(x))
    assert abs(x.mean() - model.mean(1.0)[0]) < 4 * se


def test_zero_noise_exact():
    model = get_model("zero-noise", lam=-0.5)
    x = model.exact(2.0, np.zeros((3, 1)))
    np.testing.assert_allclose(x, math.exp(-1.0))


@pytest.mark.slow
def test_bilinear_mean():
    model = get_model("bilinear")
    cfg = SchemeConfig.over(1.0, 4, order=2.5)
    y = run_path(model.coeffs, model.y0, cfg, seed=8, paths=4000).terminal
    se = y.std(axis=0, ddof=1) / math.sqrt(len(y))
    assert (np.abs(y.mean(axis=0) - model.mean(1.0)) < 4 * se).all()
