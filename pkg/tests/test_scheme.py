import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from itoseries.exceptions import ConfigurationError, DivergenceError
from itoseries.models import bilinear, gbm, linear_time, zero_noise
from itoseries.sampling import StepIntegrals, TruncationPlan, draw_pool, sample_step
from itoseries.scheme import (
    ORDER_COMPOSITIONS,
    PathState,
    SchemeConfig,
    SdeCoefficients,
    finite_difference_provider,
    increment,
    index_rank,
    required_compositions,
    required_patterns,
    run_path,
    step,
    symbolic_provider,
)

from oracles import hermite_he

PATTERNS = ("0", "1", "2", "00", "01", "10", "000", "001", "010", "100", "0000", "00000")


def scalar_integrals(values, delta):
    """StepIntegrals for m = 1 from a dict of plain numbers."""
    return StepIntegrals({p: np.full((1,) + (1,) * len(p), float(v)) for p, v in values.items()}, delta, 1)


def random_integrals(rng, delta, m=1, P=1):
    return StepIntegrals({p: rng.standard_normal((P,) + (m,) * len(p)) for p in PATTERNS}, delta, m)


def hand_expanded_linear(lam, mu, x, d, I):
    """Order-2.5 increment of dx = lam x dt + mu x dw written out by hand."""
    base = (mu * x * I["0"] + d * lam * x + mu**2 * x * I["00"] + mu * lam * x * (d * I["0"] + I["1"])
            - lam * mu * x * I["1"] + mu**3 * x * I["000"] + d * d / 2 * lam**2 * x)
    v = lam * mu**2 * x * d * I["00"] + mu**4 * x * I["0000"]
    r = (mu * lam**2 * x * d * d / 2 * I["0"] + lam * mu**3 * x * d * I["000"]
         + mu**5 * x * I["00000"] + lam**3 * x * d**3 / 6)
    return base, v, r


def test_order_tables():
    assert len(required_compositions(1.5)) == 7
    assert len(required_compositions(2.0)) == 11
    assert len(required_compositions(2.5)) == 20
    assert set(required_patterns(2.5)) == set(PATTERNS)
    assert index_rank("GLGB") == 3 and index_rank("LLa") == 0
    with pytest.raises(ConfigurationError):
        required_patterns(3.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(0.1, 3), st.floats(0.01, 0.5), st.integers(0, 2**31))
def test_linear_scalar_matches_hand_expansion(lam, mu, x, d, seed):
    model = gbm(round(lam, 3), round(mu, 3))
    lam, mu = model.params["lam"], model.params["mu"]
    rng = np.random.default_rng(seed)
    values = {p: rng.standard_normal() for p in PATTERNS}
    parts = increment(model.coeffs, np.array([[x]]), 0.0, scalar_integrals(values, d), 2.5)
    base, v, r = hand_expanded_linear(lam, mu, x, d, values)
    assert parts["base"][0, 0] == pytest.approx(base, rel=1e-10, abs=1e-12)
    assert parts["v"][0, 0] == pytest.approx(v, rel=1e-10, abs=1e-12)
    assert parts["r"][0, 0] == pytest.approx(r, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("mu,d", [(0.5, 0.1), (1.3, 0.3), (-0.7, 1.0)])
def test_pure_noise_step_is_hermite_series(mu, d):
    # dx = mu x dw: the scheme is the Hermite generating function of exp(mu W - mu^2 d / 2) to degree 5
    model = gbm(0.0, mu)
    plan = TruncationPlan.uniform(3)
    pool = draw_pool(1, plan.q_max, rng_stream=5, size=200)
    I = sample_step(plan, 1, pool, d)
    z = pool.values[:, 0, 0]
    y = step(model.coeffs, PathState(np.ones((200, 1)), 0, d), I, SchemeConfig(order=2.5, delta=d, plan=plan)).y[:, 0]
    expected = sum(mu**k * d ** (k / 2) * hermite_he(k, z) / math.factorial(k) for k in range(6))
    np.testing.assert_allclose(y, expected, rtol=1e-11)


@pytest.mark.parametrize("lam,d", [(-1.0, 0.1), (0.7, 0.5)])
def test_zero_noise_is_taylor_step(lam, d):
    model = zero_noise(lam)
    rng = np.random.default_rng(0)
    I = random_integrals(rng, d)
    for order, terms in ((1.5, 3), (2.0, 3), (2.5, 4)):
        y = step(model.coeffs, PathState(np.array([2.0]), 0, d), I, SchemeConfig(order=order, delta=d)).y[0]
        taylor = 2.0 * sum((lam * d) ** k / math.factorial(k) for k in range(terms))
        assert y == pytest.approx(taylor, rel=1e-13)


def test_expectation_of_integrals_gives_deterministic_step():
    model = linear_time()
    lam, beta = model.params["lam"], model.params["beta"]
    zero = StepIntegrals({p: np.zeros((1,) + (1,) * len(p)) for p in PATTERNS}, 0.2, 1)
    parts = increment(model.coeffs, np.array([[1.5]]), 0.4, zero, 2.5)
    t, x, s = sp.symbols("t x s")
    # third-order Taylor step of x' = (lam + beta t) x
    sol = 1.5 * sp.exp(lam * (s - 0.4) + beta * (s**2 - 0.4**2) / 2)
    taylor = sum(sp.diff(sol, s, k).subs(s, 0.4) * 0.2**k / math.factorial(k) for k in range(1, 4))
    assert sum(p[0, 0] for p in parts.values()) == pytest.approx(float(taylor), rel=1e-12)


def test_order_blocks_are_additive():
    model = bilinear()
    rng = np.random.default_rng(1)
    I = random_integrals(rng, 0.1, m=2, P=3)
    y = rng.standard_normal((3, 2))
    state = PathState(y, 2, 0.1)
    ys = {o: step(model.coeffs, state, I, SchemeConfig(order=o, delta=0.1)).y for o in (1.5, 2.0, 2.5)}
    parts = increment(model.coeffs, y, 0.2, I, 2.5)
    np.testing.assert_allclose(ys[2.5] - ys[1.5], parts["v"] + parts["r"], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ys[2.0] - ys[1.5], parts["v"], rtol=1e-12, atol=1e-14)


def test_order_two_block_uses_only_its_compositions_and_integrals():
    model = bilinear()
    rng = np.random.default_rng(2)
    I = random_integrals(rng, 0.1, m=2)
    y = np.array([[0.3, -0.2]])
    ref = increment(model.coeffs, y, 0.0, I, 2.0)["v"]
    # scramble everything the v block must not see
    comps = dict(model.coeffs.compositions)
    for name in ORDER_COMPOSITIONS[1.5]:
        comps[name] = lambda x, t, r=index_rank(name): np.full((x.shape[0],) + (2,) * r + (2,), 7.0)
    other = {p: (v if p in ("10", "01", "00", "0000") else v + 3.0) for p, v in I.values.items()}
    got = increment(SdeCoefficients(2, 2, comps), y, 0.0, StepIntegrals(other, 0.1, 2), 2.0)["v"]
    np.testing.assert_allclose(got, ref, rtol=1e-13)


def test_missing_composition_is_named():
    model = gbm()
    comps = {k: v for k, v in model.coeffs.compositions.items() if k != "GLGB"}
    coeffs = SdeCoefficients(1, 1, comps)
    coeffs.check(2.0)
    with pytest.raises(ConfigurationError, match="GLGB"):
        coeffs.check(2.5)
    with pytest.raises(ConfigurationError, match="GLGB"):
        run_path(coeffs, [1.0], SchemeConfig(order=2.5, delta=0.5, steps=1))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig(order=3.0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(delta=0.0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(steps=0)
    cfg = SchemeConfig.over(2.0, 8)
    assert cfg.delta == 0.25 and cfg.T == 2.0


def test_constant_trajectory_without_coefficients():
    zero = lambda x, t: np.zeros((x.shape[0], 1))  # noqa: E731
    coeffs = finite_difference_provider(zero, lambda x, t: np.zeros((x.shape[0], 1, 1)), 1, 1)
    res = run_path(coeffs, [3.0], SchemeConfig(order=2.5, delta=0.5, steps=4), paths=5)
    np.testing.assert_array_equal(res.y, 3.0)
    assert res.y.shape == (5, 5, 1) and res.times[-1] == 2.0


def test_run_path_is_deterministic_and_batch_free():
    model = bilinear()
    cfg = SchemeConfig(order=2.0, delta=0.25, steps=3)
    a = run_path(model.coeffs, model.y0, cfg, seed=3, paths=10)
    b = run_path(model.coeffs, model.y0, cfg, seed=3, paths=10)
    np.testing.assert_array_equal(a.y, b.y)
    part = run_path(model.coeffs, model.y0, cfg, seed=3, paths=4, first_path=6)
    np.testing.assert_array_equal(a.y[:, 6:], part.y)
    np.testing.assert_array_equal(a.w[:, 6:], part.w)
    other = run_path(model.coeffs, model.y0, cfg, seed=4, paths=10)
    assert not np.array_equal(a.y, other.y)


def test_brownian_values_drive_the_reference():
    model = gbm()
    cfg = SchemeConfig(order=2.5, delta=1 / 64, steps=64)
    res = run_path(model.coeffs, model.y0, cfg, seed=1, paths=50)
    exact = model.exact(1.0, res.w[-1])
    assert np.abs(res.terminal - exact).mean() < 1e-3


def test_divergence_reports_step():
    x, t = sp.symbols("x t")
    coeffs = symbolic_provider([x**3], [[sp.Integer(0)]], [x], t)
    with pytest.raises(DivergenceError) as err:
        run_path(coeffs, [50.0], SchemeConfig(order=1.5, delta=1.0, steps=10))
    assert 1 <= err.value.step <= 10


@pytest.mark.slow
def test_gbm_mean():
    model = gbm()
    cfg = SchemeConfig.over(1.0, 10, order=2.5)
    y = run_path(model.coeffs, model.y0, cfg, seed=2, paths=10_000).terminal[:, 0]
    assert abs(y.mean() - math.exp(2.0)) < 3 * y.std() / math.sqrt(len(y))


def _bilinear_callables():
    from itoseries.models import BILINEAR_A, BILINEAR_B1, BILINEAR_B2

    A, B1, B2 = map(np.array, (BILINEAR_A, BILINEAR_B1, BILINEAR_B2))
    a = lambda x, t: x @ A.T  # noqa: E731
    B = lambda x, t: np.stack([x @ B1.T, x @ B2.T], axis=2)  # noqa: E731
    return a, B


def test_fd_matches_symbolic_on_linear():
    a, B = _bilinear_callables()
    fd = finite_difference_provider(a, B, 2, 2, h=1e-4)
    sym = bilinear().coeffs
    x = np.random.default_rng(0).standard_normal((4, 2))
    for name in required_compositions(2.5):
        np.testing.assert_allclose(fd.evaluate(name, x, 0.3), sym.evaluate(name, x, 0.3), atol=1e-6, err_msg=name)


def test_fd_matches_symbolic_with_time_and_curvature():
    x, t = sp.symbols("x t")
    sym = symbolic_provider([sp.sin(x) + t * x], [[0.5 * sp.cos(x)]], [x], t)
    fd = finite_difference_provider(lambda y, s: np.sin(y) + s * y, lambda y, s: 0.5 * np.cos(y)[:, :, None], 1, 1)
    pts = np.array([[0.2], [1.1]])
    for name in ("GB", "LB", "La", "GGB", "GLB", "LGB"):
        np.testing.assert_allclose(fd.evaluate(name, pts, 0.7), sym.evaluate(name, pts, 0.7), atol=1e-6, err_msg=name)


def test_fd_constant_diffusion_has_no_g_terms():
    a, _ = _bilinear_callables()
    B = lambda x, t: np.broadcast_to(np.array([[0.3, 0.1], [-0.2, 0.4]]), (x.shape[0], 2, 2))  # noqa: E731
    fd = finite_difference_provider(a, B, 2, 2, names=["GB", "GGB", "GGGB", "GGGGB"])
    x = np.random.default_rng(1).standard_normal((3, 2))
    for name in ("GB", "GGB", "GGGB", "GGGGB"):
        np.testing.assert_allclose(fd.evaluate(name, x, 0.0), 0.0, atol=1e-8)


def test_fd_time_derivative_vanishes_for_autonomous():
    # L a for a(x) = -x, B = 0 is exactly a a' = x; any spurious t-term would show
    fd = finite_difference_provider(lambda x, t: -x, lambda x, t: np.zeros((x.shape[0], 1, 1)), 1, 1, names=["La", "LLa"])
    x = np.array([[0.5], [2.0]])
    np.testing.assert_allclose(fd.evaluate("La", x, 5.0), x, rtol=1e-8)
    np.testing.assert_allclose(fd.evaluate("LLa", x, 5.0), -x, rtol=1e-6)


def test_fd_rejects_bad_step():
    with pytest.raises(ConfigurationError):
        finite_difference_provider(lambda x, t: x, lambda x, t: x[:, :, None], 1, 1, h=0.0)
    with pytest.raises(ConfigurationError):
        finite_difference_provider(lambda x, t: x, lambda x, t: x[:, :, None], 1, 1, names=["GXB"])


def test_symbolic_dimension_check():
    x, t = sp.symbols("x t")
    with pytest.raises(ConfigurationError):
        symbolic_provider([x, x], [[x]], [x], t)
