import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ooc_detect.exceptions import NumericError, ValidationError
from ooc_detect.gan import (
    DenseNet,
    GanConfig,
    MinimaxGAN,
    d_objective_and_grad,
    d_step,
    finite_difference_gradient,
    g_objective_and_grad,
    g_step,
    js_estimate,
    relative_error,
    train,
    v_gan,
)
from ooc_detect.gan.objective import clamped_value

EPS = 1e-7


# -- value function ------------------------------------------------------------


def test_v_gan_at_equilibrium():
    assert v_gan([0.5, 0.5], [0.5, 0.5]) == pytest.approx(-2 * math.log(2), abs=1e-12)


def test_v_gan_perfect_discriminator():
    value = v_gan([1 - EPS], [EPS], EPS)
    assert value == pytest.approx(2 * math.log(1 - EPS), abs=1e-15)
    assert abs(value) < 1e-6


def test_v_gan_arithmetic():
    assert v_gan([0.9], [0.2]) == pytest.approx(math.log(0.9) + math.log(0.8), abs=1e-12)
    assert v_gan([0.9], [0.2]) == pytest.approx(-0.3285, abs=1e-4)


def test_v_gan_clamps_extremes():
    assert math.isfinite(v_gan([0.0], [1.0]))
    assert v_gan([0.0], [1.0]) == pytest.approx(2 * math.log(EPS))


@pytest.mark.parametrize("real,fake", [([], [0.5]), ([0.5], []), ([1.2], [0.5]), ([np.nan], [0.5])])
def test_v_gan_rejects_bad_input(real, fake):
    with pytest.raises(ValidationError):
        v_gan(real, fake)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_v_gan_always_finite(real, fake):
    assert math.isfinite(v_gan(real, fake))


# -- networks --------------------------------------------------------------------


def test_dense_net_shapes():
    net = DenseNet.init([2, 5, 3, 1], np.random.default_rng(0), "sigmoid")
    out = net(np.zeros((4, 2)))
    assert out.shape == (4, 1) and np.all((out > 0) & (out < 1))
    assert net.n_params == 2 * 5 + 5 + 5 * 3 + 3 + 3 + 1
    assert net.with_flat_params(net.flat_params()) == net


def test_dense_net_init_range():
    net = DenseNet.init([3, 16, 1], np.random.default_rng(1))
    assert np.max(np.abs(net.flat_params())) <= 0.05


def test_dense_net_rejects_bad_layers():
    with pytest.raises(ValidationError):
        DenseNet([np.zeros((2, 3)), np.zeros((4, 1))], [np.zeros(3), np.zeros(1)])
    with pytest.raises(ValidationError):
        DenseNet([np.full((1, 1), np.inf)], [np.zeros(1)])


def test_sigmoid_output_strictly_inside():
    net = DenseNet([np.array([[1.0]])], [np.zeros(1)], "sigmoid")
    out = net(np.array([[-30.0], [30.0]]))
    assert 0 < out[0, 0] < out[1, 0] < 1


# -- gradients against finite differences ----------------------------------------


def random_setup(seed, data_dim=2, noise_dim=3, hidden=(4, 3), m=6):
    rng = np.random.default_rng(seed)
    G = DenseNet.init([noise_dim, *hidden, data_dim], rng, "identity", scale=0.8)
    D = DenseNet.init([data_dim, *hidden, 1], rng, "sigmoid", scale=0.8)
    x = rng.normal(size=(m, data_dim))
    z = rng.normal(size=(m, noise_dim))
    return G, D, x, z


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("h", [1e-5, 1e-6])
def test_d_gradient_matches_finite_differences(seed, h):
    G, D, x, z = random_setup(seed)
    _, gw, gb, _, _ = d_objective_and_grad(G, D, x, z, EPS)
    analytic = DenseNet.flatten_grads(gw, gb)

    def objective(flat):
        Dp = D.with_flat_params(flat)
        return clamped_value(Dp(x), Dp(G(z)), EPS)

    numeric = finite_difference_gradient(objective, D.flat_params(), h)
    assert relative_error(analytic, numeric) < 1e-4


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("mode", ["saturating", "non-saturating"])
def test_g_gradient_matches_finite_differences(seed, mode):
    G, D, _, z = random_setup(seed)
    _, gw, gb = g_objective_and_grad(G, D, z, EPS, mode)
    analytic = DenseNet.flatten_grads(gw, gb)

    def objective(flat):
        d = D(G.with_flat_params(flat)(z))
        return float(np.mean(np.log(1 - d) if mode == "saturating" else np.log(d)))

    numeric = finite_difference_gradient(objective, G.flat_params(), 1e-5)
    assert relative_error(analytic, numeric) < 1e-4


def config_for(G, D, m, **kw):
    return GanConfig(data_dim=G.sizes[-1], noise_dim=G.sizes[0], batch_size=m, **kw)


def test_zero_learning_rate_is_a_no_op():
    G, D, x, z = random_setup(0)
    cfg = config_for(G, D, len(x))
    D2, _ = d_step(G, D, x, z, cfg, lr=0.0)
    G2, _ = g_step(G, D, z, cfg, lr=0.0)
    assert D2 == D and G2 == G


def test_parameter_isolation():
    G, D, x, z = random_setup(1)
    g_before, d_before = G.flat_params().copy(), D.flat_params().copy()
    cfg = config_for(G, D, len(x))
    D2, _ = d_step(G, D, x, z, cfg)
    np.testing.assert_array_equal(G.flat_params(), g_before)
    assert not np.array_equal(D2.flat_params(), d_before)
    d2_before = D2.flat_params().copy()
    G2, _ = g_step(G, D2, z, cfg)
    np.testing.assert_array_equal(D2.flat_params(), d2_before)
    np.testing.assert_array_equal(D.flat_params(), d_before)
    assert not np.array_equal(G2.flat_params(), g_before)


@pytest.mark.parametrize("seed", range(5))
def test_small_d_step_ascends(seed):
    G, D, x, z = random_setup(seed)
    cfg = config_for(G, D, len(x), lr_d=1e-3)
    D2, before = d_step(G, D, x, z, cfg)
    after = clamped_value(D2(x), D2(G(z)), EPS)
    assert after >= before


@pytest.mark.parametrize("seed", range(5))
def test_small_g_step_descends_saturating(seed):
    G, D, _, z = random_setup(seed)
    cfg = config_for(G, D, len(z), lr_g=1e-3)
    G2, before = g_step(G, D, z, cfg)
    after = float(np.mean(np.log(1 - D(G2(z)))))
    assert after <= before


def test_constant_discriminator_gives_zero_generator_gradient():
    G, _, _, z = random_setup(2)
    D = DenseNet([np.zeros((2, 4)), np.zeros((4, 1))], [np.zeros(4), np.zeros(1)], "sigmoid")
    assert np.all(D(G(z)) == 0.5)
    for mode in ("saturating", "non-saturating"):
        _, gw, gb = g_objective_and_grad(G, D, z, EPS, mode)
        assert np.all(DenseNet.flatten_grads(gw, gb) == 0.0)


def test_batch_size_enforced():
    G, D, x, z = random_setup(0)
    with pytest.raises(ValidationError):
        d_step(G, D, x[:3], z, config_for(G, D, len(x)))


# -- training --------------------------------------------------------------------


def test_zero_iterations():
    G, D, metrics = train(GanConfig(iterations=0))
    assert len(metrics) == 0
    assert G.sizes == [2, 16, 1] and D.sizes == [1, 16, 1]


def test_seed_determinism():
    cfg = GanConfig(iterations=200)
    a, b = train(cfg), train(cfg)
    assert a.metrics.to_csv() == b.metrics.to_csv()
    assert a.generator == b.generator and a.discriminator == b.discriminator
    assert train(GanConfig(iterations=200, seed=8)).metrics.to_csv() != a.metrics.to_csv()


def test_metrics_shape_and_range():
    _, _, m = train(GanConfig(iterations=50, k=2))
    assert len(m.d_obj) == len(m.g_obj) == len(m.mean_d_real) == len(m.mean_d_fake) == 50
    assert all(0 < v < 1 for v in m.mean_d_real + m.mean_d_fake)
    header = m.to_csv().splitlines()[0]
    assert header == "iteration,d_obj,g_obj,mean_d_real,mean_d_fake"


def test_uniform_noise_and_nonsaturating_run():
    _, _, m = train(GanConfig(iterations=20, noise="uniform", g_loss="non-saturating"))
    assert len(m) == 20


def test_numeric_error_carries_partial_metrics():
    calls = {"n": 0}

    def sample_real(rng, m):
        calls["n"] += 1
        if calls["n"] > 3:
            return np.full((m, 1), np.nan)
        return rng.normal(3, 1, (m, 1))

    with pytest.raises(NumericError) as info:
        train(GanConfig(iterations=10), sample_real)
    assert info.value.iteration == 3
    assert len(info.value.metrics) == 3


@pytest.mark.parametrize("bad", [dict(batch_size=0), dict(k=0), dict(lr_d=0), dict(epsilon=0.2),
                                 dict(noise="cauchy"), dict(g_loss="wasserstein")])
def test_config_validation(bad):
    with pytest.raises(ValidationError):
        GanConfig(**bad)


def test_config_file_round_trip(tmp_path):
    import json

    cfg = GanConfig(seed=3, hidden=(8, 8))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert GanConfig.load(path) == cfg


def test_estimator_fits_shifted_data():
    X = np.random.default_rng(0).normal(-2.0, 0.5, size=(2000, 1))
    gan = MinimaxGAN(iterations=3000).fit(X)
    samples = gan.sample(4000, random_state=1)
    assert abs(samples.mean() + 2.0) < 0.5
    assert gan.predict_proba(X[:5]).shape == (5, 2)
    assert gan.get_params()["lr_d"] == 0.05


# -- Jensen-Shannon ----------------------------------------------------------------


def test_js_identical_samples():
    x = np.random.default_rng(0).normal(size=500)
    assert js_estimate(x, x.copy()) < 1e-12


def test_js_disjoint_support():
    assert js_estimate(np.linspace(0, 1, 100), np.linspace(10, 11, 100), bins=20) == pytest.approx(math.log(2))


def test_js_degenerate():
    with pytest.raises(ValidationError):
        js_estimate(np.ones(10), np.ones(10))
    with pytest.raises(ValidationError):
        js_estimate([1.0], [2.0, 3.0])


def test_js_in_range_2d():
    rng = np.random.default_rng(0)
    value = js_estimate(rng.normal(size=(300, 2)), rng.normal(0.5, 1, size=(300, 2)), bins=10)
    assert 0 < value < math.log(2)
