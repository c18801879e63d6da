import math

import numpy as np
import pytest

from holdpp import data, dynamics, score, sde


def _grad_check(net, state, t, eps_n, ell, step=1e-5):
    """Largest relative error between analytic and central-difference gradients."""
    _, grads = score.loss_terms(net, state, t, eps_n, ell)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta = net.flat()
    worst = 0.0
    for k in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[k] += step
        dn[k] -= step
        fd = (score.loss_terms(net.with_flat(up), state, t, eps_n, ell)[0]
              - score.loss_terms(net.with_flat(dn), state, t, eps_n, ell)[0]) / (2 * step)
        err = abs(fd - analytic[k]) / max(abs(fd), abs(analytic[k]), 1e-7)
        worst = max(worst, err)
    return worst


@pytest.mark.parametrize("n,h,hidden", [(2, 2, (8,)), (1, 1, (5, 4)), (3, 2, (6, 6, 5))])
def test_gradient_check(n, h, hidden):
    rng = np.random.default_rng(n * 10 + h)
    net = score.ScoreNet.create(n, h, hidden=hidden, seed=3)
    # non-zero biases so every parameter is exercised
    net = net.with_flat(net.flat() + 0.1 * rng.standard_normal(net.n_params))
    B = 7
    state = rng.standard_normal((B, n, h))
    t = rng.uniform(0.01, 5.0, B)
    eps_n = rng.standard_normal((B, h))
    ell = rng.uniform(0.1, 1.0, B)
    assert _grad_check(net, state, t, eps_n, ell) <= 1e-4


def test_time_features():
    f = score.time_features(np.array([0.0, 2.5]), 5.0)
    assert f.shape == (2, score.TIME_FEATURES) == (2, 16)
    np.testing.assert_array_equal(f[0, :8], 0)
    np.testing.assert_array_equal(f[0, 8:], 1)
    assert f[1, 0] == pytest.approx(1.0)  # sin(pi/2)


def test_zero_weights_give_zero_output():
    net = score.ScoreNet.create(3, 2, hidden=(16, 16))
    zero = net.with_flat(np.zeros(net.n_params))
    out = score.net_forward(zero, np.random.default_rng(0).standard_normal((5, 3, 2)), 1.0)
    np.testing.assert_array_equal(out, 0)


def test_single_linear_layer_selects_last_block():
    n, h = 3, 2
    net = score.ScoreNet.create(n, h, hidden=())
    W = np.zeros((n * h + score.TIME_FEATURES, h))
    W[(n - 1) * h : n * h, :] = np.eye(h)
    net = score.ScoreNet(n, h, net.layer_dims, [W], [np.zeros(h)])
    state = np.random.default_rng(1).standard_normal((4, n, h))
    np.testing.assert_array_equal(score.net_forward(net, state, 0.3), state[:, -1, :])


def test_forward_is_deterministic():
    a = score.ScoreNet.create(2, 2, hidden=(32, 32), seed=5)
    b = score.ScoreNet.create(2, 2, hidden=(32, 32), seed=5)
    x = np.random.default_rng(2).standard_normal((10, 2, 2))
    assert np.array_equal(a(x, 0.7), b(x, 0.7))


def test_dimension_mismatch():
    net = score.ScoreNet.create(2, 2, hidden=(4,))
    with pytest.raises(ValueError):
        net(np.zeros((3, 3, 2)), 1.0)


def test_zero_score_loss_is_h():
    h, batch = 2, 4096
    net = score.ScoreNet.create(3, h, hidden=(8,))
    net = net.with_flat(np.zeros(net.n_params))
    spec = dynamics.critical_params(3)
    x0 = np.random.default_rng(0).standard_normal((batch, h))
    value, _ = score.loss(net, spec, x0, score.TrainConfig(), np.random.default_rng(1))
    assert abs(value - h) <= 3 * math.sqrt(2 * h / batch)


def test_perfect_score_gives_zero_loss():
    spec = dynamics.critical_params(2)
    rng = np.random.default_rng(0)
    t = rng.uniform(0.01, 5, 64)
    state, eps_n, ell = sde.sample_forward(spec, rng.standard_normal((64, 2)), t, rng)
    r = eps_n + ell[:, None] * (-eps_n / ell[:, None])
    assert np.max(np.abs(r)) <= 1e-15


def test_loss_non_negative_and_rejects_empty_batch():
    net = score.ScoreNet.create(2, 1, hidden=(4,))
    spec = dynamics.critical_params(2)
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert score.loss(net, spec, rng.standard_normal((8, 1)), score.TrainConfig(), rng)[0] >= 0
    with pytest.raises(ValueError):
        score.loss(net, spec, np.zeros((0, 1)), score.TrainConfig(), rng)


def test_zero_iterations_returns_same_net():
    net = score.ScoreNet.create(2, 2, hidden=(4,))
    out, trace = score.train(net, dynamics.critical_params(2), np.zeros((10, 2)), score.TrainConfig(iters=0))
    assert trace == [] and np.array_equal(out.flat(), net.flat())


def test_training_is_seed_deterministic():
    ds = data.make_dataset("two_moons", 2000, 0)
    spec = dynamics.critical_params(2)
    cfg = score.TrainConfig(iters=30, batch=32, seed=4)
    net = score.ScoreNet.create(2, 2, hidden=(16,), seed=1)
    a, ta = score.train(net, spec, ds.points, cfg)
    b, tb = score.train(net, spec, ds.points, cfg)
    assert ta == tb and np.array_equal(a.flat(), b.flat())


def test_learning_rate_schedule():
    cfg = score.TrainConfig(iters=101, lr=1e-3, lr_final=1e-5)
    assert cfg.learning_rate(0) == pytest.approx(1e-3)
    assert cfg.learning_rate(100) == pytest.approx(1e-5)
    assert cfg.learning_rate(50) == pytest.approx(0.5 * (1e-3 + 1e-5))


def test_config_validation():
    with pytest.raises(ValueError):
        score.TrainConfig(t_eps=6.0)
    with pytest.raises(ValueError):
        score.TrainConfig(batch=0)


def test_learned_gaussian_score_n1():
    """5k iterations on normalised 1-D Gaussian data recover the analytic score at t = T/2."""
    ds = data.make_dataset("gaussian_1d", 20_000, 0)
    spec = dynamics.default_spec(1)
    cfg = score.TrainConfig(iters=5000, seed=0, log_every=0)
    net = score.ScoreNet.create(1, 1, hidden=(64, 64), seed=0)
    net, trace = score.train(net, spec, ds.points, cfg)
    avg = np.convolve(trace, np.ones(500) / 500, mode="valid")
    assert avg[-1] < avg[0]
    t = cfg.T / 2
    mean, covs = sde.gaussian_marginal(spec, t, [0.0], [1.0], cfg.alpha)
    sd = math.sqrt(covs[0, 0, 0])
    grid = np.linspace(-2 * sd, 2 * sd, 41)[:, None, None]
    exact = sde.gaussian_score_fn(spec, [0.0], [1.0], cfg.alpha)(grid, t)
    learned = net(grid, t)
    assert np.max(np.abs(learned - exact)) <= 0.1
