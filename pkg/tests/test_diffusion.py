import numpy as np
import pytest

from unprompt import denoiser as dn
from unprompt import diffusion as df
from unprompt.datasets import make_mixture, mixture_centers
from unprompt.errors import DimensionMismatch, InvalidRange, TimestepOutOfRange
from unprompt.linalg import finite_diff_gradient
from unprompt.schedule import NoiseSchedule, make_schedule


def test_schedule_closed_form():
    s = make_schedule(T=4, beta_min=0.1, beta_max=0.4)
    np.testing.assert_allclose(s.betas, [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_allclose(s.alpha_bar, np.cumprod([0.9, 0.8, 0.7, 0.6]), rtol=1e-15)
    assert s.abar(0) == 1.0
    assert float(s.abar(2)) == pytest.approx(0.72)
    assert np.all(np.diff(make_schedule().alpha_bar) < 0)


def test_schedule_rejects_bad_ranges():
    with pytest.raises(InvalidRange):
        make_schedule(T=1)
    with pytest.raises(InvalidRange):
        make_schedule(beta_min=0.3, beta_max=0.2)
    with pytest.raises(TimestepOutOfRange):
        make_schedule(T=10).abar(11)


def test_schedule_hash_tracks_alpha():
    assert make_schedule().hash() == make_schedule().hash()
    assert make_schedule(T=100).hash() != make_schedule(T=50).hash()


def test_forward_then_recover_is_identity():
    s = make_schedule()
    rng = np.random.default_rng(0)
    x0, eps = rng.standard_normal((6, 5)), rng.standard_normal((6, 5))
    t = np.array([1, 2, 30, 50, 99, 100])
    xt = df.forward_noise(x0, t, eps, s)
    np.testing.assert_allclose(df.recover_noise(xt, x0, t, s), eps, atol=1e-12)
    ab = s.alpha_bar[t - 1][:, None]
    np.testing.assert_allclose(xt, np.sqrt(ab) * x0 + np.sqrt(1 - ab) * eps, rtol=1e-15)


def test_forward_noise_errors():
    s = make_schedule()
    with pytest.raises(DimensionMismatch):
        df.forward_noise(np.zeros(3), 1, np.zeros(4), s)
    with pytest.raises(TimestepOutOfRange):
        df.forward_noise(np.zeros(3), 0, np.zeros(3), s)
    with pytest.raises(TimestepOutOfRange):
        df.forward_noise(np.zeros(3), 101, np.zeros(3), s)


def test_timestep_grid():
    np.testing.assert_array_equal(df.timestep_grid(4, 4), [4, 3, 2, 1, 0])
    np.testing.assert_array_equal(df.timestep_grid(10, 2), [10, 5, 0])
    np.testing.assert_array_equal(df.timestep_grid(3, 10), [3, 2, 1, 0])


def _tiny(sigma_data=None, seed=0):
    s = make_schedule(T=20)
    arch = dn.Arch.for_data(3, hidden=(8,), embed_dim=4, sigma_data=sigma_data)
    return dn.init_params(arch, seed, s), s


def test_ddim_with_oracle_noise_recovers_x0():
    # a predictor that knows the true noise walks x_T back to x0 exactly
    s = make_schedule(T=20)
    rng = np.random.default_rng(1)
    x0, eps = rng.uniform(-1, 1, (4, 3)), rng.standard_normal((4, 3))
    xT = df.forward_noise(x0, 20, eps, s)
    p, _ = _tiny()
    out = df.ddim_sample(p, xT, s, predict=lambda _p, x, t: eps)
    np.testing.assert_allclose(out, x0, atol=1e-10)


def test_ddim_is_deterministic_and_respects_clip():
    p, s = _tiny()
    xT = np.random.default_rng(2).standard_normal((5, 3))
    a = df.ddim_sample(p, xT, s, clip=(-1, 1))
    b = df.ddim_sample(p, xT, s, clip=(-1, 1))
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) <= 1 + 1e-12)
    with pytest.raises(TimestepOutOfRange):
        df.ddim_sample(p, xT, s, t_start=21)


def test_train_step_uses_one_draw_per_item():
    p, s = _tiny()
    batch = np.random.default_rng(3).standard_normal((7, 3))
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    loss, g = df.train_step(p, batch, s, rng_a)
    t = rng_b.integers(1, s.T + 1, size=7)
    eps = rng_b.standard_normal((7, 3))
    loss2, g2 = dn.loss_and_grad(p, df.forward_noise(batch, t, eps, s), t, eps)
    assert loss == loss2
    np.testing.assert_array_equal(g, g2)


def test_cosine_lr_shape():
    assert df.cosine_lr(0, 1000, 1.0, warmup=100) == pytest.approx(0.01)
    assert df.cosine_lr(99, 1000, 1.0, warmup=100) == pytest.approx(0.5 * (1 + np.cos(np.pi * 0.099)))
    assert df.cosine_lr(500, 1000, 2.0, warmup=10) == pytest.approx(1.0)
    assert df.cosine_lr(1000, 1000, 1.0) == pytest.approx(0.0, abs=1e-15)


def test_pretrain_reduces_loss_on_two_point_data():
    p, s = _tiny()
    data = np.array([[0.5, -0.5, 0.5], [-0.5, 0.5, -0.5]])
    losses = []
    p2 = df.pretrain(p, data, s, 300, 16, 1e-2, np.random.default_rng(0), warmup=10,
                     on_step=lambda k, v: losses.append(v))
    assert np.mean(losses[-50:]) < 0.5 * np.mean(losses[:50])
    assert p2.step == 300 and p.step == 0


def test_two_step_schedule_by_hand():
    s = make_schedule(T=2, beta_min=0.1, beta_max=0.1)
    np.testing.assert_allclose(s.alpha, [0.9, 0.9], rtol=1e-15)
    np.testing.assert_allclose(s.alpha_bar, [0.9, 0.81], rtol=1e-15)


def test_forward_noise_limits():
    x0 = np.array([0.3, -1.2, 2.0])
    eps = np.array([1.0, -0.5, 0.25])
    # a schedule that never adds noise
    clean = NoiseSchedule(2, np.ones(2), np.ones(2))
    np.testing.assert_array_equal(df.forward_noise(x0, 2, eps, clean), x0)
    s = make_schedule()
    for t in (1, 25, 100):
        np.testing.assert_allclose(df.forward_noise(x0, t, np.zeros(3), s), np.sqrt(s.alpha_bar[t - 1]) * x0, rtol=1e-15)


def test_train_step_with_perfect_predictor_stub():
    s = make_schedule(T=20)
    x0 = np.array([[0.5, -0.25]])

    def oracle(params, x_t, t, target):
        # predicts the true noise from x_t alone, knowing the single data point
        pred = df.recover_noise(x_t, np.broadcast_to(x0, x_t.shape), t, s)
        return float(((pred - target) ** 2).sum(1).mean()), np.zeros(params.theta.size)

    p = dn.init_params(dn.Arch.for_data(2, hidden=(4,), embed_dim=2), 0)
    loss, g = df.train_step(p, np.repeat(x0, 16, axis=0), s, np.random.default_rng(0), loss_grad=oracle)
    assert loss == pytest.approx(0.0, abs=1e-20)
    assert not g.any()


def test_zero_output_predictor_loss_is_dimension():
    s = make_schedule(T=20)
    d = 3
    p = dn.init_params(dn.Arch.for_data(d, hidden=(4,), embed_dim=2), 0)
    p = p.with_theta(np.zeros(p.theta.size))
    n = 4000
    loss, _ = df.train_step(p, np.zeros((n, d)), s, np.random.default_rng(1))
    # chi-square with d dof: mean d, variance 2d
    assert abs(loss - d) < 5 * np.sqrt(2 * d / n)


def test_train_step_gradient_on_fifty_parameter_net():
    s = make_schedule(T=20)
    arch = dn.Arch.for_data(2, hidden=(4, 4), embed_dim=2)
    assert arch.n_params == 50
    p = dn.init_params(arch, 5, s)
    batch = np.random.default_rng(2).standard_normal((8, 2))

    def f(th):
        return df.train_step(p.with_theta(th), batch, s, np.random.default_rng(7))[0]

    _, g = df.train_step(p, batch, s, np.random.default_rng(7))
    fd = finite_diff_gradient(f, p.theta, step=1e-6)
    assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


@pytest.mark.parametrize("steps", [None, 10])
def test_ddim_with_zero_noise_stub(steps):
    s = make_schedule()
    xT = np.random.default_rng(3).standard_normal((2, 4))
    zero = lambda params, x, t: np.zeros_like(x)  # noqa: E731
    out = df.ddim_sample(None, xT, s, steps=steps, predict=zero)
    # every update rescales by sqrt(abar_prev / abar_t); the product telescopes
    np.testing.assert_allclose(out, xT / np.sqrt(s.alpha_bar[-1]), rtol=1e-12)


def test_trained_two_mode_model_samples_land_on_modes():
    s = make_schedule(T=100, beta_min=1e-3, beta_max=0.15)
    data = make_mixture(512, n_modes=2, radius=2.0, std=0.1, seed=0)
    p = dn.init_params(dn.Arch.for_data(2, hidden=(64, 64), embed_dim=16, sigma_data=1.0), 0, s)
    p = df.pretrain(p, data.samples, s, 4000, 64, 2e-3, np.random.default_rng(0), warmup=100)
    y = df.ddim_sample(p, np.random.default_rng(1).standard_normal((1000, 2)), s)
    dist = np.linalg.norm(y[:, None, :] - mixture_centers(2, 2.0)[None], axis=2).min(1)
    assert (dist <= 3 * 0.1).mean() >= 0.95
